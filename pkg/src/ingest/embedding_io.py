"""
Embedding tables: CSV (id + float columns) for small tables and packed
little-endian float32 with a JSON sidecar header for large ones.

Usage:
    from src.ingest.embedding_io import load_embeddings

    table = load_embeddings('data/embeddings.bin')   # reads embeddings.bin.json too
    X = table.matrix(record_ids)
"""
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd

from ..core.errors import RecordValidationError, ValidationError

logger = logging.getLogger(__name__)

BINARY_DTYPE = '<f4'
SIDECAR_SUFFIX = '.json'


@dataclass(frozen=True)
class EmbeddingTable:
    """Fixed-dimension vectors keyed by record id."""

    dim: int
    ids: List[str]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        if self.dim < 1:
            raise ValidationError("Embedding dimension must be positive")
        if values.shape != (len(self.ids), self.dim):
            raise ValidationError(f"Embedding matrix shape {values.shape} != ({len(self.ids)}, {self.dim})")
        if len(set(self.ids)) != len(self.ids):
            raise ValidationError("Embedding ids are not unique")
        if not np.all(np.isfinite(values)):
            bad = sorted({self.ids[i] for i in np.argwhere(~np.isfinite(values))[:, 0]})
            raise ValidationError(f"Non-finite embedding values for ids {bad[:10]}")
        values.setflags(write=False)
        object.__setattr__(self, 'ids', list(self.ids))
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, '_row', {record_id: i for i, record_id in enumerate(self.ids)})

    @property
    def by_id(self) -> Dict[str, np.ndarray]:
        return {record_id: self.values[i] for record_id, i in self._row.items()}

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._row

    def matrix(self, ids: Sequence[str]) -> np.ndarray:
        """Rows for `ids` in the given order."""
        missing = [i for i in ids if i not in self._row]
        if missing:
            raise ValidationError(f"No embedding for ids {missing[:10]}")
        return self.values[[self._row[i] for i in ids]]


def _sidecar_path(path: str) -> str:
    return path + SIDECAR_SUFFIX


def load_embeddings(path: str) -> EmbeddingTable:
    """
    Load an embedding table; `.bin` files are read as packed float32 with a sidecar.

    Args:
        path: CSV file or `.bin` file

    Returns:
        EmbeddingTable
    """
    if not os.path.exists(path):
        raise ValidationError(f"Embeddings file not found: {path}")
    if path.endswith('.bin'):
        return _load_binary(path)
    return _load_csv(path)


def _load_csv(path: str) -> EmbeddingTable:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding='utf-8')
    except pd.errors.EmptyDataError:
        raise ValidationError(f"{path}: empty embedding file") from None
    except pd.errors.ParserError as e:
        raise ValidationError(f"{path}: ragged embedding rows ({e})") from None
    if frame.shape[1] < 2:
        raise ValidationError(f"{path}: expected an id column and at least one value column")

    ids = [str(v).strip() for v in frame.iloc[:, 0]]
    rejects = []
    values = np.zeros((len(frame), frame.shape[1] - 1), dtype=np.float64)
    for i, row in enumerate(frame.iloc[:, 1:].itertuples(index=False, name=None)):
        if any(not isinstance(cell, str) or cell.strip() == '' for cell in row):
            rejects.append((i + 2, f"id {ids[i]}: ragged row"))
            continue
        try:
            parsed = np.array([float(cell) for cell in row], dtype=np.float64)
        except ValueError:
            rejects.append((i + 2, f"id {ids[i]}: non-numeric value"))
            continue
        if not np.all(np.isfinite(parsed)):
            rejects.append((i + 2, f"id {ids[i]}: non-finite value"))
            continue
        values[i] = parsed
    if rejects:
        raise RecordValidationError(f"{path}: {len(rejects)} embedding rows rejected", rejects)

    table = EmbeddingTable(dim=values.shape[1], ids=ids, values=values)
    logger.info("✓ Loaded %d embeddings (dim %d) from %s", len(table), table.dim, path)
    return table


def _load_binary(path: str) -> EmbeddingTable:
    sidecar = _sidecar_path(path)
    if not os.path.exists(sidecar):
        raise ValidationError(f"Missing sidecar header {sidecar}")
    try:
        with open(sidecar, 'r', encoding='utf-8') as f:
            header = json.load(f)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{sidecar}: not valid JSON ({e})") from None
    if not isinstance(header, dict):
        raise ValidationError(f"{sidecar}: expected a JSON object")
    missing = [key for key in ('dim', 'ids') if key not in header]
    if missing:
        raise ValidationError(f"{sidecar}: missing key(s) {', '.join(missing)}")
    try:
        dim = int(header['dim'])
    except (TypeError, ValueError):
        raise ValidationError(f"{sidecar}: dim {header['dim']!r} is not an integer") from None
    ids = [str(i) for i in header['ids']]
    if header.get('dtype', BINARY_DTYPE) != BINARY_DTYPE:
        raise ValidationError(f"{sidecar}: unsupported dtype {header.get('dtype')!r}")

    raw = np.fromfile(path, dtype=BINARY_DTYPE)
    if raw.size != len(ids) * dim:
        raise ValidationError(f"{path}: {raw.size} floats do not match {len(ids)} ids x {dim} dims")
    values = raw.reshape(len(ids), dim)
    table = EmbeddingTable(dim=dim, ids=ids, values=values.astype(np.float64))
    logger.info("✓ Loaded %d binary embeddings (dim %d) from %s", len(table), dim, path)
    return table


def save_embeddings(path: str, table: EmbeddingTable):
    """Write a table as CSV, or as packed float32 plus sidecar when `path` ends in `.bin`."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    if path.endswith('.bin'):
        np.ascontiguousarray(table.values, dtype=BINARY_DTYPE).tofile(path)
        with open(_sidecar_path(path), 'w', encoding='utf-8') as f:
            json.dump({'dim': table.dim, 'dtype': BINARY_DTYPE, 'ids': table.ids}, f)
    else:
        columns = [f"e{j:04d}" for j in range(table.dim)]
        frame = pd.DataFrame(table.values, columns=columns)
        frame.insert(0, 'id', table.ids)
        frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    logger.info("✓ Wrote %d embeddings to %s", len(table), path)
