"""
Run manifests.

Each CLI command leaves `manifest-<command>.json` in its output directory with
the argv, the fully resolved config, the seed, sha256 digests of every input
file and the versions of the interpreter and numeric stack. Together with the
LLM response cache that is enough to rerun the command bit-identically.
"""
import hashlib
import json
import logging
import os
import platform
import sys
from datetime import datetime, timezone
from importlib import metadata
from typing import Dict, Iterable, List, Optional, Sequence

from .. import __version__

logger = logging.getLogger(__name__)

TRACKED_PACKAGES = ('numpy', 'pandas', 'scipy', 'httpx', 'PyYAML')
CHUNK_SIZE = 1 << 20


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(CHUNK_SIZE), b''):
            digest.update(chunk)
    return digest.hexdigest()


def package_versions(packages: Iterable[str] = TRACKED_PACKAGES) -> Dict[str, Optional[str]]:
    versions = {'python': platform.python_version()}
    for name in packages:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def input_digests(paths: Sequence[str]) -> Dict[str, str]:
    """sha256 per existing input file; binary embeddings also hash their sidecar."""
    digests = {}
    for path in paths:
        if not path or not os.path.isfile(path):
            continue
        digests[os.path.abspath(path)] = file_sha256(path)
        sidecar = path + '.json' if path.endswith('.bin') else None
        if sidecar and os.path.isfile(sidecar):
            digests[os.path.abspath(sidecar)] = file_sha256(sidecar)
    return digests


def build_manifest(command: str, argv: Sequence[str], config: Dict, seed: int,
                   inputs: Sequence[str], outputs: Sequence[str]) -> Dict:
    return {
        'command': command,
        'argv': list(argv),
        'seed': seed,
        'config': config,
        'inputs': input_digests(inputs),
        'outputs': [os.path.abspath(p) for p in outputs],
        'versions': {'lava': __version__, **package_versions()},
        'created_at': datetime.now(timezone.utc).isoformat(),
    }


def write_manifest(out_dir: str, manifest: Dict) -> str:
    """Write the manifest next to the command's outputs and return its path."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"manifest-{manifest['command']}.json")
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(manifest, f, indent=2, default=str)
    logger.debug("Wrote run manifest %s", path)
    return path


def argv_or_sys(argv: Optional[List[str]]) -> List[str]:
    return list(sys.argv[1:] if argv is None else argv)
