"""Ingest module for LA-VA: cohorts, embeddings and prediction files."""

from .record_loader import RecordLoadReport, read_records, load_records, write_records, FIXED_COLUMNS
from .embedding_io import EmbeddingTable, load_embeddings, save_embeddings
from .prediction_io import (
    load_external_predictions, write_predictions, prediction_to_json, merge_prediction_sets
)

__all__ = [
    'RecordLoadReport', 'read_records', 'load_records', 'write_records', 'FIXED_COLUMNS',
    'EmbeddingTable', 'load_embeddings', 'save_embeddings',
    'load_external_predictions', 'write_predictions', 'prediction_to_json', 'merge_prediction_sets',
]
