from .files import save_dataset, load_dataset, save_embeddings, load_embeddings
from .artifacts import (
    Checkpoint,
    RunDirectory,
    save_checkpoint,
    load_checkpoint,
    write_metrics_csv,
    append_eval_rows,
    eval_row,
    quadruplet_record,
    write_quadruplet_dump,
    read_quadruplet_dump,
)

__all__ = [
    'save_dataset',
    'load_dataset',
    'save_embeddings',
    'load_embeddings',
    'Checkpoint',
    'RunDirectory',
    'save_checkpoint',
    'load_checkpoint',
    'write_metrics_csv',
    'append_eval_rows',
    'eval_row',
    'quadruplet_record',
    'write_quadruplet_dump',
    'read_quadruplet_dump',
]
