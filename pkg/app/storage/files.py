"""
Line-oriented dataset and embedding files.

Dataset grammar::

    # quadmetric dataset v1
    n <input dim>
    k1 <coarse classes>
    k2 <fine classes>
    parent <coarse of fine 0> ... <coarse of fine k2-1>
    samples <count>
    <id> <coarse> <fine> <x_1> ... <x_n>      (one line per sample)

Embedding grammar::

    # quadmetric embeddings v1
    N <rows>
    k <dim>
    snapshot <encoder state id>               (optional, default 0)
    <id> <coarse> <fine> <e_1> ... <e_k>      (one line per row)

Values are written with ``repr`` so every finite double round-trips exactly.
"""
import itertools
import logging
import math
from pathlib import Path
from typing import Iterator, List, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.core.errors import DataFormatError, DatasetValidationError, EmptyDatasetError
from app.models.dataset import Dataset, LabeledSample, LabelHierarchy
from app.models.embedding import EmbeddingSet

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DATASET_MAGIC = "# quadmetric dataset v1"
EMBEDDINGS_MAGIC = "# quadmetric embeddings v1"


def _fmt(v: float) -> str:
    return repr(float(v))


def _lines(path: PathLike) -> Iterator[Tuple[int, List[str]]]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            for lineno, line in enumerate(fh, start=1):
                tokens = line.split()
                if tokens:
                    yield lineno, tokens
        except UnicodeDecodeError as e:
            # chunked decoding: the failing line is unknown
            raise DataFormatError(f"{path} is not UTF-8 text: {e.reason}") from None


def _int(token: str, lineno: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise DataFormatError(f"expected an integer, got {token!r}", lineno) from None


def _float(token: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DataFormatError(f"expected a number, got {token!r}", lineno) from None
    if not math.isfinite(value):
        raise DataFormatError(f"non-finite value {token!r}", lineno)
    return value


def _header(lines: Iterator[Tuple[int, List[str]]], key: str, last_lineno: int) -> Tuple[int, List[str]]:
    try:
        lineno, tokens = next(lines)
    except StopIteration:
        raise DataFormatError(f"missing '{key}' header", last_lineno + 1) from None
    if tokens[0] != key or len(tokens) < 2:
        raise DataFormatError(f"expected '{key} <value>' header, got {' '.join(tokens)!r}", lineno)
    return lineno, tokens[1:]


def _magic(lines: Iterator[Tuple[int, List[str]]], magic: str, what: str) -> int:
    try:
        lineno, tokens = next(lines)
    except StopIteration:
        raise EmptyDatasetError(f"{what} file is empty") from None
    if " ".join(tokens) != magic:
        raise DataFormatError(f"not a {what} file (expected {magic!r})", lineno)
    return lineno


def save_dataset(dataset: Dataset, path: PathLike) -> None:
    h = dataset.hierarchy
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(DATASET_MAGIC + "\n")
        fh.write(f"n {dataset.input_dim}\n")
        fh.write(f"k1 {h.k1}\n")
        fh.write(f"k2 {h.k2}\n")
        fh.write("parent " + " ".join(str(h.parent[f]) for f in range(h.k2)) + "\n")
        fh.write(f"samples {len(dataset)}\n")
        for s in dataset.samples:
            fh.write(f"{s.id} {s.coarse} {s.fine} " + " ".join(_fmt(v) for v in s.x) + "\n")
    logger.debug("wrote %d samples to %s", len(dataset), path)


def load_dataset(path: PathLike) -> Dataset:
    """
    Read a dataset file.

    Raises:
        EmptyDatasetError: the file or its sample section is empty
        DataFormatError: a line breaks the grammar (message carries the line number)
        DatasetValidationError: records disagree with the declared hierarchy
    """
    lines = _lines(path)
    lineno = _magic(lines, DATASET_MAGIC, "dataset")
    values = {}
    for key in ("n", "k1", "k2"):
        lineno, rest = _header(lines, key, lineno)
        values[key] = _int(rest[0], lineno)
    lineno, rest = _header(lines, "parent", lineno)
    if len(rest) != values["k2"]:
        raise DataFormatError(f"parent map has {len(rest)} entries, k2 is {values['k2']}", lineno)
    parent = {f: _int(tok, lineno) for f, tok in enumerate(rest)}
    lineno, rest = _header(lines, "samples", lineno)
    declared = _int(rest[0], lineno)
    if declared == 0:
        raise EmptyDatasetError("dataset declares no samples", lineno)

    n = values["n"]
    raw = []
    for lineno, tokens in lines:
        if len(tokens) != 3 + n:
            raise DataFormatError(f"expected {3 + n} fields, got {len(tokens)}", lineno)
        raw.append((
            lineno,
            _int(tokens[0], lineno),
            _int(tokens[1], lineno),
            _int(tokens[2], lineno),
            [_float(t, lineno) for t in tokens[3:]],
        ))
    if len(raw) != declared:
        raise DataFormatError(f"header declares {declared} samples, found {len(raw)}", lineno)

    try:
        hierarchy = LabelHierarchy(k1=values["k1"], k2=values["k2"], parent=parent)
    except ValidationError as e:
        raise DatasetValidationError(f"invalid hierarchy header: {e}") from None
    for lineno, sid, coarse, fine, _ in raw:
        if fine not in hierarchy.parent:
            raise DatasetValidationError(f"line {lineno}: fine id {fine} missing from hierarchy")
        if hierarchy.parent[fine] != coarse:
            raise DatasetValidationError(
                f"line {lineno}: fine {fine} belongs to coarse {hierarchy.parent[fine]}, not {coarse}"
            )
    try:
        samples = [LabeledSample(id=sid, x=x, coarse=c, fine=f) for _, sid, c, f, x in raw]
        return Dataset(samples=samples, hierarchy=hierarchy)
    except ValidationError as e:
        raise DatasetValidationError(str(e)) from None


def save_embeddings(s: EmbeddingSet, path: PathLike) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(EMBEDDINGS_MAGIC + "\n")
        fh.write(f"N {len(s)}\n")
        fh.write(f"k {s.dim}\n")
        fh.write(f"snapshot {s.snapshot_id}\n")
        for i in range(len(s)):
            fh.write(
                f"{s.ids[i]} {s.coarse[i]} {s.fine[i]} "
                + " ".join(_fmt(v) for v in s.embeddings[i]) + "\n"
            )


def load_embeddings(path: PathLike) -> EmbeddingSet:
    """Read an embedding file; same error contract as ``load_dataset``."""
    lines = _lines(path)
    lineno = _magic(lines, EMBEDDINGS_MAGIC, "embeddings")
    lineno, rest = _header(lines, "N", lineno)
    rows = _int(rest[0], lineno)
    lineno, rest = _header(lines, "k", lineno)
    k = _int(rest[0], lineno)
    if rows < 1:
        raise EmptyDatasetError("embedding file declares no rows", lineno)
    if k < 1:
        raise DataFormatError(f"embedding dimension must be >= 1, got {k}", lineno)

    snapshot_id = 0
    first = next(lines, None)
    if first is not None and first[1][0] == "snapshot":
        if len(first[1]) != 2:
            raise DataFormatError("expected 'snapshot <id>' header", first[0])
        snapshot_id = _int(first[1][1], first[0])
        lineno = first[0]
    elif first is not None:
        lines = itertools.chain([first], lines)

    ids, coarse, fine, values = [], [], [], []
    for lineno, tokens in lines:
        if len(tokens) != 3 + k:
            raise DataFormatError(f"expected {3 + k} fields (k={k}), got {len(tokens)}", lineno)
        ids.append(_int(tokens[0], lineno))
        coarse.append(_int(tokens[1], lineno))
        fine.append(_int(tokens[2], lineno))
        values.append([_float(t, lineno) for t in tokens[3:]])
    if len(values) != rows:
        raise DataFormatError(f"header declares {rows} rows, found {len(values)}", lineno)
    return EmbeddingSet(
        embeddings=np.array(values, dtype=np.float64).reshape(rows, k),
        coarse=coarse,
        fine=fine,
        ids=ids,
        snapshot_id=snapshot_id,
    )
