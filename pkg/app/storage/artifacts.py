"""
Run outputs: checkpoint, metrics CSV, eval rows and quadruplet dumps.

Checkpoint (JSON object, fields in this order):
    format, version, layout {input_dim, hidden_sizes, embedding_dim, k1, k2},
    config (TrainConfig echo), theta (flat parameter list, layout order)

Metrics CSV columns: epoch, loss, probe_loss, singular, R@1, NMI
Eval CSV columns: method, R@<K> for each K, NMI
Quadruplet dump: ``r pp pm n d_rpp d_rpm d_rn d_npp d_npm`` per line
(sample ids, then distances); comment lines start with '#'.
"""
import csv
import logging
import shutil
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from app.core.errors import DataFormatError
from app.ml.encoder import EncoderParams, ParamLayout
from app.models.embedding import EmbeddingSet, QuadrupletIdx
from app.models.params import TrainConfig
from app.models.report import EpochMetrics, EvalReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CHECKPOINT_FORMAT = "quadmetric-checkpoint"
CHECKPOINT_VERSION = 1
DUMP_COLUMNS = ("r", "pp", "pm", "n", "d_rpp", "d_rpm", "d_rn", "d_npp", "d_npm")


class LayoutRecord(BaseModel):
    input_dim: int = Field(..., ge=1)
    hidden_sizes: List[int]
    embedding_dim: int = Field(..., ge=1)
    k1: int = Field(..., ge=2)
    k2: int = Field(..., ge=2)


class Checkpoint(BaseModel):
    format: str = CHECKPOINT_FORMAT
    version: int = CHECKPOINT_VERSION
    layout: LayoutRecord
    config: TrainConfig
    theta: List[float]

    @classmethod
    def of(cls, params: EncoderParams, cfg: TrainConfig) -> "Checkpoint":
        return cls(
            layout=LayoutRecord(**params.layout.describe()),
            config=cfg,
            theta=params.theta.tolist(),
        )

    def params(self) -> EncoderParams:
        lay = self.layout
        layout = ParamLayout(lay.input_dim, lay.hidden_sizes, lay.embedding_dim, lay.k1, lay.k2)
        return EncoderParams(layout, np.array(self.theta, dtype=np.float64))


def save_checkpoint(params: EncoderParams, cfg: TrainConfig, path: PathLike) -> None:
    Path(path).write_text(Checkpoint.of(params, cfg).json(indent=1) + "\n", encoding="utf-8")


def load_checkpoint(path: PathLike) -> Checkpoint:
    try:
        ckpt = Checkpoint.parse_file(path)
    except ValidationError as e:
        raise DataFormatError(f"invalid checkpoint {path}: {e}") from None
    except ValueError as e:
        # undecodable bytes or broken JSON
        raise DataFormatError(f"unreadable checkpoint {path}: {e}") from None
    if ckpt.format != CHECKPOINT_FORMAT or ckpt.version != CHECKPOINT_VERSION:
        raise DataFormatError(f"unsupported checkpoint {ckpt.format} v{ckpt.version}")
    return ckpt


def _cell(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


def write_metrics_csv(history: Sequence[EpochMetrics], path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "probe_loss", "singular", "R@1", "NMI"])
        for m in history:
            w.writerow([m.epoch, _cell(m.loss), _cell(m.probe_loss), m.singular,
                        _cell(m.recall_at_1), _cell(m.nmi)])


def eval_header(ks: Sequence[int]) -> List[str]:
    return ["method"] + [f"R@{k}" for k in ks] + ["NMI"]


def eval_row(method: str, report: EvalReport, ks: Sequence[int]) -> List[str]:
    return [method] + [f"{report.recall_at[k]:.6f}" for k in ks] + [f"{report.nmi:.6f}"]


def append_eval_rows(rows: Iterable[Sequence[str]], ks: Sequence[int], path: PathLike) -> None:
    """Append rows to an eval CSV, writing the header when the file is new."""
    path = Path(path)
    fresh = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fresh:
            w.writerow(eval_header(ks))
        for row in rows:
            w.writerow(row)


def quadruplet_record(q: QuadrupletIdx, s: EmbeddingSet, distances: np.ndarray) -> str:
    d = distances
    return " ".join(
        [str(s.ids[i]) for i in q.as_tuple()]
        + [repr(float(v)) for v in (
            d[q.r, q.pp], d[q.r, q.pm], d[q.r, q.n], d[q.n, q.pp], d[q.n, q.pm]
        )]
    )


def write_quadruplet_dump(lines: Iterable[str], strategy: str, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# quadmetric quadruplets v1 strategy={strategy}\n")
        fh.write("# " + " ".join(DUMP_COLUMNS) + "\n")
        for line in lines:
            fh.write(line + "\n")


def read_quadruplet_dump(path: PathLike) -> List[List[str]]:
    """Data records of a dump (comment lines skipped)."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        try:
            for line in fh:
                if line.startswith("#") or not line.strip():
                    continue
                records.append(line.split())
        except UnicodeDecodeError as e:
            raise DataFormatError(f"{path} is not UTF-8 text: {e.reason}") from None
    return records


class RunDirectory:
    """One directory per run: config echo, metrics, checkpoint, eval rows."""

    def __init__(self, root: PathLike):
        self.root = Path(root)

    def ensure(self) -> "RunDirectory":
        self.root.mkdir(parents=True, exist_ok=True)
        return self

    @property
    def config_path(self) -> Path:
        return self.root / "config.json"

    @property
    def metrics_path(self) -> Path:
        return self.root / "metrics.csv"

    @property
    def checkpoint_path(self) -> Path:
        return self.root / "checkpoint.json"

    @property
    def eval_path(self) -> Path:
        return self.root / "eval.csv"

    @property
    def dataset_path(self) -> Path:
        return self.root / "dataset.txt"

    @property
    def dump_path(self) -> Path:
        return self.root / "quadruplets.txt"

    def echo_config(self, resolved_json: str, source: Optional[PathLike] = None) -> None:
        """Write the resolved config, and a verbatim copy of the source file when there is one."""
        self.config_path.write_text(resolved_json + "\n", encoding="utf-8")
        if source is not None:
            shutil.copyfile(source, self.root / "config.source.json")
