"""
Small shared-weight encoder: ReLU MLP -> embedding head, with coarse and
fine classification heads on top of the embedding.

All parameters live in one flat float64 vector; named tensors are views
into it. The same store serves all four quadruplet streams.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import MalformedInputError
from app.ml.losses import HeadLogits, LossGradient, combined_loss_grad, hinge_arguments, member_distances
from app.models.params import HyperParams, Objective

logger = logging.getLogger(__name__)

REL_ERROR_FLOOR = 1e-6


@dataclass(frozen=True)
class TensorSpec:
    name: str
    shape: Tuple[int, ...]
    offset: int

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


class ParamLayout:
    """Names, shapes and offsets of every tensor in the flat store."""

    def __init__(self, input_dim: int, hidden_sizes: Sequence[int], embedding_dim: int, k1: int, k2: int):
        if min([input_dim, embedding_dim, k1, k2, *hidden_sizes]) < 1:
            raise MalformedInputError("every layer width must be >= 1")
        self.input_dim = input_dim
        self.hidden_sizes = list(hidden_sizes)
        self.embedding_dim = embedding_dim
        self.k1 = k1
        self.k2 = k2

        shapes: List[Tuple[str, Tuple[int, ...]]] = []
        fan_in = input_dim
        for i, width in enumerate(self.hidden_sizes):
            shapes += [(f"hidden{i}.weight", (width, fan_in)), (f"hidden{i}.bias", (width,))]
            fan_in = width
        shapes += [
            ("embed.weight", (embedding_dim, fan_in)), ("embed.bias", (embedding_dim,)),
            ("coarse.weight", (k1, embedding_dim)), ("coarse.bias", (k1,)),
            ("fine.weight", (k2, embedding_dim)), ("fine.bias", (k2,)),
        ]
        self.tensors: Dict[str, TensorSpec] = {}
        offset = 0
        for name, shape in shapes:
            spec = TensorSpec(name, shape, offset)
            self.tensors[name] = spec
            offset += spec.size
        self.size = offset

    def describe(self) -> Dict:
        return {
            "input_dim": self.input_dim,
            "hidden_sizes": self.hidden_sizes,
            "embedding_dim": self.embedding_dim,
            "k1": self.k1,
            "k2": self.k2,
        }

    def view(self, theta: np.ndarray, name: str) -> np.ndarray:
        spec = self.tensors[name]
        return theta[spec.offset:spec.offset + spec.size].reshape(spec.shape)

    def fan_in(self, name: str) -> int:
        layer = name.split(".")[0]
        return self.tensors[f"{layer}.weight"].shape[1]

    def __eq__(self, other) -> bool:
        return isinstance(other, ParamLayout) and self.describe() == other.describe()


class EncoderParams:
    """Encoder weights theta: one read-only flat vector plus its layout."""

    def __init__(self, layout: ParamLayout, theta: np.ndarray):
        theta = np.array(theta, dtype=np.float64)
        if theta.shape != (layout.size,):
            raise MalformedInputError(f"expected {layout.size} parameters, got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise MalformedInputError("parameters must be finite")
        theta.setflags(write=False)
        self.layout = layout
        self.theta = theta

    def __getitem__(self, name: str) -> np.ndarray:
        return self.layout.view(self.theta, name)

    def __len__(self) -> int:
        return self.layout.size

    def replace(self, theta: np.ndarray) -> "EncoderParams":
        return EncoderParams(self.layout, theta)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, EncoderParams)
            and self.layout == other.layout
            and np.array_equal(self.theta, other.theta)
        )


@dataclass(frozen=True)
class ForwardOutput:
    embedding: np.ndarray
    logits: HeadLogits


@dataclass
class ForwardCache:
    """Intermediate activations of a batched forward pass."""
    inputs: np.ndarray
    pre: List[np.ndarray]
    post: List[np.ndarray]
    raw_embedding: np.ndarray
    embedding: np.ndarray
    coarse_logits: np.ndarray
    fine_logits: np.ndarray


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    worst_index: int
    worst_name: str
    analytic: float
    numeric: float
    coords_checked: int


def init_params(
    input_dim: int,
    hidden_sizes: Sequence[int],
    embedding_dim: int,
    k1: int,
    k2: int,
    seed: int,
) -> EncoderParams:
    """Every weight and bias uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] of its layer."""
    layout = ParamLayout(input_dim, hidden_sizes, embedding_dim, k1, k2)
    rng = np.random.default_rng(seed)
    theta = np.empty(layout.size)
    for name, spec in layout.tensors.items():
        bound = 1.0 / np.sqrt(layout.fan_in(name))
        theta[spec.offset:spec.offset + spec.size] = rng.uniform(-bound, bound, spec.size)
    return EncoderParams(layout, theta)


def forward_batch(p: EncoderParams, x: np.ndarray, normalize: bool = False) -> ForwardCache:
    """Forward pass over the rows of ``x`` (B x n)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != p.layout.input_dim:
        raise MalformedInputError(
            f"inputs must be B x {p.layout.input_dim}, got shape {x.shape}"
        )
    pre, post = [], []
    h = x
    for i in range(len(p.layout.hidden_sizes)):
        z = h @ p[f"hidden{i}.weight"].T + p[f"hidden{i}.bias"]
        h = np.maximum(z, 0.0)
        pre.append(z)
        post.append(h)
    raw = h @ p["embed.weight"].T + p["embed.bias"]
    emb = raw
    if normalize:
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        emb = raw / np.where(norms > 0.0, norms, 1.0)
    return ForwardCache(
        inputs=x,
        pre=pre,
        post=post,
        raw_embedding=raw,
        embedding=emb,
        coarse_logits=emb @ p["coarse.weight"].T + p["coarse.bias"],
        fine_logits=emb @ p["fine.weight"].T + p["fine.bias"],
    )


def forward(p: EncoderParams, x, normalize: bool = False) -> ForwardOutput:
    """Embedding and head scores of a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise MalformedInputError(f"expected one input vector, got shape {x.shape}")
    cache = forward_batch(p, x[None, :], normalize)
    return ForwardOutput(
        embedding=cache.embedding[0],
        logits=HeadLogits(coarse_scores=cache.coarse_logits[0], fine_scores=cache.fine_logits[0]),
    )


def embed(p: EncoderParams, x: np.ndarray, normalize: bool = False) -> np.ndarray:
    return forward_batch(p, x, normalize).embedding


@dataclass(frozen=True)
class QuadrupletInputs:
    """Raw inputs and labels of a batch of quadruplets, members ordered R, P+, P-, N."""
    x: np.ndarray
    coarse: np.ndarray
    fine: np.ndarray

    def __post_init__(self):
        if self.x.ndim != 3 or self.x.shape[1] != 4:
            raise MalformedInputError(f"inputs must be B x 4 x n, got {self.x.shape}")
        if self.coarse.shape != self.x.shape[:2] or self.fine.shape != self.x.shape[:2]:
            raise MalformedInputError("labels must be B x 4")

    @classmethod
    def gather(cls, x: np.ndarray, coarse: np.ndarray, fine: np.ndarray, idx: np.ndarray) -> "QuadrupletInputs":
        """Pick rows of a dataset by a B x 4 index matrix."""
        return cls(x=x[idx], coarse=coarse[idx], fine=fine[idx])


@dataclass(frozen=True)
class BackwardResult:
    loss: float
    grad: np.ndarray
    singular: int


def _loss_on_cache(
    cache: ForwardCache,
    batch: QuadrupletInputs,
    hyper: HyperParams,
    objective: Objective,
    classify_all_streams: bool,
) -> LossGradient:
    b = batch.x.shape[0]
    streams = 4 if classify_all_streams else 1
    k1 = cache.coarse_logits.shape[1]
    k2 = cache.fine_logits.shape[1]
    return combined_loss_grad(
        cache.embedding.reshape(b, 4, -1),
        cache.coarse_logits.reshape(b, 4, k1)[:, :streams],
        cache.fine_logits.reshape(b, 4, k2)[:, :streams],
        batch.coarse[:, :streams],
        batch.fine[:, :streams],
        hyper,
        objective,
    )


def batch_loss(
    p: EncoderParams,
    batch: QuadrupletInputs,
    hyper: HyperParams,
    objective: Objective = Objective.COMBINED,
    normalize: bool = False,
    classify_all_streams: bool = False,
) -> float:
    cache = forward_batch(p, batch.x.reshape(-1, batch.x.shape[2]), normalize)
    return _loss_on_cache(cache, batch, hyper, objective, classify_all_streams).loss


def backward(
    p: EncoderParams,
    batch: QuadrupletInputs,
    hyper: HyperParams,
    objective: Objective = Objective.COMBINED,
    normalize: bool = False,
    classify_all_streams: bool = False,
) -> BackwardResult:
    """
    Gradient of the batch loss with respect to every scalar in ``p``.

    All 4B member inputs go through one forward pass with the shared
    weights; gradients from the four streams accumulate into the single
    parameter vector.
    """
    b = batch.x.shape[0]
    cache = forward_batch(p, batch.x.reshape(4 * b, -1), normalize)
    lg = _loss_on_cache(cache, batch, hyper, objective, classify_all_streams)
    layout = p.layout
    grad = np.zeros(layout.size)

    def slot(name: str) -> np.ndarray:
        return layout.view(grad, name)

    streams = lg.coarse_logits.shape[1]
    g_coarse = np.zeros((b, 4, layout.k1))
    g_coarse[:, :streams] = lg.coarse_logits
    g_fine = np.zeros((b, 4, layout.k2))
    g_fine[:, :streams] = lg.fine_logits
    g_coarse = g_coarse.reshape(4 * b, layout.k1)
    g_fine = g_fine.reshape(4 * b, layout.k2)

    emb = cache.embedding
    slot("coarse.weight")[...] = g_coarse.T @ emb
    slot("coarse.bias")[...] = g_coarse.sum(axis=0)
    slot("fine.weight")[...] = g_fine.T @ emb
    slot("fine.bias")[...] = g_fine.sum(axis=0)

    g_emb = lg.embeddings.reshape(4 * b, -1) + g_coarse @ p["coarse.weight"] + g_fine @ p["fine.weight"]
    if normalize:
        norms = np.linalg.norm(cache.raw_embedding, axis=1, keepdims=True)
        safe = np.where(norms > 0.0, norms, 1.0)
        radial = np.sum(g_emb * emb, axis=1, keepdims=True)
        g_emb = np.where(norms > 0.0, (g_emb - emb * radial) / safe, 0.0)

    h_last = cache.post[-1] if cache.post else cache.inputs
    slot("embed.weight")[...] = g_emb.T @ h_last
    slot("embed.bias")[...] = g_emb.sum(axis=0)
    g_h = g_emb @ p["embed.weight"]

    for i in reversed(range(len(layout.hidden_sizes))):
        g_z = g_h * (cache.pre[i] > 0.0)
        h_in = cache.post[i - 1] if i > 0 else cache.inputs
        slot(f"hidden{i}.weight")[...] = g_z.T @ h_in
        slot(f"hidden{i}.bias")[...] = g_z.sum(axis=0)
        g_h = g_z @ p[f"hidden{i}.weight"]

    return BackwardResult(loss=lg.loss, grad=grad, singular=lg.singular)


def kink_margin(
    p: EncoderParams,
    batch: QuadrupletInputs,
    hyper: HyperParams,
    objective: Objective = Objective.COMBINED,
    normalize: bool = False,
) -> float:
    """Smallest distance of any ReLU pre-activation or hinge argument from its kink."""
    b = batch.x.shape[0]
    cache = forward_batch(p, batch.x.reshape(4 * b, -1), normalize)
    d = member_distances(cache.embedding.reshape(b, 4, -1))
    margins = [np.abs(hinge_arguments(d, hyper, objective)).min()]
    margins += [np.abs(z).min() for z in cache.pre]
    margins.append(d.min())
    return float(min(margins))


def sgd_momentum_step(
    theta: np.ndarray,
    grad: np.ndarray,
    velocity: np.ndarray,
    lr: float,
    momentum: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """velocity' = momentum * velocity + grad; theta' = theta - lr * velocity'."""
    if not theta.shape == grad.shape == velocity.shape:
        raise MalformedInputError(
            f"shape mismatch: theta {theta.shape}, grad {grad.shape}, velocity {velocity.shape}"
        )
    new_velocity = momentum * velocity + grad
    return theta - lr * new_velocity, new_velocity


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), REL_ERROR_FLOOR)
    return np.abs(analytic - numeric) / scale


def finite_difference_check(
    loss_fn: Callable[[np.ndarray], float],
    theta: np.ndarray,
    analytic: np.ndarray,
    step: float,
    coords: Optional[np.ndarray] = None,
) -> Tuple[float, int, float, float]:
    """
    Compare ``analytic`` against central differences of ``loss_fn``.

    Returns:
        (max relative error, worst coordinate, analytic value, numeric value)
    """
    if step <= 0:
        raise ValueError(f"step must be > 0, got {step}")
    theta = np.array(theta, dtype=np.float64)
    coords = np.arange(theta.size) if coords is None else np.asarray(coords)
    numeric = np.empty(coords.size)
    for j, i in enumerate(coords):
        saved = theta[i]
        theta[i] = saved + step
        up = loss_fn(theta)
        theta[i] = saved - step
        down = loss_fn(theta)
        theta[i] = saved
        numeric[j] = (up - down) / (2.0 * step)
    picked = np.asarray(analytic)[coords]
    errors = relative_error(picked, numeric)
    worst = int(np.argmax(errors))
    return float(errors[worst]), int(coords[worst]), float(picked[worst]), float(numeric[worst])


def grad_check(
    p: EncoderParams,
    batch: QuadrupletInputs,
    hyper: HyperParams,
    step: float = 1e-5,
    objective: Objective = Objective.COMBINED,
    normalize: bool = False,
    classify_all_streams: bool = False,
    max_coords: Optional[int] = None,
    seed: int = 0,
    corrupt: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> GradCheckResult:
    """
    Worst relative error between ``backward`` and central finite differences.

    Every coordinate is checked unless ``max_coords`` is given, in which case
    a seeded random subset of that size (at least 200) is used. ``corrupt``
    lets a caller tamper with the analytic gradient to prove the check bites.
    """
    analytic = backward(p, batch, hyper, objective, normalize, classify_all_streams).grad
    if corrupt is not None:
        analytic = corrupt(analytic.copy())
    coords = None
    if max_coords is not None and max(200, max_coords) < p.layout.size:
        rng = np.random.default_rng(seed)
        coords = np.sort(rng.choice(p.layout.size, size=max(200, max_coords), replace=False))

    def loss_fn(theta: np.ndarray) -> float:
        return batch_loss(p.replace(theta), batch, hyper, objective, normalize, classify_all_streams)

    err, worst, a, n = finite_difference_check(loss_fn, p.theta, analytic, step, coords)
    checked = p.layout.size if coords is None else coords.size
    name = next(
        spec.name for spec in p.layout.tensors.values()
        if spec.offset <= worst < spec.offset + spec.size
    )
    logger.debug("gradient check: max rel error %.3e at %s[%d]", err, name, worst)
    return GradCheckResult(err, worst, name, a, n, checked)
