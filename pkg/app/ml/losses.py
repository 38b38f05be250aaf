"""
Loss functions for hierarchical-label embedding learning.

Scalar functions (``contrastive_loss`` ... ``combined_loss``) evaluate one
quadruplet or one batch exactly as written; ``combined_loss_grad`` is the
vectorised version used for training and returns analytic gradients with
respect to every embedding and every logit.
"""
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from app.core.errors import ConfigurationError, MalformedInputError
from app.models.params import HyperParams, Objective

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadrupletDistances:
    """D(R,P+), D(R,P-) and D(R,N) of one quadruplet."""
    d_rpp: float
    d_rpm: float
    d_rn: float

    def __post_init__(self):
        values = (self.d_rpp, self.d_rpm, self.d_rn)
        if not all(np.isfinite(values)) or min(values) < 0:
            raise MalformedInputError(f"quadruplet distances must be finite and >= 0, got {values}")

    def as_array(self) -> np.ndarray:
        return np.array([self.d_rpp, self.d_rpm, self.d_rn], dtype=np.float64)


@dataclass(frozen=True)
class BatchDistanceStats:
    """Population mean and variance of each distance over a batch."""
    mu_pp: float
    mu_pm: float
    mu_n: float
    var_pp: float
    var_pm: float
    var_n: float

    @classmethod
    def of(cls, batch: Sequence[QuadrupletDistances]) -> "BatchDistanceStats":
        if len(batch) == 0:
            raise MalformedInputError("distance statistics need a non-empty batch")
        d = np.array([q.as_array() for q in batch])
        mu = d.mean(axis=0)
        var = d.var(axis=0)
        return cls(*(float(v) for v in mu), *(float(v) for v in var))


@dataclass(frozen=True)
class PairExample:
    """One pair for the contrastive loss; same_class is the indicator y."""
    d: float
    same_class: int

    def __post_init__(self):
        if self.d < 0 or self.same_class not in (0, 1):
            raise MalformedInputError(f"invalid pair: d={self.d}, same_class={self.same_class}")


@dataclass(frozen=True)
class HeadLogits:
    """Scores of the coarse head (length k1) and the fine head (length k2)."""
    coarse_scores: np.ndarray
    fine_scores: np.ndarray


@dataclass(frozen=True)
class LossTerm:
    """Everything the combined loss needs about one quadruplet."""
    distances: QuadrupletDistances
    logits: HeadLogits
    coarse: int
    fine: int


@dataclass(frozen=True)
class LossGradient:
    """Value of the batch loss and its gradients."""
    loss: float
    embeddings: np.ndarray
    coarse_logits: np.ndarray
    fine_logits: np.ndarray
    singular: int


def _hinge(x: float) -> float:
    return x if x > 0.0 else 0.0


def _cross_entropy(scores: np.ndarray, label: int) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    if not 0 <= label < scores.shape[0]:
        raise MalformedInputError(f"label {label} outside [0, {scores.shape[0]})")
    return float(logsumexp(scores) - scores[label])


def _check_margins(hyper: HyperParams) -> None:
    if not hyper.m1 > hyper.m2 > 0:
        raise ConfigurationError(f"joint loss needs m1 > m2 > 0, got m1={hyper.m1}, m2={hyper.m2}")


def contrastive_loss(pair: PairExample, alpha: float) -> float:
    """Pairwise loss: y*d^2 + (1-y)*[alpha - d]_+^2."""
    y = pair.same_class
    return y * pair.d ** 2 + (1 - y) * _hinge(alpha - pair.d) ** 2


def triplet_loss(d_rp: float, d_rn: float, m_trip: float) -> float:
    """[d_rp^2 - d_rn^2 + m_trip]_+"""
    if d_rp < 0 or d_rn < 0:
        raise MalformedInputError("distances must be >= 0")
    return _hinge(d_rp ** 2 - d_rn ** 2 + m_trip)


def classification_loss(
    logits: HeadLogits,
    coarse: int,
    fine: int,
    lambda_c1: float,
    lambda_c2: float,
) -> float:
    """
    Weighted softmax cross-entropy of the two heads with hard labels.

    lambda_c1 weights the coarse head and lambda_c2 the fine head.
    """
    return (
        lambda_c1 * _cross_entropy(logits.coarse_scores, coarse)
        + lambda_c2 * _cross_entropy(logits.fine_scores, fine)
    )


def joint_loss(
    q: QuadrupletDistances,
    logits: HeadLogits,
    coarse: int,
    fine: int,
    hyper: HyperParams,
) -> float:
    """Ratio hinges on the ordering D(R,P+) < D(R,P-) < D(R,N) plus the reference's classification loss."""
    _check_margins(hyper)
    first = _hinge(1.0 - q.d_rpm / (q.d_rpp + (hyper.m1 - hyper.m2)))
    second = _hinge(1.0 - q.d_rn / (q.d_rpm + hyper.m2))
    return first + second + classification_loss(
        logits, coarse, fine, hyper.lambda_c1, hyper.lambda_c2
    )


def global_loss(batch: Sequence[QuadrupletDistances], hyper: HyperParams) -> float:
    """Variances of the three distances plus hinges on their means."""
    st = BatchDistanceStats.of(batch)
    return (
        st.var_pp + st.var_pm + st.var_n
        + hyper.lambda_g1 * _hinge(st.mu_pp - st.mu_pm + hyper.t1 - hyper.t2)
        + hyper.lambda_g2 * _hinge(st.mu_pm - st.mu_n + hyper.t2)
    )


def combined_loss(batch: Sequence[LossTerm], hyper: HyperParams) -> float:
    """Sum of joint losses plus eta times the global loss of the batch."""
    if len(batch) == 0:
        raise MalformedInputError("combined loss needs a non-empty batch")
    joint = sum(joint_loss(t.distances, t.logits, t.coarse, t.fine, hyper) for t in batch)
    return joint + hyper.eta * global_loss([t.distances for t in batch], hyper)


def member_distances(embeddings: np.ndarray) -> np.ndarray:
    """B x 3 matrix of D(R,P+), D(R,P-), D(R,N) from a B x 4 x k stack."""
    diff = embeddings[:, :1, :] - embeddings[:, 1:, :]
    return np.linalg.norm(diff, axis=2)


def hinge_arguments(d: np.ndarray, hyper: HyperParams, objective: Objective) -> np.ndarray:
    """Arguments of every hinge in the batch loss; a kink sits wherever one is zero."""
    d_pp, d_pm, d_n = d[:, 0], d[:, 1], d[:, 2]
    if objective == Objective.COMBINED:
        per_quad = [
            1.0 - d_pm / (d_pp + (hyper.m1 - hyper.m2)),
            1.0 - d_n / (d_pm + hyper.m2),
        ]
    else:
        per_quad = [d_pp ** 2 - d_n ** 2 + hyper.m_trip]
    mu = d.mean(axis=0)
    batch_level = np.array([
        mu[0] - mu[1] + hyper.t1 - hyper.t2,
        mu[1] - mu[2] + hyper.t2,
    ])
    return np.concatenate(per_quad + [batch_level])


def combined_loss_grad(
    embeddings: np.ndarray,
    coarse_logits: np.ndarray,
    fine_logits: np.ndarray,
    coarse_labels: np.ndarray,
    fine_labels: np.ndarray,
    hyper: HyperParams,
    objective: Objective = Objective.COMBINED,
) -> LossGradient:
    """
    Batch loss and its analytic gradients.

    Args:
        embeddings: B x 4 x k stack, members ordered R, P+, P-, N
        coarse_logits: B x S x k1 coarse-head scores for the S classified streams
        fine_logits: B x S x k2 fine-head scores for the same streams
        coarse_labels: B x S coarse ids
        fine_labels: B x S fine ids
        hyper: Margins and weights
        objective: COMBINED (joint + global) or TRIPLET_GLOBAL (triplet + global)

    Returns:
        LossGradient: loss value, gradients shaped like the inputs, and the
        number of distance terms whose gradient was dropped because two
        members coincide. Hinges use the zero subgradient at their kink.
    """
    _check_margins(hyper)
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 3 or e.shape[1] != 4 or e.shape[0] == 0:
        raise MalformedInputError(f"embeddings must be B x 4 x k with B >= 1, got {e.shape}")
    b = e.shape[0]

    diff = e[:, :1, :] - e[:, 1:, :]
    d = np.linalg.norm(diff, axis=2)
    d_pp, d_pm, d_n = d[:, 0], d[:, 1], d[:, 2]
    gd = np.zeros_like(d)
    loss = 0.0

    if objective == Objective.COMBINED:
        denom1 = d_pp + (hyper.m1 - hyper.m2)
        h1 = 1.0 - d_pm / denom1
        on1 = h1 > 0.0
        denom2 = d_pm + hyper.m2
        h2 = 1.0 - d_n / denom2
        on2 = h2 > 0.0
        loss += float(h1[on1].sum() + h2[on2].sum())
        gd[:, 0] += np.where(on1, d_pm / denom1 ** 2, 0.0)
        gd[:, 1] += np.where(on1, -1.0 / denom1, 0.0)
        gd[:, 1] += np.where(on2, d_n / denom2 ** 2, 0.0)
        gd[:, 2] += np.where(on2, -1.0 / denom2, 0.0)
    else:
        t = d_pp ** 2 - d_n ** 2 + hyper.m_trip
        on = t > 0.0
        loss += float(t[on].sum())
        gd[:, 0] += np.where(on, 2.0 * d_pp, 0.0)
        gd[:, 2] += np.where(on, -2.0 * d_n, 0.0)

    mu = d.mean(axis=0)
    var = d.var(axis=0)
    g1 = mu[0] - mu[1] + hyper.t1 - hyper.t2
    g2 = mu[1] - mu[2] + hyper.t2
    loss += hyper.eta * float(
        var.sum() + hyper.lambda_g1 * _hinge(g1) + hyper.lambda_g2 * _hinge(g2)
    )
    gd += hyper.eta * 2.0 * (d - mu) / b
    if g1 > 0.0:
        gd[:, 0] += hyper.eta * hyper.lambda_g1 / b
        gd[:, 1] -= hyper.eta * hyper.lambda_g1 / b
    if g2 > 0.0:
        gd[:, 1] += hyper.eta * hyper.lambda_g2 / b
        gd[:, 2] -= hyper.eta * hyper.lambda_g2 / b

    coincident = d == 0.0
    singular = int(np.count_nonzero(coincident & (gd != 0.0)))
    if singular:
        logger.warning("%d distance gradients dropped at coincident quadruplet members", singular)
    safe = np.where(coincident, 1.0, d)
    unit = np.where(coincident[..., None], 0.0, diff / safe[..., None])
    g_diff = gd[..., None] * unit
    grad_e = np.empty_like(e)
    grad_e[:, 0, :] = g_diff.sum(axis=1)
    grad_e[:, 1:, :] = -g_diff

    cl_loss, grad_coarse = _head_terms(coarse_logits, coarse_labels, hyper.lambda_c1)
    fl_loss, grad_fine = _head_terms(fine_logits, fine_labels, hyper.lambda_c2)
    loss += cl_loss + fl_loss

    return LossGradient(
        loss=loss,
        embeddings=grad_e,
        coarse_logits=grad_coarse,
        fine_logits=grad_fine,
        singular=singular,
    )


def _head_terms(scores: np.ndarray, labels: np.ndarray, weight: float):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape[:-1] != labels.shape:
        raise MalformedInputError(f"logits {scores.shape} do not match labels {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= scores.shape[-1]):
        raise MalformedInputError(f"labels outside [0, {scores.shape[-1]})")
    picked = np.take_along_axis(scores, labels[..., None], axis=-1)[..., 0]
    value = weight * float((logsumexp(scores, axis=-1) - picked).sum())
    grad = softmax(scores, axis=-1)
    np.put_along_axis(
        grad, labels[..., None],
        np.take_along_axis(grad, labels[..., None], axis=-1) - 1.0,
        axis=-1,
    )
    return value, weight * grad
