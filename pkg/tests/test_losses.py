import logging
import math

import numpy as np
import pytest

from app.core import ConfigurationError, MalformedInputError
from app.ml.losses import (
    HeadLogits,
    LossTerm,
    PairExample,
    QuadrupletDistances,
    classification_loss,
    combined_loss,
    combined_loss_grad,
    contrastive_loss,
    global_loss,
    joint_loss,
    triplet_loss,
)
from app.models import HyperParams, Objective

ZERO_LOGITS = HeadLogits(coarse_scores=np.zeros(2), fine_scores=np.zeros(4))
NO_CLASSIFICATION = HyperParams(lambda_c1=0.0, lambda_c2=0.0)


class TestPairAndTripletLosses:
    @pytest.mark.parametrize("d, y, expected", [(0.0, 1, 0.0), (0.7, 0, 0.0), (0.2, 0, 0.09)])
    def test_contrastive(self, d, y, expected):
        assert contrastive_loss(PairExample(d=d, same_class=y), alpha=0.5) == pytest.approx(expected, abs=1e-12)

    def test_contrastive_positive_pair(self):
        assert contrastive_loss(PairExample(d=0.3, same_class=1), alpha=0.5) == pytest.approx(0.09, abs=1e-12)

    def test_pair_rejects_bad_indicator(self):
        with pytest.raises(MalformedInputError):
            PairExample(d=0.1, same_class=2)

    @pytest.mark.parametrize("d_rp, d_rn, m, expected", [(1, 2, 0.5, 0.0), (2, 1, 0.5, 3.5), (0.8, 0.8, 0.0, 0.0)])
    def test_triplet(self, d_rp, d_rn, m, expected):
        assert triplet_loss(d_rp, d_rn, m) == pytest.approx(expected, abs=1e-12)


class TestClassificationLoss:
    def test_uniform_logits(self):
        value = classification_loss(ZERO_LOGITS, 1, 3, 0.08, 0.25)
        assert value == pytest.approx(0.08 * math.log(2) + 0.25 * math.log(4), abs=1e-9)

    @pytest.mark.parametrize("c", [-3.0, 0.5, 100.0])
    def test_shift_invariance(self, c):
        rng = np.random.default_rng(0)
        logits = HeadLogits(coarse_scores=rng.standard_normal(3), fine_scores=rng.standard_normal(6))
        shifted = HeadLogits(coarse_scores=logits.coarse_scores + c, fine_scores=logits.fine_scores + c)
        base = classification_loss(logits, 2, 4, 0.08, 0.25)
        assert classification_loss(shifted, 2, 4, 0.08, 0.25) == pytest.approx(base, abs=1e-12)

    def test_saturated_softmax(self):
        logits = HeadLogits(coarse_scores=np.array([100.0, 0.0]), fine_scores=np.array([0.0, 0.0, 100.0, 0.0]))
        assert classification_loss(logits, 0, 2, 0.08, 0.25) <= 1e-10

    def test_label_out_of_range(self):
        with pytest.raises(MalformedInputError):
            classification_loss(ZERO_LOGITS, 2, 0, 0.08, 0.25)


class TestJointLoss:
    def test_both_hinges_satisfied(self):
        c = classification_loss(ZERO_LOGITS, 0, 0, 0.08, 0.25)
        q = QuadrupletDistances(0.5, 1.0, 2.0)
        assert joint_loss(q, ZERO_LOGITS, 0, 0, HyperParams()) == pytest.approx(c, abs=1e-12)

    def test_both_hinges_active(self):
        q = QuadrupletDistances(1.0, 1.0, 1.05)
        value = joint_loss(q, ZERO_LOGITS, 0, 0, NO_CLASSIFICATION)
        assert value == pytest.approx((1 - 1 / 1.4) + (1 - 1.05 / 1.3), abs=1e-9)
        assert value == pytest.approx(0.478021978, abs=1e-9)

    def test_boundary_gives_classification_term_only(self):
        h = HyperParams()
        d_pp = 0.25
        d_pm = d_pp + h.m1 - h.m2
        q = QuadrupletDistances(d_pp, d_pm, d_pm + h.m2)
        assert joint_loss(q, ZERO_LOGITS, 0, 0, NO_CLASSIFICATION) == pytest.approx(0.0, abs=1e-12)

    def test_margin_precondition(self):
        bad = HyperParams.construct(**{**HyperParams().dict(), "m1": 0.2, "m2": 0.3})
        with pytest.raises(ConfigurationError):
            joint_loss(QuadrupletDistances(0.5, 1.0, 2.0), ZERO_LOGITS, 0, 0, bad)

    def test_negative_distances_rejected(self):
        with pytest.raises(MalformedInputError):
            QuadrupletDistances(-0.1, 1.0, 2.0)


class TestGlobalLoss:
    def test_single_quadruplet(self):
        assert global_loss([QuadrupletDistances(0.5, 1.0, 2.0)], HyperParams()) == pytest.approx(0.0, abs=1e-12)

    def test_two_quadruplets(self):
        batch = [QuadrupletDistances(0.5, 1.0, 2.0), QuadrupletDistances(0.7, 0.8, 1.5)]
        assert global_loss(batch, HyperParams()) == pytest.approx(0.1825, abs=1e-9)

    def test_constant_batch(self):
        batch = [QuadrupletDistances(0.2, 1.5, 3.0)] * 5
        assert global_loss(batch, HyperParams()) == pytest.approx(0.0, abs=1e-12)

    def test_empty_batch(self):
        with pytest.raises(MalformedInputError):
            global_loss([], HyperParams())


class TestCombinedLoss:
    def _term(self, d):
        return LossTerm(distances=QuadrupletDistances(*d), logits=ZERO_LOGITS, coarse=0, fine=0)

    def test_single_quadruplet_is_classification_term(self):
        c = classification_loss(ZERO_LOGITS, 0, 0, 0.08, 0.25)
        assert combined_loss([self._term((0.5, 1.0, 2.0))], HyperParams()) == pytest.approx(c, abs=1e-12)

    def test_eta_zero_sums_joint_losses(self):
        h = HyperParams(eta=0.0)
        terms = [self._term((1.0, 1.0, 1.05)), self._term((0.7, 0.8, 1.5))]
        expected = sum(joint_loss(t.distances, t.logits, 0, 0, h) for t in terms)
        assert combined_loss(terms, h) == pytest.approx(expected, abs=1e-12)

    def test_global_term_alone(self):
        h = NO_CLASSIFICATION
        terms = [self._term((0.5, 1.0, 2.0)), self._term((0.7, 1.5, 2.5))]
        expected = h.eta * global_loss([t.distances for t in terms], h)
        assert combined_loss(terms, h) == pytest.approx(expected, abs=1e-12)

    def test_empty_batch(self):
        with pytest.raises(MalformedInputError):
            combined_loss([], HyperParams())


class TestCombinedLossGrad:
    @staticmethod
    def _inputs(b=3, k=3, seed=0):
        rng = np.random.default_rng(seed)
        e = rng.standard_normal((b, 4, k))
        coarse_logits = rng.standard_normal((b, 1, 2))
        fine_logits = rng.standard_normal((b, 1, 4))
        coarse = rng.integers(0, 2, size=(b, 1))
        fine = rng.integers(0, 4, size=(b, 1))
        return e, coarse_logits, fine_logits, coarse, fine

    def test_matches_scalar_combined_loss(self):
        e, cl, fl, c, f = self._inputs()
        h = HyperParams()
        terms = []
        for i in range(e.shape[0]):
            d = [float(np.linalg.norm(e[i, 0] - e[i, j])) for j in (1, 2, 3)]
            terms.append(LossTerm(
                distances=QuadrupletDistances(*d),
                logits=HeadLogits(coarse_scores=cl[i, 0], fine_scores=fl[i, 0]),
                coarse=int(c[i, 0]),
                fine=int(f[i, 0]),
            ))
        assert combined_loss_grad(e, cl, fl, c, f, h).loss == pytest.approx(combined_loss(terms, h), abs=1e-12)

    def test_embedding_gradient_matches_finite_differences(self):
        e, cl, fl, c, f = self._inputs(seed=4)
        h = HyperParams()
        grad = combined_loss_grad(e, cl, fl, c, f, h).embeddings
        step = 1e-6
        for idx in np.ndindex(*e.shape):
            up, down = e.copy(), e.copy()
            up[idx] += step
            down[idx] -= step
            numeric = (
                combined_loss_grad(up, cl, fl, c, f, h).loss - combined_loss_grad(down, cl, fl, c, f, h).loss
            ) / (2 * step)
            assert grad[idx] == pytest.approx(numeric, abs=1e-6)

    def test_logit_gradient_is_softmax_minus_onehot(self):
        e, cl, fl, c, f = self._inputs()
        out = combined_loss_grad(e, cl, fl, c, f, HyperParams())
        p = np.exp(fl[0, 0]) / np.exp(fl[0, 0]).sum()
        p[f[0, 0]] -= 1.0
        np.testing.assert_allclose(out.fine_logits[0, 0], 0.25 * p, atol=1e-12)

    def test_flat_region_has_zero_gradients(self):
        e = np.array([[[0.0, 0.0], [0.1, 0.0], [1.0, 0.0], [3.0, 0.0]]])
        h = HyperParams(lambda_c1=0.0, lambda_c2=0.0, eta=0.0)
        out = combined_loss_grad(e, np.zeros((1, 1, 2)), np.zeros((1, 1, 4)), [[0]], [[0]], h)
        assert out.loss == 0.0
        assert np.all(out.embeddings == 0.0)
        assert np.all(out.coarse_logits == 0.0)
        assert np.all(out.fine_logits == 0.0)

    def test_coincident_members_are_flagged(self, caplog):
        e = np.array([[[0.0, 0.0], [0.0, 0.0], [0.2, 0.0], [5.0, 0.0]]])
        with caplog.at_level(logging.WARNING, logger="app.ml.losses"):
            out = combined_loss_grad(e, np.zeros((1, 1, 2)), np.zeros((1, 1, 4)), [[0]], [[0]], HyperParams())
        assert out.singular == 1
        assert np.all(np.isfinite(out.embeddings))
        assert "coincident" in caplog.text

    def test_triplet_global_objective(self):
        e = np.array([[[0.0, 0.0], [2.0, 0.0], [1.0, 0.0], [1.0, 0.0]]])
        h = HyperParams(lambda_c1=0.0, lambda_c2=0.0, eta=0.0, m_trip=0.5)
        out = combined_loss_grad(e, np.zeros((1, 1, 2)), np.zeros((1, 1, 4)), [[0]], [[0]], h,
                                 Objective.TRIPLET_GLOBAL)
        assert out.loss == pytest.approx(triplet_loss(2.0, 1.0, 0.5), abs=1e-12)

    def test_rejects_bad_shape(self):
        with pytest.raises(MalformedInputError):
            combined_loss_grad(np.zeros((2, 3, 2)), np.zeros((2, 1, 2)), np.zeros((2, 1, 4)),
                               [[0], [0]], [[0], [0]], HyperParams())
