import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from hbi.errors import (
    InvalidConfig,
    MissingLevel,
    NonFiniteInput,
    NonPositiveTau,
    NonSquare,
    ShapeMismatch,
)
from hbi.features import LEVELS, Level
from hbi.game import InteractionMap
from hbi.objectives import (
    CAPTION_WEIGHTS,
    QA_WEIGHTS,
    RETRIEVAL_WEIGHTS,
    LossWeights,
    banzhaf_loss,
    contrastive_loss,
    distillation_loss,
    to_distributions,
    total_loss,
)


def test_uniform_distributions():
    d = to_distributions(np.full((3, 4), 2.5))
    assert np.allclose(d.v2t, 0.25) and np.allclose(d.t2v, 1 / 3)


def test_closed_form_row():
    d = to_distributions(np.array([[0.0, math.log(2)]]))
    assert np.allclose(d.v2t[0], [1 / 3, 2 / 3], atol=1e-15)


def test_row_shift_leaves_row_unchanged():
    rng = np.random.default_rng(0)
    s = rng.standard_normal((3, 4))
    shifted = s.copy()
    shifted[1] += 7.0
    assert np.allclose(to_distributions(s).v2t, to_distributions(shifted).v2t, atol=1e-15)


def test_non_finite_rejected():
    with pytest.raises(NonFiniteInput):
        to_distributions(np.array([[0.0, np.nan]]))


def test_banzhaf_loss_identity_and_shift():
    rng = np.random.default_rng(1)
    t = rng.standard_normal((4, 5))
    assert abs(banzhaf_loss(t, t)) <= 1e-12
    assert abs(banzhaf_loss(t + 3.0, t)) <= 1e-12
    target = InteractionMap(t, np.zeros_like(t), "exact")
    assert abs(banzhaf_loss(t, target)) <= 1e-12


def test_banzhaf_loss_two_by_two():
    p = (math.e / (math.e + 1), 1 / (math.e + 1))
    term = oracles.kl(p, (0.5, 0.5))
    # two row terms averaged plus two column terms averaged
    assert banzhaf_loss(np.eye(2), np.zeros((2, 2))) == pytest.approx(2 * term, abs=1e-12)


def test_banzhaf_loss_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        banzhaf_loss(np.zeros((2, 2)), np.zeros((2, 3)))


def test_contrastive_single():
    assert contrastive_loss(np.array([[0.3]]), 0.01) == 0.0


@pytest.mark.parametrize("s,tau", [(0.0, 1.0), (5.0, 0.01), (-2.0, 3.0)])
def test_contrastive_uniform_is_ln2(s, tau):
    assert contrastive_loss(np.full((2, 2), s), tau) == pytest.approx(math.log(2), abs=1e-12)


def test_contrastive_small_temperature():
    s = [[1.0, 0.0], [0.0, 1.0]]
    value = contrastive_loss(np.array(s), 0.01)
    assert value == pytest.approx(oracles.info_nce(s, 0.01), abs=1e-15)
    assert value == pytest.approx(math.log1p(math.exp(-100)), rel=1e-12)
    assert math.isfinite(contrastive_loss(np.array(s) * 100, 0.01))


def test_contrastive_random_matches_oracle():
    rng = np.random.default_rng(7)
    s = rng.standard_normal((5, 5))
    assert contrastive_loss(s, 0.1) == pytest.approx(oracles.info_nce(s.tolist(), 0.1), abs=1e-12)


def test_contrastive_errors():
    with pytest.raises(NonSquare):
        contrastive_loss(np.zeros((2, 3)))
    with pytest.raises(NonPositiveTau):
        contrastive_loss(np.zeros((2, 2)), 0.0)


def test_distillation():
    rng = np.random.default_rng(13)
    teacher, student = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    assert abs(distillation_loss(teacher, teacher)) <= 1e-12
    assert abs(distillation_loss(teacher, teacher - 4.0)) <= 1e-12
    expected = oracles.paired_kl(student.tolist(), teacher.tolist())
    assert distillation_loss(teacher, student) == pytest.approx(expected, abs=1e-12)
    with pytest.raises(ShapeMismatch):
        distillation_loss(teacher, np.zeros((3, 2)))


def test_total_loss_degenerate_weights():
    lc = {Level.ENTITY: 1.0, Level.ACTION: 2.0, Level.EVENT: 4.0}
    li = {"entity": 10.0, "action": 20.0, "event": 30.0}
    report = total_loss(lc, li, 5.0, 6.0, 7.0, LossWeights(alpha=0, beta=0, lam=0))
    assert report.total == 7.0


def test_total_loss_algebra():
    lc = {"entity": 0.5, "action": 0.25, "event": 0.125}
    li = {"entity": 1.0, "action": 2.0, "event": 3.0}
    report = total_loss(lc, li, 0.7, 0.3, 1.5, QA_WEIGHTS)
    expected = 0.875 + 2.0 * 6.0 + 1.0 * (0.7 + 0.3) + 2.5 * 1.5
    assert report.total == pytest.approx(expected, abs=1e-12)
    assert abs(report.recompute() - report.total) <= 1e-9
    assert report.to_dict()["weights"]["lambda"] == 2.5


def test_presets():
    assert (RETRIEVAL_WEIGHTS.alpha, RETRIEVAL_WEIGHTS.beta, RETRIEVAL_WEIGHTS.lam) == (1.0, 1.0, 0.0)
    assert (QA_WEIGHTS.alpha, QA_WEIGHTS.beta, QA_WEIGHTS.lam) == (2.0, 1.0, 2.5)
    assert CAPTION_WEIGHTS.lam == 3.3
    assert RETRIEVAL_WEIGHTS.tau == 0.01


def test_total_loss_errors():
    with pytest.raises(MissingLevel):
        total_loss({"entity": 1.0, "action": 1.0}, {lv: 0.0 for lv in LEVELS})
    with pytest.raises(NonPositiveTau):
        LossWeights(tau=0.0)
    with pytest.raises(InvalidConfig):
        LossWeights(alpha=-1.0)


pairs = st.integers(0, 2**32 - 1).map(lambda s: np.random.default_rng(s))


@settings(max_examples=80, deadline=None)
@given(rng=pairs, scale=st.floats(0.1, 50))
def test_kl_losses_non_negative(rng, scale):
    a, b = scale * rng.standard_normal((4, 3)), scale * rng.standard_normal((4, 3))
    assert banzhaf_loss(a, b) >= -1e-12
    assert distillation_loss(a[:3], b[:3]) >= -1e-12


@settings(max_examples=80, deadline=None)
@given(rng=pairs, c=st.floats(-100, 100))
def test_contrastive_global_shift(rng, c):
    s = rng.standard_normal((4, 4))
    assert contrastive_loss(s + c, 0.5) == pytest.approx(contrastive_loss(s, 0.5), abs=1e-9)
