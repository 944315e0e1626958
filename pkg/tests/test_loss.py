import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipsync_eval.errors import ConfigError, DataError, DegenerateError, LengthError
from lipsync_eval.loss import (
    EmbeddingBatch,
    MaskedTokenBatch,
    info_nce,
    mae_loss,
    perceptual_loss,
    symmetric_contrastive,
    total_stage1_loss,
)

from .oracles import mae_double_loop, softmax_xent

LN4 = math.log(4)


def _rand_batch(seed, B=8, H=16):
    rng = np.random.default_rng(seed)
    return EmbeddingBatch(rng.normal(size=(B, H)), rng.normal(size=(B, H)))


def test_single_item_is_zero():
    b = EmbeddingBatch([[0.3, -1.2, 4.0]], [[1.0, 1.0, 1.0]])
    assert info_nce(b) == 0.0
    assert symmetric_contrastive({0: b}) == 0.0


def test_identical_rows_give_log_batch_size():
    rows = np.tile([1.0, 2.0, 3.0], (4, 1))
    b = EmbeddingBatch(rows, rows)
    assert abs(info_nce(b) - LN4) < 1e-12
    assert abs(info_nce(b, similarity="dot", temperature=3.0) - LN4) < 1e-12


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("similarity", ["cosine", "dot"])
def test_matches_softmax_oracle(seed, similarity):
    b = _rand_batch(seed)
    tau = 0.07 if similarity == "cosine" else 5.0
    ref = softmax_xent(b.anchor.tolist(), b.counterpart.tolist(), tau, cosine=similarity == "cosine")
    assert abs(info_nce(b, tau, similarity) - ref) < 1e-9


def test_stable_against_large_logit_shift():
    """A 1e4 logit offset overflows exp; the stabilized form is unaffected."""
    rng = np.random.default_rng(11)
    a = rng.normal(size=(5, 6))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    c = rng.normal(size=(5, 6))
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    # append a coordinate that adds the same constant to every dot product
    k = math.sqrt(1e4)
    a2 = np.hstack([a, np.full((5, 1), k)])
    c2 = np.hstack([c, np.full((5, 1), k)])
    shifted = info_nce(EmbeddingBatch(a2, c2), 1.0, "dot")
    plain = softmax_xent(a.tolist(), c.tolist(), 1.0, cosine=False)
    assert math.isfinite(shifted)
    assert abs(shifted - plain) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.floats(1e-3, 1e3), min_size=8, max_size=8))
def test_row_scaling_invariance(seed, scales):
    b = _rand_batch(seed)
    s = np.asarray(scales)[:, None]
    scaled = EmbeddingBatch(b.anchor * s, b.counterpart * s[::-1])
    assert abs(info_nce(scaled) - info_nce(b)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 3.0))
def test_weakening_a_positive_pair_raises_loss(seed, step):
    # with unit counterparts, sliding anchor 0 along -c0 lowers its positive
    # logit by more than any negative logit, so the loss must rise
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(4, 5))
    c = a + 0.1 * rng.normal(size=(4, 5))
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    base = info_nce(EmbeddingBatch(a, c), 1.0, "dot")
    moved = a.copy()
    moved[0] -= step * c[0]
    assert info_nce(EmbeddingBatch(moved, c), 1.0, "dot") > base


def test_nonnegative_and_positive_for_random():
    for seed in range(20):
        assert info_nce(_rand_batch(seed)) > 0


def test_info_nce_errors():
    with pytest.raises(DataError):
        EmbeddingBatch([[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(LengthError):
        EmbeddingBatch([[1.0, 0.0]], [[1.0, 0.0, 0.0]])
    b = _rand_batch(0)
    with pytest.raises(ConfigError):
        info_nce(b, temperature=0.0)
    with pytest.raises(ConfigError):
        info_nce(b, similarity="euclid")


def test_symmetric_two_identical_layers():
    rows = np.tile([0.5, -1.0], (4, 1))
    b = EmbeddingBatch(rows, rows)
    assert symmetric_contrastive({3: b, 7: b}) == pytest.approx(2 * 2 * LN4, abs=1e-12)


def test_symmetric_is_sum_of_directions():
    layers = {l: _rand_batch(10 + l) for l in range(3)}
    ref = 0.0
    for b in layers.values():
        ref += softmax_xent(b.anchor.tolist(), b.counterpart.tolist(), 0.07)
        ref += softmax_xent(b.counterpart.tolist(), b.anchor.tolist(), 0.07)
    assert abs(symmetric_contrastive(layers) - ref) < 1e-9
    with pytest.raises(LengthError):
        symmetric_contrastive({})


def test_perceptual_weighting():
    rows = np.tile([0.5, -1.0], (4, 1))
    one = {0: EmbeddingBatch(rows, rows)}
    assert perceptual_loss(one, weight=0.0) == 0.0
    rand = {0: _rand_batch(4)}
    assert perceptual_loss(rand, weight=1.0) == symmetric_contrastive(rand)
    assert perceptual_loss(one) == pytest.approx(2.7725887e-7, abs=1e-14)
    with pytest.raises(ConfigError):
        perceptual_loss(one, weight=-1.0)


def _tokens(seed, B=3, N=6, D=4, p=0.4):
    rng = np.random.default_rng(seed)
    mask = rng.random((B, N)) < p
    mask[:, 0] = True
    return MaskedTokenBatch(rng.normal(size=(B, N, D)), rng.normal(size=(B, N, D)), mask)


def test_mae_zero_error():
    t = np.ones((2, 3, 4))
    m = np.array([[1, 0, 1], [0, 1, 0]], bool)
    b = MaskedTokenBatch(t, t, m)
    assert mae_loss(b, b) == 0.0


def test_mae_single_token_unit_error():
    target = np.zeros((5, 4))
    pred = target.copy()
    pred[2] = 1.0
    mask = np.zeros(5, bool)
    mask[2] = True
    s = MaskedTokenBatch(pred, target, mask)
    v = MaskedTokenBatch(target, target, mask)
    assert mae_loss(s, v) == 4.0


@pytest.mark.parametrize("seed", range(10))
def test_mae_matches_double_loop(seed):
    s, v = _tokens(seed), _tokens(seed + 100, N=9, D=2)
    ref = mae_double_loop(s.predicted.tolist(), s.target.tolist(), s.mask.tolist())
    ref += mae_double_loop(v.predicted.tolist(), v.target.tolist(), v.mask.tolist())
    assert abs(mae_loss(s, v) - ref) < 1e-9


def test_mae_ignores_unmasked_positions():
    s = _tokens(1)
    rng = np.random.default_rng(2)
    noisy = s.predicted.copy()
    noisy[~s.mask] = rng.normal(size=noisy[~s.mask].shape) * 100
    assert mae_loss(MaskedTokenBatch(noisy, s.target, s.mask), s) == mae_loss(s, s)


def test_mae_permuting_unmasked_positions():
    s = _tokens(3, N=8)
    p, t = s.predicted.copy(), s.target.copy()
    for b in range(p.shape[0]):
        free = np.flatnonzero(~s.mask[b])
        perm = free[::-1]
        p[b, free], t[b, free] = p[b, perm], t[b, perm]
    assert mae_loss(MaskedTokenBatch(p, t, s.mask), s) == mae_loss(s, s)


def test_mae_errors():
    t = np.zeros((1, 3, 2))
    empty = MaskedTokenBatch(t, t, np.zeros((1, 3), bool))
    full = MaskedTokenBatch(t, t, np.ones((1, 3), bool))
    with pytest.raises(DegenerateError):
        mae_loss(empty, full)
    with pytest.raises(LengthError):
        MaskedTokenBatch(t, np.zeros((1, 3, 3)), np.ones((1, 3), bool))
    with pytest.raises(LengthError):
        mae_loss(full, MaskedTokenBatch(np.zeros((2, 3, 2)), np.zeros((2, 3, 2)), np.ones((2, 3), bool)))


def test_total_loss():
    assert total_stage1_loss(1.25, 9.0, 0.0) == 1.25
    assert total_stage1_loss(2.0, 3.0, 0.5) == 3.5
    with pytest.raises(ConfigError):
        total_stage1_loss(1.0, 1.0, -0.1)


def test_total_loss_linear_in_lambda():
    rng = np.random.default_rng(5)
    mae, con = float(rng.uniform(0, 5)), float(rng.uniform(0, 5))
    lams = [0.0, 0.37, 2.5]
    vals = [total_stage1_loss(mae, con, l) for l in lams]
    slope = (vals[2] - vals[0]) / (lams[2] - lams[0])
    assert abs(slope - con) < 1e-12
    assert abs(vals[1] - (vals[0] + slope * lams[1])) < 1e-12
