"""GP kernel, factorization, conditional, and incremental-state tests."""

import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from coxkit import (
    GpHyper,
    InputError,
    NumericalError,
    SchurState,
    SpatialCov,
    build_cov_factor,
    chol_with_jitter,
    gp_conditional,
    gp_logpdf,
    kernel_eval,
    schur_extend,
)


def test_kernel_eval_zero_distance_is_sigma2():
    h = GpHyper(0.0, 1.0, 20.0, 1.5)
    assert kernel_eval(h, [3.0], [3.0]) == 1.0


def test_kernel_eval_decays_monotonically():
    h = GpHyper(0.0, 2.0, 5.0, 1.2)
    vals = [kernel_eval(h, [0.0], [r]) for r in (0.5, 1.0, 2.0, 5.0, 20.0, 200.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-6


def test_kernel_eval_closed_form():
    h = GpHyper(0.0, 4.0, 10.0, 2.0)
    # distance 3, gamma 2: 4 * exp(-9 / 20)
    assert kernel_eval(h, [0.0, 0.0], [3.0, 0.0]) == pytest.approx(
        4.0 * math.exp(-9.0 / 20.0), rel=1e-14
    )


def test_kernel_eval_symmetry_property():
    rng = np.random.default_rng(0)
    h = GpHyper(0.0, 1.7, 3.0, 1.3)
    for _ in range(20):
        s, t = rng.random(2), rng.random(2)
        assert kernel_eval(h, s, t) == pytest.approx(kernel_eval(h, t, s), rel=1e-15)


def test_kernel_eval_dimension_mismatch():
    h = GpHyper(0.0, 1.0, 1.0)
    with pytest.raises(InputError):
        kernel_eval(h, [0.0], [0.0, 1.0])


def test_hyper_validation():
    with pytest.raises(InputError):
        GpHyper(0.0, -1.0, 1.0)
    with pytest.raises(InputError):
        GpHyper(0.0, 1.0, 0.0)
    with pytest.raises(InputError):
        GpHyper(0.0, 1.0, 1.0, 2.5)


def test_build_cov_factor_single_point():
    h = GpHyper(0.0, 4.0, 1.0)
    fac = build_cov_factor(h, [[0.3]])
    assert np.allclose(fac.matrix, [[4.0]])
    assert np.allclose(fac.lower, [[2.0]])
    assert fac.jitter_used == 0.0


def test_build_cov_factor_coincident_points_needs_jitter():
    h = GpHyper(0.0, 1.0, 1.0, 2.0)
    fac = build_cov_factor(h, [[0.5], [0.5]])
    assert fac.jitter_used > 0


def test_build_cov_factor_reproduces_matrix():
    rng = np.random.default_rng(1)
    h = GpHyper(0.0, 2.0, 3.0, 1.5)
    locs = rng.random((5, 2)) * 4
    fac = build_cov_factor(h, locs)
    direct = np.array([[kernel_eval(h, a, b) for b in locs] for a in locs])
    rebuilt = fac.lower @ fac.lower.T - fac.jitter_used * np.eye(5)
    assert np.linalg.norm(rebuilt - direct) / np.linalg.norm(direct) < 1e-8


def test_chol_with_jitter_failure_reports_eigenvalue():
    bad = np.array([[1.0, 0.0], [0.0, -2.0]])
    with pytest.raises(NumericalError, match="eigenvalue"):
        chol_with_jitter(bad)


def test_gp_conditional_prior_when_no_known_points():
    h = GpHyper(0.7, 2.5, 1.0)
    mean, cov = gp_conditional(h, [], [], [[0.1]])
    assert mean[0] == pytest.approx(0.7)
    assert cov[0, 0] == pytest.approx(2.5)


def test_gp_conditional_interpolates_known_point():
    h = GpHyper(0.0, 1.0, 5.0, 1.5)
    mean, cov = gp_conditional(h, [[2.0]], [1.3], [[2.0]])
    assert mean[0] == pytest.approx(1.3, abs=1e-6)
    assert cov[0, 0] < 1e-6


def test_gp_conditional_bivariate_closed_form():
    h = GpHyper(0.4, 2.0, 3.0, 1.5)
    s_known, s_new, v = 1.0, 2.2, -0.9
    k = kernel_eval(h, [s_known], [s_new])
    mean, cov = gp_conditional(h, [[s_known]], [v], [[s_new]])
    assert mean[0] == pytest.approx(h.mu + (k / h.sigma2) * (v - h.mu), rel=1e-10)
    assert cov[0, 0] == pytest.approx(h.sigma2 - k ** 2 / h.sigma2, rel=1e-10)


def test_gp_conditional_cov_symmetric_psd_and_bounded():
    rng = np.random.default_rng(2)
    h = GpHyper(0.0, 1.5, 2.0, 1.5)
    known = rng.random((6, 2)) * 3
    vals = rng.standard_normal(6)
    new = rng.random((8, 2)) * 3
    _, cov = gp_conditional(h, known, vals, new)
    assert np.allclose(cov, cov.T, atol=1e-10)
    assert np.linalg.eigvalsh(cov).min() > -1e-8
    assert np.diag(cov).max() <= h.sigma2 + 1e-6


def test_gp_conditional_length_mismatch():
    h = GpHyper(0.0, 1.0, 1.0)
    with pytest.raises(InputError):
        gp_conditional(h, [[0.0], [1.0]], [0.5], [[0.2]])


def test_gp_logpdf_matches_scipy():
    rng = np.random.default_rng(3)
    h = GpHyper(0.3, 1.4, 2.0, 1.5)
    locs = rng.random((7, 1)) * 5
    vals = rng.standard_normal(7)
    cov = np.array([[kernel_eval(h, a, b) for b in locs] for a in locs])
    ref = multivariate_normal(mean=np.full(7, 0.3), cov=cov).logpdf(vals)
    assert gp_logpdf(h, locs, vals) == pytest.approx(ref, rel=1e-9)


# ---------------------------------------------------------------------------
# incremental state
# ---------------------------------------------------------------------------


def test_schur_extend_from_empty_gives_inverse_variance():
    h = GpHyper(0.0, 4.0, 1.0)
    st = SchurState.start(SpatialCov(h), np.empty((0, 1)), np.empty(0))
    st2 = schur_extend(st, [0.5], 1.0)
    assert np.allclose(st2.inverse(), [[0.25]])
    assert st.n == 0  # original untouched


def test_schur_extend_far_point_decouples():
    h = GpHyper(0.0, 2.0, 1.0, 1.5)
    st = SchurState.start(SpatialCov(h), [[0.0], [0.5], [1.0]], np.zeros(3))
    st2 = schur_extend(st, [500.0], 0.0)
    inv = st2.inverse()
    assert abs(inv[3, 3] - 0.5) < 1e-9
    assert np.abs(inv[3, :3]).max() < 1e-9


def test_schur_extend_matches_dense_inverse():
    rng = np.random.default_rng(4)
    h = GpHyper(0.0, 1.0, 2.0, 1.5)
    pts = rng.random((4, 2)) * 3
    new = rng.random(2) * 3
    st = SchurState.start(SpatialCov(h), pts, rng.standard_normal(4))
    st.append(new, 0.3)
    full = np.vstack([pts, new])
    dense = np.linalg.inv(SpatialCov(h).cov_sym(full))
    assert np.linalg.norm(st.inverse() - dense) / np.linalg.norm(dense) < 1e-8


def test_chained_extends_match_one_shot():
    rng = np.random.default_rng(5)
    h = GpHyper(0.0, 1.0, 3.0, 1.5)
    for trial in range(5):
        k = int(rng.integers(5, 51))
        pts = rng.random((k, 2)) * 8
        vals = rng.standard_normal(k)
        st = SchurState.start(SpatialCov(h), pts[:1], vals[:1])
        for i in range(1, k):
            st.append(pts[i], vals[i])
        dense = np.linalg.inv(SpatialCov(h).cov_sym(pts))
        err = np.linalg.norm(st.inverse() - dense) / np.linalg.norm(dense)
        assert err < 1e-8


def test_drop_returns_to_original():
    rng = np.random.default_rng(6)
    h = GpHyper(0.0, 1.0, 2.0, 1.5)
    pts = rng.random((6, 1)) * 4
    vals = rng.standard_normal(6)
    st = SchurState.start(SpatialCov(h), pts, vals)
    before = st.inverse()
    st.append([[1.7]], 0.2)
    moved = st.drop(6)
    assert moved is None   # dropped the last row, nothing relocated
    assert np.allclose(st.inverse(), before, atol=1e-9)


def test_drop_mid_row_swaps_last_and_stays_consistent():
    rng = np.random.default_rng(60)
    h = GpHyper(0.0, 1.0, 2.0, 1.5)
    pts = rng.random((7, 1)) * 4
    vals = rng.standard_normal(7)
    st = SchurState.start(SpatialCov(h), pts, vals)
    moved = st.drop(2)
    assert moved == 2      # former last row now lives at index 2
    keep = np.r_[0, 1, 6, 3, 4, 5]
    assert np.allclose(st.pts, pts[keep])
    dense = np.linalg.inv(SpatialCov(h).cov_sym(pts[keep]))
    assert np.allclose(st.inverse(), dense, atol=1e-8)
    q = np.array([1.7])
    m1, v1 = st.conditional_scalar(q)
    ref = SchurState.start(SpatialCov(h), pts[keep], vals[keep])
    m2, v2 = ref.conditional_scalar(q)
    assert m1 == pytest.approx(m2, rel=1e-8)
    assert v1 == pytest.approx(v2, rel=1e-6)


def test_block_ops_match_row_ops():
    rng = np.random.default_rng(7)
    h = GpHyper(0.2, 1.3, 2.5, 1.5)
    pts = rng.random((8, 2)) * 5
    vals = rng.standard_normal(8)
    extra = rng.random((3, 2)) * 5
    ev = rng.standard_normal(3)
    a = SchurState.start(SpatialCov(h), pts, vals)
    b = a.copy()
    for i in range(3):
        a.append(extra[i], ev[i])
    b.append_block(extra, ev)
    assert np.allclose(a.inverse(), b.inverse(), atol=1e-9)
    # drops reorder internally (swap with last); compare via conditionals
    a.drop(9)
    a.drop(2)
    b.drop_block([2, 9])
    q = rng.random(2) * 5
    m1, v1 = a.conditional_scalar(q)
    m2, v2 = b.conditional_scalar(q)
    assert m1 == pytest.approx(m2, rel=1e-8)
    assert v1 == pytest.approx(v2, rel=1e-6)
    assert sorted(a.values.tolist()) == pytest.approx(sorted(b.values.tolist()))


def test_conditional_rows_partition_identity():
    rng = np.random.default_rng(70)
    h = GpHyper(0.3, 1.4, 2.0, 1.5)
    pts = rng.random((9, 1)) * 4
    vals = rng.standard_normal(9)
    st = SchurState.start(SpatialCov(h), pts, vals)
    rows = [2, 5, 7]
    mean, cov = st.conditional_rows(rows)
    others = [i for i in range(9) if i not in rows]
    ref_mean, ref_cov = gp_conditional(h, pts[others], vals[others], pts[rows])
    assert np.allclose(mean, ref_mean, atol=1e-8)
    assert np.allclose(cov, ref_cov, atol=1e-8)
    # full-set rows: empty conditioning set returns the prior
    mean_all, cov_all = st.conditional_rows(list(range(9)))
    assert np.array_equal(mean_all, np.full(9, h.mu))
    assert np.array_equal(cov_all, SpatialCov(h).cov_sym(pts))


def test_set_values_updates_conditional_means():
    rng = np.random.default_rng(71)
    h = GpHyper(0.0, 1.0, 1.0, 1.5)
    pts = rng.random((5, 1))
    vals = rng.standard_normal(5)
    st = SchurState.start(SpatialCov(h), pts, vals)
    new = rng.standard_normal(2)
    st.set_values([1, 3], new)
    vals2 = vals.copy()
    vals2[[1, 3]] = new
    ref = SchurState.start(SpatialCov(h), pts, vals2)
    q = np.array([0.42])
    assert st.conditional_scalar(q)[0] == pytest.approx(
        ref.conditional_scalar(q)[0], rel=1e-10)


def test_conditional_scalar_agrees_with_batch():
    rng = np.random.default_rng(8)
    h = GpHyper(0.1, 1.0, 1.5, 1.5)
    pts = rng.random((10, 2))
    vals = rng.standard_normal(10)
    st = SchurState.start(SpatialCov(h), pts, vals)
    q = rng.random(2)
    m1, v1 = st.conditional_scalar(q)
    m2, c2 = st.conditional(q[None, :])
    assert m1 == pytest.approx(m2[0], rel=1e-10)
    assert v1 == pytest.approx(c2[0, 0], rel=1e-6, abs=1e-10)


def test_near_duplicate_append_falls_back_to_rebuild():
    h = GpHyper(0.0, 1.0, 1.0, 2.0)
    st = SchurState.start(SpatialCov(h), [[0.5]], np.array([0.4]))
    st.append([[0.5]], 0.4)   # exact duplicate: Schur complement ~ 0
    assert st.n == 2
    assert np.all(np.isfinite(st.inverse()))
