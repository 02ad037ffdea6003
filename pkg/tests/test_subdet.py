import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from torus_spectral import subdet
from torus_spectral._common import BudgetExceeded
from torus_spectral.subdet import PivotTooSmall, SBoxQuery


def laplace_det(rows):
    """Cofactor expansion along the first row; the slow independent oracle."""
    n = len(rows)
    if n == 0:
        return Fraction(1)
    if n == 1:
        return Fraction(rows[0][0])
    total = Fraction(0)
    for j in range(n):
        minor = [r[:j] + r[j + 1:] for r in rows[1:]]
        total += (-1) ** j * Fraction(rows[0][j]) * laplace_det(minor)
    return total


def brute_max_minor(M, k):
    p, q = len(M), len(M[0])
    return max(
        abs(laplace_det([[M[i][j] for j in cols] for i in rows]))
        for rows in itertools.combinations(range(p), k)
        for cols in itertools.combinations(range(q), k)
    )


def test_max_subdet_examples():
    assert subdet.max_subdet(np.eye(3, dtype=int), 2) == 1
    assert subdet.max_subdet([[3, 0, 0], [0, 2, 0], [0, 0, 1]], 2) == 6
    with pytest.raises(ValueError):
        subdet.max_subdet([[1, 2]], 2)


def test_max_subdet_random_integer_matrix_against_cofactor_oracle():
    g = np.random.default_rng(1)
    for _ in range(5):
        M = g.integers(-9, 10, size=(4, 6)).tolist()
        assert subdet.max_subdet(M, 3) == brute_max_minor(M, 3)


def test_exact_path_handles_huge_entries():
    big = 10**15
    M = [[big, 3, 7], [5, big + 1, 2], [1, 4, big - 3]]
    assert subdet.max_subdet(M, 3) == abs(subdet.bareiss_det(M))
    assert subdet.max_subdet(M, 2) == brute_max_minor(M, 2)


def test_rational_and_decimal_string_entries():
    M = [["0.5", 1], [Fraction(1, 3), 2]]
    assert subdet.max_subdet(M, 2) == Fraction(2, 3)


def test_prefix_examples():
    M = [[1, -7, 2], [4, 0, 3]]
    assert subdet.max_subdet_prefix(M, 2, 3) == subdet.max_subdet(M, 2)
    assert subdet.max_subdet_prefix(M, 1, 1) == 4
    assert subdet.max_subdet_prefix(M, 1, 2) <= subdet.max_subdet(M, 1)


def test_singular_value_examples():
    assert np.allclose(subdet.singular_values([[5, 0], [0, 3]]), [5, 3])
    u, v = np.array([1.0, 2.0, 2.0]), np.array([3.0, 4.0])
    s = subdet.singular_values(np.outer(u, v))
    assert s[0] == pytest.approx(15.0) and s[1] == pytest.approx(0.0, abs=1e-12)


def test_shape_cap():
    with pytest.raises(BudgetExceeded):
        subdet.max_subdet(np.ones((9, 11)), 2)


def test_sigma_from_subdets():
    assert subdet.sigma_from_subdets([6, 12, 0, 0]) == (6.0, 2.0, 0.0, 0.0)


def test_rearrange_diagonal_is_identity():
    assert subdet.rearrange_columns([[5, 0, 0], [0, 3, 0], [0, 0, 1]]) == [0, 1, 2]


def test_rearrange_antidiagonal_meets_postcondition():
    M = [[0, 1], [1, 0]]
    perm = subdet.rearrange_columns(M)
    assert sorted(perm) == [0, 1]
    Mp = [[row[j] for j in perm] for row in M]
    assert subdet.max_subdet_prefix(Mp, 1, 1) == 1


def test_rearrangement_constant():
    assert subdet.rearrangement_constant(4, 6) == Fraction(1, 24 * 15)


def test_rearrange_random_meets_postcondition():
    g = np.random.default_rng(7)
    c = float(subdet.rearrangement_constant(4, 6))
    for _ in range(50):
        M = g.normal(size=(4, 6))
        perm = subdet.rearrange_columns(M)
        Mp = M[:, perm]
        for ell in range(1, 5):
            for k in range(1, ell + 1):
                assert subdet.max_subdet_prefix(Mp, k, ell) >= c * subdet.max_subdet(M, k) * (1 - 1e-9)


def test_membership_examples():
    M = [[2, 1], [0, 3], [1, 1]]
    q = SBoxQuery(M, R=1.0, C=2.0)
    assert subdet.s_membership(q, [0, 0, 0])
    assert subdet.s_membership(q, [2, 0, 1])
    assert not subdet.s_membership(SBoxQuery([[1], [0]], R=0, C=2), [0, 1])


def test_membership_batch_matches_exact():
    M = [[2, 1], [0, 3], [1, 1]]
    q = SBoxQuery(M, R=3.0, C=2.0)
    g = np.random.default_rng(3)
    X = g.integers(-4, 5, size=(200, 3))
    exact = [subdet.s_membership(q, list(map(int, x))) for x in X]
    assert list(subdet.s_membership_batch(q, X.astype(float))) == exact


def test_tau_profile_examples():
    M = [[4, 0], [0, 2], [0, 0]]
    assert np.allclose(subdet.tau_profile(M, 4), [4, 2, 0.5])
    assert np.allclose(subdet.tau_profile(M, 1e12)[2], 2)
    assert subdet.tau_profile(M, 0)[2] == 0


def test_box_cover_diagonal_and_random():
    rep = subdet.box_cover_check(SBoxQuery([[4, 0], [0, 2], [0, 0]], 4.0, 2.0), 4000, margin=2.0 * 6)
    assert rep.ok and rep.members > 0
    g = np.random.default_rng(11)
    rep = subdet.box_cover_check(SBoxQuery(g.normal(size=(3, 2)), 1.0, 2.0), 10_000, seed=1)
    assert rep.ok, rep.violations[:3]


def test_box_cover_reports_violations():
    rep = subdet.box_cover_check(SBoxQuery([[4, 0], [0, 2], [0, 0]], 4.0, 2.0), 4000, margin=0.05)
    assert not rep.ok and rep.violations


def test_zero_R_members_stay_in_span():
    M = np.array([[3.0, 1.0], [1.0, 2.0], [0.5, -1.0]])
    q = SBoxQuery(M, 0.0, 2.0)
    g = np.random.default_rng(0)
    X = (M @ g.uniform(-1, 1, size=(2, 500))).T + g.normal(scale=1e-3, size=(500, 3)) * (g.random((500, 1)) < 0.5)
    U, _, _ = np.linalg.svd(M)
    Y = X[subdet.s_membership_batch(q, X)] @ U
    assert len(Y) > 0 and np.abs(Y[:, 2]).max() < 1e-9


def test_minkowski_volume_examples():
    assert subdet.minkowski_volume_exact(np.zeros((2, 2))) == pytest.approx(math.pi)
    assert subdet.minkowski_volume_exact(np.diag([10.0, 0.0])) == pytest.approx(40 + math.pi)
    assert subdet.minkowski_volume_exact(np.eye(2)) == pytest.approx(4 + 8 + math.pi)


def test_neighborhood_volume_monte_carlo_and_bound():
    for X, exact_bound in [(np.zeros((2, 2)), 1.0), (np.eye(2), 3.0), (np.diag([10.0, 0.0]), 11.0)]:
        vol, bound = subdet.neighborhood_volume_bound(X, 200_000, seed=2)
        assert bound == pytest.approx(exact_bound)
        assert vol == pytest.approx(subdet.minkowski_volume_exact(X), rel=0.03)
        assert vol <= subdet.neighborhood_volume_constant(2) * bound


def test_basis_reduction_examples():
    br = subdet.basis_reduction(np.eye(3), [1, 1, 1], [1, 1, 1])
    assert np.abs(br.w).max() <= math.sqrt(3) + 1e-12
    br = subdet.basis_reduction(np.eye(2), [1, 2], [1e9, 1e9])
    assert np.linalg.norm(br.w, axis=0).max() <= math.sqrt(2) * 2 + 1e-9
    with pytest.raises(ValueError):
        subdet.basis_reduction([[1, 2], [2, 4]], [1, 1], [1, 1])


def test_basis_reduction_random_inclusion():
    g = np.random.default_rng(5)
    v = g.normal(size=(3, 3))
    Y, Z = g.uniform(0.5, 3, 3), g.uniform(0.5, 3, 3)
    br = subdet.basis_reduction(v, Y, Z)
    assert br.max_entry_ratio <= br.entry_constant + 1e-9
    assert subdet.basis_inclusion_check(v, Y, Z, br, 1000, seed=1) <= br.inclusion_constant + 1e-9


def test_voli_examples():
    M = [[0], [0], [3]]
    assert subdet.voli_bound(M, 0.0, 2.0, [2.0, 1.0], 1.0) == 1.0
    with pytest.raises(PivotTooSmall, match="last-row pivot too small"):
        subdet.voli_bound([[3], [0], [0]], 1.0, 2.0, [2.0, 1.0], 1.0)
    M = [[1, 0], [0, 1], [2, 0]]
    tau = subdet.tau_profile(M, 0.5)
    mu = [3.0, 2.0]
    W = subdet.voli_matrix(M, 0.5, mu)
    assert np.allclose(W, tau[1:, None] / np.array(mu)[None, :])


def test_voli_measure_within_bound():
    M = np.array([[1.0, 0.2], [0.3, 1.0], [2.0, 0.5]])
    mu = [2.0, 1.0]
    bound = subdet.voli_bound(M, 1.0, 2.0, mu, 1.0)
    est, err = subdet.voli_measure_mc(M, 1.0, 2.0, mu, 1.0, 20_000, seed=3)
    assert est <= 50 * bound


matrices = arrays(np.int64, st.tuples(st.integers(1, 4), st.integers(1, 5)), elements=st.integers(-6, 6))


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_sigma_subdet_correspondence(M):
    prof = subdet.profile(M)
    assert prof.within_constants()


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_exact_and_float_minors_agree(M):
    exact = subdet.all_max_subdets(M)
    approx = subdet.batch_max_subdets_float(M[None].astype(float))[0]
    assert np.allclose([float(x) for x in exact], approx, rtol=1e-9, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(matrices)
def test_rearrangement_postcondition_property(M):
    p, q = M.shape
    c = float(subdet.rearrangement_constant(p, q))
    perm = subdet.rearrange_columns(M)
    assert sorted(perm) == list(range(q))
    Mp = M[:, perm]
    for ell in range(1, min(p, q) + 1):
        for k in range(1, ell + 1):
            assert float(subdet.max_subdet_prefix(Mp, k, ell)) >= c * float(subdet.max_subdet(M, k)) * (1 - 1e-9)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (2, 2), elements=st.floats(-3, 3)))
def test_neighborhood_volume_bounded_by_subdets(X):
    vol = subdet.minkowski_volume_exact(X)
    bound = 1 + sum(float(subdet.max_subdet(X, k)) for k in (1, 2))
    assert vol <= subdet.neighborhood_volume_constant(2) * bound * (1 + 1e-12)
