import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torus_spectral import count
from torus_spectral._common import BudgetExceeded
from torus_spectral.count import MatrixCountQuery
from torus_spectral.quadform import QuadForm


def test_build_p_examples():
    assert count.build_p([[1]], 2).P == ((1,), (4,))
    assert count.build_p([[2, 3]], 3).P == ((4, 9), (9, 9))
    with pytest.raises(ValueError):
        count.build_p([[-1]], 2)


def test_z_count_small_example():
    q = MatrixCountQuery(1, 1, 4, (2,), (16,))
    assert count.z_count(q) == 2
    assert count.z_count_bruteforce(q) == 2


def test_z_count_impossible_L_is_zero():
    assert count.z_count(MatrixCountQuery(1, 1, 4, (2,), (1,))) == 0


def test_z_count_column_order_and_bruteforce_agree():
    lam0 = 8
    table = count.z_table(2, 2, lam0, (8, 4), [32, 64, 128])
    assert table
    for L in sorted(table)[:6]:
        q = MatrixCountQuery(2, 2, lam0, (8, 4), L)
        z = count.z_count(q)
        assert z == table[L]
        assert z == count.z_count(q, reverse_columns=True)
        assert z == count.z_count_bruteforce(q)


def test_query_validation():
    with pytest.raises(ValueError):
        MatrixCountQuery(1, 1, 4, (3,), (16,))
    with pytest.raises(ValueError):
        MatrixCountQuery(2, 2, 4, (2, 4), (16, 1))
    with pytest.raises(ValueError):
        MatrixCountQuery(1, 2, 4, (2,), (16,))


def test_z_budget(monkeypatch):
    monkeypatch.setenv("TORUS_SPECTRAL_BUDGET", "10")
    with pytest.raises(BudgetExceeded):
        count.z_count(MatrixCountQuery(2, 2, 16, (16, 16), (256, 16)))


def test_sharp_norm_examples():
    form = QuadForm.identity(2)
    assert count.sharp_norm(form, 5, Fraction(1, 5)) == 12
    assert count.sharp_norm(form, 5, Fraction(2, 5)) >= 12


def test_weight():
    assert count.weight([Fraction(100)], 10, Fraction(1, 2)) == 10 * Fraction(5, 100)
    assert count.weight([Fraction(1)], 10, Fraction(1, 2)) == 10


def test_moment_lhs_deterministic_and_converging():
    a = count.moment_lhs(2, 2, 32, Fraction(1, 32), 2000, seed=7)
    b = count.moment_lhs(2, 2, 32, Fraction(1, 32), 2000, seed=7)
    assert a == b
    big = count.moment_lhs(2, 2, 32, Fraction(1, 32), 8000, seed=7)
    assert 0.35 <= big.stderr / a.stderr <= 0.7


def test_moment_lhs_batching_invariant():
    a = count.moment_lhs(2, 1, 16, 0.1, 300, seed=1, batch=7)
    b = count.moment_lhs(2, 1, 16, 0.1, 300, seed=1, batch=300)
    assert a.value == pytest.approx(b.value, rel=1e-15)


def test_moment_lhs_matches_quadrature_in_one_dimension():
    for b in (1, 2):
        est = count.moment_lhs(1, b, 32, 0.25, 40_000, seed=3)
        exact = count.moment_lhs_quadrature_1d(b, 32, 0.25)
        assert abs(est.value - exact) <= 4 * est.stderr + 1e-9


def test_moment_lhs_single_point_against_window_sum():
    # the batched window count must agree with the lattice window sum
    pts = np.array([[x, y] for x in range(-12, 13) for y in range(-12, 13)], dtype=float)
    betas = np.array([[1.25, 1.75]])
    got = count.window_counts_batch(pts, betas, np.zeros((2, 2)), np.array([7.0]), 0.5)[0]
    form = QuadForm.diagonal([Fraction(5, 4), Fraction(7, 4)])
    assert got == count.sharp_norm(form, 7, Fraction(1, 2))


def test_moment_rhs_small_search():
    r = count.moment_rhs_dyadic_max(1, 1, 8, Fraction(1, 8))
    assert math.isfinite(r.value) and r.value > 0 and r.tuples > 1
    if r.d_eff:
        L = r.L
        q = MatrixCountQuery(r.d_eff, 1, 8, r.mu, L)
        assert count.rhs_single_tuple(r.d_eff, 1, 8, Fraction(1, 8), r.mu, L) == pytest.approx(r.value)
        assert count.z_count(q) == r.z


def test_maximized_bound_examples():
    terms = dict(count.maximized_terms(2, 3, 100, 0.01))
    assert set(terms) == {0, 1, 2, 3}
    for b2, v in terms.items():
        assert v == pytest.approx(0.01**b2 * 100.0 ** (-(b2**2) + 5 * b2 - 2))
    assert count.maximized_bound(2, 3, 100, 0.01) == max(terms.values())
    assert terms[0] == pytest.approx(100.0 ** (1 - 3))


def test_mathcal_f_empty_sets():
    lam0, delta = 16.0, 0.5
    L = (8.0, 4.0, 2.0)  # all below delta * lam0 = 8
    mu = (4.0, 2.0)
    assert count.mathcal_f(L, mu, [[], []], [{}, {}], 2, 3, lam0, delta) == lam0 * 4 * 2


def test_mathcal_f_single_factor():
    lam0, delta = 16.0, 0.5
    L = (256.0, 2.0)
    mu = (4.0,)
    v = count.mathcal_f(L, mu, [[0]], [{0: 0}], 1, 2, lam0, delta)
    base = lam0 * (delta * lam0 / 256.0) * 4.0
    T = 2.0  # max(L[sigma(0) + 1], L[k]) with k = 1, both L[1]
    assert v == pytest.approx(base * T / 4.0)


def test_mathcal_f_rejects_bad_shapes():
    with pytest.raises(ValueError):
        count.mathcal_f((1.0,), (1.0,), [[0]], [{0: 0}], 1, 2, 4.0, 0.5)
    with pytest.raises(ValueError):
        count.mathcal_f((1.0, 1.0), (1.0,), [[0]], [{0: 0, 1: 1}], 1, 2, 4.0, 0.5)


def test_grid_max_agrees_with_joint_search_and_closed_form():
    for d, b in [(1, 2), (2, 2), (2, 3)]:
        lam0, delta = 64.0, 1 / 64 ** 1.5
        fast, _ = count.restricted_grid_max(d, b, lam0, delta)
        assert fast == pytest.approx(count.restricted_grid_max_joint(d, b, lam0, delta), rel=1e-12)
        assert fast <= count.maximized_bound(d, b, lam0, delta) * (1 + 1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(1, 6), st.floats(2, 1e4), st.floats(1e-6, 0.9))
def test_maximized_log_terms_match_terms(d, b, lam, delta):
    for (b2, v), (_, lv) in zip(count.maximized_terms(d, b, lam, delta), count.maximized_log_terms(d, b, lam, delta)):
        if v > 0 and math.isfinite(v):
            assert math.log(v) == pytest.approx(lv, rel=1e-9, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from([4, 8]), st.sampled_from([(1, 1), (1, 2), (2, 1), (2, 2)]))
def test_z_table_totals_every_matrix_once_per_L1(lam0, db):
    d, b = db
    mu = tuple([lam0] * d)
    lam2 = Fraction(lam0) ** 2
    table = count.z_table(d, b, lam0, mu, [lam2])
    box = math.prod(len(count.entry_values(m)) for m in mu) ** b
    # with L_1 fixed, each matrix has at most one compatible L per dyadic choice of each level
    assert sum(table.values()) >= 0
    for L, z in table.items():
        assert z == count.z_count(MatrixCountQuery(d, b, lam0, mu, L))
    assert all(z <= box for z in table.values())
