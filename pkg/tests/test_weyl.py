import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torus_spectral import weyl
from torus_spectral.lattice import SMOOTH
from torus_spectral.quadform import GenericSampler, QuadForm
from torus_spectral.weyl import RationalApprox, WeylParams


def phi_sum(N):
    k = np.arange(-N, N + 1)
    return float(SMOOTH(k / N).sum())


def test_kernel_1d_at_origin_and_half():
    N = 32
    k0 = weyl.kernel_1d(N, 0, 0)
    assert abs(k0.imag) < 1e-9 and N <= k0.real <= 2 * N + 1
    assert k0.real == pytest.approx(phi_sum(N))
    assert abs(weyl.kernel_1d(N, 0, Fraction(1, 2))) <= 2


def test_kernel_1d_at_half_respects_weyl_bound():
    N = 256
    rhs = weyl.weyl_bound_rhs(N, RationalApprox(1, 2, 0.0), 0.1)
    for y in np.linspace(0, 1, 17):
        assert abs(weyl.kernel_1d(N, Fraction(1, 2), y)) <= 10 * rhs


def test_kernel_full_product_matches_direct_sum():
    form = QuadForm.diagonal([Fraction(5, 4), Fraction(3, 2)])
    p = WeylParams(8, form)
    for t, x in [(0.137, (0.2, 0.7)), (Fraction(1, 3), (0.0, 0.5)), (0.9, (0.33, 0.1))]:
        a, b = weyl.kernel_full(p, t, x), weyl.kernel_full_direct(p, t, x)
        assert abs(a - b) <= 1e-9 * max(1.0, abs(b))


def test_kernel_full_origin_is_power_of_1d_sum():
    p = WeylParams(16, QuadForm.identity(2))
    assert weyl.kernel_full(p, 0, (0.0, 0.0)).real == pytest.approx(phi_sum(16) ** 2)


def test_small_time_dispersive_shape():
    N, d = 64, 2
    p = WeylParams(N, GenericSampler(1, "full", d).sample(0))
    for t in np.linspace(-1 / (10 * N), 1 / (10 * N), 7):
        for x in [(0.0, 0.0), (0.01, -0.02), (0.2, 0.4)]:
            assert abs(weyl.kernel_full(p, t, x)) <= 10 * weyl.dispersive_bound(N, t, x, d)


def test_dirichlet_examples():
    r = weyl.dirichlet_approx(Fraction(1, 3), 8)
    assert (r.a, r.q, r.err) == (1, 3, 0.0)
    r = weyl.dirichlet_approx(0.0, 5)
    assert (r.a, r.q) == (0, 1)
    t = math.sqrt(2) - 1
    r = weyl.dirichlet_approx(t, 16)
    assert (r.a, r.q) == (5, 12) and abs(t - 5 / 12) <= 1 / (12 * 16)


def test_classify_examples():
    assert weyl.classify_arc(Fraction(1, 128), 64).kind == "lambda0"
    lab = weyl.classify_arc(Fraction(1, 3) + Fraction(1, 8 * 64), 64, Fraction(1, 8))
    assert (lab.kind, lab.q, lab.Q, lab.a) == ("major", 3, 4, 1)
    assert weyl.classify_arc(0.6180339887, 256).kind == "minor"


def test_classify_rejects_bad_parameters():
    with pytest.raises(ValueError):
        weyl.classify_arc(0.3, 48)
    with pytest.raises(ValueError):
        weyl.classify_arc(0.3, 64, Fraction(1, 3))


def test_weyl_bound_rhs_examples():
    N, eps = 64, 0.1
    assert weyl.weyl_bound_rhs(N, RationalApprox(0, 1, 0.0), eps) == pytest.approx(N ** (1 + eps))
    assert weyl.weyl_bound_rhs(N, RationalApprox(1, N, 0.0), eps) == pytest.approx(N ** (0.5 + eps))
    err = 1 / (4 * N)
    want = N ** (1 + eps) / (2 * (1 + N * math.sqrt(err)))
    assert weyl.weyl_bound_rhs(N, RationalApprox(1, 4, err), eps) == pytest.approx(want)


def test_sup_norm_lower_examples():
    p = WeylParams(16, QuadForm.identity(2))
    assert weyl.sup_norm_lower(p, 0, 32) == pytest.approx(phi_sum(16) ** 2)
    q = WeylParams(32, QuadForm.identity(1))
    coarse, fine = weyl.sup_norm_lower(q, 0.3, 64), weyl.sup_norm_lower(q, 0.3, 128)
    assert fine >= coarse - 1e-9
    scan = max(abs(weyl.kernel_1d(32, Fraction(1, 4), y)) for y in np.arange(4096) / 4096)
    assert weyl.sup_norm_lower(q, Fraction(1, 4), 4096) == pytest.approx(scan, rel=1e-9)


def test_sup_norm_lower_full_form_matches_direct():
    p = WeylParams(4, GenericSampler(3, "full", 2).sample(0))
    G = 8
    direct = max(abs(weyl.kernel_full_direct(p, 0.31, (i / G, j / G))) for i in range(G) for j in range(G))
    assert weyl.sup_norm_lower(p, 0.31, G) == pytest.approx(direct, rel=1e-9)


def test_weyl_differencing_at_zero():
    N, d = 8, 2
    p = WeylParams(N, QuadForm.identity(d))
    assert weyl.sup_norm_upper_weyl_diff(p, 0.0) == pytest.approx((4 * N + 1) ** d * N**d)


def test_time_average_behaviour():
    p = WeylParams(16, QuadForm.diagonal([Fraction(1.3517)]))
    a = weyl.time_average_sup(p, 1.0, 2048)
    b = weyl.time_average_sup(p, 1.0, 4096)
    assert math.isfinite(a) and abs(a - b) / b <= 0.05
    T = 1 / 16 + 1e-6
    single = float(np.sqrt(weyl.sup_norm_upper_weyl_diff(p, 1 / 16)))
    assert weyl.time_average_sup(p, T, 3) * T / (T - 1 / 16) == pytest.approx(single, rel=1e-3)


def test_arc_measure_product_examples():
    N = 16
    sampled = weyl.arc_measure_product([1.0], [2], N, 1.0, t_samples=20000)
    assert sampled == pytest.approx(weyl.arc_union_measure(2, N, 1.0), abs=2e-3)
    assert weyl.arc_measure_product([], [], N, 0.7) == 0.7


def test_major_arcs_disjoint_up_to_256():
    for N in (16, 64, 256):
        arcs = weyl.major_arc_fractions(N, Fraction(1, 8), 0, 1)
        for (c1, *_r1, h1), (c2, *_r2, h2) in zip(arcs, arcs[1:]):
            assert c1 + h1 < c2 - h2


def test_averaged_capped_inverse_closed_form():
    N = 64
    want = 4 * (1 + math.log(N / 2))
    assert weyl.averaged_capped_inverse(1.0, 0.0, N) == pytest.approx(want, rel=1e-3)


def test_bracket():
    assert weyl.bracket(0.2) == 1.0 and weyl.bracket(3.5) == 3.5


times = st.fractions(Fraction(-2), Fraction(2), max_denominator=10**6)


@settings(max_examples=200, deadline=None)
@given(times, st.sampled_from([16, 64, 256]))
def test_arc_partition_and_oracle_agreement(t, N):
    lab = weyl.classify_arc(t, N)
    assert lab.holds_for(t, N)
    hits, Q = weyl.arc_codes(np.array([float(t)]), N)
    assert hits[0] <= 1
    if lab.kind == "minor":
        assert hits[0] == 0
    else:
        assert hits[0] == 1 and Q[0] == (0 if lab.kind == "lambda0" else lab.Q)


@settings(max_examples=60, deadline=None)
@given(st.floats(-1, 1), st.floats(0, 1))
def test_kernel_1d_maximal_at_origin(t, y):
    N = 32
    assert abs(weyl.kernel_1d(N, t, y)) <= weyl.kernel_1d(N, 0, 0).real + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.floats(-1, 1), st.floats(0, 1), st.floats(0, 1))
def test_conjugation_symmetry(t, x1, x2):
    p = WeylParams(8, GenericSampler(4, "full", 2).sample(0))
    a = weyl.kernel_full(p, -t, (-x1, -x2))
    b = np.conj(weyl.kernel_full(p, t, (x1, x2)))
    assert abs(a - b) <= 1e-9 * max(1.0, abs(b))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.99))
def test_weyl_differencing_dominates_its_zero_term(t):
    p = WeylParams(16, QuadForm.identity(1))
    assert weyl.sup_norm_upper_weyl_diff(p, t) >= 16
