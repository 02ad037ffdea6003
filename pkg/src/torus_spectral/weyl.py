"""Truncated Weyl sums, rational approximation and the major/minor arc split.

Sign conventions follow the definitions used throughout the package::

    kernel_1d(N, t, y)  = sum_k exp(2 pi i (y k + k^2 t)) phi(k/N)
    kernel_full(p, t, x) = sum_k exp(-2 pi i (x.k + t Q(k))) prod_i phi(k_i/N)

so for a diagonal form ``kernel_full`` is the product of the complex
conjugates of ``kernel_1d(N, beta_i t, x_i)``.

Times ``t`` may be floats or :class:`fractions.Fraction`; rational times give
exact phases, which matters when evaluating exactly at ``a/q``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._common import as_fraction, check_budget, is_power_of_two
from .lattice import SMOOTH, CutoffSpec
from .quadform import QuadForm

KERNEL_BUDGET = 10_000_000
DEFAULT_C0 = Fraction(1, 8)
DEFAULT_EPS = 0.1


@dataclass(frozen=True)
class WeylParams:
    N: int
    form: QuadForm
    phi: CutoffSpec = SMOOTH

    def __post_init__(self):
        if not (is_power_of_two(self.N) and self.N >= 2):
            raise ValueError("N must be a power of 2 and at least 2")

    @property
    def d(self) -> int:
        return self.form.dim


@dataclass(frozen=True)
class RationalApprox:
    a: int
    q: int
    err: float

    def __post_init__(self):
        if self.q < 1 or math.gcd(self.a, self.q) != 1:
            raise ValueError("approximation must be a reduced fraction with q >= 1")


@dataclass(frozen=True)
class ArcLabel:
    kind: str
    Q: int = 0
    a: int = 0
    q: int = 0

    def __post_init__(self):
        if self.kind not in ("lambda0", "major", "minor"):
            raise ValueError(f"unknown arc kind {self.kind!r}")
        if self.kind == "major":
            if self.a == 0 or math.gcd(self.a, self.q) != 1:
                raise ValueError("major arc needs a reduced fraction with a != 0")
            if not (is_power_of_two(self.Q) and self.Q // 2 <= self.q < self.Q):
                raise ValueError("major arc needs Q/2 <= q < Q with Q dyadic")

    def holds_for(self, t, N: int) -> bool:
        """Re-check the defining inequality against the time that produced the label."""
        t = as_fraction(t)
        if self.kind == "lambda0":
            return abs(t) <= Fraction(1, N)
        if self.kind == "major":
            return abs(t - Fraction(self.a, self.q)) <= Fraction(1, N * self.Q)
        return True


# --- sums --------------------------------------------------------------------


def _frac_part_times(t, ints: np.ndarray) -> np.ndarray:
    """(t * ints) mod 1 as floats, exact when t is rational."""
    if isinstance(t, Fraction):
        r = (ints.astype(object) * t.numerator) % t.denominator
        return np.asarray(r, dtype=float) / t.denominator
    return np.mod(float(t) * ints.astype(float), 1.0)


def _coeffs_1d(N: int, t, phi: CutoffSpec):
    k = np.arange(-N, N + 1, dtype=np.int64)
    w = phi(k / N)
    phase = _frac_part_times(t, k * k)
    return k, w * np.exp(2j * np.pi * phase)


def kernel_1d(N: int, t, y, phi: CutoffSpec = SMOOTH) -> complex:
    """One-dimensional truncated Weyl sum at (t, y)."""
    if N < 2:
        raise ValueError("N must be at least 2")
    k, c = _coeffs_1d(N, t, phi)
    py = _frac_part_times(y, k) if isinstance(y, Fraction) else np.mod(float(y) * k, 1.0)
    return complex(np.sum(c * np.exp(2j * np.pi * py)))


def kernel_1d_grid(N: int, t, grid: int, phi: CutoffSpec = SMOOTH) -> np.ndarray:
    """kernel_1d(N, t, j/grid) for j = 0..grid-1, evaluated exactly by FFT."""
    k, c = _coeffs_1d(N, t, phi)
    folded = np.zeros(grid, dtype=complex)
    np.add.at(folded, np.mod(k, grid), c)
    return np.fft.ifft(folded) * grid


def kernel_full(p: WeylParams, t, x: Sequence[float]) -> complex:
    """d-dimensional truncated Weyl sum; product of 1-D sums for diagonal forms."""
    if len(x) != p.d:
        raise ValueError("x must have length d")
    if p.form.kind == "diagonal":
        out = 1.0 + 0j
        for b, xi in zip(p.form.diag, x):
            tb = b * as_fraction(t) if isinstance(t, Fraction) else float(b) * float(t)
            out *= np.conj(kernel_1d(p.N, tb, xi, p.phi))
        return complex(out)
    return kernel_full_direct(p, t, x)


def _grid_coeffs(p: WeylParams, t) -> np.ndarray:
    N, d = p.N, p.d
    check_budget((2 * N + 1) ** d, KERNEL_BUDGET, "Weyl sum terms")
    axes = np.arange(-N, N + 1)
    K = np.stack(np.meshgrid(*([axes] * d), indexing="ij"), axis=-1).reshape(-1, d)
    w = np.prod(p.phi(K / N), axis=1)
    Qk = np.einsum("ij,jk,ik->i", K.astype(float), p.form.matrix, K.astype(float))
    phase = np.mod(float(t) * Qk, 1.0)
    return K, w * np.exp(-2j * np.pi * phase)


def kernel_full_direct(p: WeylParams, t, x: Sequence[float]) -> complex:
    """Direct summation over the (2N+1)^d box."""
    K, c = _grid_coeffs(p, t)
    xk = K.astype(float) @ np.asarray(x, dtype=float)
    return complex(np.sum(c * np.exp(-2j * np.pi * np.mod(xk, 1.0))))


# --- rational approximation and arcs ---------------------------------------


def convergents(t):
    """Continued-fraction convergents (p, q) of t, in order."""
    x = as_fraction(t)
    p0, q0, p1, q1 = 0, 1, 1, 0
    while True:
        a = math.floor(x)
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        yield p1, q1
        frac = x - a
        if frac == 0:
            return
        x = 1 / frac


def dirichlet_approx(t, N: int) -> RationalApprox:
    """Last convergent a/q of t with q <= N; then |t - a/q| <= 1/(qN)."""
    if N < 1:
        raise ValueError("N must be positive")
    best = None
    for a, q in convergents(t):
        if q > N:
            break
        best = (a, q)
    a, q = best
    return RationalApprox(a, q, float(abs(as_fraction(t) - Fraction(a, q))))


def dyadic_bucket(q: int) -> int:
    """The power of two Q with Q/2 <= q < Q."""
    return 1 << int(q).bit_length()


def _check_c0(N: int, c0) -> Fraction:
    c0 = as_fraction(c0)
    if not is_power_of_two(N):
        raise ValueError("N must be a power of 2")
    if c0 > Fraction(1, 4) or c0 <= 0 or not is_power_of_two(c0.denominator) or c0.numerator != 1:
        raise ValueError("c0 must be a power of 2 no larger than 1/4")
    return c0


def classify_arc(t, N: int, c0=DEFAULT_C0) -> ArcLabel:
    """Label t as lambda0, a major arc around a/q, or minor.

    A fraction a/q with q < c0*N whose arc contains t approximates t to within
    1/(2q^2), so it is a continued-fraction convergent of t; scanning the
    convergents therefore finds the arc whenever there is one.
    """
    c0 = _check_c0(N, c0)
    t = as_fraction(t)
    if abs(t) <= Fraction(1, N):
        return ArcLabel("lambda0")
    qmax = c0 * N
    for a, q in convergents(t):
        if q >= qmax:
            break
        if a == 0:
            continue
        Q = dyadic_bucket(q)
        if abs(t - Fraction(a, q)) <= Fraction(1, N * Q):
            return ArcLabel("major", Q, a, q)
    return ArcLabel("minor")


def major_arc_fractions(N: int, c0=DEFAULT_C0, lo: float = 0.0, hi: float = 1.0):
    """All reduced a/q (a != 0, q < c0 N) whose arcs meet [lo, hi], sorted by centre."""
    c0 = _check_c0(N, c0)
    out = []
    for q in range(1, math.ceil(c0 * N)):
        Q = dyadic_bucket(q)
        half = Fraction(1, N * Q)
        for a in range(math.floor((lo - 1) * q), math.ceil((hi + 1) * q) + 1):
            if a == 0 or math.gcd(a, q) != 1:
                continue
            c = Fraction(a, q)
            if c + half >= lo and c - half <= hi:
                out.append((c, a, q, Q, half))
    out.sort()
    return out


def arc_codes(ts: np.ndarray, N: int, c0=DEFAULT_C0):
    """Vectorised arc membership by scanning denominators.

    Returns ``(hits, Q)``: the number of arcs (lambda0 included) containing each
    t, and the bucket Q of the last major arc hit (0 for lambda0, -1 if none).
    """
    c0 = _check_c0(N, c0)
    ts = np.asarray(ts, dtype=float)
    hits = (np.abs(ts) <= 1.0 / N).astype(int)
    Qs = np.where(hits > 0, 0, -1)
    q = 1
    while q < c0 * N:
        Q = dyadic_bucket(q)
        a = np.round(ts * q)
        ok = (a != 0) & (np.gcd(a.astype(np.int64), q) == 1) & (np.abs(ts - a / q) <= 1.0 / (N * Q))
        hits += ok
        Qs = np.where(ok, Q, Qs)
        q += 1
    return hits, Qs


def weyl_bound_rhs(N: int, approx: RationalApprox, eps: float = DEFAULT_EPS) -> float:
    return N ** (1 + eps) / (math.sqrt(approx.q) * (1 + N * math.sqrt(approx.err)))


# --- sup norms and time averages --------------------------------------------


def sup_norm_lower(p: WeylParams, t, grid_per_dim: int) -> float:
    """max |kernel_full(t, .)| over the uniform grid (1/G) Z^d / Z^d."""
    G = int(grid_per_dim)
    if G < 2:
        raise ValueError("grid_per_dim must be at least 2")
    if p.form.kind == "diagonal":
        out = 1.0
        for b in p.form.diag:
            tb = b * t if isinstance(t, Fraction) else float(b) * float(t)
            out *= float(np.abs(kernel_1d_grid(p.N, tb, G, p.phi)).max())
        return out
    check_budget(G**p.d, KERNEL_BUDGET, "sup-norm grid")
    K, c = _grid_coeffs(p, t)
    folded = np.zeros((G,) * p.d, dtype=complex)
    np.add.at(folded, tuple(np.mod(K, G).T), c)
    return float(np.abs(np.fft.fftn(folded)).max())


def _dist_to_int(x: np.ndarray) -> np.ndarray:
    return np.abs(x - np.round(x))


def _capped_inverse(x: np.ndarray, N: int) -> np.ndarray:
    dist = _dist_to_int(x)
    out = np.full(dist.shape, float(N))
    np.divide(1.0, dist, out=out, where=dist > 1.0 / N)
    return out


def sup_norm_upper_weyl_diff(p: WeylParams, t) -> float:
    """sum over |n|_inf <= 2N of prod_i min(1/||t Q_i(n)||, N), Q_i(n) = (beta n)_i.

    This Weyl-differencing sum bounds the *square* of the sup norm of
    ``kernel_full(t, .)`` up to a constant; see :func:`time_average_sup`.
    """
    N, t = p.N, float(t)
    n = np.arange(-2 * N, 2 * N + 1, dtype=float)
    if p.form.kind == "diagonal":
        return float(np.prod([_capped_inverse(t * float(b) * n, N).sum() for b in p.form.diag]))
    check_budget((4 * N + 1) ** p.d, KERNEL_BUDGET, "Weyl differencing terms")
    grid = np.stack(np.meshgrid(*([n] * p.d), indexing="ij"), axis=-1).reshape(-1, p.d)
    lin = grid @ p.form.matrix.T
    return float(np.prod(_capped_inverse(t * lin, N), axis=1).sum())


def _time_grid(N: int, T: float, t_samples: int) -> np.ndarray:
    if not T > 1.0 / N:
        raise ValueError("T must exceed 1/N")
    if t_samples < 2:
        raise ValueError("need at least two time samples")
    return np.linspace(1.0 / N, T, t_samples)


def sup_profile(p: WeylParams, ts: np.ndarray, mode: str, grid_per_dim: int | None = None) -> np.ndarray:
    """Sup-norm proxy at each time: grid lower bound, or sqrt of the Weyl-differencing sum."""
    if mode == "lower":
        G = grid_per_dim or 4 * p.N
        return np.array([sup_norm_lower(p, t, G) for t in ts])
    if mode == "upper":
        return np.sqrt([sup_norm_upper_weyl_diff(p, t) for t in ts])
    raise ValueError("mode must be 'lower' or 'upper'")


def time_average_sup(p: WeylParams, T: float, t_samples: int, mode: str = "upper",
                     grid_per_dim: int | None = None) -> float:
    """Trapezoid estimate of (1/T) * integral over [1/N, T] of the sup-norm proxy.

    In ``upper`` mode the integrand is the square root of the Weyl-differencing
    sum, which is the sup-norm scale; ``lower`` uses the grid maximum.
    """
    ts = _time_grid(p.N, T, t_samples)
    vals = sup_profile(p, ts, mode, grid_per_dim)
    return float(np.trapezoid(vals, ts) / T)


def arc_measure_product(betas: Sequence[float], Qs: Sequence[int], N: int, T: float,
                        t_samples: int | None = None, c0=DEFAULT_C0) -> float:
    """Measure of {t in [0, T] : beta_i t lies on a major arc of bucket Q_i for all i}.

    Midpoint sampling; the default resolution is 32 N T points.
    """
    if len(betas) != len(Qs):
        raise ValueError("betas and Qs must have equal length")
    for Q in Qs:
        if not is_power_of_two(Q) or Q > N:
            raise ValueError("each Q must be a power of 2 with Q <= N")
    if not Qs:
        return float(T)
    n = t_samples or max(2, int(math.ceil(32 * N * T)))
    h = T / n
    hit = 0
    for j in range(n):
        t = (j + 0.5) * h
        for b, Q in zip(betas, Qs):
            lab = classify_arc(float(b) * t, N, c0)
            if lab.kind != "major" or lab.Q != Q:
                break
        else:
            hit += 1
    return hit * h


def arc_union_measure(Q: int, N: int, T: float, beta: float = 1.0, c0=DEFAULT_C0) -> float:
    """Exact measure of {t in [0, T] : beta t in a bucket-Q major arc} (single factor)."""
    lo, hi = 0.0, float(beta) * T
    total = Fraction(0)
    for c, a, q, QQ, half in major_arc_fractions(N, c0, lo, hi):
        if QQ != Q:
            continue
        left, right = max(c - half, as_fraction(lo)), min(c + half, as_fraction(hi))
        if right > left:
            total += right - left
    return float(total) / float(beta)


# --- checks of the small-time and averaging estimates -------------------------


def torus_norm(x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(_dist_to_int(x)))


def dispersive_bound(N: int, t: float, x: Sequence[float], d: int) -> float:
    """(N/(|t|N + 1/N))^{d/2} (1 + r)^{-2d}, r = |x|/(|t|N + 1/N).

    The polynomial factor stands in for the unspecified rapidly decaying profile.
    """
    width = abs(float(t)) * N + 1.0 / N
    r = torus_norm(x) / width
    return (N / width) ** (d / 2) * (1.0 + r) ** (-2 * d)


def bracket(r: float) -> float:
    """<r> = max(1, r)."""
    return max(1.0, float(r))


def averaged_capped_inverse(lam: float, A: float, N: int, samples: int = 200_001) -> float:
    """integral over h in [-1, 1] of min(1/||lam h + A||, N), midpoint rule."""
    h = -1.0 + (np.arange(samples) + 0.5) * (2.0 / samples)
    return float(_capped_inverse(lam * h + A, N).mean() * 2.0)
