"""Exact lattice point counts in ellipsoids and thin shells.

All leading coordinates are enumerated with float interval bounds that are
deliberately widened, so they only ever over-approximate.  The last coordinate
is solved in closed form from a one-variable quadratic; float roots are used
unless they fall close to an integer, in which case the interval is recomputed
in exact integer arithmetic.

Shell convention: the shell of radius ``lam`` and width ``delta`` is the
half-open set ``(lam - delta)^2 <= Q(n) < (lam + delta)^2``.  With ``N`` counting
``Q(n) < lam^2`` this makes ``N(lam + delta) - N(lam - delta)`` equal the shell
size for every form, including rational forms with points on the boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from ._common import as_fraction, check_budget
from .quadform import QuadForm

PREFIX_BUDGET = 50_000_000
_BLOCK = 1 << 15


@dataclass(frozen=True)
class CutoffSpec:
    """Even cutoff: 1 on [-1/2, 1/2], 0 outside (-1, 1).

    ``kind="indicator"`` is the indicator of [-1, 1) in the shell variable (see
    the module docstring); ``kind="smooth"`` joins 1 and 0 with the quintic
    smoothstep, which is C^2 at the knots.
    """

    kind: str = "indicator"
    degree: int = 5

    def __post_init__(self):
        if self.kind not in ("indicator", "smooth"):
            raise ValueError("cutoff kind must be 'indicator' or 'smooth'")
        if self.kind == "smooth" and self.degree != 5:
            raise ValueError("only the quintic transition is implemented")

    def __call__(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        if self.kind == "indicator":
            return (x <= 1.0).astype(float)
        s = np.clip(2.0 * x - 1.0, 0.0, 1.0)
        return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


INDICATOR = CutoffSpec("indicator")
SMOOTH = CutoffSpec("smooth")


@dataclass(frozen=True)
class ShellQuery:
    form: QuadForm
    lam: Fraction
    delta: Fraction

    def __post_init__(self):
        lam, delta = as_fraction(self.lam), as_fraction(self.delta)
        if not 0 < delta < lam:
            raise ValueError("shell query needs 0 < delta < lambda")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "delta", delta)

    @property
    def inner_sq(self) -> Fraction:
        return (self.lam - self.delta) ** 2

    @property
    def outer_sq(self) -> Fraction:
        return (self.lam + self.delta) ** 2


@dataclass(frozen=True)
class CountResult:
    count: int
    leading: float
    error_term: float
    points_enumerated: int


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def ellipsoid_volume(form: QuadForm) -> float:
    """Volume of {x : Q(x) < 1}."""
    return unit_ball_volume(form.dim) / math.sqrt(float(form.det))


# --- enumeration core -------------------------------------------------------


class _Enumerator:
    """Prefix enumeration plus exact last-coordinate intervals for one form."""

    def __init__(self, form: QuadForm):
        self.form = form
        self.d = form.dim
        beta = form.matrix
        # Schur complements: S[k] gives min over coordinates >= k of Q, as a
        # quadratic form in the first k coordinates.
        self.schur = {}
        for k in range(1, self.d):
            a11, a12, a22 = beta[:k, :k], beta[:k, k:], beta[k:, k:]
            self.schur[k] = a11 - a12 @ np.linalg.solve(a22, a12.T)
        self.schur[self.d] = beta
        self.B, self.den = form.scaled_int

    def prefixes(self, bound_sq: float) -> np.ndarray:
        """All integer prefixes (x_1..x_{d-1}) whose ellipsoid slice may be non-empty."""
        P = np.zeros((1, 0), dtype=np.int64)
        for k in range(1, self.d):
            S = self.schur[k]
            a = S[k - 1, k - 1]
            if k > 1:
                b = P @ S[k - 1, : k - 1]
                c = np.einsum("ij,jk,ik->i", P, S[: k - 1, : k - 1], P)
            else:
                b = np.zeros(len(P))
                c = np.zeros(len(P))
            disc = b * b - a * (c - bound_sq)
            ok = disc > -1e-9 * a * bound_sq - 1e-12
            root = np.sqrt(np.where(ok, np.maximum(disc, 0.0), 0.0))
            pad = 1e-7 * (1.0 + np.abs(b) / a + root / a)
            lo = np.ceil((-b - root) / a - pad).astype(np.int64)
            hi = np.floor((-b + root) / a + pad).astype(np.int64)
            counts = np.where(ok, np.maximum(hi - lo + 1, 0), 0)
            total = int(counts.sum())
            check_budget(total, PREFIX_BUDGET, "prefix enumeration")
            starts = np.repeat(np.cumsum(counts) - counts, counts)
            col = np.repeat(lo, counts) + (np.arange(total) - starts)
            P = np.column_stack([np.repeat(P, counts, axis=0), col])
        return P

    def last_intervals(self, P: np.ndarray, bound: Fraction):
        """Integer intervals [lo, hi] of x_d with Q(prefix, x_d) < bound, per prefix."""
        m = len(P)
        if bound <= 0:
            return np.zeros(m, dtype=np.int64), np.full(m, -1, dtype=np.int64)
        d = self.d
        beta = self.schur[d]
        a = beta[d - 1, d - 1]
        if d > 1:
            b = P @ beta[d - 1, : d - 1]
            c = np.einsum("ij,jk,ik->i", P, beta[: d - 1, : d - 1], P)
        else:
            b = np.zeros(m)
            c = np.zeros(m)
        X = float(bound)
        disc = b * b - a * (c - X)
        root = np.sqrt(np.maximum(disc, 0.0))
        r1 = (-b - root) / a
        r2 = (-b + root) / a
        lo = np.floor(r1).astype(np.int64) + 1
        hi = np.ceil(r2).astype(np.int64) - 1
        scale = b * b + a * np.abs(c) + a * X
        near = lambda r: np.abs(r - np.round(r)) < 1e-7 * (1.0 + np.abs(r))
        flag = (disc <= 1e-6 * scale) | near(r1) | near(r2)
        for i in np.flatnonzero(flag):
            lo[i], hi[i] = self._exact_interval([int(v) for v in P[i]], bound)
        return lo, hi

    def _exact_interval(self, u: list[int], bound: Fraction) -> tuple[int, int]:
        B, den, d = self.B, self.den, self.d
        A = B[d - 1][d - 1]
        Bc = sum(B[d - 1][j] * u[j] for j in range(d - 1))
        C = sum(B[i][j] * u[i] * u[j] for i in range(d - 1) for j in range(d - 1))
        P, R = bound.numerator, bound.denominator
        a, b, c = R * A, R * Bc, R * C - den * P
        f = lambda x: (a * x + 2 * b) * x + c
        xm = (-b) // a
        if f(xm) >= 0 and f(xm + 1) >= 0:
            return 0, -1
        inside = xm if f(xm) < 0 else xm + 1
        s = math.isqrt(max(b * b - a * c, 0))
        lo = min((-b - s) // a, inside)
        while f(lo) < 0:
            lo -= 1
        while f(lo) >= 0:
            lo += 1
        hi = max((-b + s) // a + 1, inside)
        while f(hi) < 0:
            hi += 1
        while f(hi) >= 0:
            hi -= 1
        return lo, hi


def _enumerator(form: QuadForm) -> _Enumerator:
    # cached per form instance; forms are immutable
    cache = form.__dict__.setdefault("_enumerator_cache", {})
    if "e" not in cache:
        cache["e"] = _Enumerator(form)
    return cache["e"]


def count_below(form: QuadForm, bound) -> int:
    """#{n in Z^d : Q(n) < bound} for a rational bound."""
    bound = as_fraction(bound)
    if bound <= 0:
        return 0
    e = _enumerator(form)
    P = e.prefixes(float(bound))
    lo, hi = e.last_intervals(P, bound)
    return int(np.maximum(hi - lo + 1, 0).sum())


def count_window(form: QuadForm, lower, upper) -> int:
    """#{n : lower <= Q(n) < upper}."""
    lower, upper = as_fraction(lower), as_fraction(upper)
    if upper <= lower:
        return 0
    return _window_count(form, lower, upper)


def _window_count(form, lower, upper) -> int:
    e = _enumerator(form)
    P = e.prefixes(float(upper))
    olo, ohi = e.last_intervals(P, upper)
    ilo, ihi = e.last_intervals(P, lower)
    outer = np.maximum(ohi - olo + 1, 0)
    inner = np.maximum(ihi - ilo + 1, 0)
    return int((outer - inner).sum())


def count_points(form: QuadForm, lam) -> int:
    """N(lam) = #{n in Z^d : Q(n) < lam^2}."""
    lam = as_fraction(lam)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return count_below(form, lam * lam)


def count_result(form: QuadForm, lam) -> CountResult:
    lam = as_fraction(lam)
    e = _enumerator(form)
    bound = lam * lam
    P = e.prefixes(float(bound))
    lo, hi = e.last_intervals(P, bound)
    n = int(np.maximum(hi - lo + 1, 0).sum())
    leading = ellipsoid_volume(form) * float(lam) ** form.dim
    return CountResult(n, leading, n - leading, len(P))


def error_term(form: QuadForm, lam) -> float:
    """P(lam) = N(lam) - vol(B_1) lam^d."""
    return count_result(form, lam).error_term


def shell_count(q: ShellQuery) -> int:
    return count_points(q.form, q.lam + q.delta) - count_points(q.form, q.lam - q.delta)


def iter_window_blocks(form: QuadForm, lower, upper) -> Iterator[np.ndarray]:
    """Points with lower <= Q(n) < upper as int64 arrays, lexicographic across blocks."""
    lower, upper = as_fraction(lower), as_fraction(upper)
    if upper <= lower or upper <= 0:
        return
    e = _enumerator(form)
    d = form.dim
    P = e.prefixes(float(upper))
    for s in range(0, len(P), _BLOCK):
        Pb = P[s : s + _BLOCK]
        olo, ohi = e.last_intervals(Pb, upper)
        ilo, ihi = e.last_intervals(Pb, lower)
        inner_empty = ihi < ilo
        # left segment [olo, ilo-1] (or the whole outer interval), right [ihi+1, ohi]
        left_hi = np.where(inner_empty, ohi, ilo - 1)
        right_lo = np.where(inner_empty, ohi + 1, ihi + 1)
        nl = np.maximum(left_hi - olo + 1, 0)
        nr = np.maximum(ohi - right_lo + 1, 0)
        per = nl + nr
        total = int(per.sum())
        if total == 0:
            continue
        starts = np.repeat(np.cumsum(per) - per, per)
        idx = np.arange(total) - starts
        nl_r = np.repeat(nl, per)
        x = np.where(idx < nl_r, np.repeat(olo, per) + idx, np.repeat(right_lo, per) + idx - nl_r)
        pts = np.empty((total, d), dtype=np.int64)
        if d > 1:
            pts[:, :-1] = np.repeat(Pb, per, axis=0)
        pts[:, -1] = x
        yield pts


def iter_shell_blocks(q: ShellQuery) -> Iterator[np.ndarray]:
    return iter_window_blocks(q.form, q.inner_sq, q.outer_sq)


def enumerate_shell(q: ShellQuery) -> Iterator[tuple[int, ...]]:
    """Shell points, one tuple at a time, in lexicographic order."""
    for block in iter_shell_blocks(q):
        for row in block.tolist():
            yield tuple(row)


def quadratic_values(form: QuadForm, pts: np.ndarray) -> np.ndarray:
    """Float values of Q at the rows of ``pts``."""
    pts = np.asarray(pts, dtype=float)
    return np.einsum("ij,jk,ik->i", pts, form.matrix, pts)


def projector_l1linf(q: ShellQuery, cutoff: CutoffSpec = INDICATOR) -> float:
    """Kernel of chi((sqrt(-Laplacian) - lam)/delta) at the origin.

    This is the L^1 -> L^infty norm of the spectral projector.  With the
    indicator cutoff it is the shell count.
    """
    if cutoff.kind == "indicator":
        return float(shell_count(q))
    lam, delta = float(q.lam), float(q.delta)
    parts = []
    for block in iter_shell_blocks(q):
        r = np.sqrt(quadratic_values(q.form, block))
        parts.append(math.fsum(cutoff((r - lam) / delta)))
    return math.fsum(parts)


def window_sum(form: QuadForm, lam, delta, cutoff: CutoffSpec = INDICATOR) -> float:
    """sum_m chi((Q(m) - lam^2) / (delta*lam)), the quadratic-window normalisation.

    The indicator version counts lam^2 - delta*lam <= Q(m) < lam^2 + delta*lam.
    """
    lam, delta = as_fraction(lam), as_fraction(delta)
    lower, upper = lam * lam - delta * lam, lam * lam + delta * lam
    if cutoff.kind == "indicator":
        return float(count_window(form, max(lower, Fraction(0)), upper))
    scale = float(delta * lam)
    center = float(lam * lam)
    parts = [
        math.fsum(cutoff((quadratic_values(form, blk) - center) / scale))
        for blk in iter_window_blocks(form, max(lower, Fraction(0)), upper)
    ]
    return math.fsum(parts)
