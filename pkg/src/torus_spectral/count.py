"""Counting integer matrices with prescribed subdeterminants, and the moment bounds built on them.

For ``M`` a nonnegative integer d x b matrix, ``P(M)`` stacks the squared
entries of ``M`` on top of a constant row ``lambda0^2``.  The b-th moment of the
projector norm over a dyadic block of spectral parameters is bounded by a
maximum, over dyadic entry sizes ``mu`` and subdeterminant sizes ``L``, of
``lambda0 * prod_{L_i > delta lambda0} (delta lambda0 / L_i) * Z(mu, L)``.
This module computes both sides at desk scale and the closed-form maximum
that the counting argument reduces to.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, combinations_with_replacement, permutations, product
from typing import Sequence

import numpy as np
from scipy import integrate

from ._common import BudgetExceeded, as_fraction, budget, check_budget, is_power_of_two
from .lattice import INDICATOR, CutoffSpec, window_sum
from .quadform import QuadForm
from .subdet import batch_max_subdets

Z_BUDGET = 100_000_000
TUPLE_BUDGET = 100_000
_CHUNK = 1 << 16


@dataclass(frozen=True)
class AugmentedMatrix:
    M: tuple
    lambda0: int
    P: tuple

    @property
    def shape(self) -> tuple:
        return len(self.P), len(self.P[0])


def build_p(M: Sequence[Sequence[int]], lambda0: int) -> AugmentedMatrix:
    """P(M): squared entries of M with a final row of lambda0^2 (exact integers)."""
    rows = [[int(x) for x in r] for r in M]
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("M must be a non-empty rectangular matrix")
    if any(x < 0 for r in rows for x in r):
        raise ValueError("entries of M must be nonnegative")
    lam = int(lambda0)
    if lam != lambda0 or lam < 1:
        raise ValueError("lambda0 must be a positive integer")
    P = [[x * x for x in r] for r in rows] + [[lam * lam] * len(rows[0])]
    return AugmentedMatrix(tuple(map(tuple, rows)), lam, tuple(map(tuple, P)))


def _dyadic_or_zero(x: Fraction) -> bool:
    if x == 0:
        return True
    if x < 0:
        return False
    return is_power_of_two(x.numerator) and is_power_of_two(x.denominator)


@dataclass(frozen=True)
class MatrixCountQuery:
    d: int
    b: int
    lambda0: int
    mu: tuple
    L: tuple

    def __post_init__(self):
        if self.d < 1 or self.b < 1:
            raise ValueError("d and b must be positive")
        if int(self.lambda0) != self.lambda0 or self.lambda0 < 1:
            raise ValueError("lambda0 must be a positive integer")
        mu = tuple(int(m) for m in self.mu)
        L = tuple(as_fraction(x) for x in self.L)
        if len(mu) != self.d:
            raise ValueError(f"mu needs {self.d} entries")
        if len(L) != self.width:
            raise ValueError(f"L needs min(b, d+1) = {self.width} entries")
        if any(not is_power_of_two(m) or m > self.lambda0 for m in mu):
            raise ValueError("mu entries must be powers of two no larger than lambda0")
        if any(mu[i] < mu[i + 1] for i in range(len(mu) - 1)):
            raise ValueError("mu must be nonincreasing")
        if any(x < 0 for x in L) or any(L[i] < L[i + 1] for i in range(len(L) - 1)):
            raise ValueError("L must be nonnegative and nonincreasing")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "L", L)

    @property
    def width(self) -> int:
        return min(self.b, self.d + 1)

    @property
    def box_size(self) -> int:
        return math.prod(len(entry_values(m)) for m in self.mu) ** self.b


def entry_values(mu: int) -> range:
    """Integers m with m / mu in [1/2, 1]."""
    return range((mu + 1) // 2, mu + 1)


def _matrix_batches(d: int, b: int, mu: Sequence[int], reverse: bool = False):
    """Yield stacks of d x b matrices covering every M with m_ij in [mu_i/2, mu_i]."""
    choices = [np.array(entry_values(m), dtype=np.int64) for m in mu]
    radices = [len(choices[i]) for j in range(b) for i in range(d)]
    total = math.prod(radices)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(total, start + _CHUNK), dtype=np.int64)
        out = np.empty((len(idx), d, b), dtype=np.int64)
        pos = 0
        for j in range(b):
            for i in range(d):
                r = radices[pos]
                out[:, i, j] = choices[i][idx % r]
                idx = idx // r
                pos += 1
        yield out[:, :, ::-1] if reverse else out


def _p_stack(Ms: np.ndarray, lambda0: int) -> np.ndarray:
    n, d, b = Ms.shape
    last = np.full((n, 1, b), lambda0 * lambda0, dtype=np.int64)
    return np.concatenate([Ms * Ms, last], axis=1)


def _dyadic_ok(D: np.ndarray, target: Fraction) -> np.ndarray:
    if target == 0:
        return D == 0
    n, den = target.numerator, target.denominator
    Dd = D.astype(object) * den if (int(D.max(initial=0)) * den) > 2**62 else D * den
    return (Dd <= n) & (2 * Dd >= n)


def z_count(q: MatrixCountQuery, reverse_columns: bool = False) -> int:
    """Z(mu, L): matrices with m_ij / mu_i in [1/2, 1] and D_k(P(M)) / (L_1...L_k) in [1/2, 1]."""
    check_budget(q.box_size, Z_BUDGET, "z_count enumeration")
    targets = [math.prod(q.L[:k], start=Fraction(1)) for k in range(1, q.width + 1)]
    total = 0
    for Ms in _matrix_batches(q.d, q.b, q.mu, reverse_columns):
        D = batch_max_subdets(_p_stack(Ms, q.lambda0), q.width)
        ok = np.ones(len(Ms), dtype=bool)
        for k, t in enumerate(targets):
            ok &= _dyadic_ok(D[:, k], t)
        total += int(ok.sum())
    return total


def z_count_bruteforce(q: MatrixCountQuery) -> int:
    """Same count with one matrix at a time and every minor expanded from scratch."""
    from .subdet import bareiss_det

    check_budget(q.box_size, 10**6, "z_count_bruteforce enumeration")
    targets = [math.prod(q.L[:k], start=Fraction(1)) for k in range(1, q.width + 1)]
    count = 0
    for entries in product(*[entry_values(q.mu[i]) for j in range(q.b) for i in range(q.d)]):
        cols = [entries[j * q.d:(j + 1) * q.d] for j in range(q.b)]
        P = [[cols[j][i] ** 2 for j in range(q.b)] for i in range(q.d)] + [[q.lambda0**2] * q.b]
        ok = True
        for k, t in enumerate(targets, start=1):
            Dk = max(
                abs(bareiss_det([[P[r][c] for c in C] for r in R]))
                for R in combinations(range(q.d + 1), k)
                for C in combinations(range(q.b), k)
            )
            if not (Dk == 0 if t == 0 else t / 2 <= Dk <= t):
                ok = False
                break
        count += ok
    return count


def _bucket_options(D: int, base: Fraction) -> list:
    """Products Pi in base * 2^Z with D / Pi in [1/2, 1]; [0] when D = 0."""
    if D == 0:
        return [Fraction(0)]
    r = Fraction(D) / base
    e = r.numerator.bit_length() - r.denominator.bit_length()
    out = []
    for s in (e - 1, e, e + 1):
        Pi = base * (Fraction(2) ** s)
        if Pi / 2 <= D <= Pi:
            out.append(Pi)
    return out


def z_table(d: int, b: int, lambda0: int, mu: Sequence[int], L1_choices: Sequence) -> dict:
    """Z(mu, L) for every L with L_1 in L1_choices and L_k / L_1 in 2^Z or L_k = 0.

    One pass over the matrices: each M is credited to every compatible L.
    Keys are tuples of Fractions; only nonincreasing L are kept.
    """
    width = min(b, d + 1)
    box = math.prod(len(entry_values(m)) for m in mu) ** b
    check_budget(box, Z_BUDGET, "z_table enumeration")
    L1_choices = [as_fraction(x) for x in L1_choices]
    hist: dict = {}
    for Ms in _matrix_batches(d, b, mu):
        D = batch_max_subdets(_p_stack(Ms, lambda0), width)
        if D.dtype == object:
            pairs = Counter(map(tuple, D.tolist())).items()
        else:
            rows, counts = np.unique(D, axis=0, return_counts=True)
            pairs = zip(map(tuple, rows.tolist()), counts.tolist())
        for row, c in pairs:
            hist[row] = hist.get(row, 0) + c
    table: dict = {}
    for Drow, c in hist.items():
        for L1 in L1_choices:
            options = [_bucket_options(Drow[0], L1)] + [_bucket_options(Dk, L1) for Dk in Drow[1:]]
            if L1 not in options[0]:
                continue
            for Pis in product(*options[1:]):
                Pis = (L1,) + Pis
                L = [L1]
                valid = True
                for k in range(1, width):
                    if Pis[k - 1] == 0:
                        if Pis[k] != 0:
                            valid = False
                            break
                        L.append(Fraction(0))
                    else:
                        L.append(Pis[k] / Pis[k - 1])
                if not valid or any(L[i] < L[i + 1] for i in range(width - 1)):
                    continue
                key = tuple(L)
                table[key] = table.get(key, 0) + c
    return table


def weight(L: Sequence, lambda0, delta) -> Fraction | float:
    """lambda0 * prod over L_i > delta lambda0 of delta lambda0 / L_i."""
    t = as_fraction(delta) * as_fraction(lambda0)
    w = Fraction(as_fraction(lambda0))
    for x in L:
        x = as_fraction(x)
        if x > t:
            w *= t / x
    return w


@dataclass(frozen=True)
class RhsMax:
    value: float
    d_eff: int
    mu: tuple
    L: tuple
    z: int
    tuples: int


def dyadic_mu_tuples(d: int, lambda0: int):
    exps = range(0, int(math.log2(lambda0)) + 1) if lambda0 >= 1 else range(0)
    vals = [2**e for e in exps if 2**e <= lambda0]
    for combo in combinations_with_replacement(sorted(vals, reverse=True), d):
        yield tuple(combo)


def moment_rhs_dyadic_max(d: int, b: int, lambda0: int, delta) -> RhsMax:
    """Max over d' <= d, dyadic mu and L of lambda0 prod(delta lambda0 / L_i) Z_{d', b}(mu, L).

    L_1 ranges over lambda0^2 * {1/2, 1, 2}; later L_k over the dyadic
    multiples of L_1 (and 0) that some matrix actually realises.  The d' = 0
    term (no matrix rows) is lambda0 * prod(...) with L = (lambda0^2,).
    """
    lam2 = Fraction(lambda0) ** 2
    L1s = [lam2 / 2, lam2, 2 * lam2]
    best = RhsMax(float(weight([lam2], lambda0, delta)), 0, (), (lam2,), 1, 1)
    tuples = 1
    for dd in range(1, d + 1):
        for mu in dyadic_mu_tuples(dd, lambda0):
            table = z_table(dd, b, lambda0, mu, L1s)
            tuples += len(table)
            check_budget(tuples, TUPLE_BUDGET, "dyadic tuple search")
            for L, z in sorted(table.items()):
                v = weight(L, lambda0, delta) * z
                if v > best.value:
                    best = RhsMax(float(v), dd, mu, L, z, 0)
    return RhsMax(best.value, best.d_eff, best.mu, best.L, best.z, tuples)


def rhs_single_tuple(d: int, b: int, lambda0: int, delta, mu, L) -> float:
    q = MatrixCountQuery(d, b, lambda0, tuple(mu), tuple(L))
    return float(weight(q.L, lambda0, delta) * z_count(q))


# --- the moment integral ----------------------------------------------------------


def sharp_norm(form: QuadForm, lam, delta, cutoff: CutoffSpec = INDICATOR) -> float:
    """sum_m chi((Q(m) - lam^2) / (delta lam)); the indicator counts the quadratic window."""
    return window_sum(form, lam, delta, cutoff)


@dataclass(frozen=True)
class MomentEstimate:
    value: float
    stderr: float
    samples: int
    b: int
    delta: float
    lambda0: float


def _offdiag_matrix(d: int, offdiag) -> np.ndarray:
    H = np.zeros((d, d))
    if offdiag is None:
        return H
    H = np.asarray(offdiag, dtype=float)
    if H.shape != (d, d) or not np.allclose(H, H.T) or np.any(np.diag(H) != 0):
        raise ValueError("offdiag must be a symmetric d x d matrix with zero diagonal")
    return H


def _window_points(d: int, outer: float, floor_eig: float) -> np.ndarray:
    r = int(math.isqrt(int(outer / floor_eig)) + 1)
    check_budget((2 * r + 1) ** d, 10**7, "moment window box")
    grids = np.meshgrid(*[np.arange(-r, r + 1)] * d, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1).astype(float)
    return pts[(pts**2).sum(axis=1) <= outer / floor_eig + 1]


def window_counts_batch(points: np.ndarray, betas: np.ndarray, H: np.ndarray, lams: np.ndarray,
                        delta: float, cutoff: CutoffSpec = INDICATOR) -> np.ndarray:
    """Window sums for many (beta, lam) at once over a fixed candidate point set."""
    sq = points**2
    cross = np.einsum("ni,ij,nj->n", points, H, points)
    Q = betas @ sq.T + cross[None, :]
    lam = lams[:, None]
    x = (Q - lam**2) / (delta * lam)
    if cutoff.kind == "indicator":
        return ((x >= -1) & (x < 1)).sum(axis=1).astype(float)
    return cutoff(x).sum(axis=1)


def moment_lhs(d: int, b: int, lambda0, delta, samples: int, seed: int = 0, offdiag=None,
               cutoff: CutoffSpec = INDICATOR, batch: int = 256) -> MomentEstimate:
    """Monte Carlo estimate of the integral of sharp_norm^b over [1,2]^d x [lambda0/2, lambda0].

    Sample i draws (beta', lam) from a Philox stream keyed by (seed, i), so the
    estimate does not depend on batching.  Off-diagonal coefficients are held
    fixed.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    lambda0, delta = float(lambda0), float(delta)
    H = _offdiag_matrix(d, offdiag)
    floor_eig = 1.0 - np.abs(H).sum(axis=1).max()
    if floor_eig <= 0:
        raise ValueError("off-diagonal coefficients too large for [1,2] diagonals")
    outer = lambda0**2 + delta * lambda0
    pts = _window_points(d, outer, floor_eig)
    U = np.empty((samples, d + 1))
    for i in range(samples):
        U[i] = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), i])).random(d + 1)
    betas = 1.0 + U[:, :d]
    lams = lambda0 / 2 + (lambda0 / 2) * U[:, d]
    vals = np.concatenate([
        window_counts_batch(pts, betas[s:s + batch], H, lams[s:s + batch], delta, cutoff)
        for s in range(0, samples, batch)
    ]) ** b
    vol = lambda0 / 2
    mean = math.fsum(vals) / samples
    sd = float(np.std(vals, ddof=1)) if samples > 1 else 0.0
    return MomentEstimate(vol * mean, vol * sd / math.sqrt(samples), samples, b, delta, lambda0)


def moment_lhs_quadrature_1d(b: int, lambda0, delta) -> float:
    """The d = 1 moment by integrating the exact beta-measure in lam (scipy quad)."""
    lambda0, delta = float(lambda0), float(delta)
    mmax = int(math.isqrt(int(lambda0**2 + delta * lambda0)) + 1)
    ms = np.arange(-mmax, mmax + 1)
    ms = ms[ms != 0].astype(float)

    def inner(lam):
        lo = (lam * lam - delta * lam) / ms**2
        hi = (lam * lam + delta * lam) / ms**2
        lo, hi = np.maximum(lo, 1.0), np.minimum(hi, 2.0)
        if b == 1:
            return float(np.clip(hi - lo, 0, None).sum())
        # integrate count(beta)^b over beta by sweeping interval endpoints
        edges = np.unique(np.concatenate([lo[hi > lo], hi[hi > lo], [1.0, 2.0]]))
        mids = (edges[:-1] + edges[1:]) / 2
        cnt = ((mids[:, None] >= lo[None, :]) & (mids[:, None] < hi[None, :])).sum(axis=1)
        return float((np.diff(edges) * cnt.astype(float) ** b).sum())

    # breakpoints where some m enters or leaves the window
    brk = []
    for m in range(1, mmax + 1):
        for beta in (1.0, 2.0):
            c = beta * m * m
            for s in (-1.0, 1.0):
                lam = (s * delta + math.sqrt(delta * delta + 4 * c)) / 2
                if lambda0 / 2 < lam < lambda0:
                    brk.append(lam)
    pts = sorted(set(brk))
    total = 0.0
    grid = [lambda0 / 2] + pts + [lambda0]
    for a, c in zip(grid[:-1], grid[1:]):
        if c > a:
            total += integrate.quad(inner, a, c, limit=200)[0]
    return total


# --- the closed-form maximum and the function it maximises ---------------------------


def maximized_terms(d: int, b: int, lambda0, delta) -> list[tuple[int, float]]:
    """(b2, delta^b2 lambda0^(-b2^2 + (b+d) b2 + 1 - b)) for b2 = 0..min(b, d+1)."""
    if b < 1:
        raise ValueError("b must be positive")
    lam, dl = float(lambda0), float(delta)
    return [(b2, dl**b2 * lam ** (-(b2**2) + (b + d) * b2 + 1 - b)) for b2 in range(min(b, d + 1) + 1)]


def maximized_bound(d: int, b: int, lambda0, delta, min_b2: int = 0) -> float:
    return max(v for b2, v in maximized_terms(d, b, lambda0, delta) if b2 >= min_b2)


def maximized_log_terms(d: int, b: int, lambda0, delta) -> list[tuple[int, float]]:
    """Natural logs of the terms, for log-scale comparisons without overflow."""
    ll, ld = math.log(lambda0), math.log(delta)
    return [(b2, b2 * ld + (-(b2**2) + (b + d) * b2 + 1 - b) * ll) for b2 in range(min(b, d + 1) + 1)]


def _L_at(L: Sequence, idx: int) -> float:
    # L_j = 0 for indices past the supplied list
    return float(L[idx]) if idx < len(L) else 0.0


def mathcal_f(L: Sequence, mu: Sequence, I_sets: Sequence, sigmas: Sequence, d: int, b: int,
              lambda0, delta) -> float:
    """The counting bound as a function of (L, mu, I_k, sigma_k).

    Indices are 0-based: L[0] is L_1, coordinate i in I_sets[k-1] pairs with
    L[sigma_k(i) + 1], and the product over k runs over k = 1..b-1.  For
    k <= min(b-1, d) the pairing uses max(L[sigma_k(i) + 1], L[k]).
    """
    width = min(b, d + 1)
    if len(L) != width:
        raise ValueError(f"L needs {width} entries")
    if len(mu) != d:
        raise ValueError(f"mu needs {d} entries")
    if len(I_sets) != b - 1 or len(sigmas) != b - 1:
        raise ValueError("need one index set and one injection for each k = 1..b-1")
    lam, dl = float(lambda0), float(delta)
    thresh = dl * lam
    val = lam
    for x in L:
        if float(x) > thresh:
            val *= thresh / float(x)
    val *= math.prod(float(m) for m in mu)
    for k in range(1, b):
        I, sig = list(I_sets[k - 1]), dict(sigmas[k - 1])
        if set(sig) != set(I) or len(set(sig.values())) != len(sig):
            raise ValueError(f"sigma_{k} must be an injection defined on I_{k}")
        if any(not 0 <= i < d for i in I) or any(not 0 <= j < d for j in sig.values()):
            raise ValueError("indices must lie in 0..d-1")
        for i in I:
            m = float(mu[i])
            T = _L_at(L, sig[i] + 1)
            if k <= min(b - 1, d):
                T = max(T, _L_at(L, k))
            val *= m if m * m <= T else T / m
    return val


@lru_cache(maxsize=None)
def partial_injections(d: int) -> tuple:
    """All injections from subsets of range(d) into range(d), as dicts."""
    out = []
    for r in range(d + 1):
        for I in combinations(range(d), r):
            for img in permutations(range(d), r):
                out.append(dict(zip(I, img)))
    return tuple(out)


def _best_factor(L, mu, k, d, b) -> tuple[float, dict]:
    best, arg = -1.0, {}
    for sig in partial_injections(d):
        v = 1.0
        for i, j in sig.items():
            m = float(mu[i])
            T = _L_at(L, j + 1)
            if k <= min(b - 1, d):
                T = max(T, _L_at(L, k))
            v *= m if m * m <= T else T / m
        if v > best:
            best, arg = v, sig
    return best, arg


def restricted_grid(d: int, b: int, lambda0, delta):
    """(L, mu) pairs of the reduced search: L_1 = lambda0^2, L_i in {delta lambda0, 1, lambda0^2}, mu_i in {1, lambda0}."""
    lam = float(lambda0)
    width = min(b, d + 1)
    values = sorted({float(delta) * lam, 1.0, lam * lam}, reverse=True)
    for tail in combinations_with_replacement(values, width - 1):
        L = (lam * lam,) + tuple(tail)
        for n_big in range(d + 1):
            mu = (lam,) * n_big + (1.0,) * (d - n_big)
            yield L, mu


def restricted_grid_max(d: int, b: int, lambda0, delta) -> tuple[float, tuple]:
    """Brute-force max of mathcal_f over the restricted grid.

    The factors for different k are independent, so each (I_k, sigma_k) is
    maximised separately; ``restricted_grid_max_joint`` checks that shortcut.
    """
    best, arg = -1.0, ()
    for L, mu in restricted_grid(d, b, lambda0, delta):
        I_sets, sigmas = [], []
        for k in range(1, b):
            _, sig = _best_factor(L, mu, k, d, b)
            I_sets.append(sorted(sig))
            sigmas.append(sig)
        v = mathcal_f(L, mu, I_sets, sigmas, d, b, lambda0, delta)
        if v > best:
            best, arg = v, (L, mu, tuple(map(tuple, I_sets)), tuple(sigmas))
    return best, arg


def restricted_grid_max_joint(d: int, b: int, lambda0, delta, limit: int = 2_000_000) -> float:
    """Same maximum with every (I_k, sigma_k) combination evaluated jointly."""
    inj = partial_injections(d)
    check_budget(len(inj) ** (b - 1), limit, "joint injection search")
    best = -1.0
    for L, mu in restricted_grid(d, b, lambda0, delta):
        for sigmas in product(inj, repeat=b - 1):
            v = mathcal_f(L, mu, [sorted(s) for s in sigmas], list(sigmas), d, b, lambda0, delta)
            best = max(best, v)
    return best
