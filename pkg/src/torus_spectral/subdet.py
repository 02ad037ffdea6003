"""Maximal subdeterminants, singular values and the volume bounds built on them.

``D_k(M)`` is the largest absolute value of a k x k minor of ``M``.  For integer
or rational input it is computed exactly; float input goes through LU
determinants of the stacked minors.  Every "up to a constant" relation is
exposed with an explicit constant derived from Cauchy-Binet or Laplace
expansion, so callers can assert rather than eyeball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations, permutations, product
from typing import Sequence

import numpy as np

from ._common import BudgetExceeded, as_fraction

MAX_SHAPE = (8, 10)
_INT64_SAFE = 2**60


class PivotTooSmall(ValueError):
    pass


# --- matrix coercion ---------------------------------------------------------


def _is_exact_entry(x) -> bool:
    return isinstance(x, (int, np.integer, Fraction, str)) and not isinstance(x, (bool, np.bool_))


def as_matrix(M) -> tuple[np.ndarray, bool]:
    """Return (array, exact).  Exact arrays hold Python ints or Fractions."""
    if isinstance(M, np.ndarray) and M.dtype.kind in "iu":
        return M.astype(object), True
    if isinstance(M, np.ndarray) and M.dtype.kind == "f":
        if M.ndim != 2:
            raise ValueError("expected a 2-D matrix")
        return M.astype(float), False
    rows = [list(r) for r in M]
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("matrix rows must be non-empty and of equal length")
    flat = [x for r in rows for x in r]
    if all(_is_exact_entry(x) for x in flat):
        conv = [[as_fraction(x) for x in r] for r in rows]
        if all(x.denominator == 1 for r in conv for x in r):
            conv = [[int(x) for x in r] for r in conv]
        arr = np.empty((len(rows), len(rows[0])), dtype=object)
        for i, r in enumerate(conv):
            for j, x in enumerate(r):
                arr[i, j] = x
        return arr, True
    return np.array(rows, dtype=float), False


def _check_shape(p: int, q: int) -> None:
    if min(p, q) > MAX_SHAPE[0] or max(p, q) > MAX_SHAPE[1]:
        raise BudgetExceeded(f"{p}x{q} exceeds the {MAX_SHAPE[0]}x{MAX_SHAPE[1]} minor-enumeration cap")


# --- minors --------------------------------------------------------------------


@lru_cache(maxsize=None)
def _subsets(n: int, k: int):
    subs = list(combinations(range(n), k))
    return subs, {s: i for i, s in enumerate(subs)}


@lru_cache(maxsize=None)
def _level_index(p: int, q: int, k: int):
    rows, _ = _subsets(p, k)
    cols, _ = _subsets(q, k)
    _, prev_rows = _subsets(p, k - 1)
    _, prev_cols = _subsets(q, k - 1)
    first = np.array([r[0] for r in rows], dtype=np.int64)
    rest = np.array([prev_rows[r[1:]] for r in rows], dtype=np.int64)
    colpos = np.array(cols, dtype=np.int64).reshape(len(cols), k)
    drop = np.array(
        [[prev_cols[c[:t] + c[t + 1:]] for t in range(k)] for c in cols], dtype=np.int64
    ).reshape(len(cols), k)
    return first, rest, colpos, drop


def minor_levels(A: np.ndarray, kmax: int) -> list[np.ndarray]:
    """All k x k minors for k = 0..kmax by Laplace expansion along the first row.

    ``A`` has shape (batch, p, q).  Level k has shape (batch, C(p,k), C(q,k)),
    indexed by row and column subsets in ``itertools.combinations`` order.  The
    arithmetic is exact for integer or object dtype.
    """
    n, p, q = A.shape
    levels = [np.ones((n, 1, 1), dtype=A.dtype)]
    for k in range(1, kmax + 1):
        first, rest, colpos, drop = _level_index(p, q, k)
        prev = levels[-1][:, rest, :]
        acc = None
        for t in range(k):
            term = A[:, first, :][:, :, colpos[:, t]] * prev[:, :, drop[:, t]]
            if acc is None:
                acc = term
            elif t % 2:
                acc = acc - term
            else:
                acc = acc + term
        levels.append(acc)
    return levels


def _int64_safe(A: np.ndarray, kmax: int) -> bool:
    if A.size == 0:
        return True
    a = max(abs(int(A.max())), abs(int(A.min())), 1)
    return (a * math.sqrt(max(kmax, 1))) ** kmax * (kmax + 1) < _INT64_SAFE


def batch_max_subdets(Ms: np.ndarray, kmax: int | None = None) -> np.ndarray:
    """Exact D_1..D_kmax for a stack of integer matrices, shape (batch, kmax).

    Uses int64 when the Hadamard bound allows it, Python integers otherwise.
    """
    Ms = np.asarray(Ms)
    if Ms.dtype.kind not in "iuO":
        raise TypeError("batch_max_subdets expects integer matrices")
    n, p, q = Ms.shape
    kmax = min(p, q) if kmax is None else kmax
    A = Ms.astype(np.int64) if Ms.dtype.kind in "iu" and _int64_safe(Ms, kmax) else Ms.astype(object)
    levels = minor_levels(A, kmax)
    out = np.empty((n, kmax), dtype=A.dtype)
    for k in range(1, kmax + 1):
        out[:, k - 1] = np.abs(levels[k]).reshape(n, -1).max(axis=1)
    return out


def batch_max_subdets_float(Ms: np.ndarray, kmax: int | None = None) -> np.ndarray:
    """Float D_1..D_kmax for a stack of matrices via LU determinants of every minor."""
    Ms = np.asarray(Ms, dtype=float)
    n, p, q = Ms.shape
    kmax = min(p, q) if kmax is None else kmax
    out = np.empty((n, kmax))
    for k in range(1, kmax + 1):
        R = np.array(list(combinations(range(p), k)))
        C = np.array(list(combinations(range(q), k)))
        sub = Ms[:, R[:, None, :, None], C[None, :, None, :]]
        out[:, k - 1] = np.abs(np.linalg.det(sub)).reshape(n, -1).max(axis=1)
    return out


def _float_minors(A: np.ndarray, k: int) -> np.ndarray:
    p, q = A.shape
    R = np.array(list(combinations(range(p), k)))
    C = np.array(list(combinations(range(q), k)))
    sub = A[R[:, None, :, None], C[None, :, None, :]]
    return np.linalg.det(sub)


def bareiss_det(rows: Sequence[Sequence]) -> Fraction | int:
    """Determinant by fraction-free elimination (exact for ints and Fractions)."""
    a = [[as_fraction(x) for x in r] for r in rows]
    n = len(a)
    if n == 0:
        return 1
    sign, prev = 1, Fraction(1)
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev
        prev = a[k][k]
    det = sign * a[n - 1][n - 1]
    return int(det) if det.denominator == 1 else det


def max_subdet(M, k: int):
    """D_k(M); exact for integer/rational input, D_0 = 1."""
    A, exact = as_matrix(M)
    p, q = A.shape
    if not 0 <= k <= min(p, q):
        raise ValueError(f"k={k} out of range for a {p}x{q} matrix")
    if k == 0:
        return 1 if exact else 1.0
    _check_shape(p, q)
    if exact:
        B = A
        if all(isinstance(x, int) for x in A.flat) and _int64_safe(A, k):
            B = A.astype(np.int64)
        val = np.abs(minor_levels(B[None], k)[k]).max()
        return int(val) if B.dtype != object or isinstance(val, int) else val
    return float(np.abs(_float_minors(A, k)).max())


def max_subdet_prefix(M, k: int, ell: int):
    """D_k of the first ``ell`` columns."""
    A, _ = as_matrix(M)
    p, q = A.shape
    if not 1 <= ell <= q or not 0 <= k <= min(p, ell):
        raise ValueError(f"need 0 <= k <= min(p, ell) and 1 <= ell <= q, got k={k}, ell={ell}")
    return max_subdet(A[:, :ell] if isinstance(M, np.ndarray) and M.dtype.kind == "f" else _slice(M, ell), k)


def _slice(M, ell):
    A, exact = as_matrix(M)
    return A[:, :ell] if not exact else [list(r[:ell]) for r in A.tolist()]


def all_max_subdets(M) -> tuple:
    """(D_1, ..., D_m), m = min(p, q)."""
    A, exact = as_matrix(M)
    p, q = A.shape
    m = min(p, q)
    _check_shape(p, q)
    if exact:
        B = A.astype(np.int64) if all(isinstance(x, int) for x in A.flat) and _int64_safe(A, m) else A
        levels = minor_levels(B[None], m)
        return tuple(_py(np.abs(levels[k]).max()) for k in range(1, m + 1))
    return tuple(float(np.abs(_float_minors(A, k)).max()) for k in range(1, m + 1))


def _py(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, Fraction) and x.denominator == 1:
        return int(x)
    return x


def singular_values(M) -> np.ndarray:
    """Singular values in nonincreasing order (LAPACK SVD)."""
    A, _ = as_matrix(M)
    return np.linalg.svd(np.asarray(A, dtype=float), compute_uv=False)


def correspondence_constant(p: int, q: int, k: int) -> int:
    """C(p,k) C(q,k): D_k <= const * sigma_1..sigma_k and the reverse."""
    return math.comb(p, k) * math.comb(q, k)


@dataclass(frozen=True)
class SubdetProfile:
    shape: tuple
    D: tuple
    sigma: tuple
    D0: int = 1

    @property
    def m(self) -> int:
        return len(self.D)

    def sigma_products(self) -> tuple:
        return tuple(float(np.prod(self.sigma[:k])) for k in range(1, self.m + 1))

    def ratios(self) -> tuple:
        """D_k / (sigma_1..sigma_k), with 0/0 read as 1."""
        out = []
        scale = max(self.sigma[0], 1.0) if self.sigma else 1.0
        for k, (Dk, s) in enumerate(zip(self.D, self.sigma_products()), start=1):
            Dk = float(Dk)
            out.append(1.0 if Dk == 0 and s <= 1e-12 * scale**k else (Dk / s if s > 0 else math.inf))
        return tuple(out)

    def within_constants(self, rtol: float = 1e-9) -> bool:
        p, q = self.shape
        for k, r in enumerate(self.ratios(), start=1):
            c = correspondence_constant(p, q, k)
            if not (1 / c * (1 - rtol) <= r <= c * (1 + rtol)):
                return False
        return True


def profile(M) -> SubdetProfile:
    A, _ = as_matrix(M)
    return SubdetProfile(tuple(A.shape), all_max_subdets(M), tuple(float(s) for s in singular_values(A)))


def sigma_from_subdets(D: Sequence) -> tuple:
    """sigma_k ~ D_k / D_{k-1}, with 0^{-1} * 0 = 0."""
    out, prev = [], 1
    for Dk in D:
        out.append(0.0 if prev == 0 else float(Fraction(Dk) / Fraction(prev)) if not isinstance(Dk, float) else Dk / prev)
        prev = Dk
    return tuple(out)


# --- column rearrangement ------------------------------------------------------


def rearrangement_constant(p: int, q: int) -> Fraction:
    m = min(p, q)
    return Fraction(1, math.factorial(m) * math.comb(q, m))


def _det_abs(B: np.ndarray) -> float:
    return abs(float(np.linalg.det(B))) if B.size else 1.0


def rearrange_columns(M) -> list[int]:
    """Column order whose leading k x k blocks carry a fair share of D_k(M).

    Reduce by SVD to the m x q matrix diag(sigma) V; choose m columns with the
    largest m x m determinant; then, for s = m down to 1, place at position s the
    column maximising the Laplace term |A[s, i]| * |det of the remaining block|
    (ties to the lowest index).  When that block is singular the choice falls
    back to maximising D_{s-1} of the remaining columns of M itself.
    """
    A0, exact = as_matrix(M)
    Mf = np.asarray(A0, dtype=float)
    p, q = Mf.shape
    m = min(p, q)
    U, s, Vt = np.linalg.svd(Mf)
    A = s[:m, None] * Vt[:m, :]
    scale = max(float(s[0]) if s.size else 0.0, 1e-300)
    tol = 1e-12

    best, chosen = -1.0, None
    for J in combinations(range(q), m):
        v = _det_abs(A[:, J])
        if v > best * (1 + tol) + tol * scale**m:
            best, chosen = v, list(J)
    if best <= tol * scale**m:
        chosen = _greedy_volume_columns(Mf, m)

    order = [0] * m
    current = list(chosen)
    for size in range(m, 0, -1):
        terms = []
        for i in current:
            rest = [c for c in current if c != i]
            terms.append(abs(A[size - 1, i]) * _det_abs(A[: size - 1][:, rest]))
        top = max(terms)
        if top > tol * scale**size:
            pick = current[next(j for j, v in enumerate(terms) if v >= top * (1 - tol))]
        else:
            # keep the remaining block as large as possible: D_{s-1}, then D_{s-2}, ...
            vals = []
            for i in current:
                rest = [c for c in current if c != i]
                sub = _cols(A0, exact, rest) if rest else None
                vals.append(tuple(float(max_subdet(sub, j)) for j in range(size - 1, 0, -1)) if rest else ())
            pick = current[max(range(len(current)), key=lambda j: (vals[j], -j))]
        order[size - 1] = pick
        current.remove(pick)
    tail = [c for c in range(q) if c not in order]
    return order + tail


def _cols(A0, exact, cols):
    sub = A0[:, cols]
    return [list(r) for r in sub.tolist()] if exact else sub


def _greedy_volume_columns(Mf: np.ndarray, m: int) -> list[int]:
    # pivoted Gram-Schmidt; used only when every m-subset is singular
    R = Mf.copy()
    chosen = []
    for _ in range(m):
        norms = np.linalg.norm(R, axis=0)
        norms[chosen] = -1
        j = int(np.argmax(norms))
        chosen.append(j)
        v = R[:, j]
        nv = np.linalg.norm(v)
        if nv > 0:
            u = v / nv
            R = R - np.outer(u, u @ R)
    return sorted(chosen)


def prefix_ratios(M, perm: Sequence[int]) -> list[float]:
    """D_k^{(k)}(M perm) / D_k(M) for k = 1..m (1 where both vanish)."""
    A, exact = as_matrix(M)
    p, q = A.shape
    Mp = _cols(A, exact, list(perm))
    out = []
    for k in range(1, min(p, q) + 1):
        full = float(max_subdet(M, k))
        pre = float(max_subdet_prefix(Mp, k, k))
        out.append(1.0 if full == 0 else pre / full)
    return out


# --- S(M, R) and its box cover ------------------------------------------------


@dataclass(frozen=True)
class SBoxQuery:
    M: object
    R: float
    C: float = 2.0

    def __post_init__(self):
        if self.C < 1:
            raise ValueError("C must be at least 1")
        if self.R < 0:
            raise ValueError("R must be nonnegative")

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(as_matrix(self.M)[0], dtype=float)


def _augmented_minor_maxima(M: np.ndarray, X: np.ndarray, jmax: int) -> np.ndarray:
    """max |j-minor| of (M | x) for each row x of X, j = 1..jmax; shape (n, jmax)."""
    n = len(X)
    A = np.concatenate([np.broadcast_to(M, (n,) + M.shape), X[:, :, None]], axis=2)
    levels = minor_levels(A, jmax)
    return np.stack([np.abs(levels[j]).reshape(n, -1).max(axis=1) for j in range(1, jmax + 1)], axis=1)


def s_membership_batch(q: SBoxQuery, X: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    M = q.matrix
    p, k = M.shape
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != p:
        raise ValueError("x must have length p")
    D = all_max_subdets(M)
    jmax = min(p, k + 1)
    aug = _augmented_minor_maxima(M, X, jmax)
    ok = np.ones(len(X), dtype=bool)
    for j in range(1, min(p, k) + 1):
        ok &= aug[:, j - 1] <= q.C * D[j - 1] * (1 + rtol) + 1e-300
    if p >= k + 1:
        # absolute slack for rounding when x lies in the column span
        slack = rtol * max(abs(float(D[-1])), 1.0) * np.maximum(np.abs(X).max(axis=1), 1.0)
        ok &= aug[:, k] <= q.R * (1 + rtol) + slack
    return ok


def s_membership(q: SBoxQuery, x: Sequence) -> bool:
    """Exact membership test when M and x are integer/rational, float otherwise."""
    A, exact = as_matrix(q.M)
    p, k = A.shape
    if len(x) != p:
        raise ValueError("x must have length p")
    xs = [as_fraction(v) if _is_exact_entry(v) else v for v in x]
    if exact and all(isinstance(v, Fraction) for v in xs):
        aug = [list(A[i]) + [xs[i]] for i in range(p)]
        for j in range(1, min(p, k) + 1):
            if Fraction(max_subdet(aug, j)) > as_fraction(q.C) * Fraction(max_subdet(A.tolist(), j)):
                return False
        if p >= k + 1 and Fraction(max_subdet(aug, k + 1)) > as_fraction(q.R):
            return False
        return True
    return bool(s_membership_batch(q, np.array([xs], dtype=float))[0])


def tau_profile(M, R: float, k: int | None = None) -> np.ndarray:
    """tau_i = sigma_i (i <= k) and min(sigma_k, R / D_k) (i > k); 0^{-1} 0 = 0."""
    A, _ = as_matrix(M)
    p, kk = A.shape
    k = kk if k is None else k
    if k != kk:
        raise ValueError("k must equal the number of columns of M")
    sig = singular_values(A)
    Dk = float(max_subdet(M, k))
    tau = np.zeros(p)
    tau[: min(p, k)] = sig[: min(p, k)]
    if p > k:
        ratio = 0.0 if Dk == 0 else R / Dk
        tau[k:] = min(sig[k - 1], ratio)
    return tau


def cover_constant(p: int, k: int, C: float) -> float:
    """Constant K with S(M, R) inside {sum y_i U_i : |y_i| <= K tau_i}.

    From Cauchy-Binet (orthogonal factors change D_j by at most a binomial
    factor) applied to the lower-triangular minors of (Sigma | y).
    """
    j_terms = [C * math.comb(p, j) ** 2 * math.comb(k + 1, j) * math.comb(k, j) for j in range(1, min(p, k) + 1)]
    r_term = math.comb(p, k + 1) * math.comb(p, k) if p > k else 0
    return float(max(j_terms + [r_term]))


@dataclass
class CoverReport:
    trials: int
    members: int
    margin: float
    max_ratio: float
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def box_cover_check(q: SBoxQuery, trials: int, margin: float | None = None, seed: int = 0,
                    atol: float = 1e-9) -> CoverReport:
    """Sample around S(M, R) and test the box cover |y_i| <= margin * tau_i.

    Samples come from the box |y_i| <= 2 margin tau_i (with a small floor so
    that tau_i = 0 directions are probed) shrunk or dilated by random powers of
    two, and from the column span of M.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    M = q.matrix
    p, k = M.shape
    margin = cover_constant(p, k, q.C) if margin is None else float(margin)
    U, s, _ = np.linalg.svd(M)
    tau = tau_profile(M, q.R, k)
    positive = tau[tau > 0]
    floor = 1e-3 * float(positive.min()) if positive.size else 1e-3
    half = 2 * margin * np.maximum(tau, floor)
    g = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 0x5B0C]))
    n_box = trials // 2
    # dyadic scales from 2^-levels up to 8 times the test box, so that S is hit
    levels = int(math.ceil(math.log2(2 * margin))) + 4
    scale = 2.0 ** g.integers(-levels, 4, size=n_box)
    Y = g.uniform(-1, 1, size=(n_box, p)) * half * scale[:, None]
    coeff = g.uniform(-1, 1, size=(trials - n_box, k)) * (2 * margin) * (2.0 ** g.integers(-levels, 1, size=(trials - n_box, 1)))
    span = (M @ coeff.T).T
    X = np.vstack([Y @ U.T, span])
    member = s_membership_batch(q, X)
    Ym = X[member] @ U
    ratios = np.zeros(p)
    bad = []
    for i in range(p):
        yi = np.abs(Ym[:, i])
        lim = margin * tau[i] + atol * max(float(s[0]), 1.0)
        if tau[i] > 0:
            ratios[i] = yi.max(initial=0.0) / tau[i]
        for row in np.flatnonzero(yi > lim)[:5]:
            bad.append({"coordinate": i, "y": float(Ym[row, i]), "limit": float(lim)})
    return CoverReport(trials, int(member.sum()), margin, float(ratios.max(initial=0.0)), bad)


# --- volume bounds -------------------------------------------------------------


def _unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def minkowski_volume_exact(X) -> float:
    """Volume of {X t + w : |t_i| <= 1, |w| <= 1} by the Steiner formula for zonotopes."""
    X = np.asarray(X, dtype=float)
    d = X.shape[0]
    total = 0.0
    for r in range(0, X.shape[1] + 1):
        if r > d:
            break
        acc = 0.0
        for J in combinations(range(X.shape[1]), r):
            if r == 0:
                acc += 1.0
                continue
            G = X[:, J].T @ X[:, J]
            acc += 2**r * math.sqrt(max(np.linalg.det(G), 0.0))
        total += acc * _unit_ball_volume(d - r)
    return total


def neighborhood_volume_constant(d: int) -> float:
    """C_d with vol <= C_d (1 + sum_k D_k(X)) for every d x d matrix X."""
    return max(_unit_ball_volume(d - k) * 2**k * math.comb(d, k) ** 1.5 for k in range(d + 1))


def _box_ball_distance(Z: np.ndarray, X: np.ndarray) -> np.ndarray:
    """min over |t|_inf <= 1 of |z - X t| for each row z, by active-set enumeration."""
    d, r = X.shape
    best = np.full(len(Z), np.inf)
    for pattern in product((-1, 0, 1), repeat=r):
        fixed = np.array(pattern, dtype=float)
        free = [i for i in range(r) if pattern[i] == 0]
        base = Z - X @ fixed
        if free:
            Xf = X[:, free]
            T = base @ np.linalg.pinv(Xf).T
            feas = np.all(np.abs(T) <= 1 + 1e-12, axis=1)
            res = np.linalg.norm(base - T @ Xf.T, axis=1)
            res = np.where(feas, res, np.inf)
        else:
            res = np.linalg.norm(base, axis=1)
        best = np.minimum(best, res)
    return best


def neighborhood_volume_bound(X, trials: int, seed: int = 0, chunk: int = 100_000):
    """(Monte Carlo volume of the box-plus-ball body, 1 + sum_k D_k(X))."""
    X = np.asarray(as_matrix(X)[0], dtype=float)
    d = X.shape[0]
    if X.shape != (d, d):
        raise ValueError("X must be square")
    if trials < 1:
        raise ValueError("trials must be positive")
    half = np.abs(X).sum(axis=1) + 1.0
    g = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 0x54]))
    hits = 0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        Z = g.uniform(-1, 1, size=(n, d)) * half
        hits += int((_box_ball_distance(Z, X) <= 1.0).sum())
        done += n
    vol = float(np.prod(2 * half)) * hits / trials
    bound = 1.0 + sum(float(max_subdet(X, k)) for k in range(1, d + 1))
    return vol, bound


@dataclass
class BasisReduction:
    w: np.ndarray               # column i pairs with input vector i
    entry_constant: float
    inclusion_constant: float
    max_entry_ratio: float


def basis_reduction(v: Sequence[Sequence[float]], Y: Sequence[float], Z: Sequence[float]) -> BasisReduction:
    """Vectors w with {sum y_i v_i : |y_i| <= Y_i, |z_j| <= Z_j} inside {sum t_i w_i : |t_i| <= sqrt(2d)}.

    Built from the SVD of the 2d x d matrix stacking the inverse of the matrix
    with columns Y_i v_i on top of diag(1/Z); w = V^T Sigma^{-1}.  Entry bounds
    |w_i[j]| <= sqrt(d) * min(Y_i |v_i|, Z_j) hold with the vectors paired by
    increasing Y_i |v_i|.
    """
    V = np.asarray(v, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1]:
        raise ValueError("need d vectors of length d")
    d = V.shape[0]
    Y, Z = np.asarray(Y, dtype=float), np.asarray(Z, dtype=float)
    if np.any(Y <= 0) or np.any(Z <= 0):
        raise ValueError("Y and Z must be positive")
    cols = V.T * Y  # column i = Y_i v_i
    if abs(np.linalg.det(cols)) < 1e-300 or np.linalg.matrix_rank(cols) < d:
        raise ValueError("vectors are linearly dependent")
    lengths = Y * np.linalg.norm(V, axis=1)
    order = np.argsort(lengths, kind="stable")
    stacked = np.vstack([np.linalg.inv(cols), np.diag(1.0 / Z)])
    _, s, Vt = np.linalg.svd(stacked, full_matrices=False)
    W = Vt.T / s
    w = np.empty_like(W)
    w[:, order] = W
    bound = np.minimum(lengths[:, None], Z[None, :]).T  # bound[j, i] for entry j of w_i
    ratio = float(np.max(np.abs(w) / bound))
    return BasisReduction(w, math.sqrt(d), math.sqrt(2 * d), ratio)


def basis_inclusion_check(v, Y, Z, br: BasisReduction, samples: int, seed: int = 0) -> float:
    """Largest |t_i| needed to write sampled body points in the w basis."""
    V = np.asarray(v, dtype=float)
    d = V.shape[0]
    g = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 0x55]))
    Y, Z = np.asarray(Y, dtype=float), np.asarray(Z, dtype=float)
    pts = []
    tries = 0
    while len(pts) < samples and tries < 200:
        y = g.uniform(-1, 1, size=(samples, d)) * Y
        z = y @ V
        keep = np.all(np.abs(z) <= Z, axis=1)
        pts.extend(z[keep])
        if not keep.any():
            # the Z box may be tiny relative to the Y box: sample inside it instead
            zz = g.uniform(-1, 1, size=(samples, d)) * Z
            coef = np.linalg.solve(V.T, zz.T).T
            pts.extend(zz[np.all(np.abs(coef) <= Y, axis=1)])
        tries += 1
    if not pts:
        return 0.0
    P = np.array(pts[:samples])
    T = np.linalg.solve(br.w, P.T).T
    return float(np.abs(T).max())


def voli_matrix(M, R: float, mu: Sequence[float]) -> np.ndarray:
    """Extremal entry matrix W[i, j] = min(tau_{i+1}, mu_j^2) / mu_j, i, j < p."""
    A = np.asarray(as_matrix(M)[0], dtype=float)
    p, k = A.shape
    mu = np.asarray(mu, dtype=float)
    if len(mu) != p - 1:
        raise ValueError("mu must have p - 1 entries")
    if np.any(mu <= 0) or np.any(np.diff(mu) > 0):
        raise ValueError("mu must be positive and nonincreasing")
    tau = tau_profile(M, R, k)
    return np.minimum(tau[1:, None], mu[None, :] ** 2) / mu[None, :]


def voli_bound(M, R: float, C: float, mu: Sequence[float], A: float, eps: float = 0.1) -> float:
    """1 + sum_k of the largest k-minor allowed by the entry bounds of the projected S(M, R) body.

    Only the entry sizes W[i, j] = min(tau_{i+1}, mu_j^2) / mu_j are known, so each
    D_k is bounded by the largest k x k permanent of W.

    ``A`` (the fixed last coordinate) does not enter the value; it is accepted so
    the signature matches the measured set.
    """
    Mf = np.asarray(as_matrix(M)[0], dtype=float)
    sig = singular_values(Mf)
    if not Mf[-1, 0] > eps * sig[0]:
        raise PivotTooSmall("last-row pivot too small")
    if C < 1:
        raise ValueError("C must be at least 1")
    W = voli_matrix(M, R, mu)
    n = W.shape[0]
    return 1.0 + sum(max_permanent_minor(W, k) for k in range(1, n + 1))


def _permanent(B: np.ndarray) -> float:
    n = B.shape[0]
    return float(sum(math.prod(B[i, s[i]] for i in range(n)) for s in permutations(range(n))))


def max_permanent_minor(W: np.ndarray, k: int) -> float:
    """Largest |det| over all matrices bounded entrywise by |W|, via k x k permanents."""
    W = np.abs(np.asarray(W, dtype=float))
    p, q = W.shape
    return max(_permanent(W[np.ix_(r, c)]) for r in combinations(range(p), k) for c in combinations(range(q), k))


def _affine_minor_constraints(M: np.ndarray, C: float, R: float, A: float):
    """Constraints |a . x' + c| <= b over the free coordinates x' = x[:-1], x[-1] = A."""
    p, k = M.shape
    D = all_max_subdets(M)
    cons = []
    jmax = min(p, k + 1)
    for j in range(1, jmax + 1):
        limit = C * float(D[j - 1]) if j <= min(p, k) else R
        if j == k + 1 and p < k + 1:
            continue
        for I in combinations(range(p), j):
            for J in combinations(range(k), j - 1):
                coef = np.zeros(p)
                for pos, r in enumerate(I):
                    rows = [x for x in I if x != r]
                    cof = _det_abs_signed(M[np.ix_(rows, J)]) if J else 1.0
                    coef[r] = (-1) ** (pos + j - 1) * cof
                cons.append((coef[:-1], coef[-1] * A, limit))
    return cons


def _det_abs_signed(B):
    return float(np.linalg.det(B)) if B.size else 1.0


def _clip(poly: list, a: np.ndarray, c: float) -> list:
    """Clip a convex polygon to the half-plane a . x <= c."""
    out = []
    n = len(poly)
    for i in range(n):
        P, Q = poly[i], poly[(i + 1) % n]
        fp, fq = a @ P - c, a @ Q - c
        if fp <= 0:
            out.append(P)
        if fp * fq < 0:
            out.append(P + (Q - P) * (fp / (fp - fq)))
    return out


def _polygon_distance(Z: np.ndarray, poly: np.ndarray) -> np.ndarray:
    n = len(poly)
    inside = np.ones(len(Z), dtype=bool)
    dist = np.full(len(Z), np.inf)
    area2 = sum(poly[i, 0] * poly[(i + 1) % n, 1] - poly[(i + 1) % n, 0] * poly[i, 1] for i in range(n))
    orient = 1.0 if area2 >= 0 else -1.0
    for i in range(n):
        P, Q = poly[i], poly[(i + 1) % n]
        e = Q - P
        rel = Z - P
        cross = e[0] * rel[:, 1] - e[1] * rel[:, 0]
        inside &= orient * cross >= -1e-12
        L2 = float(e @ e)
        t = np.clip((rel @ e) / L2, 0, 1) if L2 > 0 else np.zeros(len(Z))
        dist = np.minimum(dist, np.linalg.norm(rel - t[:, None] * e, axis=1))
    if n < 3 or abs(area2) <= 1e-12 * max(float(np.abs(poly).max()), 1.0) ** 2:
        return dist  # degenerate: a point or segment has no interior
    return np.where(inside, 0.0, dist)


def voli_measure_mc(M, R: float, C: float, mu: Sequence[float], A: float, samples: int,
                    seed: int = 0) -> tuple[float, float]:
    """Monte Carlo measure of {Mcal x + w : x in S(M,R), x_p = A, |x_i| in [mu_i^2/C, C mu_i^2], |w| <= 1}.

    Mcal x = (x_i / mu_i)_{i<p}.  Every minor of (M | x) is affine in x, so for
    p = 3 the admissible x form a union of convex polygons (one per sign
    pattern); the measure of their unit neighbourhood is estimated by sampling a
    bounding box.  Returns (estimate, standard error).
    """
    Mf = np.asarray(as_matrix(M)[0], dtype=float)
    p, k = Mf.shape
    if p != 3:
        raise NotImplementedError("the polygon construction needs p = 3")
    mu = np.asarray(mu, dtype=float)
    cons = _affine_minor_constraints(Mf, C, R, A)
    polys = []
    for signs in product((-1.0, 1.0), repeat=2):
        lo = np.array([mu[i] ** 2 / C for i in range(2)])
        hi = np.array([C * mu[i] ** 2 for i in range(2)])
        a_lo = np.where(np.array(signs) > 0, lo, -hi)
        a_hi = np.where(np.array(signs) > 0, hi, -lo)
        poly = [np.array([a_lo[0], a_lo[1]]), np.array([a_hi[0], a_lo[1]]),
                np.array([a_hi[0], a_hi[1]]), np.array([a_lo[0], a_hi[1]])]
        feasible = True
        for a, c, b in cons:
            if not np.any(a):
                if abs(c) > b * (1 + 1e-12):
                    feasible = False
                    break
                continue
            poly = _clip(poly, a, b - c)
            if poly:
                poly = _clip(poly, -a, b + c)
            if not poly:
                feasible = False
                break
        if feasible and poly:
            polys.append(np.array(poly) / mu)  # image under Mcal
    if not polys:
        return 0.0, 0.0
    pts = np.vstack(polys)
    lo, hi = pts.min(axis=0) - 1.0, pts.max(axis=0) + 1.0
    g = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 0x57]))
    Z = g.uniform(lo, hi, size=(samples, 2))
    dist = np.min([_polygon_distance(Z, P) for P in polys], axis=0)
    frac = float((dist <= 1.0).mean())
    box = float(np.prod(hi - lo))
    return box * frac, box * math.sqrt(frac * (1 - frac) / samples)
