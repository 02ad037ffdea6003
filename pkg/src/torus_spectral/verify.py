"""Reproducible checks for the thirteen acceptance criteria.

Each check returns a :class:`CheckResult`.  ``level="full"`` runs the stated
sizes; ``level="fast"`` shrinks sample counts so the whole suite finishes in
a couple of minutes.  Soft checks report without failing the suite.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import permutations

import numpy as np

from . import bounds, count, lattice, subdet, weyl
from ._common import fmt
from .quadform import GenericSampler, QuadForm


@dataclass
class CheckResult:
    id: int
    name: str
    passed: bool
    measured: float
    threshold: float
    hard: bool = True
    seconds: float = 0.0
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else ("WARN" if not self.hard else "FAIL")
        return (f"criterion {self.id:2d} [{status}] {self.name}: measured={fmt(self.measured)} "
                f"threshold={fmt(self.threshold)} ({self.seconds:.1f}s)")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["measured"] = fmt(self.measured)
        out["threshold"] = fmt(self.threshold)
        del out["seconds"]  # keep reports byte-stable across reruns
        return out


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), stream]))


def _timed(fn):
    def wrapper(level: str = "full", seed: int = 0) -> CheckResult:
        t0 = time.perf_counter()
        res = fn(level, seed)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _dyadic_fraction(x: float, bits: int = 20) -> Fraction:
    return Fraction(round(x * 2**bits), 2**bits)


@_timed
def check_counting_identity(level, seed):
    """Shell count = N(lam+delta) - N(lam-delta) = number of enumerated shell points."""
    g = _rng(seed, 1)
    n = 200 if level == "full" else 40
    mismatches = []
    for i in range(n):
        d = 2 + (i % 2)
        family = "rectangular" if i % 4 < 2 else "full"
        form = GenericSampler(seed * 1000 + i, family, d).sample()
        lam = _dyadic_fraction(g.uniform(2.0, 500.0 if level == "full" else 120.0))
        delta = _dyadic_fraction(math.exp(g.uniform(math.log(1e-3), 0.0)))
        q = lattice.ShellQuery(form, lam, delta)
        a = lattice.shell_count(q)
        b = lattice.count_points(form, lam + delta) - lattice.count_points(form, lam - delta)
        c = sum(len(blk) for blk in lattice.iter_shell_blocks(q))
        if not a == b == c:
            mismatches.append({"form": form.to_dict(), "lam": str(lam), "delta": str(delta), "counts": [a, b, c]})
    return CheckResult(1, "counting identity", not mismatches, len(mismatches), 0,
                       details={"triples": n, "mismatches": mismatches[:5]})


@_timed
def check_leading_volume(level, seed):
    """N(lam) against the volume term for the identity form."""
    n2 = lattice.count_points(QuadForm.identity(2), 500)
    err2 = abs(n2 / 500**2 - math.pi)
    n3 = lattice.count_points(QuadForm.identity(3), 100)
    err3 = abs(n3 / 100**3 - 4 * math.pi / 3) / (4 * math.pi / 3)
    ok = err2 < 0.01 and err3 < 0.02
    return CheckResult(2, "leading-order volume", ok, max(err2 / 0.01, err3 / 0.02), 1.0,
                       details={"d2_abs_error": err2, "d3_rel_error": err3, "N2": n2, "N3": n3})


@_timed
def check_error_term_growth(level, seed):
    """Fitted growth exponent of |P(lam)| for generic diagonal forms in d = 4 (soft)."""
    nforms = 20 if level == "full" else 4
    lams = list(range(20, 61, 5))
    slopes = []
    for i in range(nforms):
        form = GenericSampler(seed * 1000 + i, "rectangular", 4).sample()
        errs = np.array([abs(lattice.error_term(form, lam)) for lam in lams])
        errs = np.maximum(errs, 1e-9)
        slopes.append(float(np.polyfit(np.log(lams), np.log(errs), 1)[0]))
    med = float(np.median(slopes))
    return CheckResult(3, "generic error-term scale", med <= 2.5, med, 2.5, hard=False,
                       details={"slopes": slopes, "lambdas": lams})


@_timed
def check_weyl_bound(level, seed):
    """max |K1_N(a/q, y)| sqrt(q) / N^1.1 over reduced a/q with q <= 64."""
    Ns = [64, 128, 256, 512] if level == "full" else [64, 128]
    worst, arg = 0.0, None
    for N in Ns:
        for q in range(1, 65):
            for a in range(q):
                if math.gcd(a, q) != 1:
                    continue
                v = float(np.abs(weyl.kernel_1d_grid(N, Fraction(a, q), 4 * N)).max()) * math.sqrt(q) / N**1.1
                if v > worst:
                    worst, arg = v, (N, a, q)
    return CheckResult(4, "Weyl bound", worst <= 10, worst, 10.0,
                       details={"argmax": {"N": arg[0], "a": arg[1], "q": arg[2]}, "grid": "4N points in y"})


@_timed
def check_arc_partition(level, seed):
    """One label per time, disjoint major arcs, and agreement with a denominator scan."""
    N, c0 = 256, Fraction(1, 8)
    n = 100_000 if level == "full" else 20_000
    ts = _rng(seed, 5).uniform(1.0 / N, 1.0, size=n)
    hits, Qs = weyl.arc_codes(ts, N, c0)
    overlaps = int((hits > 1).sum())
    disagreements = 0
    for t, h, Q in zip(ts.tolist(), hits.tolist(), Qs.tolist()):
        lab = weyl.classify_arc(t, N, c0)
        if not lab.holds_for(t, N):
            disagreements += 1
        expected = "minor" if h == 0 else ("lambda0" if Q == 0 else "major")
        if lab.kind != expected or (expected == "major" and lab.Q != Q):
            disagreements += 1
    arcs = weyl.major_arc_fractions(N, c0, 0.0, 1.0)
    intervals = [(Fraction(-1, N), Fraction(1, N))] + [(c - h, c + h) for c, _, _, _, h in arcs]
    intervals.sort()
    touching = sum(1 for (a0, b0), (a1, b1) in zip(intervals, intervals[1:]) if a1 <= b0)
    bad = overlaps + disagreements + touching
    return CheckResult(5, "arc partition", bad == 0, bad, 0,
                       details={"samples": n, "overlaps": overlaps, "disagreements": disagreements,
                                "intersecting_arc_pairs": touching, "arcs": len(arcs)})


@_timed
def check_square_root_trend(level, seed):
    """Growth exponent in N of the time-averaged sup-norm proxy for d = 2 diagonal forms."""
    Ns = [16, 32, 64, 128]
    nbeta = 30 if level == "full" else 5
    slopes, consts = [], []
    for i in range(nbeta):
        form = GenericSampler(seed * 1000 + i, "rectangular", 2).sample()
        vals = [weyl.time_average_sup(weyl.WeylParams(N, form), 1.0, 32 * N, "upper") for N in Ns]
        s, c = np.polyfit(np.log(Ns), np.log(vals), 1)
        slopes.append(float(s))
        consts.append(float(math.exp(c)))
    lo, hi = min(slopes), max(slopes)
    ok = lo >= 0.8 and hi <= 1.6
    return CheckResult(6, "square-root cancellation trend", ok, hi if hi > 1.6 else lo, 1.6,
                       details={"band": [0.8, 1.6], "slopes": slopes, "fitted_constants": consts})


@_timed
def check_sigma_d(level, seed):
    """D_k against sigma_1...sigma_k with binomial constants; exact vs float minors."""
    g = _rng(seed, 7)
    per = 1000 if level == "full" else 100
    violations, worst_rel, worst_ratio = 0, 0.0, 0.0
    for p in range(1, 7):
        for q in range(1, 9):
            Ms = g.integers(-9, 10, size=(per, p, q))
            De = subdet.batch_max_subdets(Ms)
            Df = subdet.batch_max_subdets_float(Ms)
            s = np.linalg.svd(Ms.astype(float), compute_uv=False)
            for k in range(1, min(p, q) + 1):
                c = subdet.correspondence_constant(p, q, k)
                sp = np.prod(s[:, :k], axis=1)
                dk = De[:, k - 1].astype(float)
                ok = (dk <= c * sp * (1 + 1e-9) + 1e-9) & (sp <= c * dk * (1 + 1e-9) + 1e-9)
                violations += int((~ok).sum())
                nz = dk > 0
                if nz.any():
                    worst_ratio = max(worst_ratio, float(np.max(np.maximum(dk[nz] / sp[nz], sp[nz] / dk[nz]) / c)))
                worst_rel = max(worst_rel, float(np.max(np.abs(dk - Df[:, k - 1]) / np.maximum(dk, 1.0))))
    ok = violations == 0 and worst_rel <= 1e-6
    return CheckResult(7, "sigma/D correspondence", ok, violations, 0,
                       details={"per_shape": per, "exact_vs_float_rel": worst_rel,
                                "worst_ratio_over_constant": worst_ratio})


def _prefix_table(M: np.ndarray):
    p, q = M.shape
    levels = subdet.minor_levels(M.astype(np.int64)[None], min(p, q))
    return [np.abs(levels[k][0]) for k in range(len(levels))]


def _prefix_min_ratio(levels, Dk, perm, m) -> float:
    from .subdet import _subsets

    out = math.inf
    for k in range(1, m + 1):
        cols = tuple(sorted(perm[:k]))
        _, index = _subsets(len(perm), k)
        pre = float(levels[k][:, index[cols]].max())
        out = min(out, 1.0 if Dk[k - 1] == 0 else pre / Dk[k - 1])
    return out


@_timed
def check_rearrangement(level, seed):
    """Prefix subdeterminants after rearrange_columns, against every column order."""
    g = _rng(seed, 8)
    n = 1000 if level == "full" else 150
    n_exh = 100 if level == "full" else 15
    c = float(subdet.rearrangement_constant(4, 6))
    fails, worst, exh_fails, worst_vs_best = 0, math.inf, 0, math.inf
    all_perms = list(permutations(range(6)))
    for i in range(n):
        M = g.integers(-5, 6, size=(4, 6))
        perm = subdet.rearrange_columns(M.tolist())
        levels = _prefix_table(M)
        Dk = [float(levels[k].max()) for k in range(1, 5)]
        r = _prefix_min_ratio(levels, Dk, perm, 4)
        worst = min(worst, r)
        if r < c * (1 - 1e-12):
            fails += 1
        if i < n_exh:
            best = max(_prefix_min_ratio(levels, Dk, p, 4) for p in all_perms)
            worst_vs_best = min(worst_vs_best, r / best)
            if r < c * best * (1 - 1e-12):
                exh_fails += 1
    ok = fails == 0 and exh_fails == 0
    return CheckResult(8, "column rearrangement", ok, worst, c,
                       details={"matrices": n, "exhaustive": n_exh, "postcondition_failures": fails,
                                "exhaustive_failures": exh_fails, "worst_greedy_over_best": worst_vs_best})


def voli_cases(n: int, seed: int):
    """Random integer 3 x 2 matrices of the form P(m), with matching mu, R and A."""
    g = _rng(seed, 9)
    cases, tries = [], 0
    while len(cases) < n and tries < 50 * n:
        tries += 1
        lam = int(g.choice([8, 16, 32]))
        top = int(math.log2(lam))
        mu = sorted((2 ** int(g.integers(1, top + 1)) for _ in range(2)), reverse=True)
        m = np.array([[int(g.integers(max(1, mu[i] // 2), mu[i] + 1)) for _ in range(2)] for i in range(2)])
        M = np.vstack([m**2, [lam * lam] * 2]).astype(np.int64)
        D2 = float(subdet.max_subdet(M.tolist(), 2))
        R = D2 * math.exp(g.uniform(math.log(1e-2), math.log(1e3))) * lam * lam / 4
        try:
            b = subdet.voli_bound(M.tolist(), R, 2.0, mu, lam * lam)
        except subdet.PivotTooSmall:
            continue
        cases.append((M, R, mu, lam * lam, b))
    return cases


@_timed
def check_voli(level, seed):
    """Monte Carlo measure of the projected S(M, R) body against 50 * voli_bound."""
    n = 100 if level == "full" else 15
    samples = 100_000 if level == "full" else 20_000
    worst, violations = 0.0, []
    for i, (M, R, mu, A, b) in enumerate(voli_cases(n, seed)):
        v, se = subdet.voli_measure_mc(M, R, 2.0, mu, A, samples, seed=seed * 1000 + i)
        worst = max(worst, v / b)
        if v > 50 * b:
            violations.append({"M": M.tolist(), "R": R, "mu": mu, "measure": v, "bound": b})
    return CheckResult(9, "projected volume bound", not violations, worst, 50.0,
                       details={"matrices": n, "samples": samples, "violations": violations})


@_timed
def check_moments(level, seed):
    """Moment integral against (log lambda0)^(bd+d) times the dyadic maximum, one global C."""
    samples = 10_000 if level == "full" else 1_000
    cells, worst = [], 0.0
    for d in (1, 2):
        for b in (1, 2):
            for lam in (16, 32):
                for delta in (Fraction(1, 16), Fraction(1, 64)):
                    lhs = count.moment_lhs(d, b, lam, delta, samples, seed=seed)
                    rhs = count.moment_rhs_dyadic_max(d, b, lam, delta)
                    C = lhs.value / (math.log(lam) ** (b * d + d) * rhs.value)
                    worst = max(worst, C)
                    cells.append({"d": d, "b": b, "lambda0": lam, "delta": str(delta), "lhs": lhs.value,
                                  "stderr": lhs.stderr, "rhs": rhs.value, "C": C,
                                  "argmax": {"d": rhs.d_eff, "mu": list(rhs.mu), "L": [str(x) for x in rhs.L]}})
    return CheckResult(10, "moment inequality", worst <= 100, worst, 100.0,
                       details={"samples": samples, "cells": cells})


@_timed
def check_maximization(level, seed):
    """Restricted-grid brute force of the counting bound against the closed-form maximum."""
    worst, cells, above = 0.0, [], 0
    for d in (1, 2, 3):
        for b in (1, 2, 3, 4):
            for lam in (100, 1000):
                for e in (1, 2, 3, 4):
                    delta = 10.0**-e
                    brute, _ = count.restricted_grid_max(d, b, lam, delta)
                    closed = count.maximized_bound(d, b, lam, delta, min_b2=1)
                    full = count.maximized_bound(d, b, lam, delta)
                    diff = abs(math.log(brute) - math.log(closed))
                    worst = max(worst, diff)
                    if brute > full * (1 + 1e-12):
                        above += 1
                    if full > closed:
                        cells.append({"d": d, "b": b, "lambda0": lam, "delta": delta,
                                      "b2_zero_term_dominates": True})
    ok = worst <= 1e-9 and above == 0
    return CheckResult(11, "maximization consistency", ok, worst, 1e-9,
                       details={"cells_where_b2_zero_term_dominates": cells, "brute_above_closed_form": above})


@_timed
def check_sharp_blunt_consistency(level, seed):
    """Sharp form at b = d+1-a against the blunt form for a < d, in log scale."""
    worst, n = 0.0, 0
    for d in range(2, 7):
        for a in range(0, d):
            b = d + 1 - a
            for lam in (10.0, 100.0, 1e3, 1e4, 1e6):
                for t in (0.0, 0.2, 0.5, 0.8, 1.0):
                    delta = lam ** (-a + t)
                    if not delta < 1:
                        continue
                    s = bounds.thm61_sharp_log(d, b, lam, delta, 0.01)
                    bl = math.log(bounds.thm61_blunt(d, a, lam, delta, 0.01)[0])
                    scale = max(1.0, abs(bl))
                    worst = max(worst, abs(s - bl) / scale)
                    n += 1
    return CheckResult(12, "sharp/blunt consistency", worst <= 1e-12, worst, 1e-12, details={"points": n})


@_timed
def check_empirical_vs_conjecture(level, seed):
    """Measured shell counts at delta = lambda^(-1/2) against 20 (1 + delta lambda^1.01)."""
    g = _rng(seed, 13)
    n = 50 if level == "full" else 10
    ratios, outliers = [], []
    for i in range(n):
        family = "rectangular" if i % 2 == 0 else "full"
        form = GenericSampler(seed * 1000 + i, family, 2).sample()
        lam = _dyadic_fraction(g.uniform(100.0, 2000.0))
        delta = _dyadic_fraction(float(lam) ** -0.5, 40)
        measured = lattice.shell_count(lattice.ShellQuery(form, lam, delta))
        bound = 20 * bounds.conjecture_l1linf(2, float(lam), float(delta), 0.01)
        ratios.append(measured / bound)
        if measured > bound:
            outliers.append({"beta": form.to_dict()["coeffs"], "lambda": float(lam), "count": measured})
    frac = 1 - len(outliers) / n
    return CheckResult(13, "empirical vs conjecture", frac >= 0.95, frac, 0.95,
                       details={"forms": n, "max_ratio": max(ratios), "outliers": outliers})


CHECKS = [
    check_counting_identity, check_leading_volume, check_error_term_growth, check_weyl_bound,
    check_arc_partition, check_square_root_trend, check_sigma_d, check_rearrangement, check_voli,
    check_moments, check_maximization, check_sharp_blunt_consistency, check_empirical_vs_conjecture,
]


def verify_suite(level: str = "fast", seed: int = 0, only=None, echo=None) -> dict:
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    results = []
    for i, check in enumerate(CHECKS, start=1):
        if only and i not in only:
            continue
        res = check(level, seed)
        if echo:
            echo(res.line())
        results.append(res)
    return {
        "level": level,
        "seed": seed,
        "passed": all(r.passed for r in results if r.hard),
        "results": [r.to_dict() for r in results],
    }
