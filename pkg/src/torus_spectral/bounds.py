"""Closed-form values of the known and conjectured spectral projector bounds.

``p = inf`` is a first-class value: every 1/p term is 0 there.  Values are
the right-hand sides with all implied constants set to 1; applicability is
returned alongside so callers never mistake an out-of-range formula for a
bound.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

from ._common import fmt
from .count import maximized_bound, maximized_log_terms

INF = math.inf
VARIANTS = ("very_small", "edge", "main")


def parse_p(p) -> float:
    if isinstance(p, str):
        s = p.strip().lower()
        if s in ("inf", "infinity", "oo"):
            return INF
        return float(s)
    return float(p)


def _inv(p: float) -> float:
    return 0.0 if p == INF else 1.0 / p


@dataclass(frozen=True)
class BoundParams:
    d: int
    p: float
    lam: float
    delta: float
    eps: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "p", parse_p(self.p))
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if not self.p >= 2:
            raise ValueError("p must be at least 2")
        if not self.lam >= 1:
            raise ValueError("lambda must be at least 1")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    @property
    def p_st(self) -> float:
        return 2 * (self.d + 1) / (self.d - 1)

    @property
    def sigma(self) -> float:
        return self.d - 1 - 2 * self.d * _inv(self.p)

    @property
    def inv_p(self) -> float:
        return _inv(self.p)


def stein_tomas(bp: BoundParams) -> float:
    """Euclidean L^2 -> L^p size of the projector onto a shell of width delta."""
    if bp.p >= bp.p_st:
        return bp.lam ** (bp.sigma / 2) * bp.delta**0.5
    e = 0.5 - bp.inv_p
    return bp.lam ** ((bp.d - 1) / 2 * e) * bp.delta ** ((bp.d + 1) / 2 * e)


def sogge(bp: BoundParams) -> float:
    """Unit-width projector bound on compact manifolds; delta is ignored."""
    if bp.p >= bp.p_st:
        return bp.lam ** (bp.sigma / 2)
    return bp.lam ** ((bp.d - 1) / 2 * (0.5 - bp.inv_p))


def conjecture_terms(bp: BoundParams) -> tuple[float, float, float]:
    e = (bp.d - 1) / 2 * (0.5 - bp.inv_p)
    return 1.0, (bp.lam * bp.delta) ** e, bp.lam ** ((bp.d - 1) / 2 - bp.d * bp.inv_p) * bp.delta**0.5


def conjecture_value(bp: BoundParams) -> float:
    return math.fsum(conjecture_terms(bp))


def conjecture_arbitrary(bp: BoundParams) -> tuple[float, bool]:
    """(value, whether delta > 1/lambda) for the conjectured bound on every torus."""
    return conjecture_value(bp), bp.delta > 1 / bp.lam


def conjecture_generic(bp: BoundParams) -> tuple[float, bool]:
    """(value, whether delta > lambda^(1-d+eps)) for the conjectured bound on generic tori."""
    return conjecture_value(bp), bp.delta > bp.lam ** (1 - bp.d + bp.eps)


def conjecture_l1linf(d: int, lam: float, delta: float, eps: float = 0.01) -> float:
    """What the generic conjecture predicts for the L^1 -> L^inf norm: 1 + delta lambda^(d-1+eps)."""
    return 1.0 + delta * lam ** (d - 1 + eps)


def conjecture_crossover(d: int, p) -> float | None:
    """Exponent c with delta = lambda^c where the second and third conjectured terms agree.

    Solves ((d-1)/2)(1/2-1/p)(1+c) = (d-1)/2 - d/p + c/2; None when the terms
    scale identically in delta.
    """
    ip = _inv(parse_p(p))
    e = (d - 1) / 2 * (0.5 - ip)
    if abs(e - 0.5) < 1e-15:
        return None
    return ((d - 1) / 2 - d * ip - e) / (e - 0.5)


def thm12_exponents(bp: BoundParams) -> tuple[float, float]:
    """(E1, E2): the windows are delta > max(1/lambda, lambda^(E1+eps)) and lambda^(E2+eps) < delta < 1/lambda."""
    d, ip = bp.d, bp.inv_p
    ratio = 1.0 if bp.p == INF else bp.p / (bp.p - 2)
    e1 = ratio * (1 - d / 2 + ip * (d * d - d - 2) / (d - 1))
    e2 = 1 - d / 2 + ip * d * (d - 3) / (d - 1)
    return e1, e2


def thm12_check(bp: BoundParams) -> tuple[bool, str]:
    if not bp.p > bp.p_st:
        return False, f"needs p > p_ST = {fmt(bp.p_st)}"
    e1, e2 = thm12_exponents(bp)
    inv = 1 / bp.lam
    if bp.delta > max(inv, bp.lam ** (e1 + bp.eps)):
        return True, "upper window"
    if bp.lam ** (e2 + bp.eps) < bp.delta < inv:
        return True, "lower window"
    if bp.delta == inv:
        return False, "not covered at delta = 1/lambda"
    return False, "delta outside both windows"


def thm12_applicable(bp: BoundParams) -> bool:
    return thm12_check(bp)[0]


def thm12_value(bp: BoundParams) -> float:
    return bp.lam ** ((bp.d - 1) / 2 - bp.d * bp.inv_p) * bp.delta**0.5


def thm41_value(bp: BoundParams) -> float:
    """L^2 -> L^{p_ST} bound valid on every torus: (1 + lambda delta)^(1/p_ST)."""
    return (1 + bp.lam * bp.delta) ** (1 / bp.p_st)


def _blunt_log(d: int, a: int, lam: float, delta: float, eps: float) -> float:
    if a < d:
        b = d + 1 - a
        return (1 - 1 / b) * math.log(delta) + (d - 1 + 1 / b + eps) * math.log(lam)
    f = (1 + a) / (d + 1 + a)
    return (1 - f) * math.log(delta) + (d - 1 + f + eps) * math.log(lam)


def thm13_value(d: int, a: int | None, lam: float, delta: float, eps: float = 0.01,
                variant: str = "main") -> tuple[float, bool]:
    """(value, applicable) for the three L^1 -> L^inf estimates on generic tori."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if variant == "very_small":
        return 1.0, delta < lam ** (1 - 2 * d - eps)
    if a is None:
        raise ValueError("variant needs an integer a")
    window = lam ** (-a) <= delta <= lam ** (1 - a)
    if variant == "edge":
        f = (a + 1) / (d + a + 1)
        val = delta ** (1 - f) * lam ** (d - 1 + f + eps)
        return val, window and d <= a <= 2 * d
    b = d + 1 - a
    val = delta ** (1 - 1 / b) * lam ** (d - 1 + 1 / b + eps)
    return val, window and (d - 1) / 2 <= a < d


def thm61_sharp(d: int, b: int, lam: float, delta: float, eps: float = 0.01) -> float:
    """delta^(-1/b) lambda^eps [max_b2 delta^b2 lambda^(-b2^2+(b+d)b2+1-b)]^(1/b)."""
    return math.exp(thm61_sharp_log(d, b, lam, delta, eps))


def thm61_sharp_log(d: int, b: int, lam: float, delta: float, eps: float = 0.01) -> float:
    inner = max(v for _, v in maximized_log_terms(d, b, lam, delta))
    return -math.log(delta) / b + eps * math.log(lam) + inner / b


def thm61_sharp_direct(d: int, b: int, lam: float, delta: float, eps: float = 0.01) -> float:
    return delta ** (-1 / b) * lam**eps * maximized_bound(d, b, lam, delta) ** (1 / b)


def thm61_blunt(d: int, a: int, lam: float, delta: float, eps: float = 0.01) -> tuple[float, bool]:
    """(value, applicable): applicable when lambda^-a <= delta <= lambda^(1-a)."""
    if a < 0:
        raise ValueError("a must be a nonnegative integer")
    return math.exp(_blunt_log(d, a, lam, delta, eps)), lam ** (-a) <= delta <= lam ** (1 - a)


def blunt_a(lam: float, delta: float) -> int:
    """The integer a with lambda^-a <= delta <= lambda^(1-a)."""
    return max(0, math.ceil(-math.log(delta) / math.log(lam) - 1e-12))


@dataclass
class BoundEntry:
    name: str
    applicable: bool
    value: float
    condition: str
    kind: str = "theorem"


@dataclass
class RegimeReport:
    params: dict
    bounds: list = field(default_factory=list)

    @property
    def minimum(self) -> BoundEntry | None:
        cands = [b for b in self.bounds if b.applicable and b.kind == "theorem"]
        return min(cands, key=lambda b: (b.value, b.name)) if cands else None

    def to_dict(self) -> dict:
        m = self.minimum
        return {
            "meta": self.params,
            "bounds": [
                {"name": b.name, "kind": b.kind, "applicable": b.applicable, "value": fmt(b.value),
                 "condition": b.condition}
                for b in self.bounds
            ],
            "minimum": None if m is None else {"name": m.name, "value": fmt(m.value)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def regime_report(bp: BoundParams, b_max: int | None = None) -> RegimeReport:
    """Every bound at these parameters, as L^2 -> L^p sizes.

    L^1 -> L^inf estimates enter at p = inf through their square roots, since
    the L^1 -> L^inf norm of a projector is the square of its L^2 -> L^inf norm.
    """
    d, lam, delta, eps = bp.d, bp.lam, bp.delta, bp.eps
    rep = RegimeReport({"d": d, "p": fmt(bp.p), "lambda": fmt(lam), "delta": fmt(delta), "eps": fmt(eps)})
    add = rep.bounds.append
    add(BoundEntry("trivial_l2", bp.p == 2, 1.0, "p = 2: the projector is an L^2 contraction"))
    add(BoundEntry("stein_tomas", True, stein_tomas(bp), "Euclidean comparison", "reference"))
    add(BoundEntry("sogge", True, sogge(bp), "unit-width comparison", "reference"))
    v, ok = conjecture_arbitrary(bp)
    add(BoundEntry("conjecture_arbitrary", ok, v, "delta > 1/lambda", "conjecture"))
    v, ok = conjecture_generic(bp)
    add(BoundEntry("conjecture_generic", ok, v, "delta > lambda^(1-d+eps)", "conjecture"))
    ok, why = thm12_check(bp)
    add(BoundEntry("thm12", ok, thm12_value(bp), why))
    add(BoundEntry("thm41", bp.p == bp.p_st, thm41_value(bp), "p = p_ST"))
    at_inf = bp.p == INF
    v, ok = thm13_value(d, None, lam, delta, eps, "very_small")
    add(BoundEntry("thm13_very_small", at_inf and ok, math.sqrt(v), "p = inf, delta < lambda^(1-2d-eps)"))
    a = blunt_a(lam, delta)
    for variant in ("edge", "main"):
        v, ok = thm13_value(d, a, lam, delta, eps, variant)
        add(BoundEntry(f"thm13_{variant}", at_inf and ok, math.sqrt(v), f"p = inf, a = {a}"))
    v, ok = thm61_blunt(d, a, lam, delta, eps)
    add(BoundEntry("thm61_blunt", at_inf and ok, math.sqrt(v), f"p = inf, a = {a}"))
    b_max = 2 * d + 2 if b_max is None else b_max
    best_b = min(range(1, b_max + 1), key=lambda b: thm61_sharp_log(d, b, lam, delta, eps))
    add(BoundEntry("thm61_sharp", at_inf, math.exp(thm61_sharp_log(d, best_b, lam, delta, eps) / 2),
                   f"p = inf, best b = {best_b}"))
    return rep
