"""Positive-definite quadratic forms on Z^d with exact rational coefficients.

Coefficients are kept as :class:`fractions.Fraction`, so evaluating a form at an
integer vector is exact.  Randomly sampled forms come from floats and are stored
as the dyadic rationals those floats represent.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from ._common import as_fraction, fraction_str

KINDS = ("diagonal", "full-symmetric")
FAMILIES = ("rectangular", "full")


class NotPositiveDefinite(ValueError):
    pass


def _exact_pivots(rows: list[list[Fraction]]) -> list[Fraction]:
    # Gaussian elimination without pivoting; all pivots > 0 iff positive definite.
    a = [r[:] for r in rows]
    d = len(a)
    pivots = []
    for k in range(d):
        p = a[k][k]
        pivots.append(p)
        if p <= 0:
            break
        for i in range(k + 1, d):
            f = a[i][k] / p
            if f:
                for j in range(k, d):
                    a[i][j] -= f * a[k][j]
    return pivots


@dataclass(frozen=True)
class QuadForm:
    """Q(x) = sum_ij coeffs[i][j] x_i x_j with a symmetric positive-definite matrix."""

    coeffs: tuple
    kind: str = "full-symmetric"
    dim: int = field(init=False)

    def __post_init__(self):
        rows = tuple(tuple(as_fraction(c) for c in row) for row in self.coeffs)
        d = len(rows)
        if d < 1 or any(len(r) != d for r in rows):
            raise ValueError("coefficient matrix must be square and non-empty")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        for i in range(d):
            for j in range(i + 1, d):
                if rows[i][j] != rows[j][i]:
                    raise ValueError("coefficient matrix is not symmetric")
                if self.kind == "diagonal" and rows[i][j] != 0:
                    raise ValueError("diagonal form has a non-zero off-diagonal entry")
        if any(p <= 0 for p in _exact_pivots([list(r) for r in rows])):
            raise NotPositiveDefinite("not positive definite")
        object.__setattr__(self, "coeffs", rows)
        object.__setattr__(self, "dim", d)

    @classmethod
    def identity(cls, d: int) -> "QuadForm":
        return cls.diagonal([1] * d)

    @classmethod
    def diagonal(cls, betas: Sequence) -> "QuadForm":
        d = len(betas)
        rows = [[as_fraction(betas[i]) if i == j else Fraction(0) for j in range(d)] for i in range(d)]
        return cls(rows, kind="diagonal")

    @cached_property
    def matrix(self) -> np.ndarray:
        return np.array([[float(c) for c in row] for row in self.coeffs])

    @cached_property
    def chol(self) -> np.ndarray:
        return cholesky(self)

    @cached_property
    def det(self) -> Fraction:
        p = _exact_pivots([list(r) for r in self.coeffs])
        return math.prod(p, start=Fraction(1))

    @cached_property
    def diag(self) -> tuple:
        return tuple(self.coeffs[i][i] for i in range(self.dim))

    @cached_property
    def scaled_int(self) -> tuple[tuple[tuple[int, ...], ...], int]:
        """(B, den) with B integer and coeffs == B / den."""
        den = 1
        for row in self.coeffs:
            for c in row:
                den = math.lcm(den, c.denominator)
        B = tuple(tuple(int(c * den) for c in row) for row in self.coeffs)
        return B, den

    def in_generic_box(self, halfwidth: float | None = None) -> bool:
        """Whether the form lies in the box its sampling family draws from."""
        d = self.dim
        w = Fraction(1, 10 * d * d) if halfwidth is None else as_fraction(halfwidth)
        if self.kind == "diagonal":
            return all(1 <= b <= 2 for b in self.diag)
        return all(
            abs(self.coeffs[i][j] - (1 if i == j else 0)) <= w for i in range(d) for j in range(d)
        )

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "kind": self.kind,
            "coeffs": [[fraction_str(c) for c in row] for row in self.coeffs],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "QuadForm":
        try:
            dim, kind, coeffs = obj["dim"], obj["kind"], obj["coeffs"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"form JSON needs dim, kind, coeffs: {exc}") from exc
        form = cls(coeffs, kind=kind)
        if form.dim != dim:
            raise ValueError(f"dim {dim} does not match a {form.dim}x{form.dim} matrix")
        return form

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "QuadForm":
        return cls.from_dict(json.loads(text))


def evaluate(q: QuadForm, n: Sequence[int]) -> Fraction:
    """Exact value of Q at an integer vector."""
    if len(n) != q.dim:
        raise ValueError(f"vector has length {len(n)}, form has dimension {q.dim}")
    n = [int(v) for v in n]
    B, den = q.scaled_int
    total = 0
    for i, ni in enumerate(n):
        if ni:
            row = B[i]
            total += ni * sum(row[j] * n[j] for j in range(q.dim))
    return Fraction(total, den)


eval = evaluate  # noqa: A001 - the operation's published name


def cholesky(q: QuadForm) -> np.ndarray:
    """Lower-triangular float factor L with L @ L.T == coeffs."""
    a = q.matrix
    d = q.dim
    L = np.zeros_like(a)
    for j in range(d):
        s = a[j, j] - L[j, :j] @ L[j, :j]
        if not s > 0:
            raise NotPositiveDefinite("not positive definite")
        L[j, j] = math.sqrt(s)
        for i in range(j + 1, d):
            L[i, j] = (a[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return L


@dataclass(frozen=True)
class GenericSampler:
    """Deterministic stream of generic forms.

    Sample ``index`` depends only on ``(seed, index)``, so streams can be split
    across workers without changing results.
    """

    seed: int
    family: str = "rectangular"
    dim: int = 2
    halfwidth: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        if self.dim < 1:
            raise ValueError("dim must be positive")

    @property
    def box_halfwidth(self) -> float:
        return 1.0 / (10 * self.dim**2) if self.halfwidth is None else float(self.halfwidth)

    def rng(self, index: int) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=[self.seed & (2**64 - 1), index]))

    def sample(self, index: int = 0) -> QuadForm:
        g = self.rng(index)
        d = self.dim
        if self.family == "rectangular":
            return QuadForm.diagonal([Fraction(float(b)) for b in g.uniform(1.0, 2.0, size=d)])
        w = self.box_halfwidth
        h = g.uniform(-w, w, size=(d, d))
        rows = [[Fraction(0)] * d for _ in range(d)]
        for i in range(d):
            for j in range(i, d):
                v = Fraction(float((1.0 if i == j else 0.0) + h[i, j]))
                rows[i][j] = rows[j][i] = v
        return QuadForm(rows, kind="full-symmetric")

    def __iter__(self) -> Iterator[QuadForm]:
        i = 0
        while True:
            yield self.sample(i)
            i += 1


def sample(s: GenericSampler, index: int = 0) -> QuadForm:
    return s.sample(index)
