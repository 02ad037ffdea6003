import itertools
from fractions import Fraction

import pytest

from torus_spectral.quadform import QuadForm, evaluate


def box_points(d: int, r: int):
    return itertools.product(range(-r, r + 1), repeat=d)


def brute_count_below(form: QuadForm, bound, r: int) -> int:
    """Independent scan of the box [-r, r]^d; r must cover the ellipsoid."""
    bound = Fraction(bound)
    return sum(1 for n in box_points(form.dim, r) if evaluate(form, n) < bound)


@pytest.fixture
def identity2():
    return QuadForm.identity(2)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[cid].line())
