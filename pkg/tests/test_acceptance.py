"""Full-size acceptance criteria; one pass/fail line per criterion is printed in the summary."""
import pytest

from torus_spectral import verify

pytestmark = pytest.mark.acceptance

# wall-clock limits in seconds, one per criterion
TIME_LIMITS = {1: 60, 2: 30, 3: 300, 4: 120, 5: 60, 6: 600, 7: 120, 8: 180, 9: 300, 10: 900, 11: 60, 12: 1, 13: 600}

RESULTS: dict = {}


@pytest.mark.parametrize("cid", range(1, len(verify.CHECKS) + 1))
def test_criterion(cid):
    res = verify.CHECKS[cid - 1]("full", 0)
    RESULTS[cid] = res
    assert res.id == cid
    assert res.seconds <= TIME_LIMITS[cid], f"took {res.seconds:.1f}s, limit {TIME_LIMITS[cid]}s"
    if res.hard:
        assert res.passed, res.line()
