"""Full-scale verification gate: every bundled check at its stated tolerances.

Each case prints its ``[PASS]/[FAIL]`` line with the observed statistics so a
``pytest -v`` run reads as a one-line-per-criterion report.  Sample sizes and
tolerances are the defaults baked into the check functions (n_scale = 1.0);
nothing here is loosened for test speed.
"""

import pytest

from couplex.checks import CHECKS


@pytest.mark.parametrize("name", list(CHECKS))
def test_acceptance(name):
    result = CHECKS[name]()
    print(result.line())
    assert result.passed, result.line()
