"""Acceptance criteria 1-12.

Each test prints one ``PASS``/``FAIL`` line.  The Monte Carlo criteria take
minutes; run them alone with ``pytest tests/test_acceptance.py -v`` or as a
script with ``python tests/test_acceptance.py``.
"""
import math
import sys

import pytest

from softbool import validation as v
from softbool.model import ModelParams, degree_intensity_above

CRITERIA = [
    (1, "formulation equivalence", v.check_formulation),
    (2, "degree law, lambda = 0.2 pi", v.check_degree_law),
    (3, "degree power law", v.check_degree_tail),
    (4, "diameter slope, long-range regime", v.check_diameter_long_range),
    (5, "diameter slope, mixed regime", v.check_diameter_mixed),
    (6, "cluster-size slope", v.check_size_tail),
    (7, "coupling inclusions", v.check_couplings),
    (8, "skeleton oracle", v.check_skeleton),
    (9, "Dwass identity", v.check_dwass),
    (10, "branching dominance and tail", v.check_branching),
    (11, "fast vs naive neighbours", v.check_fast_naive),
    (12, "fit calibration", v.check_fit_calibration),
]


def _report(number, name, result, out=None):
    line = f"{'PASS' if result.passed else 'FAIL'} [{number:2d}] {name}: {result.detail} ({result.seconds:.1f}s)"
    if out is None:
        print(line)
    else:
        with out.disabled():
            print("\n" + line)
    return line


@pytest.mark.acceptance
@pytest.mark.parametrize("number,name,check", CRITERIA, ids=[f"c{n:02d}" for n, _, _ in CRITERIA])
def test_criterion(number, name, check, capsys):
    r = check()
    _report(number, name, r, capsys)
    assert r.passed, r.detail


@pytest.mark.acceptance
def test_degree_law_at_intensity_integral(capsys):
    """Companion to criterion 2 with the mean taken from the intensity integral."""
    lam = degree_intensity_above(ModelParams(0.1, 0.5, 0.0, 2.0, 2), 0.25)
    assert lam == pytest.approx(0.3 * math.pi)
    r = v.check_degree_law(lam=lam, check_id="degree_law_integral")
    _report(2, "degree law, lambda = 0.3 pi (companion)", r, capsys)
    assert r.passed, r.detail


if __name__ == "__main__":
    wanted = {int(a) for a in sys.argv[1:]}
    failed = 0
    for number, name, check in CRITERIA:
        if wanted and number not in wanted:
            continue
        r = check()
        failed += not r.passed
        _report(number, name, r)
    sys.exit(1 if failed else 0)
