import math
from fractions import Fraction

import pytest

from multisum.partition import IndexPartition
from multisum.riemann import greedy_to_infinity, greedy_to_value
from multisum.series import alternating_harmonic, alternating_sqrt

ALL = range(1, 10**6)


def _greedy_oracle(target, budget):
    """Exact-arithmetic greedy on the alternating harmonic series."""
    pos, neg = iter(range(1, 10**7, 2)), iter(range(2, 10**7, 2))
    s, out, up = Fraction(0), [], True
    t = Fraction(target)
    while len(out) < budget:
        m = next(pos) if up else next(neg)
        v = Fraction(1, m) if m % 2 else Fraction(-1, m)
        out.append(m)
        s += v
        if (up and s > t) or (not up and s < t):
            up = not up
    return out, s


def test_hand_trace_first_five():
    ordering, report = greedy_to_value(ALL, alternating_harmonic(), 0.5, 5)
    assert ordering == [1, 2, 4, 3, 6]
    assert report.used == 5


def test_matches_exact_oracle():
    ordering, report = greedy_to_value(ALL, alternating_harmonic(), 0.5, 3000)
    oracle, s = _greedy_oracle(Fraction(1, 2), 3000)
    assert ordering == oracle
    assert report.achieved == pytest.approx(float(s), abs=1e-13)


def test_half_target_budget_1e4():
    res = greedy_to_value(ALL, alternating_harmonic(), 0.5, 10**4)
    assert abs(res.report.achieved - 0.5) <= 1e-3
    assert res.report.crossing_violations == 0
    assert abs(res.report.achieved - 0.5) <= 2 * res.report.error_bound


def test_log2_target():
    res = greedy_to_value(ALL, alternating_harmonic(), math.log(2), 10**3)
    assert abs(res.report.achieved - 0.6931) <= 1e-2


def test_permutation_property_and_coverage():
    part = IndexPartition(alternating_sqrt())
    used = []
    for budget in (10**2, 10**3, 10**4):
        res = greedy_to_value(part.stream(2), part.source, -0.7, budget)
        assert len(set(res.ordering)) == len(res.ordering) == budget
        assert all(part.membership(m) == 2 for m in res.ordering)
        used.append(set(res.ordering))
    assert used[0] < used[1] < used[2]
    for sign in (1, -1):
        prefixes = [{m for m in u if (part.a[m - 1] > 0) == (sign > 0)} for u in used]
        assert prefixes[0] < prefixes[1] < prefixes[2]


def test_infinity_plus_trace():
    res = greedy_to_infinity(ALL, alternating_harmonic(), +1, 100)
    assert res.ordering[:3] == [1, 3, 2]


def test_infinity_minus_trace():
    res = greedy_to_infinity(ALL, alternating_harmonic(), -1, 100)
    assert res.ordering[:5] == [2, 4, 6, 8, 1]


def test_infinity_reaches_three():
    res = greedy_to_infinity(ALL, alternating_harmonic(), +1, 10**4)
    assert res.report.achieved >= 3
    assert res.report.error_bound >= 3


def test_starvation_reported():
    res = greedy_to_value([1, 3, 5], alternating_harmonic(), 0.5, 10)
    assert res.report.starved and res.report.used < 10


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        greedy_to_value(ALL, alternating_harmonic(), math.inf, 10)
    with pytest.raises(ValueError):
        greedy_to_value(ALL, alternating_harmonic(), 0.0, 0)
    with pytest.raises(ValueError):
        greedy_to_infinity(ALL, alternating_harmonic(), 0, 10)


def test_tie_stays_in_phase():
    # running sum hits the target exactly after 1 - 1/2: still "not crossed" in the negative phase
    res = greedy_to_value(ALL, alternating_harmonic(), 0.5, 3)
    assert res.ordering == [1, 2, 4]
