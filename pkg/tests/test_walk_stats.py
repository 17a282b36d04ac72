import math

import numpy as np
import pytest

from hyperwalk.errors import AdmissibilityError
from hyperwalk.green import StepDistribution
from hyperwalk.walk_stats import (EstimateWithError, Trajectory, convolution_powers,
                                  estimate_drift, estimate_entropy_convolution,
                                  estimate_entropy_green_speed, fundamental_gap, ray_tracking,
                                  sample_endpoints, shannon, simulate)

LOG3 = math.log(3)


def test_simulate_zero_steps(uniform_f2, f2):
    traj = simulate(uniform_f2, 0, seed=1)
    assert traj.elements == [f2.identity]


def test_simulate_deterministic(biased_m2):
    a = simulate(biased_m2, 500, seed=3)
    b = simulate(biased_m2, 500, seed=3)
    assert a.elements == b.elements
    assert simulate(biased_m2, 500, seed=4).elements != a.elements


def test_simulate_steps_are_neighbours(uniform_z2z3):
    traj = simulate(uniform_z2z3, 300, seed=2)
    for x, y in zip(traj.elements, traj.elements[1:]):
        assert x.model.word_distance(x.word, y.word) == 1


def test_single_walk_drift(uniform_f2):
    traj = simulate(uniform_f2, 10_000, seed=9)
    assert abs(len(traj.final.word) / 10_000 - 0.5) < 0.03


def test_drift_uniform(uniform_f2, f3):
    est = estimate_drift(uniform_f2, 2000, 200, seed=1)
    assert est.within(0.5)
    est = estimate_drift(StepDistribution.uniform(f3), 2000, 200, seed=1)
    assert est.within(2 / 3)


def test_inadmissible_step_rejected(f2):
    with pytest.raises(AdmissibilityError):
        StepDistribution(f2, {"a": 0.5, "A": 0.5})


def test_entropy_uniform(uniform_f2):
    est = estimate_entropy_green_speed(uniform_f2, 2000, 200, seed=2)
    assert est.within(0.5 * LOG3)
    assert estimate_entropy_green_speed(uniform_f2, 0, 10).mean == 0


def test_entropy_biased_between_bounds(biased_m2):
    s = sample_endpoints(biased_m2, 2000, 200, seed=4)
    h, l = s.green_speed(), s.drift()
    assert 0 < h.mean < l.mean * LOG3


def test_convolution_entropy_exact(uniform_f2):
    p1, p2 = convolution_powers(uniform_f2, 2)
    assert shannon(p1) == pytest.approx(math.log(4))
    assert p2[""] == pytest.approx(0.25)
    assert len(p2) == 13 and all(p2[w] == pytest.approx(1 / 16) for w in p2 if w)
    # 1/4 log 4 + 12/16 log 16
    assert shannon(p2) == pytest.approx(3.5 * math.log(2), abs=1e-12)


def test_convolution_entropy_decreases_to_green_speed(biased_m2):
    rates = estimate_entropy_convolution(biased_m2, 8)
    assert all(a >= b - 1e-12 for a, b in zip(rates, rates[1:]))
    h = estimate_entropy_green_speed(biased_m2, 2000, 200, seed=6).mean
    assert rates[-1] > h


def test_ray_tracking_deterministic_walk(f2):
    traj = Trajectory.from_words(f2, ["a" * n for n in range(20)])
    rt = ray_tracking(traj)
    assert rt.defect == 0
    assert [p.word for p in rt.ray] == ["a" * n for n in range(20)]


@pytest.mark.parametrize("mu_name", ["uniform_f2", "biased_m2"])
def test_ray_tracking_defect_small(request, mu_name):
    mu = request.getfixturevalue(mu_name)
    assert ray_tracking(simulate(mu, 10_000, seed=8)).defect < 0.05


def test_ray_tracking_identity_end(f2):
    with pytest.raises(ValueError):
        ray_tracking(Trajectory.from_words(f2, ["", "a", ""]))


def test_fundamental_inequality(biased_m2, uniform_f2):
    for mu in (biased_m2, uniform_f2):
        s = sample_endpoints(mu, 2000, 200, seed=10)
        h, l = s.green_speed(), s.drift()
        combined = math.hypot(h.se, LOG3 * l.se)
        assert h.mean <= l.mean * LOG3 + 4 * combined


def test_uniform_equality_case(uniform_f2):
    gap = fundamental_gap(sample_endpoints(uniform_f2, 2000, 200, seed=3), LOG3)
    assert abs(gap.mean) <= 3 * gap.se + 1e-12


def test_drift_consistent_under_doubling(biased_m2):
    a = estimate_drift(biased_m2, 1000, 200, seed=21)
    b = estimate_drift(biased_m2, 2000, 200, seed=22)
    assert abs(a.mean - b.mean) <= 3 * math.hypot(a.se, b.se)


def test_endpoint_sampling_repeatable(biased_m2):
    a = sample_endpoints(biased_m2, 50, 20_000, seed=1).lengths
    b = sample_endpoints(biased_m2, 50, 20_000, seed=1).lengths
    np.testing.assert_array_equal(a, b)


def test_estimate_se_nonnegative():
    e = EstimateWithError(1.0, 0.0, 1, "x")
    assert e.within(1.0) and not e.within(1.1)
