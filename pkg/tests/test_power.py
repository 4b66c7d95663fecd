import math

import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from susco.constellation import RoutePath
from susco.power import (BatteryState, EnergyParams, SplitMismatch, life_consumption_K,
                         life_consumption_integrand, life_multiplier, offload_energy, path_energy,
                         service_life_cost_L, step_battery)

levels = st.floats(0.0, 1.0)
chem = st.floats(0.5, 3.0)


def _quad_K(hi, lo, a):
    # independent oracle: integrate the raw integrand, ignoring the closed form
    val, _ = quad(lambda p: 10.0 ** (-a * p) * (1.0 + a * math.log(10.0) * (1.0 - p)), lo, hi,
                  epsabs=1e-13, epsrel=1e-13)
    return val


def test_K_worked_example():
    k = life_consumption_K(0.8, 0.7, 1.0)
    assert k == pytest.approx(0.3 * 10 ** -0.7 - 0.2 * 10 ** -0.8, abs=1e-15)
    assert k == pytest.approx(0.0281600, abs=1e-7)
    assert k == pytest.approx(_quad_K(0.8, 0.7, 1.0), abs=1e-12)


def test_K_is_zero_without_discharge():
    assert life_consumption_K(0.5, 0.5) == 0.0
    assert life_consumption_K(0.5, 0.6) == 0.0
    with pytest.raises(ValueError):
        life_consumption_K(1.2, 0.5)
    with pytest.raises(ValueError):
        life_consumption_K(0.5, -0.1)


@settings(max_examples=300)
@given(levels, levels, chem)
def test_K_matches_quadrature(p1, p2, a):
    hi, lo = max(p1, p2), min(p1, p2)
    assert abs(life_consumption_K(hi, lo, a) - _quad_K(hi, lo, a)) <= 1e-9


@given(levels, levels, chem)
def test_K_nonnegative_and_zero_iff_not_decreasing(p1, p2, a):
    k = life_consumption_K(p1, p2, a)
    assert k >= 0.0
    if p1 <= p2:
        assert k == 0.0
    elif p1 - p2 > 1e-6:
        assert k > 0.0


@given(levels, levels, levels, chem)
def test_K_additive_over_splits(x, y, z, a):
    c, b, top = sorted((x, y, z))
    assert life_consumption_K(top, c, a) == pytest.approx(
        life_consumption_K(top, b, a) + life_consumption_K(b, c, a), abs=1e-12)


def test_integrand_is_positive_on_unit_interval():
    assert all(life_consumption_integrand(p / 10, 2.0) > 0 for p in range(11))


def _battery(q, qmax=1000.0, level=0.5):
    return BatteryState(level, q, qmax)


def test_L_multiplier_examples():
    assert service_life_cost_L([0.1, 0.2], _battery(1000.0)) == pytest.approx(0.3)
    assert life_multiplier(_battery(500.0)) == pytest.approx(math.e)
    assert service_life_cost_L([0.1], _battery(0.0)) == math.inf
    assert service_life_cost_L([], _battery(1000.0)) == 0.0


@given(st.floats(1.0, 1000.0), st.floats(1.0, 1000.0))
def test_L_non_increasing_in_remaining_lifespan(q1, q2):
    lo, hi = sorted((q1, q2))
    assert service_life_cost_L([0.05], _battery(lo)) >= service_life_cost_L([0.05], _battery(hi))


def test_battery_validation():
    with pytest.raises(ValueError):
        BatteryState(1.5, 10.0)
    with pytest.raises(ValueError):
        BatteryState(0.5, 2000.0)
    with pytest.raises(ValueError):
        BatteryState(0.5, 10.0, capacity=0.0)
    with pytest.raises(ValueError):
        EnergyParams(epsilon=0.0)


def _path(n):
    return RoutePath(tuple(range(n)), tuple(1.0 for _ in range(n - 1)))


def test_path_energy_examples():
    assert path_energy(300.0, _path(3), 0.08) == pytest.approx(72.0)
    assert path_energy(0.0, _path(3), 0.08) == 0.0
    assert path_energy(300.0, _path(1), 0.08) == pytest.approx(24.0)
    assert path_energy(10.0, _path(2), {0: 0.1, 1: 0.3}) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        path_energy(-1.0, _path(2), 0.08)


@given(st.floats(0.0, 1e4), st.floats(0.0, 1e4), st.integers(1, 8), st.integers(1, 8))
def test_path_energy_linear_and_additive(t1, t2, n1, n2):
    e = 0.08
    assert path_energy(t1 + t2, _path(n1), e) == pytest.approx(
        path_energy(t1, _path(n1), e) + path_energy(t2, _path(n1), e), rel=1e-12, abs=1e-9)
    joined = RoutePath(tuple(range(n1 + n2)), tuple(1.0 for _ in range(n1 + n2 - 1)))
    assert path_energy(t1, joined, e) == pytest.approx(
        path_energy(t1, _path(n1), e) + path_energy(t1, _path(n2), e), rel=1e-12, abs=1e-9)


def test_offload_energy_examples():
    prefix = _path(2)
    assert offload_energy({7: 300.0}, {7: prefix}, 0.08, total=300.0) == path_energy(300.0, prefix, 0.08)
    both = offload_energy({1: 150.0, 2: 150.0}, {1: prefix, 2: prefix}, 0.08, total=300.0)
    assert both == pytest.approx(path_energy(300.0, prefix, 0.08))
    assert offload_energy({}, {}, 0.08) == 0.0
    with pytest.raises(SplitMismatch):
        offload_energy({1: 100.0}, {1: prefix}, 0.08, total=300.0)


def test_step_battery_examples():
    full = BatteryState(1.0, 800.0)
    assert step_battery(full, 0.0, False, 60.0, 600.0) == full
    assert step_battery(full, 500.0, True, 0.0) == full
    state = BatteryState(0.8, 800.0, capacity=1.0e6)
    # 1e5 J drained over 100 s is 10% of capacity
    after = step_battery(state, 1000.0, True, 100.0, 600.0)
    assert after.level == pytest.approx(0.7)
    assert after.remaining_lifespan == pytest.approx(800.0 - life_consumption_K(0.8, 0.7))


@given(levels, st.floats(0.0, 2000.0), st.booleans(), st.floats(0.0, 600.0))
def test_step_battery_stays_in_range(level, load, dark, dt):
    s = step_battery(BatteryState(level, 1e-4), load, dark, dt, 600.0)
    assert 0.0 <= s.level <= 1.0
    assert s.remaining_lifespan >= 0.0
    if not dark and load <= 600.0:
        assert s.level >= level
