"""Battery level, life consumption and routing energy."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .constellation import RoutePath

LN10 = math.log(10.0)


class SplitMismatch(ValueError):
    """Traffic splits do not add up to the task's data amount."""


@dataclass(frozen=True)
class BatteryState:
    level: float
    remaining_lifespan: float
    max_lifespan: float = 1000.0
    chemistry_constant: float = 1.0
    capacity: float = 2.0e6  # J

    def __post_init__(self):
        if not 0.0 <= self.level <= 1.0:
            raise ValueError(f"battery level must be in [0, 1]: {self.level}")
        if self.max_lifespan <= 0 or self.chemistry_constant <= 0 or self.capacity <= 0:
            raise ValueError("max_lifespan, chemistry_constant and capacity must be positive")
        if not 0.0 <= self.remaining_lifespan <= self.max_lifespan:
            raise ValueError(f"remaining lifespan must be in [0, {self.max_lifespan}]")


@dataclass(frozen=True)
class EnergyParams:
    epsilon: float = 0.08  # J per Mb routed through one satellite
    solar_charge_rate: float = 600.0  # W
    idle_draw: float = 400.0  # W

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def _antiderivative(psi: float, a: float) -> float:
    # d/dpsi of (1 - psi) 10^(-a psi) is -10^(-a psi) (1 + a ln10 (1 - psi))
    return (1.0 - psi) * 10.0 ** (-a * psi)


def life_consumption_integrand(psi: float, a: float) -> float:
    return 10.0 ** (-a * psi) * (1.0 + a * LN10 * (1.0 - psi))


def life_consumption_K(psi_before: float, psi_after: float, a: float = 1.0) -> float:
    """Battery life consumed when the level falls from ``psi_before`` to ``psi_after``.

    Zero whenever the level does not decrease.
    """
    for psi in (psi_before, psi_after):
        if not 0.0 <= psi <= 1.0:
            raise ValueError(f"battery level outside [0, 1]: {psi}")
    if psi_before <= psi_after:
        return 0.0
    return max(0.0, _antiderivative(psi_after, a) - _antiderivative(psi_before, a))


def life_multiplier(battery: BatteryState) -> float:
    """exp((Q_max - Q) / Q), or +inf for an exhausted battery."""
    q = battery.remaining_lifespan
    if q <= 0:
        return math.inf
    try:
        return math.exp((battery.max_lifespan - q) / q)
    except OverflowError:
        return math.inf


def service_life_cost_L(K_values: Iterable[float], battery: BatteryState) -> float:
    ks = list(K_values)
    mult = life_multiplier(battery)
    if math.isinf(mult):
        return math.inf
    return sum(ks) * mult


def path_energy(traffic: float, path: RoutePath, epsilon: float | Mapping[int, float]) -> float:
    """Energy (J) spent by every satellite on ``path`` to route ``traffic`` Mb."""
    if traffic < 0:
        raise ValueError("traffic must be >= 0")
    if isinstance(epsilon, Mapping):
        return sum(traffic * epsilon[s] for s in path.sats)
    return traffic * epsilon * len(path.sats)


def offload_energy(splits: Mapping, offload_paths: Mapping, epsilon, total: float | None = None) -> float:
    """Energy of routing each split along its own offloading path.

    ``splits`` and ``offload_paths`` share keys (bids or dish ids). If
    ``total`` is given the splits must add up to it.
    """
    if total is not None:
        s = sum(splits.values())
        if not math.isclose(s, total, rel_tol=1e-9, abs_tol=1e-12):
            raise SplitMismatch(f"splits sum to {s}, expected {total}")
    return sum(path_energy(amount, offload_paths[key], epsilon) for key, amount in splits.items())


def step_battery(state: BatteryState, net_load_watts: float, in_eclipse: bool,
                 interval_length: float, solar_charge_rate: float = 0.0) -> BatteryState:
    """Advance one battery by one interval.

    In sunlight the panels supply ``solar_charge_rate`` and any surplus
    charges the battery; in eclipse the load is drawn from the battery.
    """
    if interval_length <= 0:
        return state
    supply = 0.0 if in_eclipse else solar_charge_rate
    delta = (supply - net_load_watts) * interval_length / state.capacity
    level = min(1.0, max(0.0, state.level + delta))
    k = life_consumption_K(state.level, level, state.chemistry_constant)
    return replace(state, level=level, remaining_lifespan=max(0.0, state.remaining_lifespan - k))
