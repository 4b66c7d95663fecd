"""Offloading utilities: energy, latency, service life and reliability discount."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from ..constellation import DishId, RoutePath, SatelliteId, TopologySnapshot
from ..power import BatteryState, life_consumption_K, life_multiplier, offload_energy, path_energy
from .models import Bid, CollaboratorGroup, DishReputation, Task, UtilityWeights


class UndefinedUtility(ValueError):
    """A normalised utility has a zero denominator."""


@dataclass(frozen=True)
class UtilityContext:
    """Everything the utilities need about one task's routing situation.

    ``solar_surplus`` is the energy (J) a satellite can absorb this interval
    without drawing on its battery; satellites missing from it drain their
    battery for all routed traffic.
    """
    path: RoutePath
    gsl_latency: Mapping[DishId, float] = field(default_factory=dict)
    batteries: Mapping[SatelliteId, BatteryState] = field(default_factory=dict)
    epsilon: float | Mapping[SatelliteId, float] = 0.08
    solar_surplus: Mapping[SatelliteId, float] = field(default_factory=dict)
    alpha: float = 0.09
    beta_price: float = 0.17
    snapshot: TopologySnapshot | None = None

    def eps(self, sat: SatelliteId) -> float:
        return self.epsilon[sat] if isinstance(self.epsilon, Mapping) else self.epsilon

    def offload_path(self, bid: Bid) -> RoutePath:
        if bid.offload_sat not in self.path.sats:
            raise ValueError(f"offloading satellite {bid.offload_sat} is not on the original path")
        prefix = self.path.prefix_to(bid.offload_sat)
        if not prefix.is_strict_prefix_of(self.path):
            raise ValueError("offloading path must be a strict prefix of the original path")
        return prefix

    def dish_delay(self, bid: Bid) -> float:
        """End-to-end latency through one dish: prefix hops + GSL + terrestrial."""
        return self.offload_path(bid).latency + self.gsl_latency.get(bid.dish, 0.0) + bid.latency

    def battery_drop(self, sat: SatelliteId, traffic: float) -> float:
        """Battery fraction lost on ``sat`` after routing ``traffic`` Mb."""
        battery = self.batteries.get(sat)
        if battery is None:
            return 0.0
        drained = max(0.0, traffic * self.eps(sat) - self.solar_surplus.get(sat, 0.0))
        return min(battery.level, drained / battery.capacity)


def split_traffic(task: Task, group: CollaboratorGroup) -> dict[DishId, float]:
    """Split the task's data proportionally to each dish's offered capacity."""
    total = group.total_capacity
    if total <= task.data_amount:
        return {b.dish: b.data_capacity for b in group.bids}
    return {b.dish: task.data_amount * b.data_capacity / total for b in group.bids}


def utility_energy(ctx: UtilityContext, task: Task, group: CollaboratorGroup,
                   splits: Mapping[DishId, float] | None = None) -> float:
    splits = split_traffic(task, group) if splits is None else splits
    e_sat = path_energy(task.data_amount, ctx.path, ctx.epsilon)
    if e_sat <= 0:
        raise UndefinedUtility("original-path energy is zero")
    paths = {b.dish: ctx.offload_path(b) for b in group.bids}
    e_grd = offload_energy(splits, paths, ctx.epsilon, total=task.data_amount)
    return (e_sat - e_grd) / e_sat


def group_delay(ctx: UtilityContext, group: CollaboratorGroup) -> float:
    return max(ctx.dish_delay(b) for b in group.bids)


def utility_delay(ctx: UtilityContext, task: Task, group: CollaboratorGroup) -> float:
    d_sat = ctx.path.latency
    if d_sat <= 0:
        raise UndefinedUtility("original-path latency is zero")
    return (d_sat - group_delay(ctx, group)) / d_sat


def _life_term(k: float, mult: float) -> float:
    return 0.0 if k == 0.0 else k * mult


@dataclass(frozen=True)
class LifeSavings:
    """Service-life bookkeeping for one group.

    ``raw`` is the life consumption K each dish's split avoids, ``weighted``
    the same scaled by the satellites' life multipliers, and ``full`` the
    weighted cost of routing all traffic on the original path.
    """
    raw: Mapping[DishId, float]
    weighted: Mapping[DishId, float]
    full: float


def life_savings(ctx: UtilityContext, task: Task, group: CollaboratorGroup,
                 splits: Mapping[DishId, float] | None = None) -> LifeSavings:
    """Per-dish life consumption avoided on the satellites each split skips.

    On every satellite the splits drain the battery one after another in dish
    order, so the per-split consumptions add up to the full-traffic one.
    """
    splits = split_traffic(task, group) if splits is None else splits
    sats = ctx.path.sats
    state = []
    full = 0.0
    for sat in sats:
        battery = ctx.batteries.get(sat)
        if battery is None:
            state.append(None)
            continue
        mult = life_multiplier(battery)
        k_full = life_consumption_K(battery.level, battery.level - ctx.battery_drop(sat, task.data_amount),
                                    battery.chemistry_constant)
        full += _life_term(k_full, mult)
        state.append((battery, mult))

    raw, weighted = {}, {}
    carried = 0.0
    for bid in group.bids:
        amount = splits.get(bid.dish, 0.0)
        k_sum = w_sum = 0.0
        for idx in range(len(ctx.offload_path(bid)), len(sats)):
            if state[idx] is None:
                continue
            battery, mult = state[idx]
            before = battery.level - ctx.battery_drop(sats[idx], carried)
            after = battery.level - ctx.battery_drop(sats[idx], carried + amount)
            k = life_consumption_K(before, after, battery.chemistry_constant)
            k_sum += k
            w_sum += _life_term(k, mult)
        raw[bid.dish] = k_sum
        weighted[bid.dish] = w_sum
        carried += amount
    return LifeSavings(raw, weighted, full)


def utility_life(ctx: UtilityContext, task: Task, group: CollaboratorGroup,
                 splits: Mapping[DishId, float] | None = None) -> float:
    """Share of the original path's service-life cost avoided by offloading."""
    saved = life_savings(ctx, task, group, splits)
    numer = sum(saved.weighted.values())
    denom = saved.full
    if math.isinf(denom):
        return 1.0 if math.isinf(numer) else 0.0
    if denom <= 0.0:
        return 0.0
    return numer / denom


def total_utility(weights: UtilityWeights, u_energy: float, u_delay: float, u_life: float) -> float:
    return weights.w1 * u_energy + weights.w2 * u_delay + weights.w3 * u_life


def _failure(rep) -> float:
    f = rep.failure_est if isinstance(rep, DishReputation) else float(rep)
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"failure estimate outside [0, 1]: {f}")
    return f


def discounted_utility(total: float, group: CollaboratorGroup,
                       reputations: Mapping[DishId, DishReputation | float]) -> float:
    factor = 1.0
    for dish in group.key:
        rep = reputations.get(dish)
        if rep is not None:
            factor *= 1.0 - _failure(rep)
    return total * factor


@dataclass(frozen=True)
class GroupUtility:
    energy: float
    delay: float
    life: float
    total: float
    discounted: float


def evaluate_group(ctx: UtilityContext, task: Task, group: CollaboratorGroup,
                   weights: UtilityWeights = UtilityWeights(),
                   reputations: Mapping[DishId, DishReputation | float] | None = None) -> GroupUtility:
    splits = split_traffic(task, group)
    ue = utility_energy(ctx, task, group, splits)
    ud = utility_delay(ctx, task, group)
    ul = utility_life(ctx, task, group, splits)
    total = total_utility(weights, ue, ud, ul)
    return GroupUtility(ue, ud, ul, total, discounted_utility(total, group, reputations or {}))
