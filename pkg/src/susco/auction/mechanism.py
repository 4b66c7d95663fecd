"""Candidate group construction (CGSC) and winner selection with payment (CSTP)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Mapping, Sequence

from .models import Award, Bid, CollaboratorGroup, GroupKey, GroupStats, Task


def cgsc(task: Task, bids: Sequence[Bid], max_layers: int, top_m: int,
         delay_of: Callable[[Bid], float]) -> list[CollaboratorGroup]:
    """Build the candidate collaborator groups for one task.

    ``delay_of`` gives a bid's end-to-end latency through its dish. Layer n
    merges every disjoint pair among the ``top_m`` cheapest groups of layer
    n - 1. Returns the groups sorted by key.
    """
    if max_layers < 1 or top_m < 1:
        raise ValueError("max_layers and top_m must be >= 1")
    eligible = [b for b in bids if delay_of(b) <= task.delay_req]

    layer = {g.key: g for g in (CollaboratorGroup.of(b) for b in eligible)}
    candidates = dict(layer)
    for _ in range(2, max_layers + 1):
        cheapest = sorted(layer.values(), key=lambda g: (g.total_cost, g.key))[:top_m]
        merged: dict[GroupKey, CollaboratorGroup] = {}
        for g1, g2 in combinations(cheapest, 2):
            if g1.dishes.isdisjoint(g2.dishes):
                g = g1.merge(g2)
                merged.setdefault(g.key, g)
        layer = merged
        candidates.update(merged)

    feasible = [g for g in candidates.values()
                if g.total_capacity >= task.data_amount and g.total_bandwidth >= task.bandwidth_req]
    return sorted((g for g in feasible if g.total_cost <= task.budget), key=lambda g: g.key)


def exploration_bonus(n_sum: float, n: int) -> float:
    return math.sqrt(2.0 * n_sum / n)


def log_count_sum(groups: Sequence[CollaboratorGroup], stats: GroupStats) -> float:
    """ln of the summed selection counts, clamped at zero."""
    total = sum(stats.count(g.key) for g in groups)
    return max(0.0, math.log(total)) if total > 0 else 0.0


def score(utility: float, cost: float, bonus: float) -> float:
    ratio = utility / cost if cost > 0 else math.inf
    return ratio + bonus


def select_group(groups: Sequence[CollaboratorGroup], utilities: Mapping[GroupKey, float],
                 stats: GroupStats, n_sum: float | None = None) -> tuple[CollaboratorGroup | None, float]:
    """Arg-max of utility-to-cost ratio plus exploration bonus over U > 0.

    Ties go to the smallest key. Returns the group and its score.
    """
    if n_sum is None:
        n_sum = log_count_sum(groups, stats)
    best, best_score = None, -math.inf
    for g in groups:
        u = utilities.get(g.key, 0.0)
        if u <= 0:
            continue
        s = score(u, g.total_cost, exploration_bonus(n_sum, stats.count(g.key)))
        if s > best_score or (s == best_score and g.key < best.key):
            best, best_score = g, s
    return best, best_score


@dataclass(frozen=True)
class TaskOutcome:
    task_id: int
    award: Award | None
    reason: str  # "awarded", "awarded_uncontested", "no_positive_group", "no_affordable_group"
    candidates: int = 0
    rounds: int = 0


def group_payment(winner: CollaboratorGroup, utility: float, n_sum: float, stats: GroupStats,
                  remaining: Sequence[CollaboratorGroup], utilities: Mapping[GroupKey, float],
                  budget: float) -> tuple[float, bool]:
    """Payment for ``winner`` after it has been taken out of ``remaining``.

    Returns ``(payment, contested)``. With no positive-utility competitor
    left the payment falls back to min(budget, C (1 + bonus)).
    """
    cost = winner.total_cost
    bonus = exploration_bonus(n_sum, stats.count(winner.key))
    n_sum_rest = log_count_sum(remaining, stats)
    runner_up, u_max = select_group(remaining, utilities, stats, n_sum_rest)
    if runner_up is None:
        return min(budget, cost * (1.0 + bonus)), False
    # u_max never exceeds the winner's own score, so this is >= cost up to rounding
    return max(cost, (utility + cost * bonus) / u_max), True


def split_payment(group: CollaboratorGroup, payment: float) -> dict:
    """Share the payment in proportion to declared cost.

    Each dish gets its cost plus its share of the surplus, so no dish is
    paid below cost when the group is not, and the shares never add up to
    more than ``payment``.
    """
    cost = group.total_cost
    if cost <= 0:
        return {b.dish: payment / len(group) for b in group.bids}
    costs = {b.dish: b.cost for b in group.bids}
    surplus = max(0.0, payment - cost)
    pay = {d: c + surplus * (c / cost) for d, c in costs.items()}
    # rounding can leave the sum a few ulps above the payment
    while math.fsum(pay.values()) > payment:
        dish = max(pay, key=lambda d: (pay[d] - costs[d], -d))
        if pay[dish] <= costs[dish]:
            break
        pay[dish] = math.nextafter(pay[dish], -math.inf)
    return pay


def cstp_task(task: Task, groups: Sequence[CollaboratorGroup], utilities: Mapping[GroupKey, float],
              stats: GroupStats) -> TaskOutcome:
    """Run the selection/payment loop for one task, updating ``stats`` in place."""
    remaining = sorted(groups, key=lambda g: g.key)
    budget = task.budget
    rounds = 0
    while remaining:
        rounds += 1
        n_sum = log_count_sum(remaining, stats)
        winner, _ = select_group(remaining, utilities, stats, n_sum)
        if winner is None:
            return TaskOutcome(task.id, None, "no_positive_group", len(groups), rounds)
        remaining = [g for g in remaining if g.key != winner.key]
        u = utilities[winner.key]
        payment, contested = group_payment(winner, u, n_sum, stats, remaining, utilities, budget)
        # the uncontested fallback can sit below cost when the budget does
        if winner.total_cost <= payment <= budget:
            stats.increment(winner.key)
            award = Award(task.id, winner.key, payment, split_payment(winner, payment), u)
            return TaskOutcome(task.id, award, "awarded" if contested else "awarded_uncontested",
                               len(groups), rounds)
    return TaskOutcome(task.id, None, "no_affordable_group", len(groups), rounds)


def cstp(tasks: Sequence[Task], group_sets: Mapping[int, Sequence[CollaboratorGroup]],
         utilities: Mapping[int, Mapping[GroupKey, float]], stats: GroupStats
         ) -> tuple[list[TaskOutcome], GroupStats]:
    """Select a winner and payment for every task, in the given order.

    ``utilities`` are the discounted utilities per task and group key. The
    input ``stats`` is left untouched; the updated copy is returned.
    """
    stats = stats.copy()
    outcomes = [cstp_task(t, group_sets.get(t.id, ()), utilities.get(t.id, {}), stats) for t in tasks]
    return outcomes, stats
