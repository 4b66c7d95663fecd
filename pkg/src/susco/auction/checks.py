"""Constraint checker and mechanism audit helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .mechanism import cstp_task, log_count_sum, select_group
from .models import Award, CollaboratorGroup, DishId, GroupKey, GroupStats, Task
from .utility import UtilityContext, group_delay

REL_TOL = 1e-9


@dataclass(frozen=True)
class Violation:
    constraint: int
    task_id: int
    detail: str


@dataclass
class ConstraintReport:
    violations: list[Violation] = field(default_factory=list)
    awards_checked: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, constraint: int, task_id: int, detail: str) -> None:
        self.violations.append(Violation(constraint, task_id, detail))

    def by_constraint(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for v in self.violations:
            out[v.constraint] = out.get(v.constraint, 0) + 1
        return out


def _leq(a: float, b: float) -> bool:
    return a <= b + REL_TOL * max(1.0, abs(b))


def check_cdgs_constraints(awards: Sequence[Award], tasks: Sequence[Task] | Mapping[int, Task],
                           groups: Mapping[int, Sequence[CollaboratorGroup] | Mapping[GroupKey, CollaboratorGroup]],
                           contexts: Mapping[int, UtilityContext] | None = None) -> ConstraintReport:
    """Check awards against the group-selection constraints.

    Violations carry a numeric code: 21 unknown task or group, 22 more than
    one group per task, 23 group latency over the task's limit, 24 bandwidth,
    25 data amount, 26 payment bookkeeping or budget, 27 a dish paid below
    its cost. Latency is only checked for tasks with a context.
    """
    task_map = dict(tasks) if isinstance(tasks, Mapping) else {t.id: t for t in tasks}
    report = ConstraintReport(awards_checked=len(awards))
    seen: dict[int, int] = {}
    for award in awards:
        tid = award.task_id
        seen[tid] = seen.get(tid, 0) + 1
        task = task_map.get(tid)
        gs = groups.get(tid, {})
        index = gs if isinstance(gs, Mapping) else {g.key: g for g in gs}
        group = index.get(tuple(award.group_key))
        if task is None or group is None:
            report.add(21, tid, f"award for unknown task or group {award.group_key}")
            continue
        if contexts is not None and tid in contexts:
            d = group_delay(contexts[tid], group)
            if not _leq(d, task.delay_req):
                report.add(23, tid, f"group latency {d:.3f} ms exceeds {task.delay_req:.3f} ms")
        if group.total_bandwidth < task.bandwidth_req:
            report.add(24, tid, f"bandwidth {group.total_bandwidth} < {task.bandwidth_req}")
        if group.total_capacity < task.data_amount:
            report.add(25, tid, f"capacity {group.total_capacity} < {task.data_amount}")
        paid = math.fsum(award.dish_payments.values())
        if not math.isclose(paid, award.group_payment, rel_tol=REL_TOL, abs_tol=1e-12):
            report.add(26, tid, f"dish payments sum to {paid}, group payment is {award.group_payment}")
        if not _leq(paid, task.budget):
            report.add(26, tid, f"payment {paid} exceeds budget {task.budget}")
        if set(award.dish_payments) != set(group.key):
            report.add(27, tid, "payments do not cover exactly the group's dishes")
        for bid in group.bids:
            p = award.dish_payments.get(bid.dish, 0.0)
            if not _leq(bid.cost, p):
                report.add(27, tid, f"dish {bid.dish} paid {p} below its cost {bid.cost}")
    for tid, n in seen.items():
        if n > 1:
            report.add(22, tid, f"{n} groups assigned to one task")
    return report


def reprice(groups: Sequence[CollaboratorGroup], dish: DishId, cost: float) -> list[CollaboratorGroup]:
    """Groups with ``dish``'s declared cost replaced by ``cost``."""
    out = []
    for g in groups:
        if dish in g.dishes:
            g = CollaboratorGroup(tuple(b.with_cost(cost) if b.dish == dish else b for b in g.bids))
        out.append(g)
    return out


def _wins(task: Task, groups: Sequence[CollaboratorGroup], target: GroupKey,
          utilities: Mapping[GroupKey, float], stats: GroupStats) -> bool:
    admitted = [g for g in groups if g.total_cost <= task.budget]
    outcome = cstp_task(task, admitted, utilities, stats.copy())
    return outcome.award is not None and outcome.award.group_key == target


def critical_value(task: Task, target_group: CollaboratorGroup, competing_groups: Sequence[CollaboratorGroup],
                   stats: GroupStats, dish: DishId, utilities: Mapping[GroupKey, float],
                   rel_tol: float = 1e-12) -> float:
    """Largest declared cost of ``dish`` at which ``target_group`` still wins.

    The dish's cost is changed in every group it belongs to, and a group is
    admitted only while its total cost fits the task budget, as in candidate
    construction. Found by bisection.
    """
    if dish not in target_group.dishes:
        raise ValueError(f"dish {dish} is not in group {target_group.key}")
    base = [target_group] + [g for g in competing_groups if g.key != target_group.key]
    own = next(b.cost for b in target_group.bids if b.dish == dish)

    def wins(c: float) -> bool:
        return _wins(task, reprice(base, dish, c), target_group.key, utilities, stats)

    if not wins(own):
        raise ValueError(f"group {target_group.key} does not win at the declared costs")
    lo = own
    hi = task.budget - (target_group.total_cost - own)
    hi = math.nextafter(max(hi, lo), math.inf)
    if wins(hi):
        return hi
    while hi - lo > rel_tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if wins(mid):
            lo = mid
        else:
            hi = mid
    return lo


def clone_wins(groups: Sequence[CollaboratorGroup], utilities: Mapping[GroupKey, float],
               stats: GroupStats, cost_factor: float = 0.5) -> bool | None:
    """Monotonicity probe: a cheaper copy of the winner must win.

    The copy gets the winner's utility and selection count, and every group
    keeps the exploration factor it had before the copy was added. Returns
    None when there is no winner to copy.
    """
    if not 0.0 < cost_factor < 1.0:
        raise ValueError("cost_factor must be in (0, 1)")
    n_sum = log_count_sum(groups, stats)
    winner, _ = select_group(groups, utilities, stats, n_sum)
    if winner is None:
        return None
    offset = 1 + max(d for g in groups for d in g.key)
    clone = CollaboratorGroup(tuple(
        type(b)(b.dish + offset, b.latency, b.bandwidth, b.data_capacity, b.cost * cost_factor, b.offload_sat)
        for b in winner.bids))
    probe_stats = stats.copy()
    probe_stats.counts[clone.key] = stats.count(winner.key)
    probe_utilities = dict(utilities)
    probe_utilities[clone.key] = utilities[winner.key]
    chosen, _ = select_group(list(groups) + [clone], probe_utilities, probe_stats, n_sum)
    return chosen is not None and chosen.key == clone.key
