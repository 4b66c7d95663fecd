"""Mechanism audit: random auction instances and property checks.

Each instance is a small synthetic auction (1 to 3 tasks, 3 to 10 bids per
task, drawn from a shared pool of dishes) with utilities fixed up front.
Utilities never depend on declared costs, so a misreport only changes the
costs the mechanism sees.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .auction import (Award, Bid, CollaboratorGroup, DishReputation, GroupKey, GroupStats, Task,
                      UtilityContext, UtilityWeights, cgsc, check_cdgs_constraints, clone_wins,
                      critical_value, evaluate_group)
from .auction import mechanism
from .constellation import RoutePath
from .power import BatteryState

CHECKS = ("ir", "budget", "constraints", "truthfulness", "critical_value", "monotonicity")
PROFIT_TOL = 1e-9
CRITICAL_REL_TOL = 1e-6
MISREPORT_GRID = tuple(float(x) for x in np.linspace(0.5, 2.0, 20))

# swapped out by fault-injection tests
run_cstp_task = mechanism.cstp_task


@dataclass
class AuditInstance:
    seed: int
    tasks: list[Task]
    bids: dict[int, list[Bid]]
    contexts: dict[int, UtilityContext]
    utilities: dict[int, dict[GroupKey, float]]
    stats: GroupStats
    max_layers: int = 2
    top_m: int = 10

    @property
    def dishes(self) -> list[int]:
        return sorted({b.dish for bs in self.bids.values() for b in bs})

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "max_layers": self.max_layers,
            "top_m": self.top_m,
            "tasks": [{k: v for k, v in asdict(t).items() if k not in ("source", "destination")}
                      for t in self.tasks],
            "bids": {str(tid): [asdict(b) for b in bs] for tid, bs in self.bids.items()},
            "paths": {str(tid): {"sats": list(c.path.sats), "hops": list(c.path.hop_latencies),
                                 "gsl": {str(k): v for k, v in c.gsl_latency.items()}}
                      for tid, c in self.contexts.items()},
            "utilities": {str(tid): [[list(k), u] for k, u in sorted(us.items())]
                          for tid, us in self.utilities.items()},
            "stats": [[list(k), n] for k, n in sorted(self.stats.counts.items())],
        }


def random_instance(seed: int, max_layers: int = 2, top_m: int = 10) -> AuditInstance:
    """Draw one synthetic auction."""
    rng = np.random.default_rng([seed, 0xA0D17])
    n_tasks = int(rng.integers(1, 4))
    pool = int(rng.integers(3, 11))
    dishes = {d: (float(rng.uniform(50, 800)), float(rng.uniform(0.05, 2.0)), float(rng.uniform(0, 0.3)))
              for d in range(pool)}  # bandwidth, base cost, failure estimate
    reputations = {d: f for d, (_, _, f) in dishes.items()}
    tasks, bids, contexts, utilities = [], {}, {}, {}
    stats = GroupStats()
    for tid in range(n_tasks):
        length = int(rng.integers(2, 7))
        sats = tuple(100 * tid + s for s in range(length))
        hops = tuple(float(x) for x in rng.uniform(5.0, 25.0, size=length - 1))
        path = RoutePath(sats, hops)
        amount = float(rng.uniform(500.0, 5000.0))
        task = Task(tid, sats[0], sats[-1], float(rng.uniform(30.0, 200.0)), float(rng.uniform(50.0, 600.0)),
                    amount, float(rng.uniform(0.5, 6.0)))
        k = int(rng.integers(3, pool + 1))
        chosen = sorted(rng.choice(pool, size=k, replace=False).tolist())
        task_bids, gsl = [], {}
        for d in chosen:
            bw, base, _ = dishes[d]
            cap = float(rng.uniform(0.3, 1.3)) * amount
            task_bids.append(Bid(d, float(rng.uniform(2.0, 60.0)), bw, cap,
                                 base * float(rng.uniform(0.5, 1.5)), sats[int(rng.integers(0, length - 1))]))
            gsl[d] = float(rng.uniform(2.0, 10.0))
        batteries = {s: BatteryState(float(rng.uniform(0.05, 1.0)), float(rng.uniform(50.0, 1000.0)),
                                     capacity=float(rng.uniform(2e3, 2e4))) for s in sats}
        ctx = UtilityContext(path, gsl, batteries)
        groups = cgsc(_unbounded(task), task_bids, max_layers, top_m, ctx.dish_delay)
        utilities[tid] = {g.key: evaluate_group(ctx, task, g, UtilityWeights(), reputations).discounted
                          for g in groups}
        for g in groups:
            if rng.random() < 0.3:
                stats.counts[g.key] = int(rng.integers(1, 6))
        tasks.append(task)
        bids[tid] = task_bids
        contexts[tid] = ctx
    return AuditInstance(seed, tasks, bids, contexts, utilities, stats, max_layers, top_m)


def _unbounded(task: Task) -> Task:
    return Task(task.id, task.source_sat, task.dest_sat, task.delay_req, task.bandwidth_req,
                task.data_amount, math.inf, task.source, task.destination)


def with_declared_cost(inst: AuditInstance, dish: int, factor: float) -> dict[int, list[Bid]]:
    return {tid: [b.with_cost(b.cost * factor) if b.dish == dish else b for b in bs]
            for tid, bs in inst.bids.items()}


@dataclass
class RunRecord:
    awards: list[Award]
    groups: dict[int, list[CollaboratorGroup]]
    stats_before: dict[int, GroupStats]


def run_mechanism(inst: AuditInstance, bids: Mapping[int, Sequence[Bid]] | None = None) -> RunRecord:
    """CGSC then CSTP over the instance's tasks in order, sharing one stats table."""
    bids = inst.bids if bids is None else bids
    stats = inst.stats.copy()
    awards, groups, before = [], {}, {}
    for task in inst.tasks:
        ctx = inst.contexts[task.id]
        gs = cgsc(task, bids[task.id], inst.max_layers, inst.top_m, ctx.dish_delay)
        groups[task.id] = gs
        before[task.id] = stats.copy()
        outcome = run_cstp_task(task, gs, inst.utilities[task.id], stats)
        if outcome.award is not None:
            awards.append(outcome.award)
    return RunRecord(awards, groups, before)


def profit(record: RunRecord, dish: int, true_costs: Mapping[tuple[int, int], float]) -> float:
    """Dish's payment minus true cost, summed over the tasks it won."""
    return math.fsum(a.dish_payments[dish] - true_costs[(a.task_id, dish)]
                     for a in record.awards if dish in a.dish_payments)


@dataclass
class Finding:
    check: str
    seed: int
    detail: str
    constraint: int | None = None


@dataclass
class AuditReport:
    instances: int = 0
    awards: int = 0
    findings: list[Finding] = field(default_factory=list)
    checked: dict[str, int] = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.findings

    def count(self, check: str) -> int:
        return sum(1 for f in self.findings if f.check == check)

    def lines(self) -> list[str]:
        out = [f"instances: {self.instances}", f"awards: {self.awards}", f"seconds: {self.seconds:.2f}"]
        for c in CHECKS:
            if c in self.checked:
                out.append(f"{c}: {self.checked[c]} checked, {self.count(c)} violations")
        cited = sorted({f.constraint for f in self.findings if f.constraint is not None})
        if cited:
            out.append("violated constraints: " + ", ".join(f"({c})" for c in cited))
        return out


def audit_instance(inst: AuditInstance, checks: Iterable[str] = CHECKS,
                   grid: Sequence[float] = MISREPORT_GRID) -> tuple[list[Finding], dict[str, int]]:
    checks = set(checks)
    unknown = checks - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}")
    findings: list[Finding] = []
    counts: dict[str, int] = {}

    def tick(name: str, n: int = 1) -> None:
        counts[name] = counts.get(name, 0) + n

    record = run_mechanism(inst)
    counts["awards"] = len(record.awards)
    tasks = {t.id: t for t in inst.tasks}
    true_costs = {(tid, b.dish): b.cost for tid, bs in inst.bids.items() for b in bs}

    if "ir" in checks:
        for a in record.awards:
            for dish, pay in a.dish_payments.items():
                tick("ir")
                cost = true_costs[(a.task_id, dish)]
                if pay < cost:
                    findings.append(Finding("ir", inst.seed, f"task {a.task_id} dish {dish} paid {pay!r} < cost {cost!r}", 27))
    if "budget" in checks:
        for a in record.awards:
            tick("budget")
            paid = math.fsum(a.dish_payments.values())
            if paid > tasks[a.task_id].budget:
                findings.append(Finding("budget", inst.seed,
                                        f"task {a.task_id} pays {paid!r} > budget {tasks[a.task_id].budget!r}", 26))
    if "constraints" in checks:
        tick("constraints", len(record.awards))
        report = check_cdgs_constraints(record.awards, inst.tasks, record.groups, inst.contexts)
        for v in report.violations:
            findings.append(Finding("constraints", inst.seed, v.detail, v.constraint))
    if "truthfulness" in checks:
        for dish in inst.dishes:
            honest = profit(record, dish, true_costs)
            for factor in grid:
                tick("truthfulness")
                lied = profit(run_mechanism(inst, with_declared_cost(inst, dish, factor)), dish, true_costs)
                if lied > honest + PROFIT_TOL:
                    findings.append(Finding("truthfulness", inst.seed,
                                            f"dish {dish} gains {lied - honest:.6g} by declaring x{factor:.4g}"))
                    break
    if "critical_value" in checks:
        for a in record.awards:
            task = tasks[a.task_id]
            unbounded = cgsc(_unbounded(task), inst.bids[task.id], inst.max_layers, inst.top_m,
                             inst.contexts[task.id].dish_delay)
            target = next(g for g in record.groups[task.id] if g.key == a.group_key)
            for dish in a.group_key:
                tick("critical_value")
                threshold = critical_value(task, target, unbounded, record.stats_before[task.id], dish,
                                           inst.utilities[task.id])
                pay = a.dish_payments[dish]
                if not math.isclose(threshold, pay, rel_tol=CRITICAL_REL_TOL):
                    findings.append(Finding("critical_value", inst.seed,
                                            f"task {task.id} dish {dish}: threshold {threshold!r} vs payment {pay!r}"))
    if "monotonicity" in checks:
        for task in inst.tasks:
            result = clone_wins(record.groups[task.id], inst.utilities[task.id], record.stats_before[task.id])
            if result is None:
                continue
            tick("monotonicity")
            if not result:
                findings.append(Finding("monotonicity", inst.seed, f"task {task.id}: cheaper copy of winner loses"))
    return findings, counts


def run_audit(instances: int, seed: int = 0, checks: Iterable[str] = CHECKS,
              grid: Sequence[float] = MISREPORT_GRID) -> tuple[AuditReport, AuditInstance | None]:
    """Audit ``instances`` random auctions; also return the smallest violating one."""
    if instances < 1:
        raise ValueError("need at least one instance")
    checks = tuple(checks)
    report = AuditReport()
    worst: AuditInstance | None = None
    start = time.perf_counter()
    for i in range(instances):
        inst = random_instance(seed * 1_000_003 + i)
        found, counts = audit_instance(inst, checks, grid)
        report.instances += 1
        report.awards += counts.pop("awards")
        for k, v in counts.items():
            report.checked[k] = report.checked.get(k, 0) + v
        if found:
            report.findings.extend(found)
            size = sum(len(b) for b in inst.bids.values())
            if worst is None or size < sum(len(b) for b in worst.bids.values()):
                worst = inst
    report.seconds = time.perf_counter() - start
    return report, worst


def dump_instance(inst: AuditInstance, findings: Sequence[Finding], path) -> None:
    payload = {"instance": inst.to_json(),
               "violations": [asdict(f) for f in findings if f.seed == inst.seed]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)


# --- learning and scaling harnesses -------------------------------------------------

def bandit_regret(rounds: int, seed: int, arms: int = 8, noise: float = 0.1) -> float:
    """Cumulative ratio regret of the selection rule on a stationary bandit.

    Each arm is a fixed single-dish group with a fixed cost and a noisy
    utility around a fixed mean. The selector sees empirical mean utilities
    and the group's selection count; every arm is tried once first.
    """
    rng = np.random.default_rng([seed, 0xB4D17])
    means = rng.uniform(0.2, 1.0, size=arms)
    costs = rng.uniform(0.5, 1.5, size=arms)
    groups = [CollaboratorGroup.of(Bid(i, 0.0, 1.0, 1.0, float(costs[i]), 0)) for i in range(arms)]
    ratios = means / costs
    best = float(ratios.max())
    stats = GroupStats({g.key: 0 for g in groups})
    totals = np.zeros(arms)
    regret = 0.0
    for t in range(rounds):
        if t < arms:
            i = t
        else:
            est = {g.key: max(totals[j] / stats.peek(g.key), 1e-12) for j, g in enumerate(groups)}
            winner, _ = mechanism.select_group(groups, est, stats)
            i = winner.key[0]
        reward = means[i] + noise * rng.standard_normal()
        totals[i] += reward
        stats.counts[groups[i].key] = stats.peek(groups[i].key) + 1
        regret += best - ratios[i]
    return regret


def mean_regret(rounds: int, seeds: Iterable[int], **kw) -> float:
    values = [bandit_regret(rounds, s, **kw) for s in seeds]
    return float(np.mean(values))


def _best_time(fn: Callable[[], object], repeats: int) -> float:
    """Fastest of ``repeats`` runs; the minimum is the least noisy estimate."""
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def synthetic_groups(count: int, seed: int = 0) -> tuple[list[CollaboratorGroup], dict[GroupKey, float]]:
    rng = np.random.default_rng([seed, count])
    groups = [CollaboratorGroup.of(Bid(i, 1.0, 100.0, 100.0, float(c), 0))
              for i, c in enumerate(rng.uniform(0.5, 2.0, size=count))]
    utilities = {g.key: float(u) for g, u in zip(groups, rng.uniform(0.1, 1.0, size=count))}
    return groups, utilities


def time_cstp(sizes: Sequence[int], repeats: int = 15, seed: int = 0) -> list[float]:
    """Best wall time of one CSTP task run per candidate-set size.

    Sizes are timed round-robin so that slow drifts in machine speed hit
    every size alike.
    """
    runs = []
    for n in sizes:
        groups, utilities = synthetic_groups(n, seed)
        task = Task(0, 0, 1, 100.0, 1.0, 1.0, 1e9)
        runs.append(lambda t=task, g=groups, u=utilities: mechanism.cstp_task(t, g, u, GroupStats()))
    best = [math.inf] * len(runs)
    for _ in range(repeats):
        for i, fn in enumerate(runs):
            best[i] = min(best[i], _best_time(fn, 1))
    return best


def linear_r2(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = ((y - y.mean()) ** 2).sum()
    return float(1.0 - (resid ** 2).sum() / total) if total > 0 else 1.0


def cgsc_timing(preset_name: str, num_bids: int = 8, repeats: int = 200, seed: int = 0) -> float:
    """Best CGSC wall time for a fixed number of bids on a real route of a preset.

    The route runs between two fixed far-apart cities; bids designate
    offloading satellites spread along it.
    """
    from .constellation import GeoPoint, build_snapshot, generate_walker, original_path, preset

    config = preset(preset_name)
    snap = build_snapshot(generate_walker(config), [], 0, 60.0, config)
    ids = sorted(snap.sat_positions)
    pos = np.array([snap.sat_positions[i] for i in ids])

    def nearest(point: GeoPoint) -> int:
        return ids[int(np.argmin(np.linalg.norm(pos - point.ecef(), axis=1)))]

    path = original_path(snap, nearest(GeoPoint(51.5, -0.1)), nearest(GeoPoint(35.7, 139.7)))
    rng = np.random.default_rng([seed, num_bids])
    amount = 4000.0
    bids = [Bid(d, float(rng.uniform(5, 40)), float(rng.uniform(100, 800)), float(rng.uniform(0.4, 1.0)) * amount,
                float(rng.uniform(0.2, 2.0)), path.sats[d % (len(path) - 1)]) for d in range(num_bids)]
    ctx = UtilityContext(path, {b.dish: 5.0 for b in bids})
    task = Task(0, path.sats[0], path.sats[-1], 1e6, 50.0, amount, 1e6)
    return _best_time(lambda: cgsc(task, bids, 2, 10, ctx.dish_delay), repeats)
