"""Discrete-time offloading simulator.

Each interval freezes the constellation, steps every battery, draws a batch
of tasks, runs SusCO or a baseline per task, samples dish failures and
commits reputations, group statistics and metrics in task-id order.
"""
from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .auction import (Award, Bid, CollaboratorGroup, DishReputation, GroupStats, Task, UndefinedUtility,
                      UtilityContext, cgsc, cstp_task, dish_cost, evaluate_group, group_delay,
                      life_savings, split_traffic, update_failure)
from .baselines import BASELINES, SchemeChoice, feasible_bids
from .config import ScenarioConfig
from .constellation import (DishSite, GeoPoint, NoRoute, RoutePath, SatelliteId, TopologySnapshot,
                            build_snapshot, generate_walker, great_circle_km, gsl_latency, in_eclipse,
                            isl_pairs, load_dish_catalog, original_path, terrestrial_latency)
from .power import BatteryState, path_energy, step_battery

# independent random streams, so every scheme sees the same tasks and loads
STREAM_INIT, STREAM_TASKS, STREAM_LOADS, STREAM_OUTCOMES = range(4)

# (latitude, longitude) of traffic endpoints
CITIES: tuple[tuple[float, float], ...] = (
    (40.7, -74.0), (34.1, -118.2), (41.9, -87.6), (29.8, -95.4), (43.7, -79.4), (19.4, -99.1),
    (-23.5, -46.6), (-34.6, -58.4), (4.7, -74.1), (-12.0, -77.0), (51.5, -0.1), (48.9, 2.4),
    (52.5, 13.4), (40.4, -3.7), (41.9, 12.5), (55.8, 37.6), (59.3, 18.1), (30.0, 31.2),
    (6.5, 3.4), (-1.3, 36.8), (-26.2, 28.0), (25.2, 55.3), (28.6, 77.2), (19.1, 72.9),
    (13.8, 100.5), (1.35, 103.8), (-6.2, 106.8), (39.9, 116.4), (31.2, 121.5), (22.3, 114.2),
    (37.6, 127.0), (35.7, 139.7), (-33.9, 151.2), (-37.8, 145.0), (-36.8, 174.8), (21.3, -157.9),
)
MIN_ENDPOINT_SEPARATION_KM = 3000.0


def stream(seed: int, kind: int, tau: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, kind, tau])


@dataclass(frozen=True)
class IntervalMetrics:
    interval: int
    reduced_energy: float  # J
    reduced_life_consumption: float  # lifespan units
    reduced_latency: float  # ms
    tasks_total: int
    tasks_offloaded: int
    tasks_failed: int
    total_payment: float
    sum_utility: float
    sum_cost: float
    sum_utility_cost_ratio: float
    committed_budget: float  # budgets of the offloaded tasks

    @property
    def tasks_unserved(self) -> int:
        return self.tasks_total - self.tasks_offloaded


@dataclass(frozen=True)
class OffloadOutcome:
    task_id: int
    success: Mapping[int, bool]
    realized_latency: float  # ms
    realized_energy: float  # J

    @property
    def retransmitted(self) -> bool:
        return not all(self.success.values())


@dataclass
class Penalty:
    """Cost of retransmitting failed splits, charged to the next interval."""
    energy: float = 0.0
    life: float = 0.0
    latency: float = 0.0


@dataclass(frozen=True)
class TranscriptRow:
    interval: int
    task_id: int
    platform_sat: int | None
    candidate_group_count: int
    winner_key: tuple
    utility: float
    group_payment: float
    dish_payments: Mapping[int, float]
    outcome: str

    def as_csv(self) -> list[str]:
        return [str(self.interval), str(self.task_id),
                "" if self.platform_sat is None else str(self.platform_sat),
                str(self.candidate_group_count), "-".join(map(str, self.winner_key)),
                repr(self.utility), repr(self.group_payment),
                ";".join(f"{d}:{p!r}" for d, p in sorted(self.dish_payments.items())), self.outcome]


TRANSCRIPT_HEADER = ["interval", "task_id", "platform_sat", "candidate_group_count", "winner_key",
                     "utility", "group_payment", "per_dish_payments", "outcome"]


@dataclass
class SimState:
    config: ScenarioConfig
    orbits: list
    dishes: dict[int, DishSite]
    batteries: dict[SatelliteId, BatteryState]
    reputations: dict[int, DishReputation]
    stats: GroupStats = field(default_factory=GroupStats)
    routed_energy: dict[SatelliteId, float] = field(default_factory=dict)  # J per satellite, last interval
    penalty: Penalty = field(default_factory=Penalty)
    next_interval: int = 0
    transcript: list[TranscriptRow] = field(default_factory=list)


def assign_failure_rates(dishes: Sequence[DishSite], config: ScenarioConfig,
                         rng: np.random.Generator) -> list[DishSite]:
    """Mark a seeded random share of dishes unreliable."""
    out = list(dishes)
    if config.reliable_failure_rate is not None:
        out = [replace(d, true_failure_rate=config.reliable_failure_rate) for d in out]
    k = int(round(config.unreliable_fraction * len(out)))
    if k:
        chosen = set(rng.choice(len(out), size=k, replace=False).tolist())
        out = [replace(d, true_failure_rate=config.unreliable_failure_rate) if i in chosen else d
               for i, d in enumerate(out)]
    return out


def init_state(config: ScenarioConfig, dishes: Sequence[DishSite] | None = None) -> SimState:
    if dishes is None:
        dishes = load_dish_catalog(config.catalog_path)
    rng = stream(config.rng_seed, STREAM_INIT)
    dishes = assign_failure_rates(dishes, config, rng)
    orbits = generate_walker(config.constellation)
    bp = config.battery
    levels = rng.uniform(*bp.initial_level, size=len(orbits))
    lives = rng.uniform(*bp.initial_lifespan, size=len(orbits)) * bp.max_lifespan
    batteries = {o.sat_id: BatteryState(float(lv), float(q), bp.max_lifespan, bp.chemistry_constant, bp.capacity)
                 for o, lv, q in zip(orbits, levels, lives)}
    return SimState(config=config, orbits=orbits, dishes={d.id: d for d in dishes}, batteries=batteries,
                    reputations={d.id: DishReputation() for d in dishes})


def _isl_loads(config: ScenarioConfig, rng: np.random.Generator) -> dict:
    pairs = isl_pairs(config.constellation)
    loads = rng.uniform(0.0, config.isl_load_max, size=len(pairs))
    return {p: float(x) for p, x in zip(pairs, loads)}


def nearest_satellite(snapshot: TopologySnapshot, point: GeoPoint, min_elevation: float) -> SatelliteId:
    """Closest satellite above the elevation mask, or the closest overall."""
    ids = sorted(snapshot.sat_positions)
    pos = np.array([snapshot.sat_positions[i] for i in ids])
    site = point.ecef()
    rel = pos - site
    dist = np.linalg.norm(rel, axis=1)
    sin_el = rel @ (site / np.linalg.norm(site)) / dist
    visible = sin_el >= math.sin(math.radians(min_elevation))
    if visible.any():
        dist = np.where(visible, dist, np.inf)
    return ids[int(np.argmin(dist))]


def generate_tasks(snapshot: TopologySnapshot, config: ScenarioConfig, rng: np.random.Generator,
                   first_id: int = 0) -> list[Task]:
    """Draw this interval's tasks.

    Each source sends ``source_rate * interval_length`` Mb to a distant city,
    split at random into 1 to 8 tasks. Budgets are placeholders until bids
    are known.
    """
    total = config.source_rate * config.interval_length
    tasks: list[Task] = []
    if total <= 0:
        return tasks
    points = [GeoPoint(lat, lon) for lat, lon in CITIES]
    min_el = config.constellation.min_elevation
    for _ in range(config.num_sources):
        i = int(rng.integers(len(points)))
        far = [j for j, p in enumerate(points) if great_circle_km(points[i], p) >= MIN_ENDPOINT_SEPARATION_KM]
        j = far[int(rng.integers(len(far)))]
        src, dst = points[i], points[j]
        src_sat = nearest_satellite(snapshot, src, min_el)
        dst_sat = nearest_satellite(snapshot, dst, min_el)
        n = int(rng.integers(config.tasks_per_source[0], config.tasks_per_source[1] + 1))
        shares = rng.dirichlet(np.ones(n)) * total
        for share in shares:
            delay = float(rng.uniform(*config.delay_range))
            bandwidth = float(rng.uniform(*config.bandwidth_range))
            if share <= 0:
                continue
            tasks.append(Task(first_id + len(tasks), src_sat, dst_sat, delay, bandwidth, float(share),
                              config.fallback_budget, src, dst))
    return tasks


def select_platform_satellite(path: RoutePath, snapshot: TopologySnapshot) -> SatelliteId | None:
    """First satellite before the destination that sees at least one dish."""
    for sat in path.sats[:-1]:
        if snapshot.visible(sat):
            return sat
    return None


def collect_bids(task: Task, path: RoutePath, platform: SatelliteId, snapshot: TopologySnapshot,
                 dishes: Mapping[int, DishSite], config: ScenarioConfig) -> tuple[list[Bid], dict[int, float]]:
    """Bids of the dishes the platform sees, plus each dish's GSL latency.

    A dish receives from the satellite between the platform and the
    destination (exclusive) where it sits highest in the sky.
    """
    start = path.sats.index(platform)
    relays = path.sats[start:-1]
    bids, gsl = [], {}
    for dish_id in sorted(snapshot.visible(platform)):
        dish = dishes[dish_id]
        best = max((s for s in relays if dish_id in snapshot.visible(s)),
                   key=lambda s: (snapshot.elevations.get((s, dish_id), -90.0), -relays.index(s)))
        capacity = min(task.data_amount, dish.bandwidth * config.dish_window)
        xi = terrestrial_latency(dish, task.destination, config.latency) if task.destination else 0.0
        bids.append(Bid(dish_id, xi, dish.bandwidth, capacity,
                        dish_cost(capacity, dish.bandwidth, config.alpha, config.beta_price), best))
        gsl[dish_id] = gsl_latency(snapshot.sat_positions[best], dish, config.latency)
    return bids, gsl


@dataclass
class _Prepared:
    task: Task
    path: RoutePath | None = None
    platform: SatelliteId | None = None
    bids: list = field(default_factory=list)
    ctx: UtilityContext | None = None
    groups: list = field(default_factory=list)
    utilities: dict = field(default_factory=dict)
    candidates: int = 0
    reason: str = ""


def _prepare(task: Task, snapshot: TopologySnapshot, state: SimState, surplus: Mapping[SatelliteId, float],
             paths: dict) -> _Prepared:
    cfg = state.config
    prep = _Prepared(task)
    key = (task.source_sat, task.dest_sat)
    if key not in paths:
        try:
            paths[key] = original_path(snapshot, *key)
        except NoRoute:
            paths[key] = None
    prep.path = paths[key]
    if prep.path is None:
        prep.reason = "no_route"
        return prep
    if len(prep.path) < 2:
        prep.reason = "no_platform"
        return prep
    prep.platform = select_platform_satellite(prep.path, snapshot)
    if prep.platform is None:
        prep.reason = "no_platform"
        return prep
    prep.bids, gsl = collect_bids(task, prep.path, prep.platform, snapshot, state.dishes, cfg)
    prep.ctx = UtilityContext(prep.path, gsl, state.batteries, cfg.battery.epsilon, surplus,
                              cfg.alpha, cfg.beta_price, snapshot)
    unbounded = replace(task, budget=math.inf)
    candidates = cgsc(unbounded, prep.bids, cfg.max_group_size, cfg.top_m, prep.ctx.dish_delay)
    if candidates:
        budget = cfg.budget_factor * min(g.total_cost for g in candidates)
        prep.task = task = replace(task, budget=budget)
    if cfg.scheme is SchemeChoice.SUSCO:
        prep.groups = [g for g in candidates if g.total_cost <= task.budget]
        try:
            prep.utilities = {g.key: evaluate_group(prep.ctx, task, g, cfg.weights, state.reputations).discounted
                              for g in prep.groups}
        except UndefinedUtility:
            prep.groups, prep.utilities = [], {}
            prep.reason = "undefined_utility"
            return prep
        prep.candidates = len(prep.groups)
    else:
        prep.candidates = len(feasible_bids(task, prep.bids, prep.ctx))
    if not candidates:
        prep.reason = "no_candidates"
    return prep


def _decide(preps: Sequence[_Prepared], state: SimState) -> dict[int, tuple[Award | None, str]]:
    """Winner and payment per task; SusCO platforms run on copies of the stats."""
    cfg = state.config
    decisions: dict[int, tuple[Award | None, str]] = {}
    if cfg.scheme is SchemeChoice.SUSCO:
        by_platform: dict[SatelliteId, list[_Prepared]] = defaultdict(list)
        for p in preps:
            if p.reason:
                decisions[p.task.id] = (None, p.reason)
            else:
                by_platform[p.platform].append(p)
        base = state.stats.copy()
        for platform in sorted(by_platform):
            local = base.copy()
            for p in by_platform[platform]:
                out = cstp_task(p.task, p.groups, p.utilities, local)
                decisions[p.task.id] = (out.award, out.reason)
            state.stats.merge_increments(base, local)
        return decisions
    select = BASELINES[cfg.scheme]
    for p in preps:
        if p.reason:
            decisions[p.task.id] = (None, p.reason)
            continue
        award = select(p.task, p.bids, p.ctx)
        decisions[p.task.id] = (award, "awarded" if award else "no_affordable_group")
    return decisions


def run_interval(state: SimState, tau: int | None = None) -> IntervalMetrics:
    """Advance ``state`` by one interval and return that interval's metrics."""
    cfg = state.config
    tau = state.next_interval if tau is None else tau
    seed = cfg.rng_seed
    snapshot = build_snapshot(state.orbits, list(state.dishes.values()), tau, cfg.interval_length,
                              cfg.constellation, cfg.latency, _isl_loads(cfg, stream(seed, STREAM_LOADS, tau)))

    bp = cfg.battery
    surplus = {}
    for sat, battery in state.batteries.items():
        dark = in_eclipse(snapshot.sat_positions[sat], snapshot.sun_direction)
        load = bp.idle_draw + state.routed_energy.get(sat, 0.0) / cfg.interval_length
        state.batteries[sat] = step_battery(battery, load, dark, cfg.interval_length, bp.solar_charge_rate)
        surplus[sat] = 0.0 if dark else max(0.0, bp.solar_charge_rate - bp.idle_draw) * cfg.interval_length

    first_id = tau * 10_000
    tasks = generate_tasks(snapshot, cfg, stream(seed, STREAM_TASKS, tau), first_id)
    paths: dict = {}
    preps = [_prepare(t, snapshot, state, surplus, paths) for t in tasks]
    decisions = _decide(preps, state)

    penalty, state.penalty = state.penalty, Penalty()
    routed: dict[SatelliteId, float] = defaultdict(float)
    rng = stream(seed, STREAM_OUTCOMES, tau)
    eps = bp.epsilon
    energy = -penalty.energy
    life = -penalty.life
    latency = -penalty.latency
    offloaded = failed = 0
    payment = util_sum = cost_sum = ratio_sum = budget_sum = 0.0

    def route(traffic: float, sats: Sequence[SatelliteId]) -> None:
        for s in sats:
            routed[s] += traffic * eps

    for prep in preps:
        task = prep.task
        award, reason = decisions[task.id]
        if award is None:
            if prep.path is not None:
                route(task.data_amount, prep.path.sats)
            state.transcript.append(TranscriptRow(tau, task.id, prep.platform, prep.candidates, (), 0.0, 0.0,
                                                  {}, f"unserved:{reason}"))
            continue
        group = CollaboratorGroup(tuple(b for b in prep.bids if b.dish in award.group_key))
        ctx = prep.ctx
        evaluation = evaluate_group(ctx, task, group, cfg.weights)
        splits = split_traffic(task, group)
        saved = life_savings(ctx, task, group, splits)
        e_sat = path_energy(task.data_amount, ctx.path, eps)
        d_sat = ctx.path.latency
        outcome = simulate_outcome(task, group, ctx, splits, rng, state.dishes)

        offloaded += 1
        energy += e_sat - sum(path_energy(splits[b.dish], ctx.offload_path(b), eps) for b in group.bids)
        life += sum(saved.raw.values())
        latency += d_sat - group_delay(ctx, group)
        util_sum += evaluation.total
        cost_sum += group.total_cost
        ratio_sum += evaluation.total / group.total_cost if group.total_cost > 0 else 0.0
        budget_sum += task.budget

        paid = {}
        for b in group.bids:
            prefix = ctx.offload_path(b)
            route(splits[b.dish], prefix.sats)
            ok = outcome.success[b.dish]
            state.reputations[b.dish] = update_failure(state.reputations[b.dish], True, not ok)
            if ok:
                paid[b.dish] = award.dish_payments[b.dish]
                continue
            rest = ctx.path.sats[len(prefix):]
            route(splits[b.dish], rest)
            state.penalty.energy += path_energy(splits[b.dish], ctx.path, eps) - path_energy(splits[b.dish], prefix, eps)
            state.penalty.life += saved.raw[b.dish]
        if outcome.retransmitted:
            failed += 1
            state.penalty.latency += outcome.realized_latency - group_delay(ctx, group)
        payment += math.fsum(paid.values())
        tag = "success" if not outcome.retransmitted else "failed:" + "-".join(
            str(d) for d, ok in sorted(outcome.success.items()) if not ok)
        state.transcript.append(TranscriptRow(tau, task.id, prep.platform, prep.candidates,
                                              award.group_key, evaluation.total, award.group_payment, paid, tag))

    state.routed_energy = dict(routed)
    state.next_interval = tau + 1
    return IntervalMetrics(tau, energy, life, latency, len(tasks), offloaded, failed, payment,
                           util_sum, cost_sum, ratio_sum, budget_sum)


def simulate_outcome(task: Task, group: CollaboratorGroup, ctx: UtilityContext, splits: Mapping[int, float],
                     rng: np.random.Generator, dishes: Mapping[int, DishSite]) -> OffloadOutcome:
    """One Bernoulli failure draw per dish, in dish order.

    A failed split goes back on the original path from its offloading
    satellite, so it arrives after the full original-path latency plus the
    wasted ground-link hop.
    """
    success = {}
    worst = 0.0
    energy = 0.0
    eps = ctx.epsilon
    for b in group.bids:
        ok = not (rng.random() < dishes[b.dish].true_failure_rate)
        success[b.dish] = ok
        prefix = ctx.offload_path(b)
        if ok:
            worst = max(worst, ctx.dish_delay(b))
            energy += path_energy(splits[b.dish], prefix, eps)
        else:
            worst = max(worst, ctx.path.latency + ctx.gsl_latency.get(b.dish, 0.0))
            energy += path_energy(splits[b.dish], ctx.path, eps)
    return OffloadOutcome(task.id, success, worst, energy)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    metrics: list[IntervalMetrics]
    state: SimState

    @property
    def transcript(self) -> list[TranscriptRow]:
        return self.state.transcript

    def summary(self) -> dict[str, float]:
        return summarize(self.metrics)


def run_scenario(config: ScenarioConfig, dishes: Sequence[DishSite] | None = None) -> ScenarioResult:
    state = init_state(config, dishes)
    metrics = [run_interval(state) for _ in range(config.num_intervals)]
    return ScenarioResult(config, metrics, state)


METRIC_COLUMNS = [f.name for f in fields(IntervalMetrics)]
SERIES = ("reduced_energy", "reduced_life_consumption", "reduced_latency", "total_payment")


def failed_share(metrics: Sequence[IntervalMetrics]) -> float:
    """Percentage of offloaded tasks with at least one failed dish."""
    offloaded = sum(m.tasks_offloaded for m in metrics)
    return 100.0 * sum(m.tasks_failed for m in metrics) / offloaded if offloaded else 0.0


def summarize(metrics: Sequence[IntervalMetrics]) -> dict[str, float]:
    out: dict[str, float] = {"intervals": float(len(metrics))}
    if not metrics:
        return out
    for name in SERIES:
        values = np.array([getattr(m, name) for m in metrics])
        out[f"mean_{name}"] = float(values.mean())
        for q in (10, 50, 90):
            out[f"p{q}_{name}"] = float(np.percentile(values, q))
    offloaded = sum(m.tasks_offloaded for m in metrics)
    total = sum(m.tasks_total for m in metrics)
    out["tasks_total"] = float(total)
    out["tasks_offloaded"] = float(offloaded)
    out["offloaded_pct"] = 100.0 * offloaded / total if total else 0.0
    out["failed_offload_pct"] = failed_share(metrics)
    half = len(metrics) // 2
    out["failed_offload_pct_first_half"] = failed_share(metrics[:half])
    out["failed_offload_pct_second_half"] = failed_share(metrics[half:])
    out["mean_utility_cost_ratio"] = (sum(m.sum_utility_cost_ratio for m in metrics) / offloaded
                                      if offloaded else 0.0)
    return out


def metrics_csv(metrics: Sequence[IntervalMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for m in metrics:
        w.writerow([repr(v) if isinstance(v, float) else str(v) for v in asdict(m).values()])
    return buf.getvalue()


def transcript_csv(rows: Sequence[TranscriptRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRANSCRIPT_HEADER)
    for r in rows:
        w.writerow(r.as_csv())
    return buf.getvalue()


def summary_text(summary: Mapping[str, float]) -> str:
    width = max((len(k) for k in summary), default=0)
    return "".join(f"{k:<{width}}  {v:.6g}\n" for k, v in summary.items())


def write_outputs(result: ScenarioResult, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"metrics": out / "metrics.csv", "transcript": out / "transcript.csv", "summary": out / "summary.txt"}
    files["metrics"].write_text(metrics_csv(result.metrics), encoding="utf-8")
    files["transcript"].write_text(transcript_csv(result.transcript), encoding="utf-8")
    files["summary"].write_text(summary_text(result.summary()), encoding="utf-8")
    return files


def recount_reputations(rows: Sequence[TranscriptRow]) -> dict[int, DishReputation]:
    """Rebuild every dish's failure counts from an auction transcript."""
    wins: dict[int, int] = defaultdict(int)
    fails: dict[int, int] = defaultdict(int)
    for r in rows:
        if not r.winner_key:
            continue
        failed = set()
        if r.outcome.startswith("failed:"):
            failed = {int(d) for d in r.outcome.split(":", 1)[1].split("-")}
        for d in r.winner_key:
            wins[d] += 1
            fails[d] += d in failed
    return {d: DishReputation(fails[d], wins[d]) for d in wins}
