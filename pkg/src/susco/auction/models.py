"""Data model of the offloading auction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from ..constellation import DishId, GeoPoint, SatelliteId

MB_PER_GB = 8000.0

GroupKey = tuple  # sorted tuple of DishId


@dataclass(frozen=True)
class Task:
    id: int
    source_sat: SatelliteId
    dest_sat: SatelliteId
    delay_req: float  # ms
    bandwidth_req: float  # Mb/s
    data_amount: float  # Mb
    budget: float
    source: GeoPoint | None = None
    destination: GeoPoint | None = None

    def __post_init__(self):
        for name in ("delay_req", "bandwidth_req", "data_amount", "budget"):
            if not getattr(self, name) > 0:
                raise ValueError(f"task {self.id}: {name} must be positive")


@dataclass(frozen=True)
class Bid:
    dish: DishId
    latency: float  # xi_k, ms from dish to destination
    bandwidth: float  # gamma_k, Mb/s
    data_capacity: float  # Delta_k, Mb
    cost: float
    offload_sat: SatelliteId

    def __post_init__(self):
        if self.bandwidth <= 0 or self.data_capacity <= 0:
            raise ValueError(f"bid of dish {self.dish}: bandwidth and capacity must be positive")
        if self.cost < 0:
            raise ValueError(f"bid of dish {self.dish}: negative cost")

    def with_cost(self, cost: float) -> "Bid":
        return Bid(self.dish, self.latency, self.bandwidth, self.data_capacity, cost, self.offload_sat)


@dataclass(frozen=True)
class CollaboratorGroup:
    bids: tuple[Bid, ...]

    def __post_init__(self):
        if not self.bids:
            raise ValueError("a collaborator group needs at least one bid")
        ordered = tuple(sorted(self.bids, key=lambda b: b.dish))
        if len({b.dish for b in ordered}) != len(ordered):
            raise ValueError("dishes in a group must be distinct")
        object.__setattr__(self, "bids", ordered)

    @classmethod
    def of(cls, *bids: Bid) -> "CollaboratorGroup":
        return cls(tuple(bids))

    @property
    def key(self) -> GroupKey:
        return tuple(b.dish for b in self.bids)

    @property
    def dishes(self) -> frozenset:
        return frozenset(self.key)

    @property
    def total_cost(self) -> float:
        return math.fsum(b.cost for b in self.bids)

    @property
    def total_capacity(self) -> float:
        return math.fsum(b.data_capacity for b in self.bids)

    @property
    def total_bandwidth(self) -> float:
        return math.fsum(b.bandwidth for b in self.bids)

    def merge(self, other: "CollaboratorGroup") -> "CollaboratorGroup":
        return CollaboratorGroup(self.bids + other.bids)

    def __len__(self) -> int:
        return len(self.bids)


class GroupStats:
    """Selection counts n_lambda, keyed by sorted dish-id tuple.

    A key seen for the first time starts at 1.
    """

    def __init__(self, counts: Mapping[GroupKey, int] | None = None):
        self.counts: dict[GroupKey, int] = dict(counts or {})

    def count(self, key: GroupKey) -> int:
        return self.counts.setdefault(tuple(key), 1)

    def peek(self, key: GroupKey) -> int:
        return self.counts.get(tuple(key), 1)

    def increment(self, key: GroupKey) -> None:
        self.counts[tuple(key)] = self.count(key) + 1

    def copy(self) -> "GroupStats":
        return GroupStats(self.counts)

    def merge_increments(self, base: "GroupStats", updated: "GroupStats") -> None:
        """Apply the selections recorded in ``updated`` since ``base``."""
        for key, n in sorted(updated.counts.items()):
            gained = n - base.peek(key)
            if gained > 0:
                self.counts[key] = self.count(key) + gained

    def __eq__(self, other) -> bool:
        return isinstance(other, GroupStats) and self.counts == other.counts

    def __repr__(self) -> str:
        return f"GroupStats({self.counts!r})"


@dataclass(frozen=True)
class DishReputation:
    """Failure history of one dish.

    The estimate is kept as integer counts so that the incremental update
    and a recount from the transcript agree bit for bit.
    """
    failures: int = 0
    win_count: int = 0

    def __post_init__(self):
        if self.win_count < 0 or not 0 <= self.failures <= max(self.win_count, 0):
            raise ValueError("need 0 <= failures <= win_count")

    @property
    def failure_est(self) -> float:
        return self.failures / self.win_count if self.win_count else 0.0


def update_failure(rep: DishReputation, won_last_interval: bool, failed: bool) -> DishReputation:
    """f <- (f n + sigma) / (n + 1) after a win, unchanged otherwise."""
    if not won_last_interval:
        return rep
    return DishReputation(rep.failures + int(bool(failed)), rep.win_count + 1)


@dataclass(frozen=True)
class UtilityWeights:
    w1: float = 0.3  # energy
    w2: float = 0.4  # latency
    w3: float = 0.3  # service life

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3) < 0 or not math.isclose(self.w1 + self.w2 + self.w3, 1.0):
            raise ValueError("weights must be nonnegative and sum to 1")


@dataclass(frozen=True)
class Award:
    task_id: int
    group_key: GroupKey
    group_payment: float
    dish_payments: Mapping[DishId, float] = field(default_factory=dict)
    utility: float = 0.0


def dish_cost(data_mb: float, bandwidth_mbps: float, alpha: float = 0.09, beta_price: float = 0.17) -> float:
    """Data price per GB plus reservation price per second of receive time."""
    if bandwidth_mbps <= 0:
        raise ValueError("bandwidth must be positive")
    return alpha * data_mb / MB_PER_GB + beta_price * data_mb / bandwidth_mbps


def group_index(groups: Iterable[CollaboratorGroup]) -> dict[GroupKey, CollaboratorGroup]:
    return {g.key: g for g in groups}
