"""Single-dish comparison schemes: SERvICE, SMTSN and FALCON.

None of them forms groups and all of them pay the winner its declared cost.
"""
from __future__ import annotations

import enum
from typing import Callable, Sequence

from .auction import Award, Bid, CollaboratorGroup, Task, UtilityContext, utility_life


class SchemeChoice(str, enum.Enum):
    SUSCO = "susco"
    SERVICE = "service"
    SMTSN = "smtsn"
    FALCON = "falcon"


def feasible_bids(task: Task, bids: Sequence[Bid], ctx: UtilityContext) -> list[Bid]:
    """Bids that meet delay, bandwidth and data amount on their own."""
    return [b for b in bids
            if ctx.dish_delay(b) <= task.delay_req
            and b.bandwidth >= task.bandwidth_req
            and b.data_capacity >= task.data_amount]


def minmax(values: Sequence[float]) -> list[float]:
    lo, hi = min(values), max(values)
    if hi == lo:
        return [0.5] * len(values)
    return [(v - lo) / (hi - lo) for v in values]


def _latency_gain(task: Task, bid: Bid, ctx: UtilityContext) -> float:
    return ctx.path.latency - ctx.dish_delay(bid)


def _award(task: Task, bid: Bid | None) -> Award | None:
    if bid is None or bid.cost > task.budget:
        return None
    return Award(task.id, (bid.dish,), bid.cost, {bid.dish: bid.cost})


def _argmax_weighted(task: Task, bids: Sequence[Bid], ctx: UtilityContext,
                     other: Callable[[Bid], float]) -> Bid | None:
    feasible = feasible_bids(task, bids, ctx)
    if not feasible:
        return None
    lat = minmax([_latency_gain(task, b, ctx) for b in feasible])
    oth = minmax([other(b) for b in feasible])
    scored = [(0.5 * l + 0.5 * o, b) for l, o, b in zip(lat, oth, feasible)]
    return max(scored, key=lambda sb: (sb[0], -sb[1].dish))[1]


def select_service(task: Task, bids: Sequence[Bid], ctx: UtilityContext) -> Award | None:
    """Equal weight on latency improvement and dish bandwidth."""
    return _award(task, _argmax_weighted(task, bids, ctx, lambda b: b.bandwidth))


def select_smtsn(task: Task, bids: Sequence[Bid], ctx: UtilityContext) -> Award | None:
    """Equal weight on the single dish's service-life utility and latency improvement."""
    return _award(task, _argmax_weighted(
        task, bids, ctx, lambda b: utility_life(ctx, task, CollaboratorGroup.of(b))))


def select_falcon(task: Task, bids: Sequence[Bid], ctx: UtilityContext) -> Award | None:
    """Lowest end-to-end latency."""
    feasible = feasible_bids(task, bids, ctx)
    if not feasible:
        return None
    return _award(task, min(feasible, key=lambda b: (ctx.dish_delay(b), b.dish)))


BASELINES: dict[SchemeChoice, Callable[[Task, Sequence[Bid], UtilityContext], Award | None]] = {
    SchemeChoice.SERVICE: select_service,
    SchemeChoice.SMTSN: select_smtsn,
    SchemeChoice.FALCON: select_falcon,
}
