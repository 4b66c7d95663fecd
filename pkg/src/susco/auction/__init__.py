"""Reverse auction: tasks, bids, collaborator groups, utilities, CGSC and CSTP."""
from .checks import (ConstraintReport, Violation, check_cdgs_constraints, clone_wins,
                     critical_value, reprice)
from .mechanism import (TaskOutcome, cgsc, cstp, cstp_task, exploration_bonus, group_payment,
                        log_count_sum, select_group, split_payment)
from .models import (MB_PER_GB, Award, Bid, CollaboratorGroup, DishReputation, GroupKey, GroupStats,
                     Task, UtilityWeights, dish_cost, update_failure)
from .utility import (GroupUtility, LifeSavings, UndefinedUtility, UtilityContext, discounted_utility,
                      evaluate_group, group_delay, life_savings, split_traffic, total_utility, utility_delay, utility_energy,
                      utility_life)

__all__ = [
    "Award", "Bid", "CollaboratorGroup", "ConstraintReport", "DishReputation", "GroupKey",
    "GroupStats", "GroupUtility", "LifeSavings", "MB_PER_GB", "Task", "TaskOutcome", "UndefinedUtility",
    "UtilityContext", "UtilityWeights", "Violation", "cgsc", "check_cdgs_constraints", "clone_wins",
    "critical_value", "cstp", "cstp_task", "discounted_utility", "dish_cost", "evaluate_group",
    "exploration_bonus", "group_delay", "group_payment", "life_savings", "log_count_sum", "reprice", "select_group",
    "split_payment", "split_traffic", "total_utility", "update_failure", "utility_delay",
    "utility_energy", "utility_life",
]
