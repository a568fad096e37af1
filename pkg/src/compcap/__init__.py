"""Competitive capacity and regret of discrete memoryless channel families."""

from .channels import Channel, ChannelFamily, builtin_family, capacity_ba, mutual_information, resolve_family
from .competitive import DecodingProfile, concat_schedule, greedy_profile
from .errors import CompCapError
from .optimize import (
    SearchConfig,
    SolveReport,
    compound_capacity,
    prop1_cr_via_regret,
    prop1_regret_via_cr,
    single_dist_bound,
    single_dist_regret,
    solve_cr,
    solve_regret,
    solve_weighted_cr,
    solve_weighted_regret,
)

__all__ = [
    "Channel",
    "ChannelFamily",
    "CompCapError",
    "DecodingProfile",
    "SearchConfig",
    "SolveReport",
    "builtin_family",
    "capacity_ba",
    "compound_capacity",
    "concat_schedule",
    "greedy_profile",
    "mutual_information",
    "prop1_cr_via_regret",
    "prop1_regret_via_cr",
    "resolve_family",
    "single_dist_bound",
    "single_dist_regret",
    "solve_cr",
    "solve_regret",
    "solve_weighted_cr",
    "solve_weighted_regret",
]
