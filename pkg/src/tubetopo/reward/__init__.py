"""Composite detection reward and GRPO group math."""

from tubetopo.reward.answer import FormatError, format_reward, parse_answer, render_answer
from tubetopo.reward.grpo import GrpoConfig, GrpoGroup, clipped_surrogate, grpo_advantages, grpo_objective, kl_k3
from tubetopo.reward.matching import MatchResult, assign, match_typed
from tubetopo.reward.scoring import (
    PHI_PRESETS,
    AccuracyTerms,
    PhiMapping,
    RewardBreakdown,
    RewardConfig,
    accuracy_reward,
    cl_dice,
    loc_pen,
    phi,
    score_prediction,
    size_penalty,
    topo_reward,
    total_reward,
)

__all__ = [
    "PHI_PRESETS",
    "AccuracyTerms",
    "FormatError",
    "GrpoConfig",
    "GrpoGroup",
    "MatchResult",
    "PhiMapping",
    "RewardBreakdown",
    "RewardConfig",
    "accuracy_reward",
    "assign",
    "cl_dice",
    "clipped_surrogate",
    "format_reward",
    "grpo_advantages",
    "grpo_objective",
    "kl_k3",
    "loc_pen",
    "match_typed",
    "parse_answer",
    "phi",
    "render_answer",
    "score_prediction",
    "size_penalty",
    "topo_reward",
    "total_reward",
]
