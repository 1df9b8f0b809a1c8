"""Group-relative advantages and the clipped GRPO objective (evaluation only)."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class GrpoConfig:
    clip_eps: float = 0.2
    kl_beta: float = 0.05
    eps_std: float = 1e-6

    def __post_init__(self):
        if self.clip_eps < 0:
            raise ValueError("clip_eps must be >= 0")
        if self.kl_beta < 0:
            raise ValueError("kl_beta must be >= 0")
        if self.eps_std < 0:
            raise ValueError("eps_std must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GrpoConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown grpo options: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class GrpoGroup:
    """One prompt's G candidates: rewards and sequence log-probs under three policies."""

    rewards: Sequence[float]
    logp_new: Sequence[float]
    logp_old: Sequence[float]
    logp_ref: Sequence[float]

    def __post_init__(self):
        sizes = {len(self.rewards), len(self.logp_new), len(self.logp_old), len(self.logp_ref)}
        if len(sizes) != 1:
            raise ValueError("rewards and log-probabilities must have the same length")
        if len(self.rewards) < 2:
            raise ValueError("a group needs at least 2 candidates")


def grpo_advantages(rewards: Sequence[float], eps_std: float = 1e-6) -> np.ndarray:
    """(R_i - mean) / (population std + eps_std)."""
    r = np.asarray(rewards, dtype=float)
    if r.ndim != 1 or len(r) < 2:
        raise ValueError("need a 1-D group of at least 2 rewards")
    if np.all(r == r[0]):
        # constant group: no signal, and the float mean may not equal r[0] exactly
        return np.zeros_like(r)
    centred = r - r.mean()
    scale = np.sqrt(np.mean(centred**2)) + eps_std
    # with eps_std = 0 a spread of subnormals can still underflow to zero
    return centred / scale if scale > 0 else np.zeros_like(r)


def kl_k3(logp_new, logp_ref) -> np.ndarray:
    """Per-sample low-variance KL estimate exp(d) - d - 1, d = logp_ref - logp_new."""
    d = np.asarray(logp_ref, dtype=float) - np.asarray(logp_new, dtype=float)
    return np.expm1(d) - d


def clipped_surrogate(ratio, advantage, clip_eps: float) -> np.ndarray:
    ratio = np.asarray(ratio, dtype=float)
    advantage = np.asarray(advantage, dtype=float)
    clipped = np.clip(ratio, 1 - clip_eps, 1 + clip_eps)
    return np.minimum(ratio * advantage, clipped * advantage)


def grpo_objective(group: GrpoGroup, config: GrpoConfig = GrpoConfig()) -> float:
    adv = grpo_advantages(group.rewards, config.eps_std)
    ratio = np.exp(np.asarray(group.logp_new, dtype=float) - np.asarray(group.logp_old, dtype=float))
    surrogate = clipped_surrogate(ratio, adv, config.clip_eps)
    kl = kl_k3(group.logp_new, group.logp_ref)
    return float(surrogate.mean() - config.kl_beta * kl.mean())
