from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from tubetopo.forge.config import BIN_LABELS, COUNT_BINS, ForgeConfig
from tubetopo.types import ANOMALY_TYPES, AnomalyType


@dataclass(frozen=True)
class InjectionPlan:
    bin: int
    count: int
    types: tuple[AnomalyType, ...]

    @property
    def bin_label(self) -> str:
        return BIN_LABELS[self.bin]


def type_weights(counts: Sequence[int]) -> np.ndarray:
    """Draw probabilities favouring under-represented types: 1/(1+count), renormalized."""
    w = 1.0 / (1.0 + np.asarray(counts, dtype=float))
    return w / w.sum()


def plan_injection(
    rng: np.random.Generator, counts: Sequence[int], config: ForgeConfig = ForgeConfig()
) -> InjectionPlan:
    """Draw an error-count bin, a count inside it, and a balanced type sequence.

    ``counts`` holds the running per-type emission counts in canonical type
    order. It is not modified; types drawn earlier in the same plan do count
    against later draws.
    """
    b = int(rng.choice(len(COUNT_BINS), p=config.bin_probs))
    lo, hi = COUNT_BINS[b]
    n = int(rng.integers(lo, hi + 1))
    local = np.array(counts, dtype=float)
    types = []
    for _ in range(n):
        t = int(rng.choice(len(ANOMALY_TYPES), p=type_weights(local)))
        local[t] += 1
        types.append(ANOMALY_TYPES[t])
    return InjectionPlan(b, n, tuple(types))


def plan_window(
    rngs: Sequence[np.random.Generator], emitted: Sequence[int], config: ForgeConfig = ForgeConfig()
) -> list[InjectionPlan]:
    """One plan per generator, balancing on ``emitted`` plus the types planned so far.

    Callers generate a window of samples, add the types that actually made it
    into records to ``emitted`` and plan the next window. Injection failures
    are therefore compensated for, which balancing on planned counts alone
    would not do.
    """
    counts = list(emitted)
    plans = []
    for rng in rngs:
        plan = plan_injection(rng, counts, config)
        for t in plan.types:
            counts[t.rank] += 1
        plans.append(plan)
    return plans


def plan_dataset(rng: np.random.Generator, n: int, config: ForgeConfig = ForgeConfig()):
    """Plans for ``n`` samples in order, balancing on planned type counts."""
    return plan_window([rng] * n, [0] * len(ANOMALY_TYPES), config)
