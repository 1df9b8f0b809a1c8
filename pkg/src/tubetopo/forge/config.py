from __future__ import annotations

from dataclasses import asdict, dataclass, fields

COUNT_BINS: tuple[tuple[int, int], ...] = ((0, 0), (1, 1), (2, 5), (6, 10))
BIN_LABELS: tuple[str, ...] = ("0", "1", "2-5", "6-10")


@dataclass(frozen=True)
class ForgeConfig:
    bin_probs: tuple[float, ...] = (0.20, 0.20, 0.40, 0.20)
    max_retries: int = 20
    # broken_connection: skeleton sub-path length, extra erase margin over local radius
    gap_length: tuple[int, int] = (5, 20)
    gap_margin: int = 2
    # spurious_connection: anchor distance and control-point offset (fraction of anchor distance)
    bridge_distance: tuple[int, int] = (15, 96)
    bridge_curvature: tuple[float, float] = (0.15, 0.45)
    # missing_branch: longest walk back from an endpoint
    missing_walk: int = 40
    # extra_branch: stroke length grown into background
    branch_length: tuple[int, int] = (10, 40)
    branch_wobble: float = 0.12
    box_padding: int = 4
    box_size: tuple[int, int] = (10, 900)
    min_foreground: float = 0.01
    patch_size: int = 256
    patch_attempts: int = 50
    # samples planned per balancer update during dataset generation
    balance_window: int = 64

    def __post_init__(self):
        if len(self.bin_probs) != len(COUNT_BINS):
            raise ValueError("bin_probs needs one entry per count bin")
        if abs(sum(self.bin_probs) - 1.0) > 1e-9 or min(self.bin_probs) < 0:
            raise ValueError("bin_probs must be non-negative and sum to 1")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        if self.balance_window < 1:
            raise ValueError("balance_window must be >= 1")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ForgeConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown forge options: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})
