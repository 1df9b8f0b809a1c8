from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from tubetopo.topology import Box


class AnomalyType(str, Enum):
    BROKEN = "broken_connection"
    SPURIOUS = "spurious_connection"
    MISSING = "missing_branch"
    EXTRA = "extra_branch"

    @property
    def rank(self) -> int:
        return _ORDER[self]

    @classmethod
    def from_label(cls, label: str) -> "AnomalyType":
        """Resolve a label, tolerating case, spaces and the short forms.

        >>> AnomalyType.from_label("Spurious conn.")
        <AnomalyType.SPURIOUS: 'spurious_connection'>
        """
        key = label.strip().lower().rstrip(".").replace("-", " ").replace("_", " ")
        key = "_".join(key.split())
        try:
            return _ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown error type {label!r}") from None


ANOMALY_TYPES: tuple[AnomalyType, ...] = tuple(AnomalyType)
_ORDER = {t: i for i, t in enumerate(ANOMALY_TYPES)}
_ALIASES = {t.value: t for t in ANOMALY_TYPES}
_ALIASES.update(broken_conn=AnomalyType.BROKEN, spurious_conn=AnomalyType.SPURIOUS)


@dataclass(frozen=True)
class Anomaly:
    """One topological error: a box in [0, 1000] coordinates plus its type."""

    box: Box
    type: AnomalyType

    def __post_init__(self):
        x1, y1, x2, y2 = self.box
        if not (0 <= x1 < x2 <= 1000 and 0 <= y1 < y2 <= 1000):
            raise ValueError(f"invalid normalized box {self.box}")

    @property
    def sort_key(self):
        return (self.type.rank, self.box[1], self.box[0], self.box[3], self.box[2])

    def to_dict(self) -> dict:
        return {"Position": list(self.box), "ErrorType": self.type.value}

    @classmethod
    def from_dict(cls, d: dict) -> "Anomaly":
        return cls(tuple(int(v) for v in d["Position"]), AnomalyType.from_label(d["ErrorType"]))


def canonical_order(anomalies) -> list[Anomaly]:
    """Sort by type (broken, spurious, missing, extra), then y1, then x1."""
    return sorted(anomalies, key=lambda a: a.sort_key)
