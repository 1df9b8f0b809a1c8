"""Mask image IO, the JSONL record and prediction schemas, and prompt text."""

from __future__ import annotations

import io
import json
import string
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

import numpy as np
from PIL import Image, UnidentifiedImageError

from tubetopo.errors import DataError, MaskFormatError, TemplateError
from tubetopo.topology import BettiPair
from tubetopo.types import ANOMALY_TYPES, Anomaly, AnomalyType

# ---------------------------------------------------------------- masks


def _decode(img: Image.Image, name: str) -> np.ndarray:
    if img.mode not in ("L", "1"):
        raise MaskFormatError(f"expected 8-bit grayscale, got mode {img.mode}", path=name)
    return np.asarray(img.convert("L")) >= 128


def read_mask(path) -> np.ndarray:
    """Load a grayscale PNG/PGM as a boolean mask (pixel >= 128 is foreground)."""
    try:
        with Image.open(path) as img:
            return _decode(img, str(path))
    except UnidentifiedImageError:
        raise MaskFormatError("not a readable image", path=str(path)) from None


def _encode(mask: np.ndarray) -> Image.Image:
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.size == 0:
        raise ValueError(f"mask must be a non-empty 2-D array, got shape {mask.shape}")
    return Image.fromarray(np.where(mask.astype(bool), 255, 0).astype(np.uint8), mode="L")


def write_mask(mask: np.ndarray, path) -> None:
    _encode(mask).save(path, format="PNG")


def mask_to_png(mask: np.ndarray) -> bytes:
    buf = io.BytesIO()
    _encode(mask).save(buf, format="PNG")
    return buf.getvalue()


def mask_from_png(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as img:
            return _decode(img, "<bytes>")
    except UnidentifiedImageError:
        raise MaskFormatError("not a readable image") from None


# ---------------------------------------------------------------- JSONL

_SAMPLE_FIELDS = (
    "id",
    "source",
    "mask_clean",
    "mask_corrupt",
    "image",
    "width",
    "height",
    "betti_before",
    "betti_after",
    "annotations",
    "seed",
)


def _need(d: dict, key: str, kind, line: int | None):
    if key not in d:
        raise DataError(f"missing field {key!r}", line=line)
    v = d[key]
    if kind is int and (isinstance(v, bool) or not isinstance(v, int)):
        raise DataError(f"field {key!r} must be an integer", line=line)
    if kind is str and not isinstance(v, str):
        raise DataError(f"field {key!r} must be a string", line=line)
    return v


def _betti(v, key: str, line: int | None) -> BettiPair:
    if not (isinstance(v, list) and len(v) == 2 and all(type(x) is int and x >= 0 for x in v)):
        raise DataError(f"field {key!r} must be two non-negative integers", line=line)
    return BettiPair(*v)


def parse_anomalies(items, line: int | None = None, *, canonical: bool = False) -> list[Anomaly]:
    if not isinstance(items, list):
        raise DataError("annotations must be a list", line=line)
    out = []
    for i, item in enumerate(items):
        try:
            if not isinstance(item, dict) or set(item) != {"Position", "ErrorType"}:
                raise ValueError("expected {Position, ErrorType}")
            pos = item["Position"]
            if not (isinstance(pos, list) and len(pos) == 4 and all(type(v) is int for v in pos)):
                raise ValueError("Position must be four integers")
            out.append(Anomaly(tuple(pos), _label(item["ErrorType"])))
        except ValueError as exc:
            raise DataError(f"annotation {i}: {exc}", line=line) from None
    if canonical and out != sorted(out, key=lambda a: a.sort_key):
        raise DataError("annotations are not in canonical order", line=line)
    return out


def _label(v):
    if not isinstance(v, str):
        raise ValueError("ErrorType must be a string")
    return AnomalyType.from_label(v)


@dataclass
class SampleLine:
    """One persisted sample. Paths are relative to the JSONL file's directory."""

    id: str
    source: str
    mask_clean: str
    mask_corrupt: str
    width: int
    height: int
    betti_before: BettiPair
    betti_after: BettiPair
    annotations: list[Anomaly]
    seed: int
    image: str | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_json(cls, d: dict, line: int | None = None) -> "SampleLine":
        if not isinstance(d, dict):
            raise DataError("record is not an object", line=line)
        width, height = _need(d, "width", int, line), _need(d, "height", int, line)
        if width < 1 or height < 1:
            raise DataError("width and height must be positive", line=line)
        image = d.get("image")
        if image is not None and not isinstance(image, str):
            raise DataError("field 'image' must be a string or null", line=line)
        return cls(
            id=_need(d, "id", str, line),
            source=_need(d, "source", str, line),
            mask_clean=_need(d, "mask_clean", str, line),
            mask_corrupt=_need(d, "mask_corrupt", str, line),
            width=width,
            height=height,
            betti_before=_betti(_need(d, "betti_before", list, line), "betti_before", line),
            betti_after=_betti(_need(d, "betti_after", list, line), "betti_after", line),
            annotations=parse_anomalies(_need(d, "annotations", list, line), line, canonical=True),
            seed=_need(d, "seed", int, line),
            image=image,
            extra={k: v for k, v in d.items() if k not in _SAMPLE_FIELDS},
        )

    def to_json(self) -> dict:
        d = {
            "id": self.id,
            "source": self.source,
            "mask_clean": self.mask_clean,
            "mask_corrupt": self.mask_corrupt,
            "image": self.image,
            "width": self.width,
            "height": self.height,
            "betti_before": list(self.betti_before),
            "betti_after": list(self.betti_after),
            "annotations": [a.to_dict() for a in self.annotations],
            "seed": self.seed,
        }
        d.update(sorted(self.extra.items()))
        return d


@dataclass
class PredictionLine:
    """A model output for one sample: raw ``response`` text or a parsed ``prediction`` list."""

    id: str
    response: str | None = None
    prediction: list[Anomaly] | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_json(cls, d: dict, line: int | None = None) -> "PredictionLine":
        if not isinstance(d, dict):
            raise DataError("prediction is not an object", line=line)
        has_text, has_list = d.get("response") is not None, d.get("prediction") is not None
        if has_text == has_list:
            raise DataError("need exactly one of 'response' or 'prediction'", line=line)
        return cls(
            id=_need(d, "id", str, line),
            response=_need(d, "response", str, line) if has_text else None,
            prediction=parse_anomalies(d["prediction"], line) if has_list else None,
            extra={k: v for k, v in d.items() if k not in ("id", "response", "prediction")},
        )

    def to_json(self) -> dict:
        d: dict[str, Any] = {"id": self.id}
        if self.response is not None:
            d["response"] = self.response
        else:
            d["prediction"] = [a.to_dict() for a in self.prediction or []]
        d.update(sorted(self.extra.items()))
        return d


def dumps_line(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    """Yield (line number, object) pairs, skipping blank lines."""
    with open(path, encoding="utf-8") as fh:
        for n, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                yield n, json.loads(text)
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed JSON ({exc.msg})", line=n, path=str(path)) from None


def _read(path, cls) -> list:
    out, seen = [], set()
    for n, obj in iter_jsonl(path):
        try:
            rec = cls.from_json(obj, n)
        except DataError as exc:
            raise DataError(exc.reason, line=n, path=str(path)) from None
        if rec.id in seen:
            raise DataError(f"duplicate id {rec.id!r}", line=n, path=str(path))
        seen.add(rec.id)
        out.append(rec)
    return out


def read_records(path) -> list[SampleLine]:
    return _read(path, SampleLine)


def read_predictions(path) -> list[PredictionLine]:
    return _read(path, PredictionLine)


def write_jsonl(items: Iterable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for item in items:
            fh.write(dumps_line(item.to_json() if hasattr(item, "to_json") else item) + "\n")


write_records = write_jsonl
write_predictions = write_jsonl


def load_masks(line: SampleLine, base_dir) -> tuple[np.ndarray, np.ndarray]:
    """Clean and corrupted masks of a record, checked against its declared size."""
    base = Path(base_dir)
    clean = read_mask(base / line.mask_clean)
    corrupt = read_mask(base / line.mask_corrupt)
    for m in (clean, corrupt):
        if m.shape != (line.height, line.width):
            raise DataError(
                f"record {line.id!r}: mask is {m.shape[1]}x{m.shape[0]}, "
                f"declared {line.width}x{line.height}"
            )
    return clean, corrupt


# ---------------------------------------------------------------- prompts

DEFAULT_TEMPLATE = """\
You are given a binary segmentation mask of a tubular structure ($width x $height pixels).
Find every topological error in the mask. The possible error types are:
$label_list
Report each error as an object with "Position" [x1, y1, x2, y2] (integers in [0, 1000], \
normalized to the image size) and "ErrorType" (one of: $labels).
Return a JSON list of these objects inside <answer></answer> tags. \
If the mask has no errors, return <answer>[]</answer>."""

_LABEL_HELP = {
    "broken_connection": "a gap that splits a continuous segment",
    "spurious_connection": "a bridge that joins segments which should be separate",
    "missing_branch": "a terminal branch that is absent",
    "extra_branch": "a branch that should not exist",
}


def emit_prompt(record, template: str = DEFAULT_TEMPLATE) -> str:
    """Fill ``template`` for a record (SampleLine or SampleRecord).

    Placeholders: ``$id``, ``$source``, ``$width``, ``$height``, ``$labels``
    (comma-separated) and ``$label_list`` (one bullet per type).
    """
    labels = [t.value for t in ANOMALY_TYPES]
    values = {
        "id": record.id,
        "source": record.source,
        "width": record.width,
        "height": record.height,
        "labels": ", ".join(labels),
        "label_list": "\n".join(f"- {t}: {_LABEL_HELP[t]}" for t in labels),
    }
    try:
        return string.Template(template).substitute(values)
    except KeyError as exc:
        raise TemplateError(f"unknown placeholder ${exc.args[0]}") from None
    except ValueError as exc:
        raise TemplateError(str(exc)) from None


# ---------------------------------------------------------------- record store


@dataclass(frozen=True)
class MaskRecord:
    """Masks and ground truth for one sample, as needed for scoring."""

    id: str
    clean: np.ndarray
    corrupted: np.ndarray
    annotations: tuple[Anomaly, ...]

    @property
    def height(self) -> int:
        return self.clean.shape[0]

    @property
    def width(self) -> int:
        return self.clean.shape[1]


class RecordStore:
    """Read-only id index over a records file; masks are decoded on demand."""

    def __init__(self, lines: Iterable[SampleLine], base_dir, cache_size: int = 512):
        self.base_dir = Path(base_dir)
        self._lines = {line.id: line for line in lines}
        self._cache: dict[str, MaskRecord] = {}
        self._cache_size = cache_size
        self._lock = threading.Lock()

    @classmethod
    def open(cls, path, cache_size: int = 512) -> "RecordStore":
        return cls(read_records(path), Path(path).parent, cache_size)

    def __len__(self) -> int:
        return len(self._lines)

    def __contains__(self, sid: str) -> bool:
        return sid in self._lines

    def ids(self) -> list[str]:
        return list(self._lines)

    def line(self, sid: str) -> SampleLine:
        return self._lines[sid]

    def get(self, sid: str) -> MaskRecord:
        """Masks for ``sid``; raises KeyError for unknown ids."""
        rec = self._cache.get(sid)
        if rec is None:
            line = self._lines[sid]
            clean, corrupt = load_masks(line, self.base_dir)
            clean.flags.writeable = corrupt.flags.writeable = False
            rec = MaskRecord(line.id, clean, corrupt, tuple(line.annotations))
            with self._lock:
                if len(self._cache) >= self._cache_size:
                    self._cache.pop(next(iter(self._cache)))
                rec = self._cache.setdefault(sid, rec)
        return rec
