"""Dataset generation: sources, per-sample seeding, worker fan-out and persistence."""

from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image

from tubetopo.datakit import SampleLine, dumps_line, read_mask, write_mask
from tubetopo.errors import DataError
from tubetopo.forge.config import BIN_LABELS, ForgeConfig
from tubetopo.forge.pipeline import SampleRecord, corrupt, sample_patch
from tubetopo.forge.planning import InjectionPlan, plan_window
from tubetopo.forge.synth import SynthParams, synth_network
from tubetopo.types import ANOMALY_TYPES

MASK_SUFFIXES = (".png", ".pgm")
SOURCE_DRAWS = 20


@dataclass(frozen=True)
class SyntheticSource:
    params: SynthParams = SynthParams()
    name = "synthetic"

    def draw(self, rng, config: ForgeConfig):
        mask = synth_network(rng, self.params)
        patch = sample_patch(mask, rng, config)
        if patch is None:
            raise DataError("synthetic network has too little foreground for a patch")
        return patch.mask, None, self.name


@lru_cache(maxsize=32)
def _load(path: str) -> np.ndarray:
    return read_mask(path)


@lru_cache(maxsize=32)
def _load_image(path: str) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img)


@dataclass(frozen=True)
class DirectorySource:
    """Masks from a directory.

    Either every PNG/PGM file in ``root`` is a mask, or ``root`` holds
    ``masks/`` and ``images/`` subdirectories with matching file names.
    """

    root: str
    masks: tuple[str, ...]
    images: tuple[str | None, ...]

    @classmethod
    def scan(cls, root) -> "DirectorySource":
        root = Path(root)
        if not root.is_dir():
            raise FileNotFoundError(f"source directory not found: {root}")
        mask_dir = root / "masks" if (root / "masks").is_dir() else root
        files = sorted(p for p in mask_dir.iterdir() if p.suffix.lower() in MASK_SUFFIXES)
        if not files:
            raise DataError(f"no PNG/PGM masks in {mask_dir}")
        image_dir = root / "images"
        images = tuple(
            str(image_dir / p.name) if mask_dir != root and (image_dir / p.name).is_file() else None
            for p in files
        )
        return cls(str(root), tuple(str(p) for p in files), images)

    def draw(self, rng, config: ForgeConfig):
        for _ in range(SOURCE_DRAWS):
            k = int(rng.integers(len(self.masks)))
            mask = _load(self.masks[k])
            if min(mask.shape) < config.patch_size:
                continue
            image = _load_image(self.images[k]) if self.images[k] else None
            if image is not None and image.shape[:2] != mask.shape:
                raise DataError(f"image and mask sizes differ for {self.masks[k]}")
            patch = sample_patch(mask, rng, config, image)
            if patch is not None:
                return patch.mask, patch.image, Path(self.masks[k]).stem
        raise DataError(f"no eligible patch after {SOURCE_DRAWS} source draws")


def sample_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, index])


def plan_seed(seed: int, index: int) -> np.random.SeedSequence:
    # child of the sample seed, so plan draws never alias pipeline draws
    return sample_seed(seed, index).spawn(1)[0]


def sample_id(index: int) -> str:
    return f"s{index:06d}"


def build_sample(source, plan: InjectionPlan, seed: int, index: int, config: ForgeConfig) -> SampleRecord:
    rng = np.random.default_rng(sample_seed(seed, index))
    clean, image, tag = source.draw(rng, config)
    return corrupt(
        clean, plan, rng, config, sample_id=sample_id(index), source=tag, seed=seed, image=image
    )


def _job(args) -> tuple[dict, list[str]]:
    source, plan, seed, index, config, out_dir, mask_dir = args
    rec = build_sample(source, plan, seed, index, config)
    stem = f"{mask_dir}/{rec.id}"
    write_mask(rec.clean, Path(out_dir, stem + "_clean.png"))
    write_mask(rec.corrupted, Path(out_dir, stem + "_corrupt.png"))
    image = None
    if rec.image is not None:
        image = stem + "_image.png"
        Image.fromarray(rec.image).save(Path(out_dir, image), format="PNG")
    line = SampleLine(
        id=rec.id,
        source=rec.source,
        mask_clean=stem + "_clean.png",
        mask_corrupt=stem + "_corrupt.png",
        image=image,
        width=rec.width,
        height=rec.height,
        betti_before=rec.betti_before,
        betti_after=rec.betti_after,
        annotations=rec.annotations,
        seed=rec.seed,
    )
    return line.to_json(), [a.type.value for a in rec.annotations]


def meta_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".meta.json")


def generate(
    source,
    out,
    count: int,
    seed: int,
    config: ForgeConfig = ForgeConfig(),
    workers: int = 1,
    extra_meta: dict | None = None,
    progress: Callable[[int], None] | None = None,
) -> dict:
    """Write ``count`` samples to the JSONL file ``out`` and return the run metadata.

    Masks go to ``<stem>_masks/`` beside ``out``; metadata to ``<stem>.meta.json``.
    Output depends only on (source, count, seed, config), never on ``workers``.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    out = Path(out)
    mask_dir = out.stem + "_masks"
    out.parent.mkdir(parents=True, exist_ok=True)
    (out.parent / mask_dir).mkdir(exist_ok=True)
    planned, emitted, bins = Counter(), Counter(), Counter()
    negatives = 0
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            for start in range(0, count, config.balance_window):
                idx = range(start, min(start + config.balance_window, count))
                rngs = [np.random.default_rng(plan_seed(seed, i)) for i in idx]
                plans = plan_window(rngs, [emitted[t.value] for t in ANOMALY_TYPES], config)
                jobs = [(source, p, seed, i, config, str(out.parent), mask_dir) for p, i in zip(plans, idx)]
                results = pool.map(_job, jobs) if pool else map(_job, jobs)
                for plan, (line, types) in zip(plans, results):
                    fh.write(dumps_line(line) + "\n")
                    planned.update(t.value for t in plan.types)
                    emitted.update(types)
                    bins[plan.bin_label] += 1
                    negatives += not types
                if progress:
                    progress(len(idx))
    finally:
        if pool:
            pool.shutdown()
    meta = {
        "count": count,
        "seed": seed,
        "source": source.name if isinstance(source, SyntheticSource) else source.root,
        "forge": config.to_dict(),
        "synth": source.params.to_dict() if isinstance(source, SyntheticSource) else None,
        "tallies": {
            "planned": {t.value: planned[t.value] for t in ANOMALY_TYPES},
            "emitted": {t.value: emitted[t.value] for t in ANOMALY_TYPES},
            "bins": {b: bins[b] for b in BIN_LABELS},
            "negatives": negatives,
        },
    }
    if extra_meta:
        meta.update(extra_meta)
    meta_path(out).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return meta
