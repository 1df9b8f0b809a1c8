"""Synthetic topological-error data: patch sampling, planning, injection, verification."""

from tubetopo.forge.config import BIN_LABELS, COUNT_BINS, ForgeConfig
from tubetopo.forge.injectors import Injection, MaskState, SiteNotFound, inject
from tubetopo.forge.pipeline import (
    InjectionStep,
    Patch,
    SampleRecord,
    corrupt,
    derive_box,
    sample_patch,
    signature_holds,
    verify,
)
from tubetopo.forge.dataset import DirectorySource, SyntheticSource, generate
from tubetopo.forge.planning import InjectionPlan, plan_dataset, plan_injection, plan_window, type_weights
from tubetopo.forge.synth import SynthesisError, SynthParams, synth_network

__all__ = [
    "BIN_LABELS",
    "COUNT_BINS",
    "DirectorySource",
    "ForgeConfig",
    "Injection",
    "InjectionPlan",
    "InjectionStep",
    "MaskState",
    "Patch",
    "SampleRecord",
    "SiteNotFound",
    "SynthParams",
    "SyntheticSource",
    "SynthesisError",
    "corrupt",
    "derive_box",
    "generate",
    "inject",
    "plan_dataset",
    "plan_injection",
    "plan_window",
    "sample_patch",
    "signature_holds",
    "synth_network",
    "type_weights",
    "verify",
]
