import numpy as np
import pytest

from tubetopo.forge import SyntheticSource, generate
from tubetopo.forge.synth import SynthParams


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """24 generated samples on disk, shared by IO, CLI and service tests."""
    out = tmp_path_factory.mktemp("data") / "small.jsonl"
    generate(SyntheticSource(SynthParams()), out, 24, seed=7)
    return out


def random_mask(rng, h=64, w=64):
    """Mix of sparse noise and blobby masks, so both many-component and holey cases occur."""
    kind = rng.integers(3)
    if kind == 0:
        return rng.random((h, w)) < rng.uniform(0.05, 0.6)
    from scipy import ndimage

    field = ndimage.gaussian_filter(rng.random((h, w)), rng.uniform(0.8, 3.0))
    return field > np.quantile(field, rng.uniform(0.3, 0.8))


# one line per acceptance criterion, filled by test_acceptance and echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
