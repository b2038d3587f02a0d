import math

import numpy as np
import pytest

from ppgof.models import ModelSpec, Realization

# one PASS/FAIL line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: list[str] = []

EXPH = ModelSpec("ExpHawkes", (0.5, 1.0, 2.0))
PERIODIC = ModelSpec("PeriodicPoisson", (1.25, 1.0, 0.2, 0.0))
SELF_CORRECTING = ModelSpec("SelfCorrecting", (1.0, 0.5, math.log(2.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def exph():
    return EXPH


@pytest.fixture
def periodic():
    return PERIODIC


@pytest.fixture
def self_correcting():
    return SELF_CORRECTING


@pytest.fixture
def all_models():
    """One valid spec per family."""
    return [
        EXPH,
        ModelSpec("PowerLawHawkes", (0.5, 0.9, 2.0)),
        ModelSpec("ShotNoise", (1.0, 2.0, 2.0)),
        PERIODIC,
        SELF_CORRECTING,
        ModelSpec("EtasTemporal", (0.05, 0.02, 0.02, 1.6), cutoff=6.0),
        ModelSpec("Recursive", (0.5, 0.5, 1.0, 0.5)),
    ]


def poisson_path(rng, rate, T):
    times = np.sort(rng.uniform(0.0, T, rng.poisson(rate * T)))
    return Realization(times, T)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
