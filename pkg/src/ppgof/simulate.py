"""Thinning simulation of every model family with replication-indexed seeding."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as K
from .errors import DomainError, InvalidInputError, SimulationBlowupError
from .models import (
    ETAS_TEMPORAL,
    EXP_HAWKES,
    PERIODIC_POISSON,
    POWER_LAW_HAWKES,
    RECURSIVE,
    SELF_CORRECTING,
    SHOT_NOISE,
    ModelSpec,
    Realization,
    stability_check,
    time_rescale,
)

__all__ = ["SeedSpec", "rng_for", "simulate", "time_rescale", "write_realization", "read_realization"]

# stream tags keep independent uses of one replication's seed apart
STREAM_SIMULATE = 0
STREAM_SHOTS = 1
STREAM_MARKS = 2
STREAM_JITTER = 3
STREAM_FIT = 4

DEFAULT_CAP = 10**7
GR_B_VALUE = 1.0

_U64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedSpec:
    experiment_seed: int
    replication_index: int = 0

    def __post_init__(self):
        if self.replication_index < 0:
            raise InvalidInputError("replication_index must be >= 0")


def rng_for(seed: SeedSpec | int, tag: int = STREAM_SIMULATE, attempt: int = 0) -> np.random.Generator:
    """Counter-based Philox generator keyed by (experiment seed, replication, tag, attempt)."""
    if not isinstance(seed, SeedSpec):
        seed = SeedSpec(int(seed))
    key = (seed.replication_index, tag) if attempt == 0 else (seed.replication_index, tag, attempt)
    ss = np.random.SeedSequence(int(seed.experiment_seed) & _U64, spawn_key=key)
    return np.random.Generator(np.random.Philox(ss))


def _check(status: int, kind: str, cap: int):
    if status == -1:
        raise SimulationBlowupError(f"{kind}: intensity bound became nonpositive or non-finite")
    if status == -2:
        raise SimulationBlowupError(f"{kind}: event count reached the cap of {cap}")


def simulate(
    model: ModelSpec,
    T: float,
    seed: SeedSpec | int,
    *,
    cap: int = DEFAULT_CAP,
    allow_unstable: bool = False,
    attempt: int = 0,
) -> Realization:
    """Draw one realization of ``model`` on ``[0, T]``.

    Shot-noise paths keep their latent shots in ``latent["shots"]`` and
    recursive paths keep ``latent["event_intensity"]``.
    """
    T = float(T)
    if not T >= 0 or not math.isfinite(T):
        raise InvalidInputError(f"horizon must be finite and >= 0, got {T}")
    if not allow_unstable:
        st = stability_check(model)
        if not st:
            raise DomainError(f"unstable parameters: {st.message}")
    if T == 0:
        return Realization(np.empty(0), 0.0)

    rng = rng_for(seed, STREAM_SIMULATE, attempt)
    kind, p = model.kind, model.params

    if kind == EXP_HAWKES:
        times, status = K.thin_exp_hawkes(rng, *p, T, cap)
        _check(status, kind, cap)
        return Realization(times, T)

    if kind == POWER_LAW_HAWKES:
        times, status = K.thin_powerlaw(rng, *p, T, cap)
        _check(status, kind, cap)
        return Realization(times, T)

    if kind == SHOT_NOISE:
        mu, alpha, beta = p
        srng = rng_for(seed, STREAM_SHOTS, attempt)
        shots = np.sort(srng.uniform(0.0, T, size=srng.poisson(mu * T)))
        times, status = K.thin_shot_noise(rng, shots, alpha, beta, T, cap)
        _check(status, kind, cap)
        return Realization(times, T, latent={"shots": shots})

    if kind == PERIODIC_POISSON:
        mu, alpha, beta, gamma = p
        bound = mu + alpha
        n = rng.poisson(bound * T)
        if n >= cap:
            _check(-2, kind, cap)
        cand = np.sort(rng.uniform(0.0, T, size=n))
        keep = rng.uniform(0.0, bound, size=n) <= mu + alpha * np.sin(beta * (cand - gamma))
        return Realization(cand[keep], T)

    if kind == SELF_CORRECTING:
        times, status = K.thin_self_correcting(rng, *p, T, cap)
        _check(status, kind, cap)
        return Realization(times, T)

    if kind == ETAS_TEMPORAL:
        pool = 1024
        while True:
            mrng = rng_for(seed, STREAM_MARKS, attempt)
            marks_pool = model.cutoff + mrng.exponential(1.0 / (GR_B_VALUE * math.log(10.0)), size=pool)
            times, used, status = K.thin_etas(rng_for(seed, STREAM_SIMULATE, attempt), marks_pool, model.cutoff, *p, T, cap)
            if status != -3:
                break
            pool *= 4
        _check(status, kind, cap)
        return Realization(times, T, marks=marks_pool[:used])

    if kind == RECURSIVE:
        times, lam_at, status = K.thin_recursive(rng, *p, T, cap)
        _check(status, kind, cap)
        return Realization(times, T, latent={"event_intensity": lam_at})

    raise InvalidInputError(f"cannot simulate {kind}")  # pragma: no cover


# ---------------------------------------------------------------------------
# CSV dump
# ---------------------------------------------------------------------------


def realization_to_csv(realization: Realization) -> str:
    buf = io.StringIO()
    buf.write("time,coord,mark\n")
    marks = realization.marks
    for i, (t, c) in enumerate(zip(realization.times, realization.coords)):
        m = "" if marks is None else f"{marks[i]:.12g}"
        buf.write(f"{t:.12g},{c},{m}\n")
    return buf.getvalue()


def write_realization(realization: Realization, path) -> None:
    Path(path).write_text(realization_to_csv(realization), encoding="utf-8", newline="\n")


def read_realization(path, horizon: float, dim: int | None = None) -> Realization:
    """Read a ``time,coord,mark`` CSV. Rows are sorted by time; the mark column may be blank."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "time" not in reader.fieldnames:
            raise InvalidInputError(f"{path}: expected a header with a 'time' column")
        times, coords, marks, bad = [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                times.append(float(row["time"]))
                coords.append(int(row.get("coord") or 1))
                m = (row.get("mark") or "").strip()
                marks.append(float(m) if m else math.nan)
            except (TypeError, ValueError):
                bad.append(lineno)
    if bad:
        raise InvalidInputError(f"{path}: unparseable rows at lines {bad}")
    times = np.array(times)
    order = np.argsort(times, kind="stable")
    coords = np.array(coords, dtype=np.int64)[order]
    marks = np.array(marks)[order]
    has_marks = marks.size > 0 and not np.all(np.isnan(marks))
    if has_marks and np.any(np.isnan(marks)):
        raise InvalidInputError(f"{path}: marks must be given for all rows or none")
    return Realization(
        times[order],
        horizon,
        coords=coords,
        marks=marks if has_marks else None,
        dim=dim or (int(coords.max()) if coords.size else 1),
    )
