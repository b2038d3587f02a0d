"""Catalog loading, resolution jitter and the bundled case-study catalogs."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, InvalidInputError
from .models import Realization
from .simulate import STREAM_JITTER, SeedSpec, rng_for

RESOLUTIONS = {"exact": 0.0, "daily": 1.0, "weekly": 7.0}


@dataclass(frozen=True)
class CatalogSchema:
    """How to read one catalog.

    With ``epoch`` set, the time column holds ISO-8601 dates converted to days
    since the epoch; otherwise it holds numbers already on the analysis scale.
    Rows with ``count_column`` expand into that many events sharing a time.
    ``window_end`` fixes the horizon (a date when ``epoch`` is set).
    """

    time_column: str
    time_resolution: str = "exact"
    mark_column: str | None = None
    mark_cutoff: float | None = None
    epoch: date | None = None
    count_column: str | None = None
    window_end: date | float | None = None

    def __post_init__(self):
        if self.time_resolution not in RESOLUTIONS:
            raise InvalidInputError(f"time_resolution must be one of {sorted(RESOLUTIONS)}")
        if self.mark_cutoff is not None and self.mark_column is None:
            raise InvalidInputError("a mark cutoff needs a mark column")

    @property
    def bucket_width(self) -> float:
        return RESOLUTIONS[self.time_resolution]

    @property
    def horizon(self) -> float | None:
        if self.window_end is None:
            return None
        if isinstance(self.window_end, date):
            if self.epoch is None:
                raise InvalidInputError("a date window_end needs an epoch")
            return float((self.window_end - self.epoch).days)
        return float(self.window_end)


@dataclass(frozen=True, eq=False)
class EventList:
    """Sorted raw event times (bucket starts for coarse resolutions) with optional marks."""

    times: np.ndarray
    marks: np.ndarray | None = None

    def __len__(self):
        return self.times.size


def _parse_time(text: str, schema: CatalogSchema) -> float:
    text = text.strip()
    if schema.epoch is not None:
        return float((date.fromisoformat(text) - schema.epoch).days)
    return float(text)


def load_events(path, schema: CatalogSchema) -> EventList:
    """Read a CSV catalog, apply the mark cutoff (keep m >= M) and sort by time."""
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"catalog not found: {path}")
    times, marks, bad = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        needed = [c for c in (schema.time_column, schema.mark_column, schema.count_column) if c]
        missing = [c for c in needed if c not in (reader.fieldnames or [])]
        if missing:
            raise InvalidInputError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                t = _parse_time(row[schema.time_column], schema)
                m = float(row[schema.mark_column]) if schema.mark_column else math.nan
                count = int(row[schema.count_column]) if schema.count_column else 1
                if not math.isfinite(t) or count < 0:
                    raise ValueError
            except (TypeError, ValueError):
                bad.append(lineno)
                continue
            if schema.mark_cutoff is not None and not m >= schema.mark_cutoff:
                continue
            times.extend([t] * count)
            marks.extend([m] * count)
    if bad:
        raise InvalidInputError(f"{path}: unparseable rows at lines {bad}")
    if not times:
        raise InsufficientDataError(f"{path}: no events left after filtering")
    times = np.array(times)
    marks = np.array(marks)
    order = np.lexsort((marks, times))
    return EventList(times[order], marks[order] if schema.mark_column else None)


def jitter(events: EventList, schema: CatalogSchema, seed: SeedSpec | int, horizon: float | None = None) -> Realization:
    """Spread each event uniformly over its resolution bucket and return a strictly increasing Realization."""
    horizon = schema.horizon if horizon is None else float(horizon)
    width = schema.bucket_width
    starts = np.asarray(events.times, dtype=float)
    if horizon is None:
        horizon = float(starts.max() + width)
    if width == 0.0:
        times = starts.copy()
        if np.any(np.diff(times) <= 0):
            raise InvalidInputError("exact-resolution catalogs must not contain tied times")
        order = np.arange(times.size)
    else:
        rng = rng_for(seed, STREAM_JITTER)
        times = starts + rng.random(starts.size) * width
        while True:
            order = np.argsort(times, kind="stable")
            tied = np.flatnonzero(np.diff(times[order]) <= 0)
            if tied.size == 0:
                break
            redo = order[tied + 1]
            times[redo] = starts[redo] + rng.random(redo.size) * width
    marks = None if events.marks is None else events.marks[order]
    return Realization(times[order], horizon, marks=marks)


# ---------------------------------------------------------------------------
# bundled case studies
# ---------------------------------------------------------------------------

EARTHQUAKE = CatalogSchema(
    time_column="date",
    time_resolution="daily",
    mark_column="magnitude",
    mark_cutoff=6.0,
    epoch=date(1885, 1, 1),
    window_end=date(1981, 1, 1),
)
_DISEASE = dict(
    time_column="week_start",
    time_resolution="weekly",
    count_column="cases",
    epoch=date(1960, 1, 1),
    window_end=date(2012, 1, 1),
)
CASE_STUDIES = {
    "earthquake": ("earthquake_off_tohoku.csv", EARTHQUAKE),
    "california": ("rmsf_california.csv", CatalogSchema(**_DISEASE)),
    "florida": ("rmsf_florida.csv", CatalogSchema(**_DISEASE)),
}


def fixture_path(name: str) -> Path:
    if name not in CASE_STUDIES:
        raise InvalidInputError(f"unknown case study {name!r}; expected one of {sorted(CASE_STUDIES)}")
    return Path(str(resources.files("ppgof") / "data" / "catalogs" / CASE_STUDIES[name][0]))


def load_case_study(name: str, seed: SeedSpec | int = 0) -> Realization:
    path = fixture_path(name)
    schema = CASE_STUDIES[name][1]
    return jitter(load_events(path, schema), schema, seed)
