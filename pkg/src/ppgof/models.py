"""Realizations and the parametric conditional-intensity families.

Seven univariate families are supported (parameter order in brackets)::

    ExpHawkes        (mu, alpha, beta)      mu + sum alpha exp(-beta (t - t_i))
    PowerLawHawkes   (mu, alpha, beta)      mu + sum alpha (1 + t - t_i)^-beta
    ShotNoise        (mu, alpha, beta)      sum over latent Poisson(mu) shots s_j of alpha exp(-beta (t - s_j))
    PeriodicPoisson  (mu, alpha, beta, gamma)  mu + alpha sin(beta (t - gamma))
    SelfCorrecting   (mu, alpha, beta)      mu exp(beta t) alpha^N(t-)
    EtasTemporal     (mu, K, c, beta)       mu + sum exp(beta (m_i - M)) K / (t - t_i + c)
    Recursive        (mu, kappa, beta, alpha)  mu + sum kappa lambda(t_i)^-alpha beta exp(-beta (t - t_i))

A d-variate model is expressed as a sequence of univariate specs, one per
coordinate, each driven by the events of its own coordinate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from . import _kernels as K
from .errors import DomainError, InvalidInputError, InvalidStateError

EXP_HAWKES = "ExpHawkes"
POWER_LAW_HAWKES = "PowerLawHawkes"
SHOT_NOISE = "ShotNoise"
PERIODIC_POISSON = "PeriodicPoisson"
SELF_CORRECTING = "SelfCorrecting"
ETAS_TEMPORAL = "EtasTemporal"
RECURSIVE = "Recursive"

PARAM_NAMES: dict[str, tuple[str, ...]] = {
    EXP_HAWKES: ("mu", "alpha", "beta"),
    POWER_LAW_HAWKES: ("mu", "alpha", "beta"),
    SHOT_NOISE: ("mu", "alpha", "beta"),
    PERIODIC_POISSON: ("mu", "alpha", "beta", "gamma"),
    SELF_CORRECTING: ("mu", "alpha", "beta"),
    ETAS_TEMPORAL: ("mu", "K", "c", "beta"),
    RECURSIVE: ("mu", "kappa", "beta", "alpha"),
}
KINDS = tuple(PARAM_NAMES)

_WIDE = (0.0, 1e6)
_UNIT = (0.0, 1.0)
_PHASE = (-1e6, 1e6)
# admissible region for a spec; fitting uses the narrower FIT_BOUNDS
DEFAULT_BOUNDS: dict[str, tuple[tuple[float, float], ...]] = {
    EXP_HAWKES: (_WIDE, _WIDE, _WIDE),
    POWER_LAW_HAWKES: (_WIDE, _WIDE, _WIDE),
    SHOT_NOISE: (_WIDE, _WIDE, _WIDE),
    PERIODIC_POISSON: (_WIDE, _WIDE, _WIDE, _PHASE),
    SELF_CORRECTING: (_WIDE, _UNIT, _WIDE),
    ETAS_TEMPORAL: (_WIDE, _WIDE, _WIDE, _WIDE),
    RECURSIVE: (_WIDE, _WIDE, _WIDE, _WIDE),
}

_POS = (1e-8, 10.0)
FIT_BOUNDS: dict[str, tuple[tuple[float, float], ...]] = {
    EXP_HAWKES: (_POS, _POS, _POS),
    POWER_LAW_HAWKES: (_POS, _POS, _POS),
    SHOT_NOISE: (_POS, _POS, _POS),
    PERIODIC_POISSON: (_POS, _POS, _POS, (-100.0, 100.0)),
    SELF_CORRECTING: (_POS, (1e-8, 1.0 - 1e-8), _POS),
    ETAS_TEMPORAL: (_POS, _POS, _POS, _POS),
    RECURSIVE: (_POS, _POS, _POS, _POS),
}


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Realization:
    """Event times on ``[0, horizon]`` with 1-based coordinate labels and optional marks.

    ``latent`` carries simulation side channels that are not part of the
    observation: ``"shots"`` for shot-noise paths and ``"event_intensity"``
    for recursive-model paths.
    """

    times: np.ndarray
    horizon: float
    coords: np.ndarray | None = None
    marks: np.ndarray | None = None
    dim: int = 1
    latent: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        times = _readonly(np.ravel(self.times))
        horizon = float(self.horizon)
        if not horizon >= 0.0 or not math.isfinite(horizon):
            raise InvalidInputError(f"horizon must be finite and >= 0, got {self.horizon}")
        if self.dim < 1:
            raise InvalidInputError("dim must be >= 1")
        if times.size:
            if not np.all(np.isfinite(times)):
                raise InvalidInputError("event times must be finite")
            if np.any(np.diff(times) <= 0):
                raise InvalidInputError("event times must be strictly increasing")
            if times[0] < 0 or times[-1] > horizon:
                raise InvalidInputError("event times must lie in [0, horizon]")
        coords = np.ones(times.size, dtype=np.int64) if self.coords is None else np.ravel(self.coords)
        coords = _readonly(coords, dtype=np.int64)
        if coords.size != times.size:
            raise InvalidInputError("coords and times differ in length")
        if coords.size and (coords.min() < 1 or coords.max() > self.dim):
            raise InvalidInputError(f"coords must lie in 1..{self.dim}")
        marks = None
        if self.marks is not None:
            marks = _readonly(np.ravel(self.marks))
            if marks.size != times.size:
                raise InvalidInputError("marks and times differ in length")
        latent = MappingProxyType({k: _readonly(v) for k, v in dict(self.latent).items()})
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "latent", latent)

    def __len__(self):
        return self.times.size

    @property
    def n_events(self) -> int:
        return self.times.size

    def counts(self) -> np.ndarray:
        """N^(k)(T) for k = 1..dim."""
        return np.bincount(self.coords - 1, minlength=self.dim)[: self.dim]

    def coordinate(self, k: int) -> Realization:
        """Univariate sub-realization of coordinate ``k`` (1-based)."""
        sel = self.coords == k
        return Realization(
            self.times[sel],
            self.horizon,
            marks=None if self.marks is None else self.marks[sel],
            latent=self.latent if self.dim == 1 else {},
        )


@dataclass(frozen=True, eq=False)
class History:
    """Events of a realization strictly before time ``t``."""

    t: float
    times: np.ndarray
    horizon: float
    marks: np.ndarray | None = None
    shots: np.ndarray | None = None
    event_intensity: np.ndarray | None = None

    @classmethod
    def before(cls, realization: Realization, t: float, model: ModelSpec | None = None) -> History:
        if realization.dim != 1:
            raise InvalidInputError("History is univariate; select a coordinate first")
        k = int(np.searchsorted(realization.times, t, side="left"))
        shots = realization.latent.get("shots")
        if shots is not None:
            shots = shots[: int(np.searchsorted(shots, t, side="left"))]
        cache = None
        if model is not None and model.kind == RECURSIVE:
            cache = event_intensities(model, realization)[:k]
        return cls(
            float(t),
            realization.times[:k],
            realization.horizon,
            None if realization.marks is None else realization.marks[:k],
            shots,
            cache,
        )


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: tuple[float, ...]
    bounds: tuple[tuple[float, float], ...] | None = None
    dim: int = 1
    cutoff: float | None = None

    def __post_init__(self):
        if self.kind not in PARAM_NAMES:
            raise InvalidInputError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        params = tuple(float(p) for p in self.params)
        names = PARAM_NAMES[self.kind]
        if len(params) != len(names):
            raise InvalidInputError(f"{self.kind} takes {len(names)} parameters {names}, got {len(params)}")
        bounds = DEFAULT_BOUNDS[self.kind] if self.bounds is None else tuple(
            (float(lo), float(hi)) for lo, hi in self.bounds
        )
        if len(bounds) != len(names):
            raise InvalidInputError("bounds must have one (lo, hi) pair per parameter")
        for name, p, (lo, hi) in zip(names, params, bounds):
            if not lo < p < hi:
                raise InvalidInputError(f"{self.kind}.{name}={p} is not strictly inside ({lo}, {hi})")
        if self.dim != 1:
            raise InvalidInputError("built-in families are univariate; use one spec per coordinate")
        if self.kind == ETAS_TEMPORAL and self.cutoff is None:
            raise InvalidInputError("EtasTemporal needs a magnitude cutoff")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "bounds", bounds)

    @property
    def names(self) -> tuple[str, ...]:
        return PARAM_NAMES[self.kind]

    def with_params(self, params) -> ModelSpec:
        return ModelSpec(self.kind, tuple(params), self.bounds, self.dim, self.cutoff)

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.params))


def n_params(kind: str) -> int:
    return len(PARAM_NAMES[kind])


# ---------------------------------------------------------------------------
# stability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Stability:
    ok: bool
    message: str

    def __bool__(self):
        return self.ok


def stability_margin(kind: str, params) -> float:
    """Negative when the stationarity constraint holds (zero allowed for PeriodicPoisson)."""
    if kind == EXP_HAWKES:
        mu, a, b = params
        return a / b - 1.0
    if kind == POWER_LAW_HAWKES:
        mu, a, b = params
        if b <= 1.0:
            return 1.0 + (1.0 - b)
        return a / (b - 1.0) - 1.0
    if kind == SELF_CORRECTING:
        mu, a, b = params
        return max(a - 1.0, -a, -b)
    if kind == PERIODIC_POISSON:
        mu, a, b, g = params
        return a - mu
    return -1.0


def stability_check(model: ModelSpec) -> Stability:
    kind, p = model.kind, model.params
    margin = stability_margin(kind, p)
    if kind == EXP_HAWKES:
        ok = margin < 0
        msg = f"branching ratio alpha/beta = {p[1] / p[2]:.6g}" + ("" if ok else " >= 1")
    elif kind == POWER_LAW_HAWKES:
        ok = margin < 0
        if p[2] <= 1.0:
            msg = f"beta = {p[2]:.6g} <= 1: kernel mass is infinite"
        else:
            msg = f"kernel mass alpha/(beta-1) = {p[1] / (p[2] - 1):.6g}" + ("" if ok else " >= 1")
    elif kind == SELF_CORRECTING:
        ok = margin < 0
        msg = "alpha in (0,1) and beta > 0" if ok else "need alpha in (0,1) and beta > 0"
    elif kind == PERIODIC_POISSON:
        ok = margin <= 0
        msg = "mu >= alpha" if ok else f"intensity goes negative: alpha={p[1]:.6g} > mu={p[0]:.6g}"
    elif kind == SHOT_NOISE:
        ok, msg = True, "shot-noise intensity is always stationary"
    else:
        ok, msg = True, f"no closed stationarity criterion for {kind}; report only"
    return Stability(bool(ok), msg)


def mean_rate(model: ModelSpec) -> float | None:
    """Long-run event rate where a closed form exists."""
    kind, p = model.kind, model.params
    if kind == EXP_HAWKES:
        return p[0] / (1.0 - p[1] / p[2])
    if kind == POWER_LAW_HAWKES and p[2] > 1:
        return p[0] / (1.0 - p[1] / (p[2] - 1.0))
    if kind == SHOT_NOISE:
        return p[0] * p[1] / p[2]
    if kind == PERIODIC_POISSON:
        return p[0]
    return None


# ---------------------------------------------------------------------------
# univariate evaluation on raw arrays
# ---------------------------------------------------------------------------


def _need_marks(marks):
    if marks is None:
        raise InvalidInputError("EtasTemporal requires per-event magnitudes (marks)")
    return np.asarray(marks, dtype=float)


def _need_shots(shots):
    if shots is None:
        raise InvalidStateError("ShotNoise evaluation needs the latent shot times")
    return np.asarray(shots, dtype=float)


def _event_intensity(model, times, marks=None, shots=None):
    kind, p = model.kind, model.params
    if kind == EXP_HAWKES:
        return K.exp_hawkes_event_intensity(times, *p)
    if kind == POWER_LAW_HAWKES:
        return K.powerlaw_event_intensity(times, *p)
    if kind == ETAS_TEMPORAL:
        return K.etas_event_intensity(times, _need_marks(marks), model.cutoff, *p)
    if kind == RECURSIVE:
        return K.recursive_event_intensity(times, *p)
    return _eval_at(model, times, marks, shots, times)[0]


def _eval_at(model, times, marks, shots, query):
    """(intensity, compensator) at sorted ``query`` points."""
    kind, p = model.kind, model.params
    q = np.ascontiguousarray(query, dtype=float)
    if kind == EXP_HAWKES:
        mu, a, b = p
        W, S = K.expsum_at(times, np.ones(times.size), b, q)
        return mu + a * S, mu * q + a / b * (W - S)
    if kind == POWER_LAW_HAWKES:
        return K.powerlaw_at(times, *p, q)
    if kind == SHOT_NOISE:
        mu, a, b = p
        shots = _need_shots(shots)
        W, S = K.expsum_at(shots, np.ones(shots.size), b, q)
        return a * S, a / b * (W - S)
    if kind == PERIODIC_POISSON:
        mu, a, b, g = p
        lam = mu + a * np.sin(b * (q - g))
        comp = mu * q + a / b * (np.cos(b * g) - np.cos(b * (q - g)))
        return lam, comp
    if kind == SELF_CORRECTING:
        return K.selfcorrecting_at(times, *p, q)
    if kind == ETAS_TEMPORAL:
        return K.etas_at(times, _need_marks(marks), model.cutoff, *p, q)
    if kind == RECURSIVE:
        mu, kappa, b, a = p
        lam_i = K.recursive_event_intensity(times, *p)
        with np.errstate(divide="ignore", over="ignore"):
            w = kappa * lam_i ** (-a) * b
        W, S = K.expsum_at(times, w, b, q)
        return mu + S, mu * q + (W - S) / b
    raise InvalidInputError(kind)  # pragma: no cover


def _sorted_eval(model, times, marks, shots, query):
    query = np.asarray(query, dtype=float)
    flat = query.ravel()
    order = np.argsort(flat, kind="stable")
    lam, comp = _eval_at(model, times, marks, shots, flat[order])
    out_l = np.empty_like(flat)
    out_c = np.empty_like(flat)
    out_l[order] = lam
    out_c[order] = comp
    return out_l.reshape(query.shape), out_c.reshape(query.shape)


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def _specs(model, dim):
    specs = [model] if isinstance(model, ModelSpec) else list(model)
    if len(specs) != dim:
        raise InvalidInputError(f"need {dim} univariate model specs, got {len(specs)}")
    return specs


def _check_domain(query, horizon):
    q = np.asarray(query, dtype=float)
    if q.size and (np.nanmin(q) < 0 or np.nanmax(q) > horizon or not np.all(np.isfinite(q))):
        raise DomainError(f"evaluation times must lie in [0, {horizon}]")


def event_intensities(model: ModelSpec | Sequence[ModelSpec], realization: Realization) -> np.ndarray:
    """Left-limit intensity of each event's own coordinate at its event time."""
    out = np.empty(realization.n_events)
    for k, spec in enumerate(_specs(model, realization.dim), start=1):
        sel = realization.coords == k
        sub = realization.coordinate(k)
        out[sel] = _event_intensity(spec, sub.times, sub.marks, sub.latent.get("shots"))
    return out


def intensity_at(model, realization: Realization, query) -> np.ndarray:
    """lambda(t) for each query time; shape ``query.shape + (dim,)``."""
    _check_domain(query, realization.horizon)
    q = np.asarray(query, dtype=float)
    cols = []
    for k, spec in enumerate(_specs(model, realization.dim), start=1):
        sub = realization.coordinate(k)
        cols.append(_sorted_eval(spec, sub.times, sub.marks, sub.latent.get("shots"), q)[0])
    return np.stack(cols, axis=-1)


def compensator_at(model, realization: Realization, query) -> np.ndarray:
    """Lambda(t) = int_0^t lambda(s) ds for each query time; shape ``query.shape + (dim,)``."""
    _check_domain(query, realization.horizon)
    q = np.asarray(query, dtype=float)
    cols = []
    for k, spec in enumerate(_specs(model, realization.dim), start=1):
        sub = realization.coordinate(k)
        cols.append(_sorted_eval(spec, sub.times, sub.marks, sub.latent.get("shots"), q)[1])
    return np.stack(cols, axis=-1)


def _history_eval(model: ModelSpec, t: float, history: History):
    if not 0.0 <= t <= history.horizon:
        raise DomainError(f"t={t} outside [0, {history.horizon}]")
    if np.any(history.times >= t):
        raise InvalidInputError("history contains events at or after t")
    if model.kind == RECURSIVE:
        if history.event_intensity is None or history.event_intensity.size != history.times.size:
            raise InvalidStateError("Recursive model queried without the event-intensity cache")
        mu, kappa, b, a = model.params
        w = kappa * np.asarray(history.event_intensity) ** (-a) * b
        W, S = K.expsum_at(np.asarray(history.times, float), w, b, np.array([t]))
        return mu + S[0], mu * t + (W[0] - S[0]) / b
    lam, comp = _eval_at(model, np.asarray(history.times, float), history.marks, history.shots, np.array([t]))
    return lam[0], comp[0]


def intensity(model: ModelSpec, t: float, history: History) -> np.ndarray:
    return np.array([_history_eval(model, t, history)[0]])


def compensator(model: ModelSpec, t: float, history: History, method: str = "closed") -> np.ndarray:
    """Lambda(t). ``method="quadrature"`` integrates the intensity by adaptive Simpson instead."""
    if method == "closed":
        return np.array([_history_eval(model, t, history)[1]])
    if method != "quadrature":
        raise InvalidInputError(f"unknown method {method!r}")
    if not 0.0 <= t <= history.horizon:
        raise DomainError(f"t={t} outside [0, {history.horizon}]")
    knots = np.concatenate([[0.0], np.asarray(history.times, float), [t]])
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        if b > a:
            total += adaptive_simpson(lambda s: _history_eval(model, s, _truncate(history, s))[0], a, b)
    return np.array([total])


def _truncate(history: History, s: float) -> History:
    k = int(np.searchsorted(history.times, s, side="left"))
    shots = history.shots
    if shots is not None:
        shots = shots[: int(np.searchsorted(shots, s, side="left"))]
    return History(
        s,
        history.times[:k],
        history.horizon,
        None if history.marks is None else history.marks[:k],
        shots,
        None if history.event_intensity is None else history.event_intensity[:k],
    )


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10, max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature with absolute tolerance ``tol``."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return recurse(a, m, fa, flm, fm, left, tol / 2, depth - 1) + recurse(m, b, fm, frm, fb, right, tol / 2, depth - 1)

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def time_rescale(realization: Realization, model) -> np.ndarray:
    """Lambda(t_i) for each event, evaluated in the event's own coordinate."""
    comp = compensator_at(model, realization, realization.times)
    if realization.n_events == 0:
        return np.empty(0)
    return comp[np.arange(realization.n_events), realization.coords - 1]
