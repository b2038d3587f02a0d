"""Log-likelihood and multistart Nelder-Mead maximum likelihood estimation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from . import _kernels as K
from .errors import FitFailureError, InsufficientDataError, InvalidInputError
from .models import (
    FIT_BOUNDS,
    EXP_HAWKES,
    PERIODIC_POISSON,
    POWER_LAW_HAWKES,
    ModelSpec,
    Realization,
    _eval_at,
    _event_intensity,
    _specs,
    n_params,
    stability_margin,
)
from .simulate import STREAM_FIT, SeedSpec, rng_for

_BIG = 1e12
_BOUND_TOL = 1e-6
_STEP = 0.5
_MAX_POLISH = 5


def _univariate_loglik(model: ModelSpec, times, marks, shots, horizon: float) -> float:
    kind, p = model.kind, model.params
    if kind == EXP_HAWKES:
        return float(K.exp_hawkes_loglik(times, horizon, *p))
    if kind == POWER_LAW_HAWKES:
        return float(K.powerlaw_loglik(times, horizon, *p))
    lam = _event_intensity(model, times, marks, shots)
    if times.size and not np.all(lam > 0):
        return -math.inf
    comp = _eval_at(model, times, marks, shots, np.array([horizon]))[1][0]
    if not math.isfinite(comp):
        return -math.inf
    return float(np.sum(np.log(lam)) - comp)


def log_likelihood(model, realization: Realization) -> float:
    """sum_i log lambda(t_i-) - Lambda(T), summed over coordinates; -inf if some lambda(t_i) <= 0."""
    total = 0.0
    for k, spec in enumerate(_specs(model, realization.dim), start=1):
        sub = realization.coordinate(k)
        total += _univariate_loglik(spec, sub.times, sub.marks, sub.latent.get("shots"), realization.horizon)
    return total


@dataclass(frozen=True)
class FitResult:
    kind: str
    params_hat: tuple[float, ...]
    loglik: float
    converged: bool
    n_restarts_used: int
    at_bound: tuple[bool, ...]
    bounds: tuple[tuple[float, float], ...]
    cutoff: float | None = None

    @property
    def model(self) -> ModelSpec:
        return ModelSpec(self.kind, self.params_hat, self.bounds, cutoff=self.cutoff)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "params": list(self.params_hat),
            "loglik": self.loglik,
            "converged": self.converged,
            "at_bound": list(self.at_bound),
            "n_restarts_used": self.n_restarts_used,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


class _Objective:
    """Negative log-likelihood in the unconstrained coordinates.

    Parameters with a positive lower bound are optimized on the log scale,
    others on their natural scale. Points outside the box or violating the
    stationarity constraint get a large penalty that grows with the violation.
    """

    def __init__(self, kind, realization, bounds, cutoff, enforce_stability):
        self.kind = kind
        self.cutoff = cutoff
        self.bounds = np.asarray(bounds, dtype=float)
        self.logscale = self.bounds[:, 0] > 0
        self.lo = self.to_x(self.bounds[:, 0])
        self.hi = self.to_x(self.bounds[:, 1])
        self.enforce = enforce_stability
        self.times = realization.times
        self.marks = realization.marks
        self.shots = realization.latent.get("shots")
        self.horizon = realization.horizon

    def to_x(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.where(self.logscale, np.log(np.where(self.logscale, theta, 1.0)), theta)

    def to_theta(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(self.logscale, np.exp(x), x)

    def penalty(self, x) -> float:
        viol = float(np.sum(np.maximum(self.lo - x, 0.0) + np.maximum(x - self.hi, 0.0)))
        if viol > 0 or np.any(x <= self.lo) or np.any(x >= self.hi):
            return _BIG * (1.0 + viol)
        if self.enforce:
            margin = stability_margin(self.kind, self.to_theta(x))
            limit = 0.0 if self.kind == PERIODIC_POISSON else -1e-12
            if margin > limit:
                return _BIG * (1.0 + margin)
        return 0.0

    def loglik(self, theta) -> float:
        spec = ModelSpec(self.kind, tuple(theta), tuple(map(tuple, self.bounds)), cutoff=self.cutoff)
        return _univariate_loglik(spec, self.times, self.marks, self.shots, self.horizon)

    def __call__(self, x) -> float:
        pen = self.penalty(x)
        if pen:
            return pen
        ll = self.loglik(self.to_theta(x))
        if not math.isfinite(ll):
            return _BIG
        return -ll


def _simplex(obj, x0, d):
    simplex = np.vstack([x0, x0 + _STEP * np.eye(d)])
    return optimize.minimize(
        obj,
        x0,
        method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": 1e-8, "fatol": 1e-10, "maxiter": 4000 * d, "maxfev": 4000 * d},
    )


def _polished_simplex(obj, x0, d):
    """Nelder-Mead, restarted from its own end point until the restart stops improving.

    A collapsed simplex can stall away from a minimum on ridged surfaces; a
    fresh full-size simplex around the end point escapes such stalls.
    """
    res = _simplex(obj, x0, d)
    for _ in range(_MAX_POLISH):
        if res.fun >= _BIG:
            break
        again = _simplex(obj, res.x, d)
        gain = res.fun - again.fun
        if gain < 0:
            break
        res = again
        if gain <= 1e-8 * max(1.0, abs(res.fun)):
            break
    return res


def fit_mle(
    model_kind: str,
    realization: Realization,
    bounds=None,
    n_starts: int = 5,
    *,
    seed: SeedSpec | int = 0,
    cutoff: float | None = None,
    enforce_stability: bool = True,
    early_stop: bool = False,
) -> FitResult:
    """Maximize the log-likelihood over a parameter box.

    Starts are Latin-hypercube points in the (log-)box; each runs a
    Nelder-Mead search and the best end point wins. ``early_stop`` ends the
    restarts once two converged searches agree, which is faster but can lock
    onto a flat region such as the Poisson plateau of a Hawkes likelihood.
    """
    if model_kind not in FIT_BOUNDS:
        raise InvalidInputError(f"unknown model kind {model_kind!r}")
    if realization.dim != 1:
        raise InvalidInputError("fit_mle fits one coordinate at a time")
    if realization.n_events == 0:
        raise InsufficientDataError("cannot fit a model to an empty realization")
    if n_starts < 1:
        raise InvalidInputError("n_starts must be >= 1")
    bounds = FIT_BOUNDS[model_kind] if bounds is None else tuple((float(a), float(b)) for a, b in bounds)
    if len(bounds) != n_params(model_kind):
        raise InvalidInputError(f"{model_kind} needs {n_params(model_kind)} bound pairs")
    for lo, hi in bounds:
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise InvalidInputError(f"invalid bound ({lo}, {hi})")

    obj = _Objective(model_kind, realization, bounds, cutoff, enforce_stability)
    d = len(bounds)
    rng = rng_for(seed, STREAM_FIT)
    sampler = qmc.LatinHypercube(d=d, seed=rng)
    box = np.asarray(bounds)
    candidates = obj.to_x(qmc.scale(sampler.random(20 * n_starts), box[:, 0], box[:, 1]))
    starts = [x for x in candidates if obj(x) < _BIG][:n_starts]
    if not starts:
        raise FitFailureError(f"no feasible starting point found for {model_kind}")

    best = None
    results = []
    used = 0
    for x0 in starts:
        used += 1
        res = _polished_simplex(obj, x0, d)
        if res.fun >= _BIG:
            continue
        results.append(res)
        if best is None or res.fun < best.fun:
            best = res
        if early_stop:
            agreeing = [r for r in results if r.success and abs(r.fun - best.fun) <= 1e-6 * max(1.0, abs(best.fun))]
            if best.success and len(agreeing) >= 2:
                break
    if best is None:
        raise FitFailureError(f"all {used} starts ended in infeasible regions for {model_kind}")

    theta = obj.to_theta(best.x)
    at_bound = tuple(bool(t - lo < _BOUND_TOL or hi - t < _BOUND_TOL) for t, (lo, hi) in zip(theta, bounds))
    return FitResult(
        kind=model_kind,
        params_hat=tuple(float(t) for t in theta),
        loglik=float(-best.fun),
        converged=bool(best.success),
        n_restarts_used=used,
        at_bound=at_bound,
        bounds=bounds,
        cutoff=cutoff,
    )
