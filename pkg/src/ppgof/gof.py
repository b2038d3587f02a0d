"""Compensated empirical process, innovation martingale transform and the three testing procedures.

Paths are stored on an equispaced grid over ``[0, end]`` together with an
exact record of their jumps. Keeping the jumps lets the transform integrate
step inputs in closed form and lets off-grid evaluation count events exactly;
only the continuous remainder is interpolated.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, InvalidInputError
from .estimate import FitResult
from .models import ModelSpec, Realization, _specs, compensator_at, time_rescale
from .stattests import NullDistribution, run_test

PROCEDURES = ("transform", "naive", "rtc")
DEFAULT_TAU = 0.9
MIN_GRID = 256


@dataclass(frozen=True, eq=False)
class PathFunction:
    """A càdlàg path sampled on an equispaced grid, with its jumps listed per coordinate.

    ``values`` has shape ``(len(grid), dim)`` and includes the jumps
    (right-continuous convention). ``jumps[k]`` is a pair of arrays
    (locations in ``[0, 1]``, sizes) for coordinate ``k``.
    """

    grid: np.ndarray
    values: np.ndarray
    scale: float = 1.0
    jumps: tuple = ()
    tau: float | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if grid.ndim != 1 or grid.size < 2 or grid[0] != 0.0:
            raise InvalidInputError("grid must be 1-d, start at 0 and have at least two points")
        du = np.diff(grid)
        if np.any(du <= 0) or np.max(np.abs(du - du[0])) > 1e-12:
            raise InvalidInputError("grid must be strictly increasing and equispaced")
        if values.shape[0] != grid.size:
            raise InvalidInputError("values must have one row per grid point")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("path values must be finite")
        jumps = self.jumps or tuple((np.empty(0), np.empty(0)) for _ in range(values.shape[1]))
        if len(jumps) != values.shape[1]:
            raise InvalidInputError("need one jump record per coordinate")
        jumps = tuple((np.asarray(s, dtype=float), np.asarray(a, dtype=float)) for s, a in jumps)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "jumps", jumps)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def m(self) -> int:
        """Number of grid intervals per unit length."""
        return int(round(1.0 / (self.grid[1] - self.grid[0])))

    @property
    def end(self) -> float:
        return float(self.grid[-1])

    def _steps(self, u: np.ndarray, k: int) -> np.ndarray:
        s, a = self.jumps[k]
        if s.size == 0:
            return np.zeros_like(u)
        order = np.argsort(s, kind="stable")
        cum = np.concatenate([[0.0], np.cumsum(a[order])])
        return cum[np.searchsorted(s[order], u, side="right")]

    def __call__(self, u) -> np.ndarray:
        """Evaluate at arbitrary points of ``[0, end]``; returns shape ``(len(u), dim)``."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if np.any(u < -1e-12) or np.any(u > self.end + 1e-12):
            raise InvalidInputError(f"evaluation points must lie in [0, {self.end}]")
        out = np.empty((u.size, self.dim))
        for k in range(self.dim):
            cont = self.values[:, k] - self._steps(self.grid, k)
            out[:, k] = np.interp(u, self.grid, cont) + self._steps(u, k)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(["u"] + [f"value_{k + 1}" for k in range(self.dim)]) + "\n")
        for u, row in zip(self.grid, self.values):
            buf.write(",".join(f"{x:.12g}" for x in (u, *row)) + "\n")
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class IncrementSample:
    z: np.ndarray
    n: int
    tau: float

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError("n must be >= 1")
        if not 0 < self.tau < 1:
            raise InvalidInputError("tau must lie in (0, 1)")

    @property
    def pooled(self) -> np.ndarray:
        return self.z.ravel()


@dataclass(frozen=True)
class TestReport:
    procedure: str
    test: str
    statistic: float
    p_value: float
    n_effective: int
    notes: str = ""

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise InvalidInputError(f"p-value {self.p_value} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "procedure": self.procedure,
            "test": self.test,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n_effective": self.n_effective,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


# ---------------------------------------------------------------------------
# Algorithm steps
# ---------------------------------------------------------------------------


def _as_model(fit) -> ModelSpec | list[ModelSpec]:
    if isinstance(fit, FitResult):
        return fit.model
    if isinstance(fit, ModelSpec):
        return fit
    return [f.model if isinstance(f, FitResult) else f for f in fit]


def compensated_process(realization: Realization, model, params=None, grid_size: int = 4096) -> PathFunction:
    """eta(u_j) = (N(u_j T) - Lambda(u_j T)) / sqrt(T) on an ``grid_size``-interval grid of [0, 1]."""
    if grid_size < MIN_GRID:
        raise InvalidInputError(f"grid_size must be >= {MIN_GRID}")
    T = realization.horizon
    if not T > 0:
        raise InvalidInputError("the compensated process needs a positive horizon")
    model = _as_model(model)
    if params is not None:
        model = model.with_params(params) if isinstance(model, ModelSpec) else [
            s.with_params(p) for s, p in zip(model, params)
        ]
    _specs(model, realization.dim)
    grid = np.linspace(0.0, 1.0, grid_size + 1)
    t_grid = np.minimum(grid * T, T)
    comp = compensator_at(model, realization, t_grid)
    root = math.sqrt(T)
    values = np.empty_like(comp)
    jumps = []
    for k in range(realization.dim):
        tk = realization.times[realization.coords == k + 1]
        values[:, k] = (np.searchsorted(tk, t_grid, side="right") - comp[:, k]) / root
        jumps.append((tk / T, np.full(tk.size, 1.0 / root)))
    return PathFunction(grid, values, scale=T, jumps=tuple(jumps))


def martingale_transform(eta: PathFunction, mu_hat, tau: float = DEFAULT_TAU) -> PathFunction:
    """W(u) = (eta(u) - int_0^u (eta(1) - eta(v)) / (1 - v) dv) / sqrt(mu_hat) on [0, tau].

    The jump part of ``eta`` is integrated exactly and the continuous
    remainder by the composite trapezoid rule on the grid. The output grid
    runs to the first grid point at or beyond ``tau``.
    """
    mu_hat = np.atleast_1d(np.asarray(mu_hat, dtype=float))
    if mu_hat.shape != (eta.dim,):
        raise InvalidInputError(f"mu_hat must have {eta.dim} entries")
    if np.any(~(mu_hat > 0)):
        raise InvalidInputError("mu_hat must be positive in every coordinate")
    if abs(eta.end - 1.0) > 1e-12:
        raise InvalidInputError("the transform needs eta on the whole of [0, 1]")
    m = eta.grid.size - 1
    limit = 1.0 - 2.0 / m
    if not 0.0 < tau <= limit:
        raise InvalidInputError(f"tau must lie in (0, {limit:.6g}] for a grid with m={m}")
    j_end = int(np.searchsorted(eta.grid, tau - 1e-12, side="left"))
    u = eta.grid[: j_end + 1]
    one_minus = 1.0 - u
    log_one_minus = np.log(one_minus)
    du = eta.grid[1] - eta.grid[0]

    values = np.empty((u.size, eta.dim))
    jumps = []
    for k in range(eta.dim):
        s, a = eta.jumps[k]
        order = np.argsort(s, kind="stable")
        s, a = s[order], a[order]
        steps_full = eta._steps(eta.grid, k)
        cont = eta.values[:, k] - steps_full
        c_one = cont[-1]
        f = (c_one - cont[: j_end + 1]) / one_minus
        integral = np.concatenate([[0.0], np.cumsum(0.5 * du * (f[1:] + f[:-1]))])
        # each jump a at s contributes a * log(1 - min(u, s)) after subtracting its integral
        idx = np.searchsorted(s, u, side="right")
        with np.errstate(divide="ignore"):
            log_s = np.where(s < 1.0, np.log1p(-np.minimum(s, 1.0)), 0.0)
        cum_le = np.concatenate([[0.0], np.cumsum(a * log_s)])
        cum_a = np.concatenate([[0.0], np.cumsum(a)])
        jump_log = cum_le[idx] + (cum_a[-1] - cum_a[idx]) * log_one_minus
        values[:, k] = (cont[: j_end + 1] - integral + cum_a[idx] + jump_log) / math.sqrt(mu_hat[k])
        keep = s <= u[-1]
        jumps.append((s[keep], a[keep] / math.sqrt(mu_hat[k])))
    return PathFunction(u, values, scale=eta.scale, jumps=tuple(jumps), tau=tau)


def increments(W: PathFunction, n: int, tau: float | None = None) -> IncrementSample:
    """z_i = sqrt(n / tau) (W(i tau / n) - W((i - 1) tau / n)), i = 1..n."""
    tau = W.tau if tau is None else tau
    if tau is None or not 0 < tau < 1:
        raise InvalidInputError("tau must lie in (0, 1)")
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    if n > W.m / 4:
        raise InvalidInputError(f"n={n} exceeds m/4={W.m / 4:g}; use a finer grid")
    if tau > W.end + 1e-12:
        raise InvalidInputError(f"path ends at {W.end:g} < tau={tau:g}")
    pts = np.minimum(np.arange(n + 1) * tau / n, W.end)
    vals = W(pts)
    return IncrementSample(math.sqrt(n / tau) * np.diff(vals, axis=0), n, tau)


def choose_n(count_basis: float, c: float = 0.25, floor_n: int = 1) -> int:
    """max(ceil(c sqrt(count_basis)), floor_n)."""
    if not count_basis > 0 or not c > 0:
        raise InvalidInputError("count_basis and c must be positive")
    return max(math.ceil(c * math.sqrt(count_basis)), int(floor_n))


def default_grid_size(n: int) -> int:
    return max(4096, 64 * n)


# ---------------------------------------------------------------------------
# procedures
# ---------------------------------------------------------------------------


def _mu_hat(realization: Realization) -> np.ndarray:
    counts = realization.counts()
    if np.any(counts == 0):
        raise InsufficientDataError("every coordinate needs at least one event")
    return counts / realization.horizon


def _notes(n: int) -> str:
    return f"asymptotic p-value with only n={n} increments" if n < 20 else ""


def _check_converged(fit):
    fits = [fit] if isinstance(fit, FitResult) else list(fit) if not isinstance(fit, ModelSpec) else []
    for f in fits:
        if isinstance(f, FitResult) and not f.converged:
            raise InvalidInputError("the supplied fit did not converge")


def transformation_test(
    realization: Realization,
    fit,
    n: int,
    tau: float = DEFAULT_TAU,
    test: str = "AD",
    grid_size: int | None = None,
) -> TestReport:
    """Transformation-based test: eta -> martingale transform -> increments -> N(0, 1) test."""
    _check_converged(fit)
    eta = compensated_process(realization, fit, grid_size=grid_size or default_grid_size(n))
    W = martingale_transform(eta, _mu_hat(realization), tau)
    sample = increments(W, n, tau)
    stat, p = run_test(test, sample.pooled, NullDistribution.StdNormal)
    return TestReport("transform", test, stat, p, sample.z.size, _notes(n))


def naive_path(eta: PathFunction, mu_hat) -> PathFunction:
    mu_hat = np.atleast_1d(np.asarray(mu_hat, dtype=float))
    if np.any(~(mu_hat > 0)):
        raise InvalidInputError("mu_hat must be positive in every coordinate")
    r = np.sqrt(mu_hat)
    jumps = tuple((s, a / r[k]) for k, (s, a) in enumerate(eta.jumps))
    return PathFunction(eta.grid, eta.values / r, scale=eta.scale, jumps=jumps)


def naive_test(
    realization: Realization,
    fit,
    n: int,
    tau: float = DEFAULT_TAU,
    test: str = "AD",
    grid_size: int | None = None,
) -> TestReport:
    """Standardize eta by sqrt(mu_hat) and treat it as a Wiener process, without the transform."""
    _check_converged(fit)
    eta = compensated_process(realization, fit, grid_size=grid_size or default_grid_size(n))
    W = naive_path(eta, _mu_hat(realization))
    sample = increments(W, n, tau)
    stat, p = run_test(test, sample.pooled, NullDistribution.StdNormal)
    return TestReport("naive", test, stat, p, sample.z.size, _notes(n))


def rtc_interarrivals(realization: Realization, fit, include_first: bool = True) -> np.ndarray:
    """Interarrivals of Lambda(t_i) per coordinate, pooled. The first is Lambda(t_1) - Lambda(0)."""
    model = _as_model(fit)
    rescaled = time_rescale(realization, model)
    parts = []
    for k in range(1, realization.dim + 1):
        tau_k = rescaled[realization.coords == k]
        d = np.diff(np.concatenate([[0.0], tau_k]))
        parts.append(d if include_first else d[1:])
    return np.concatenate(parts)


def rtc_test(realization: Realization, fit, test: str = "KS", include_first: bool = True) -> TestReport:
    """Random-time-change test of the transformed interarrivals against Exp(1)."""
    if np.any(realization.counts() < 2):
        raise InsufficientDataError("the random-time-change test needs at least 2 events per coordinate")
    _check_converged(fit)
    x = rtc_interarrivals(realization, fit, include_first)
    stat, p = run_test(test, x, NullDistribution.StdExponential)
    return TestReport("rtc", test, stat, p, x.size)


def run_procedure(
    procedure: str,
    realization: Realization,
    fit,
    test: str,
    n: int | None = None,
    tau: float = DEFAULT_TAU,
    grid_size: int | None = None,
) -> TestReport:
    if procedure == "transform":
        return transformation_test(realization, fit, n, tau, test, grid_size)
    if procedure == "naive":
        return naive_test(realization, fit, n, tau, test, grid_size)
    if procedure == "rtc":
        return rtc_test(realization, fit, test)
    raise InvalidInputError(f"unknown procedure {procedure!r}; expected one of {PROCEDURES}")
