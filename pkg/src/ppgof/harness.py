"""Monte Carlo experiments, rejection tables, Q-Q data and case-study runs."""
from __future__ import annotations

import configparser
import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ExperimentError, InvalidInputError, NumericalError, InsufficientDataError
from .estimate import fit_mle
from .gof import DEFAULT_TAU, PROCEDURES, choose_n, run_procedure
from .ingest import load_case_study
from .models import KINDS, ModelSpec, n_params
from .simulate import SeedSpec, simulate
from .stattests import TESTS, kolmogorov_ppf, NullDistribution

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MAX_ATTEMPTS = 10
FAILURE_FRACTION = 0.05


@dataclass(frozen=True)
class ExperimentConfig:
    true_model: ModelSpec
    null_kind: str
    T: float
    replications: int
    procedures: tuple[str, ...] = ("transform",)
    tests: tuple[str, ...] = ("AD",)
    levels: tuple[float, ...] = (0.01, 0.05, 0.20)
    n_rule: tuple[float, int] = (0.25, 1)
    n_rule_basis: str = "T"
    tau: float = DEFAULT_TAU
    grid_size: int | None = None
    seed: int = 0
    n_starts: int = 5
    null_bounds: tuple[tuple[float, float], ...] | None = None
    null_cutoff: float | None = None
    workers: int | None = None

    def __post_init__(self):
        if self.replications < 1:
            raise InvalidInputError("replications must be >= 1")
        if not all(0 < lv < 1 for lv in self.levels):
            raise InvalidInputError("levels must lie in (0, 1)")
        if self.null_kind not in KINDS:
            raise InvalidInputError(f"unknown null family {self.null_kind!r}")
        if not set(self.procedures) <= set(PROCEDURES) or not self.procedures:
            raise InvalidInputError(f"procedures must be a nonempty subset of {PROCEDURES}")
        if not set(self.tests) <= set(TESTS) or not self.tests:
            raise InvalidInputError(f"tests must be a nonempty subset of {tuple(TESTS)}")
        if self.n_rule_basis not in ("T", "count"):
            raise InvalidInputError("n_rule_basis must be 'T' or 'count'")
        if not self.T > 0:
            raise InvalidInputError("horizon must be positive")
        object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))

    def n_for(self, n_events: int) -> int:
        basis = self.T if self.n_rule_basis == "T" else max(n_events, 1)
        return choose_n(basis, self.n_rule[0], self.n_rule[1])


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

_EXPERIMENT_KEYS = {
    "schema_version", "horizon", "replications", "procedures", "tests", "levels", "n_rule_c",
    "n_rule_floor", "n_rule_basis", "tau", "grid_size", "seed", "n_starts", "workers",
}
_MODEL_KEYS = {"kind", "params", "cutoff"}
_NULL_KEYS = {"kind", "bounds", "cutoff"}
_SECTIONS = {"experiment": _EXPERIMENT_KEYS, "true_model": _MODEL_KEYS, "null": _NULL_KEYS}
_REQUIRED = {"experiment": {"schema_version", "horizon", "replications"}, "true_model": {"kind", "params"}, "null": {"kind"}}


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _words(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _optional_float(text: str | None) -> float | None:
    return None if text is None or not text.strip() else float(text)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse an INI experiment description; unknown sections or keys are errors."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise InvalidInputError(f"{source}: {exc}") from None
    for section in cp.sections():
        if section not in _SECTIONS:
            raise InvalidInputError(f"{source}: unknown section [{section}]")
        unknown = set(cp[section]) - _SECTIONS[section]
        if unknown:
            raise InvalidInputError(f"{source}: unknown keys in [{section}]: {sorted(unknown)}")
    for section, keys in _REQUIRED.items():
        if section not in cp:
            raise InvalidInputError(f"{source}: missing section [{section}]")
        missing = keys - set(cp[section])
        if missing:
            raise InvalidInputError(f"{source}: missing keys in [{section}]: {sorted(missing)}")
    ex, tm, nl = cp["experiment"], cp["true_model"], cp["null"]
    try:
        version = int(ex["schema_version"])
        if version != SCHEMA_VERSION:
            raise InvalidInputError(f"{source}: unsupported schema_version {version}")
        bounds = None
        if nl.get("bounds", "").strip():
            bounds = tuple(tuple(float(v) for v in pair.split(":")) for pair in _words(nl["bounds"]))
            if any(len(b) != 2 for b in bounds):
                raise InvalidInputError(f"{source}: bounds are written lo:hi, comma separated")
        grid = ex.get("grid_size", "auto").strip()
        workers = ex.get("workers", "").strip()
        return ExperimentConfig(
            true_model=ModelSpec(tm["kind"].strip(), _floats(tm["params"]), cutoff=_optional_float(tm.get("cutoff"))),
            null_kind=nl["kind"].strip(),
            T=float(ex["horizon"]),
            replications=int(ex["replications"]),
            procedures=_words(ex.get("procedures", "transform")),
            tests=_words(ex.get("tests", "AD")),
            levels=_floats(ex.get("levels", "0.01, 0.05, 0.20")),
            n_rule=(float(ex.get("n_rule_c", "0.25")), int(ex.get("n_rule_floor", "1"))),
            n_rule_basis=ex.get("n_rule_basis", "T").strip(),
            tau=float(ex.get("tau", str(DEFAULT_TAU))),
            grid_size=None if grid in ("", "auto") else int(grid),
            seed=int(ex.get("seed", "0")),
            n_starts=int(ex.get("n_starts", "5")),
            null_bounds=bounds,
            null_cutoff=_optional_float(nl.get("cutoff")),
            workers=int(workers) if workers else None,
        )
    except ValueError as exc:
        if isinstance(exc, InvalidInputError):
            raise
        raise InvalidInputError(f"{source}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path))


def config_to_text(config: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config`."""
    join = lambda xs: ", ".join(f"{x:.12g}" if isinstance(x, float) else str(x) for x in xs)  # noqa: E731
    lines = [
        "[experiment]",
        f"schema_version = {SCHEMA_VERSION}",
        f"horizon = {config.T:.12g}",
        f"replications = {config.replications}",
        f"procedures = {join(config.procedures)}",
        f"tests = {join(config.tests)}",
        f"levels = {join(config.levels)}",
        f"n_rule_c = {config.n_rule[0]:.12g}",
        f"n_rule_floor = {config.n_rule[1]}",
        f"n_rule_basis = {config.n_rule_basis}",
        f"tau = {config.tau:.12g}",
        f"grid_size = {config.grid_size or 'auto'}",
        f"seed = {config.seed}",
        f"n_starts = {config.n_starts}",
    ]
    if config.workers:
        lines.append(f"workers = {config.workers}")
    tm = config.true_model
    lines += ["", "[true_model]", f"kind = {tm.kind}", f"params = {join(tm.params)}"]
    if tm.cutoff is not None:
        lines.append(f"cutoff = {tm.cutoff:.12g}")
    lines += ["", "[null]", f"kind = {config.null_kind}"]
    if config.null_bounds:
        lines.append("bounds = " + ", ".join(f"{lo:.12g}:{hi:.12g}" for lo, hi in config.null_bounds))
    if config.null_cutoff is not None:
        lines.append(f"cutoff = {config.null_cutoff:.12g}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReplicationRecord:
    index: int
    attempts: int
    n_events: int
    statistics: dict
    p_values: dict


def run_replication(config: ExperimentConfig, index: int) -> ReplicationRecord:
    """Simulate, fit and test one replication, redrawing with a fresh sub-seed on numerical failure."""
    seed = SeedSpec(config.seed, index)
    for attempt in range(MAX_ATTEMPTS):
        try:
            real = simulate(config.true_model, config.T, seed, attempt=attempt)
            fit = fit_mle(
                config.null_kind,
                real,
                config.null_bounds,
                config.n_starts,
                seed=SeedSpec(config.seed, index),
                cutoff=config.null_cutoff,
            )
            if not fit.converged:
                raise NumericalError("fit did not converge")
            n = config.n_for(real.n_events)
            stats, pvals = {}, {}
            for proc in config.procedures:
                for test in config.tests:
                    rep = run_procedure(proc, real, fit, test, n=n, tau=config.tau, grid_size=config.grid_size)
                    stats[(proc, test)] = rep.statistic
                    pvals[(proc, test)] = rep.p_value
            return ReplicationRecord(index, attempt + 1, real.n_events, stats, pvals)
        except (NumericalError, InsufficientDataError) as exc:
            log.warning("replication %d attempt %d failed: %s", index, attempt, exc)
    raise ExperimentError(f"replication {index} failed {MAX_ATTEMPTS} times")


def _worker_count(config: ExperimentConfig, workers: int | None) -> int:
    env = os.environ.get("PPGOF_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, workers or config.workers or 1)


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> RejectionTable:
    """Run every replication and collect rejection counts; output is independent of the worker count."""
    k = _worker_count(config, workers)
    indices = range(config.replications)
    if k == 1:
        records = [run_replication(config, i) for i in indices]
    else:
        with ProcessPoolExecutor(max_workers=k) as pool:
            records = list(pool.map(run_replication, [config] * config.replications, indices))
    table = RejectionTable(config.procedures, config.tests, config.levels, records)
    if table.n_failures > FAILURE_FRACTION * config.replications:
        raise ExperimentError(f"{table.n_failures} failed attempts exceed {FAILURE_FRACTION:.0%} of replications")
    return table


@dataclass
class RejectionTable:
    procedures: tuple[str, ...]
    tests: tuple[str, ...]
    levels: tuple[float, ...]
    records: list[ReplicationRecord] = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.records)

    @property
    def n_failures(self) -> int:
        return sum(r.attempts - 1 for r in self.records)

    def p_values(self, procedure: str, test: str) -> np.ndarray:
        return np.array([r.p_values[(procedure, test)] for r in self.records])

    def statistics(self, procedure: str, test: str) -> np.ndarray:
        return np.array([r.statistics[(procedure, test)] for r in self.records])

    def count(self, procedure: str, test: str, level: float) -> int:
        return int(np.sum(self.p_values(procedure, test) < level))

    def counts(self, procedure: str, test: str) -> tuple[int, ...]:
        return tuple(self.count(procedure, test, lv) for lv in self.levels)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["procedure", "test", "level", "rejections", "total"])
        for proc in self.procedures:
            for test in self.tests:
                for lv in self.levels:
                    w.writerow([proc, test, f"{lv:.12g}", self.count(proc, test, lv), self.total])
        return buf.getvalue()

    def pvalue_log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replication", "attempts", "n_events", "procedure", "test", "statistic", "p_value"])
        for r in self.records:
            for proc in self.procedures:
                for test in self.tests:
                    w.writerow([
                        r.index, r.attempts, r.n_events, proc, test,
                        f"{r.statistics[(proc, test)]:.12g}", f"{r.p_values[(proc, test)]:.12g}",
                    ])
        return buf.getvalue()

    @classmethod
    def from_pvalue_log(cls, text: str, levels=(0.01, 0.05, 0.20)) -> RejectionTable:
        rows = list(csv.DictReader(io.StringIO(text)))
        procs = tuple(dict.fromkeys(r["procedure"] for r in rows))
        tests = tuple(dict.fromkeys(r["test"] for r in rows))
        by_rep: dict[int, dict] = {}
        for r in rows:
            i = int(r["replication"])
            rec = by_rep.setdefault(i, {"attempts": int(r["attempts"]), "n": int(r["n_events"]), "s": {}, "p": {}})
            rec["s"][(r["procedure"], r["test"])] = float(r["statistic"])
            rec["p"][(r["procedure"], r["test"])] = float(r["p_value"])
        records = [ReplicationRecord(i, v["attempts"], v["n"], v["s"], v["p"]) for i, v in sorted(by_rep.items())]
        return cls(procs, tests, tuple(levels), records)


# ---------------------------------------------------------------------------
# Q-Q data
# ---------------------------------------------------------------------------

QQ_REFERENCES = ("Kolmogorov", "StdNormal", "StdExponential")


def qq_data(statistics, reference: str = "Kolmogorov") -> np.ndarray:
    """Rows (x_(i), Q((i - 1/2)/n)) with Q the reference quantile function."""
    x = np.sort(np.asarray(statistics, dtype=float).ravel())
    if x.size == 0:
        raise InvalidInputError("statistics sample is empty")
    q = (np.arange(1, x.size + 1) - 0.5) / x.size
    if reference == "Kolmogorov":
        theo = kolmogorov_ppf(q)
    elif reference in ("StdNormal", "StdExponential"):
        theo = NullDistribution(reference).ppf(q)
    else:
        raise InvalidInputError(f"unknown reference {reference!r}; expected one of {QQ_REFERENCES}")
    return np.column_stack([x, theo])


def qq_line(pairs: np.ndarray) -> tuple[float, float]:
    """Least-squares (slope, intercept) of empirical on theoretical quantiles."""
    slope, intercept = np.polyfit(pairs[:, 1], pairs[:, 0], 1)
    return float(slope), float(intercept)


def qq_to_csv(pairs: np.ndarray) -> str:
    return "empirical,theoretical\n" + "".join(f"{a:.12g},{b:.12g}\n" for a, b in pairs)


# ---------------------------------------------------------------------------
# case studies
# ---------------------------------------------------------------------------

CASE_NULLS = {"earthquake": ("EtasTemporal", 6.0), "california": ("Recursive", None), "florida": ("Recursive", None)}


def case_study(name: str, seed: int = 0, procedures=PROCEDURES, tests=("KS", "CvM", "AD"), tau: float = DEFAULT_TAU, n_starts: int = 5) -> dict:
    """Fit the case-study null to a jittered catalog and run the requested tests."""
    real = load_case_study(name, SeedSpec(seed, 0))
    kind, cutoff = CASE_NULLS[name]
    fit = fit_mle(kind, real, n_starts=n_starts, seed=SeedSpec(seed, 0), cutoff=cutoff)
    n = choose_n(real.n_events, 0.25, 6)
    reports = {(p, t): run_procedure(p, real, fit, t, n=n, tau=tau) for p in procedures for t in tests}
    return {"realization": real, "fit": fit, "n": n, "reports": reports}
