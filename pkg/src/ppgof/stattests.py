"""One-sample KS, Cramér-von Mises and Anderson-Darling tests with asymptotic p-values."""
from __future__ import annotations

import math
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize, special, stats

from .errors import InvalidInputError

_CLIP = 1e-15


class NullDistribution(Enum):
    StdNormal = "StdNormal"
    StdExponential = "StdExponential"
    Uniform01 = "Uniform01"

    @property
    def dist(self):
        return {"StdNormal": stats.norm, "StdExponential": stats.expon, "Uniform01": stats.uniform}[self.value]

    def cdf(self, x):
        return self.dist.cdf(x)

    def ppf(self, q):
        return self.dist.ppf(q)


class TestResult(NamedTuple):
    statistic: float
    pvalue: float


def _prepare(sample, null: NullDistribution) -> np.ndarray:
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0:
        raise InvalidInputError("sample is empty")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("sample contains non-finite values")
    return np.sort(NullDistribution(null).cdf(x))


# ---------------------------------------------------------------------------
# Kolmogorov
# ---------------------------------------------------------------------------


def kolmogorov_cdf(x):
    """Limiting CDF of sqrt(n) D_n, K(x) = 1 - 2 sum (-1)^(j-1) exp(-2 j^2 x^2)."""
    x = np.asarray(x, dtype=float)
    out = np.where(x <= 0, 0.0, -special.kolmogorov(np.where(x <= 0, 1.0, x)) + 1.0)
    return out[()] if out.ndim == 0 else out


def kolmogorov_sf(x):
    x = np.asarray(x, dtype=float)
    out = np.where(x <= 0, 1.0, special.kolmogorov(np.maximum(x, 0.0)))
    return out[()] if out.ndim == 0 else out


def kolmogorov_ppf(q):
    q = np.asarray(q, dtype=float)
    out = special.kolmogi(1.0 - q)
    return out[()] if out.ndim == 0 else out


def ks_statistic(u: np.ndarray) -> float:
    n = u.size
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - u)
    d_minus = np.max(u - (i - 1) / n)
    return float(max(d_plus, d_minus))


def ks_test(sample, null=NullDistribution.StdNormal) -> TestResult:
    u = _prepare(sample, null)
    d = ks_statistic(u)
    return TestResult(d, float(kolmogorov_sf(math.sqrt(u.size) * d)))


# ---------------------------------------------------------------------------
# Cramér-von Mises
# ---------------------------------------------------------------------------


def cvm_cdf(x, tol: float = 1e-12):
    """Limiting CDF of n W^2 under a simple null (series in Bessel K_{1/4})."""
    x = np.asarray(x, dtype=float)
    flat = np.array([_cvm_cdf_scalar(v, tol) for v in x.ravel()]).reshape(x.shape)
    return flat[()] if flat.ndim == 0 else flat


def _cvm_cdf_scalar(x: float, tol: float) -> float:
    if x <= 0:
        return 0.0
    if x > 20:
        return 1.0
    total = 0.0
    for k in range(200):
        q = (4 * k + 1) ** 2 / (16.0 * x)
        coef = math.exp(special.gammaln(k + 0.5) - special.gammaln(k + 1.0)) / (math.pi**1.5 * math.sqrt(x))
        # K_{1/4}(q) e^{-q} = kve(q) e^{-2q}
        term = coef * math.sqrt(4 * k + 1) * special.kve(0.25, q) * math.exp(-2.0 * q)
        total += term
        if term < tol:
            break
    return min(max(total, 0.0), 1.0)


def cvm_statistic(u: np.ndarray) -> float:
    n = u.size
    i = np.arange(1, n + 1)
    return float(1.0 / (12 * n) + np.sum((u - (2 * i - 1) / (2.0 * n)) ** 2))


def cvm_test(sample, null=NullDistribution.StdNormal) -> TestResult:
    u = _prepare(sample, null)
    w2 = cvm_statistic(u)
    return TestResult(w2, float(1.0 - cvm_cdf(w2)))


# ---------------------------------------------------------------------------
# Anderson-Darling
# ---------------------------------------------------------------------------


def ad_cdf(z, tol: float = 1e-14):
    """Limiting CDF of A^2 under a simple null, by the classical series with numerical inner integrals."""
    z = np.asarray(z, dtype=float)
    flat = np.array([_ad_cdf_scalar(v, tol) for v in z.ravel()]).reshape(z.shape)
    return flat[()] if flat.ndim == 0 else flat


def _ad_cdf_scalar(z: float, tol: float) -> float:
    if z <= 0.01:
        return 0.0
    if z > 40:
        return 1.0 - _ad_sf_tail(z)
    total = 0.0
    for j in range(100):
        r = (4 * j + 1) ** 2 * math.pi**2 / (8.0 * z)
        a_j = (-1) ** j * math.exp(special.gammaln(j + 0.5) - special.gammaln(0.5) - special.gammaln(j + 1.0))
        # exp(-r) folded into the integrand keeps every factor bounded
        integral, _ = integrate.quad(
            lambda w: math.exp(z / (8.0 * (w * w + 1.0)) - r * (1.0 + w * w)), 0.0, np.inf, epsabs=1e-15, epsrel=1e-12
        )
        term = math.sqrt(2 * math.pi) / z * a_j * (4 * j + 1) * integral
        total += term
        if abs(term) < tol:
            break
    return min(max(total, 0.0), 1.0)


def _ad_sf_tail(z: float) -> float:
    # upper tail of the Marsaglia adinf approximation, for huge statistics
    return -math.expm1(-math.exp(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z))


def adinf(z: float) -> float:
    """Marsaglia and Marsaglia's rational approximation to the limiting A^2 CDF."""
    if z <= 0:
        return 0.0
    if z < 2:
        return math.exp(-1.2337141 / z) / math.sqrt(z) * (
            2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z
        )
    return 1.0 - _ad_sf_tail(z)


def ad_statistic(u: np.ndarray) -> float:
    n = u.size
    u = np.clip(u, _CLIP, 1.0 - _CLIP)
    i = np.arange(1, n + 1)
    return float(-n - np.sum((2 * i - 1) * (np.log(u) + np.log1p(-u[::-1]))) / n)


def ad_test(sample, null=NullDistribution.StdNormal) -> TestResult:
    u = _prepare(sample, null)
    a2 = ad_statistic(u)
    return TestResult(a2, float(1.0 - ad_cdf(a2)))


# ---------------------------------------------------------------------------
# dispatch and quantiles
# ---------------------------------------------------------------------------

TESTS = {"KS": ks_test, "CvM": cvm_test, "AD": ad_test}
LIMIT_CDFS = {"KS": kolmogorov_cdf, "CvM": cvm_cdf, "AD": ad_cdf}


def run_test(name: str, sample, null=NullDistribution.StdNormal) -> TestResult:
    try:
        fn = TESTS[name]
    except KeyError:
        raise InvalidInputError(f"unknown test {name!r}; expected one of {sorted(TESTS)}") from None
    return fn(sample, null)


def limit_quantile(name: str, q: float) -> float:
    """Quantile of the limiting null distribution of the named statistic."""
    if not 0 < q < 1:
        raise InvalidInputError("q must lie in (0, 1)")
    if name == "KS":
        return float(kolmogorov_ppf(q))
    cdf = LIMIT_CDFS[name]
    hi = 1.0
    while cdf(hi) < q:
        hi *= 2.0
    return optimize.brentq(lambda x: cdf(x) - q, 1e-6, hi, xtol=1e-12)
