"""Monte Carlo reference distributions for the KS, CvM and AD limit laws.

Run ``python -m ppgof.oracle`` to regenerate ``data/oracle_ecdf.npz``.

* KS: sup |B| of a Brownian bridge. The bridge is sampled on a coarse grid
  and the extreme of each sub-interval is drawn exactly from its conditional
  law, so no discretization bias enters.
* CvM and AD: n W^2 and A^2 of uniform samples of size 1000.
"""
from __future__ import annotations

import argparse
import math
import time
from importlib import resources
from pathlib import Path

import numpy as np
from numba import njit

from .simulate import SeedSpec, rng_for

GRID_POINTS = 2001
GRIDS = {"KS": (0.0, 3.0), "CvM": (0.0, 1.5), "AD": (0.0, 8.0)}
DEFAULT_PATHS = 1_000_000
BRIDGE_INTERVALS = 200
UNIFORM_SIZE = 1000


def bridge_sup(rng: np.random.Generator, n_paths: int, intervals: int = BRIDGE_INTERVALS) -> np.ndarray:
    """Exact draws of sup_t |B(t)| for a standard Brownian bridge on [0, 1]."""
    h = 1.0 / intervals
    steps = rng.standard_normal((n_paths, intervals)) * math.sqrt(h)
    walk = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(steps, axis=1)], axis=1)
    t = np.linspace(0.0, 1.0, intervals + 1)
    bridge = walk - t * walk[:, -1:]
    a, b = bridge[:, :-1], bridge[:, 1:]
    # max of a Brownian bridge from a to b over length h, and the mirrored min
    e_max = -np.log(rng.random(a.shape))
    e_min = -np.log(rng.random(a.shape))
    hi = 0.5 * (a + b + np.sqrt((b - a) ** 2 + 2.0 * h * e_max))
    lo = 0.5 * (a + b - np.sqrt((b - a) ** 2 + 2.0 * h * e_min))
    return np.maximum(hi.max(axis=1), -lo.min(axis=1))


@njit(cache=True)
def _cvm_ad(u):
    n_paths, n = u.shape
    w2 = np.empty(n_paths)
    a2 = np.empty(n_paths)
    for p in range(n_paths):
        x = np.sort(u[p])
        s_w = 1.0 / (12.0 * n)
        s_a = 0.0
        for i in range(n):
            d = x[i] - (2.0 * i + 1.0) / (2.0 * n)
            s_w += d * d
            lo = min(max(x[i], 1e-15), 1.0 - 1e-15)
            hi = min(max(x[n - 1 - i], 1e-15), 1.0 - 1e-15)
            s_a += (2.0 * i + 1.0) * (math.log(lo) + math.log1p(-hi))
        w2[p] = s_w
        a2[p] = -n - s_a / n
    return w2, a2


def uniform_statistics(rng: np.random.Generator, n_paths: int, size: int = UNIFORM_SIZE):
    """(n W^2, A^2) for ``n_paths`` uniform samples of the given size."""
    return _cvm_ad(rng.random((n_paths, size)))


def ecdf_on_grid(sample: np.ndarray, grid: np.ndarray) -> np.ndarray:
    s = np.sort(sample)
    return np.searchsorted(s, grid, side="right") / s.size


def generate(n_paths: int = DEFAULT_PATHS, seed: int = 20240607, chunk: int = 50_000) -> dict[str, np.ndarray]:
    ks, cvm, ad = [], [], []
    done = 0
    while done < n_paths:
        m = min(chunk, n_paths - done)
        idx = done // chunk
        ks.append(bridge_sup(rng_for(SeedSpec(seed, idx), 0), m))
        w2, a2 = uniform_statistics(rng_for(SeedSpec(seed, idx), 1), m)
        cvm.append(w2)
        ad.append(a2)
        done += m
    samples = {"KS": np.concatenate(ks), "CvM": np.concatenate(cvm), "AD": np.concatenate(ad)}
    out = {"n_paths": np.array(n_paths), "seed": np.array(seed)}
    for name, (lo, hi) in GRIDS.items():
        grid = np.linspace(lo, hi, GRID_POINTS)
        out[f"{name}_grid"] = grid
        out[f"{name}_ecdf"] = ecdf_on_grid(samples[name], grid)
    return out


def bundled_path() -> Path:
    return Path(str(resources.files("ppgof") / "data" / "oracle_ecdf.npz"))


def load_bundled() -> dict[str, np.ndarray]:
    with np.load(bundled_path()) as f:
        return {k: f[k] for k in f.files}


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description="Regenerate the Monte Carlo ECDFs of the KS, CvM and AD limit laws.")
    parser.add_argument("--paths", type=int, default=DEFAULT_PATHS)
    parser.add_argument("--seed", type=int, default=20240607)
    parser.add_argument("-o", "--output", default=None)
    args = parser.parse_args(argv)
    start = time.time()
    data = generate(args.paths, args.seed)
    out = Path(args.output) if args.output else bundled_path()
    np.savez_compressed(out, **data)
    print(f"wrote {out} ({args.paths} paths, {time.time() - start:.0f}s)")


if __name__ == "__main__":
    main()
