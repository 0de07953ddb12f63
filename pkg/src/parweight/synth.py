"""Seeded random fields and weights for verification trials."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from .field import Field, Grid


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(trial)])


def smooth_noise(grid: Grid, rng: np.random.Generator, smooth: float = 1.5) -> np.ndarray:
    z = gaussian_filter(rng.standard_normal(grid.extents), smooth, mode="wrap")
    sd = z.std()
    return z / sd if sd > 0 else z


def random_weight(grid: Grid, rng: np.random.Generator, strength: float = 1.0,
                  smooth: float = 1.5, spikes: int = 0, spike_height: float = 20.0,
                  name: str = "w") -> Field:
    """``exp(strength * smoothed noise)``, times ``spike_height`` on ``spikes`` random cells."""
    vals = np.exp(strength * smooth_noise(grid, rng, smooth))
    for _ in range(spikes):
        idx = tuple(int(rng.integers(e)) for e in grid.extents)
        vals[idx] *= spike_height
    return Field(grid, vals, name)


def random_function(grid: Grid, rng: np.random.Generator, name: str = "f") -> Field:
    """Signed test function: smooth noise on a random sub-box plus a few point masses."""
    vals = smooth_noise(grid, rng, 1.0) * 2.0
    mask = np.ones(grid.extents, dtype=bool)
    for axis, e in enumerate(grid.extents):
        a = int(rng.integers(0, e // 2))
        b = int(rng.integers(a + max(e // 4, 1), e + 1))
        sl = [slice(None)] * grid.dim
        sl[axis] = slice(0, a)
        mask[tuple(sl)] = False
        sl[axis] = slice(b, None)
        mask[tuple(sl)] = False
    vals = np.where(mask, vals, 0.0)
    for _ in range(int(rng.integers(0, 4))):
        idx = tuple(int(rng.integers(e)) for e in grid.extents)
        vals[idx] += float(rng.exponential(10.0))
    return Field(grid, vals, name)


def random_trial(grid: Grid, seed: int, trial: int, strength: float = 1.0, spikes: int = 1):
    """``(f, w, v)`` for one seeded trial."""
    rng = trial_rng(seed, trial)
    f = random_function(grid, rng)
    w = random_weight(grid, rng, strength, spikes=spikes, name="w")
    v = random_weight(grid, rng, strength, spikes=0, name="v")
    return f, w, v
