"""Seeded verification trials, shared by the command line and the test suites."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .field import Grid
from .geometry import Params
from .lattice import build_family, domination_levels, lattice_for_grid
from .maximal import ScaleFamily
from .synth import random_trial
from .verify import (verify_domination, verify_fefferman_stein, verify_sawyer,
                     verify_strong_bump, verify_weak_type)
from .weights import WeightPair

THEOREMS = ("weak", "fs", "bump", "sawyer", "domination")
DEFAULT_CELLS = {"weak": 32, "fs": 32, "bump": 32, "sawyer": 16, "domination": 16}


@dataclass(frozen=True)
class TrialSpec:
    theorem: str
    params: Params
    seed: int = 0
    cells: int = 0
    strength: float = 1.0
    spikes: int = 1
    interpolation: float | None = None

    def grid(self) -> Grid:
        cells = self.cells or DEFAULT_CELLS[self.theorem]
        return Grid.unit(self.params.n, cells)


def run_trial(spec: TrialSpec, trial: int):
    P = spec.params
    grid = spec.grid()
    f, w, v = random_trial(grid, spec.seed, trial, spec.strength, spec.spikes)
    pair = WeightPair(w, v)
    meta = {"seed": spec.seed, "trial": trial}
    if spec.theorem == "weak":
        return verify_weak_type(f, pair, P, meta=meta)
    if spec.theorem == "fs":
        return verify_fefferman_stein(f, w, P.q, P.gamma, p=P.p, meta=meta)
    if spec.theorem == "bump":
        if P.s is None:
            raise ValueError("the bump theorem needs --s")
        return verify_strong_bump(f, pair, P.q, P.s, P.gamma, p=P.p, meta=meta)
    if spec.theorem == "sawyer":
        lat = lattice_for_grid(grid, P.p)
        return verify_sawyer(f, pair, P.q, P.r, P.alpha, lat, C2=spec.interpolation,
                             gamma=P.gamma, meta=meta)
    if spec.theorem == "domination":
        scales = ScaleFamily.default(grid, P.p)
        fam = _domination_family(grid, P.p, scales)
        return verify_domination(f, P, scales, fam, meta=meta)
    raise ValueError(f"unknown theorem {spec.theorem!r}")


_FAMILY_CACHE = {}


def _domination_family(grid: Grid, p: float, scales: ScaleFamily):
    key = (grid, p, scales.scales)
    if key not in _FAMILY_CACHE:
        k0, k1 = domination_levels(scales.scales)
        _FAMILY_CACHE[key] = build_family(grid.domain, k0, k1, p, n=grid.n)
    return _FAMILY_CACHE[key]


def _run(args):
    spec, trial = args
    return run_trial(spec, trial)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("PARWEIGHT_JOBS", "1")))
    except ValueError:
        return 1


def run_trials(spec: TrialSpec, trials: int, jobs: int | None = None) -> list:
    """Reports for trials ``0 .. trials-1``, in trial order regardless of ``jobs``."""
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    work = [(spec, t) for t in range(trials)]
    if jobs == 1 or trials <= 1:
        return [_run(a) for a in work]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_run, work))
