"""Parabolic rectangles, their time-lagged halves, and axis-aligned boxes.

A parabolic rectangle ``R(x, t, L, p)`` is the closed cube ``Q(x, L)`` in space
times the open interval ``(t - L**p, t + L**p)`` in time.  The last coordinate of
every point and box is time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ParameterError(ValueError):
    """A numeric parameter lies outside its admissible range."""


@dataclass(frozen=True)
class Params:
    n: int = 1
    p: float = 1.0
    gamma: float = 0.0
    alpha: float = 0.0
    q: float = 2.0
    r: float = 2.0
    s: float | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n}")
        if not (1.0 <= self.p < math.inf):
            raise ParameterError(f"p must satisfy 1 <= p < inf, got {self.p}")
        check_gamma(self.gamma)
        if not (0.0 <= self.alpha < 1.0):
            raise ParameterError(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.q < 1.0:
            raise ParameterError(f"q must be >= 1, got {self.q}")
        if self.r < self.q:
            raise ParameterError(f"r must be >= q, got r={self.r}, q={self.q}")
        if self.s is not None and self.s <= 1.0:
            raise ParameterError(f"s must be > 1, got {self.s}")

    @property
    def q_conj(self) -> float:
        return math.inf if self.q == 1.0 else self.q / (self.q - 1.0)

    def check_weak_type(self, tol: float = 1e-12):
        """Require alpha < 1/q and 1/q - 1/r = alpha."""
        if not self.alpha < 1.0 / self.q:
            raise ParameterError(f"weak type needs alpha < 1/q (alpha={self.alpha}, q={self.q})")
        if abs(1.0 / self.q - 1.0 / self.r - self.alpha) > tol:
            raise ParameterError(
                f"weak type needs 1/q - 1/r = alpha; got 1/{self.q} - 1/{self.r} != {self.alpha}")


def check_gamma(gamma: float):
    if not (0.0 <= gamma < 1.0):
        raise ParameterError(f"time lag gamma must lie in [0, 1), got {gamma}")


@dataclass(frozen=True)
class Box:
    """Axis-aligned region ``prod [lo_i, hi_i]`` of R^{n+1} (time last)."""

    lo: tuple
    hi: tuple

    def __init__(self, lo: Sequence[float], hi: Sequence[float]):
        lo = tuple(float(a) for a in lo)
        hi = tuple(float(b) for b in hi)
        if len(lo) != len(hi):
            raise ParameterError("box corners have different dimensions")
        if any(b < a for a, b in zip(lo, hi)):
            raise ParameterError(f"box needs lo <= hi, got {lo} and {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return math.prod(b - a for a, b in zip(self.lo, self.hi))

    @property
    def center(self) -> tuple:
        return tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))

    @property
    def edges(self) -> tuple:
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    def contains_box(self, other: "Box", tol: float = 0.0) -> bool:
        return all(a - tol <= c and d <= b + tol
                   for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def contains_point(self, z: Sequence[float]) -> bool:
        """Closed in space, open in time."""
        *zx, zt = z
        space = all(a <= c <= b for a, b, c in zip(self.lo[:-1], self.hi[:-1], zx))
        return space and self.lo[-1] < zt < self.hi[-1]

    def intersects(self, other: "Box") -> bool:
        """Positive-measure intersection."""
        return all(max(a, c) < min(b, d)
                   for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def reflect_time(self, t0: float = 0.0) -> "Box":
        lo, hi = list(self.lo), list(self.hi)
        lo[-1], hi[-1] = 2 * t0 - self.hi[-1], 2 * t0 - self.lo[-1]
        return Box(lo, hi)


@dataclass(frozen=True)
class ParabolicRectangle:
    center_x: tuple
    center_t: float
    L: float
    p: float = 1.0

    def __init__(self, center_x, center_t: float, L: float, p: float = 1.0):
        cx = tuple(float(c) for c in np.atleast_1d(center_x))
        if not L > 0:
            raise ParameterError(f"sidelength must be positive, got {L}")
        if p < 1:
            raise ParameterError(f"p must be >= 1, got {p}")
        object.__setattr__(self, "center_x", cx)
        object.__setattr__(self, "center_t", float(center_t))
        object.__setattr__(self, "L", float(L))
        object.__setattr__(self, "p", float(p))

    @property
    def n(self) -> int:
        return len(self.center_x)

    @property
    def l_x(self) -> float:
        return self.L

    @property
    def l_t(self) -> float:
        return 2 * self.L ** self.p

    def box(self) -> Box:
        h = self.L ** self.p
        return Box([c - self.L / 2 for c in self.center_x] + [self.center_t - h],
                   [c + self.L / 2 for c in self.center_x] + [self.center_t + h])

    def upper(self, gamma: float = 0.0) -> Box:
        return upper_part(self, gamma)

    def lower(self, gamma: float = 0.0) -> Box:
        return lower_part(self, gamma)

    def as_dict(self) -> dict:
        return {"x": list(self.center_x), "t": self.center_t, "L": self.L}


def upper_part(R: ParabolicRectangle, gamma: float) -> Box:
    """``Q(x, L) x (t + gamma L^p, t + L^p)``."""
    check_gamma(gamma)
    lo, hi = part_bounds(np.array(R.center_x), R.center_t, R.L, R.p, gamma, upper=True)
    return Box(lo, hi)


def lower_part(R: ParabolicRectangle, gamma: float) -> Box:
    """``Q(x, L) x (t - L^p, t - gamma L^p)``, the time reflection of the upper part."""
    check_gamma(gamma)
    lo, hi = part_bounds(np.array(R.center_x), R.center_t, R.L, R.p, gamma, upper=False)
    return Box(lo, hi)


def dilate(R: ParabolicRectangle, lam: float) -> ParabolicRectangle:
    """Scale the spatial sidelength by ``lam`` (time half-length becomes ``(lam L)^p``)."""
    if not lam > 0:
        raise ParameterError(f"dilation factor must be positive, got {lam}")
    return ParabolicRectangle(R.center_x, R.center_t, lam * R.L, R.p)


def part_bounds(cx, ct, L, p, gamma, upper: bool):
    """Vectorized corners of R^+(gamma) or R^-(gamma).

    ``cx`` has shape (..., n); ``ct`` and ``L`` broadcast against ``cx[..., 0]``.
    Every routine that builds halves of rectangles goes through here so that
    snapped cell sets agree bit for bit across code paths.
    """
    cx = np.asarray(cx, dtype=float)
    ct = np.asarray(ct, dtype=float)
    L = np.asarray(L, dtype=float)
    hp = L ** p
    half = L / 2
    if upper:
        t0, t1 = ct + gamma * hp, ct + hp
    else:
        t0, t1 = ct - hp, ct - gamma * hp
    half = np.broadcast_to(half[..., None] if half.ndim else half, cx.shape)
    lo = np.concatenate([cx - half, np.broadcast_to(t0, cx.shape[:-1])[..., None]], axis=-1)
    hi = np.concatenate([cx + half, np.broadcast_to(t1, cx.shape[:-1])[..., None]], axis=-1)
    return lo, hi


def center_from_lower(zx, zt, L, p, gamma):
    """Center time of the rectangle whose lower part is centered at time ``zt``."""
    return np.asarray(zt, dtype=float) + (1 + gamma) * np.asarray(L, dtype=float) ** p / 2


def center_from_upper(zx, zt, L, p, gamma):
    """Center time of the rectangle whose upper part is centered at time ``zt``."""
    return np.asarray(zt, dtype=float) - (1 + gamma) * np.asarray(L, dtype=float) ** p / 2


def part_volume(n: int, L, p: float, gamma: float):
    """``|R^+(gamma)| = |R^-(gamma)| = (1 - gamma) L^(n+p)``."""
    return (1 - gamma) * np.asarray(L, dtype=float) ** (n + p)
