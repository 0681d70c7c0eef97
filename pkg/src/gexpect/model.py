"""Domain types shared by every module, plus sampling-based driver validation.

A *driver* (generator) is the function ``g(t, y, z)`` steering the backward
equation; a *claim* is the terminal payoff being valued.  Both are plain
callables wrapped in frozen dataclasses so they can be shared freely across
workers.  ``validate_assumptions`` falsifies, by randomized sampling, the two
standing hypotheses every driver is declared to satisfy: a Lipschitz bound in
(y, z) and the normalization ``g(t, y, 0) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import rng


class EvaluationError(ArithmeticError):
    """A driver or claim produced an invalid value (non-finite, division by zero)."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, horizon] with ``steps`` intervals of width ``dt``."""

    horizon: float
    steps: int
    dt: float = None  # type: ignore[assignment]  # derived unless given (see truncate)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValueError(f"horizon must be a positive finite real, got {self.horizon}")
        if self.dt is None:
            object.__setattr__(self, "dt", self.horizon / self.steps)
        if not math.isclose(self.dt * self.steps, self.horizon, rel_tol=1e-12):
            raise ValueError(f"dt*steps = {self.dt * self.steps} != horizon = {self.horizon}")

    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def time_at(self, i: int) -> float:
        return i * self.dt

    def truncate(self, i: int) -> "TimeGrid":
        """Grid covering the first ``i`` steps, reusing ``dt`` bit-for-bit.

        Deriving dt as (i*dt)/i would round differently and break the exact
        nesting of backward recursions.
        """
        if not 1 <= i <= self.steps:
            raise ValueError(f"truncation index must be in 1..{self.steps}, got {i}")
        return TimeGrid(horizon=i * self.dt, steps=i, dt=self.dt)


@dataclass(frozen=True)
class GeneratorFlags:
    """Structural claims about a driver; verified by harnesses, never trusted."""

    independent_of_y: Optional[bool] = None
    convex_in_z: Optional[bool] = None
    subadditive_in_z: Optional[bool] = None
    positively_homogeneous: Optional[bool] = None


@dataclass(frozen=True)
class GeneratorSpec:
    """Driver g(t, y, z) with its dimension and declared Lipschitz bound.

    ``body(t, y, z)`` must accept numpy broadcasting: ``t`` scalar or array,
    ``y`` scalar or array, ``z`` an array whose leading axis has length
    ``dimension`` (so ``z[k]`` is the k-th coordinate, itself scalar or array).
    """

    body: Callable
    dimension: int
    lipschitz: float
    flags: GeneratorFlags = field(default_factory=GeneratorFlags)
    source: Optional[str] = None

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if not (self.lipschitz >= 0):
            raise ValueError(f"declared Lipschitz bound must be >= 0, got {self.lipschitz}")

    def __call__(self, t, y, z):
        return self.body(t, y, z)

    def shifted_in_y(self, c: float) -> "GeneratorSpec":
        """Driver (t, y, z) -> g(t, y - c, z), same bound."""
        base = self.body
        return replace(self, body=lambda t, y, z: base(t, y - c, z),
                       source=None, flags=GeneratorFlags())

    def scaled(self, alpha: float) -> "GeneratorSpec":
        """Driver (t, y, z) -> alpha * g(t, y/alpha, z/alpha), alpha > 0."""
        if not alpha > 0:
            raise ValueError(f"scaling factor must be > 0, got {alpha}")
        base = self.body
        return replace(self, body=lambda t, y, z: alpha * base(t, y / alpha, z / alpha),
                       source=None, flags=GeneratorFlags())

    def time_shifted(self, offset: float) -> "GeneratorSpec":
        """Driver (s, y, z) -> g(offset + s, y, z) for solves on sub-windows."""
        base = self.body
        return replace(self, body=lambda t, y, z: base(offset + t, y, z), source=None)


@dataclass(frozen=True)
class Claim:
    """Terminal payoff: either a function of the terminal Brownian value or a
    functional of the whole sampled path.

    ``terminal_function(x)`` gets the terminal value: for d = 1 a scalar or
    1-D array of values; for d > 1 an array of shape (d,) or (d, n).
    ``path_functional(path)`` gets the cumulative path, shape
    (steps + 1, n_paths, d), and returns per-path values of shape (n_paths,).
    """

    kind: str  # "terminal_function" | "path_functional"
    terminal_function: Optional[Callable] = None
    path_functional: Optional[Callable] = None
    lipschitz: Optional[float] = None
    source: Optional[str] = None
    uses_running_extrema: bool = False

    def __post_init__(self):
        if self.kind not in ("terminal_function", "path_functional"):
            raise ValueError(f"unknown claim kind {self.kind!r}")
        if self.kind == "terminal_function" and self.terminal_function is None:
            raise ValueError("terminal_function claim needs a terminal_function")
        if self.kind == "path_functional" and self.path_functional is None:
            raise ValueError("path_functional claim needs a path_functional")
        if self.lipschitz is not None and not (self.lipschitz >= 0):
            raise ValueError(f"Lipschitz bound must be >= 0, got {self.lipschitz}")

    def __call__(self, x):
        if self.kind != "terminal_function":
            raise ValueError("only terminal_function claims are directly evaluable")
        return self.terminal_function(x)


def constant_claim(c: float) -> Claim:
    return Claim(kind="terminal_function",
                 terminal_function=lambda x: np.full_like(np.asarray(x, dtype=float), c,
                                                          dtype=float),
                 lipschitz=0.0, source=repr(float(c)))


def combine_claims(a: float, xi: Claim, b: float, eta: Claim) -> Claim:
    """Claim a*xi + b*eta (both must be terminal-function claims)."""
    if xi.kind != "terminal_function" or eta.kind != "terminal_function":
        raise ValueError("combine_claims needs terminal_function claims")
    f, h = xi.terminal_function, eta.terminal_function
    lip = None
    if xi.lipschitz is not None and eta.lipschitz is not None:
        lip = abs(a) * xi.lipschitz + abs(b) * eta.lipschitz
    return Claim(kind="terminal_function",
                 terminal_function=lambda x: a * f(x) + b * h(x), lipschitz=lip)


def shift_claim(xi: Claim, c: float) -> Claim:
    if xi.kind != "terminal_function":
        raise ValueError("shift_claim needs a terminal_function claim")
    f = xi.terminal_function
    return Claim(kind="terminal_function", terminal_function=lambda x: f(x) + c,
                 lipschitz=xi.lipschitz)


def scale_claim(xi: Claim, a: float) -> Claim:
    if xi.kind != "terminal_function":
        raise ValueError("scale_claim needs a terminal_function claim")
    f = xi.terminal_function
    lip = None if xi.lipschitz is None else abs(a) * xi.lipschitz
    return Claim(kind="terminal_function", terminal_function=lambda x: a * f(x),
                 lipschitz=lip)


def negate_claim(xi: Claim) -> Claim:
    return scale_claim(xi, -1.0)


@dataclass(frozen=True)
class SamplingBox:
    """Axis-aligned sampling ranges for (t, y, z); z range applies per coordinate."""

    t: tuple = (0.0, 1.0)
    y: tuple = (-10.0, 10.0)
    z: tuple = (-10.0, 10.0)

    def __post_init__(self):
        for name in ("t", "y", "z"):
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ValueError(f"box range for {name} must be finite with lo <= hi")


def default_box(horizon: float = 1.0) -> SamplingBox:
    return SamplingBox(t=(0.0, horizon))


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of sampling the Lipschitz quotient and the g(t, y, 0) = 0 check."""

    a1_max_quotient: float
    a1_pass: bool
    a3_max_abs: float
    a3_pass: bool
    samples: int
    tolerance: float


def _check_finite(vals, t, y, z, what="generator"):
    vals = np.asarray(vals, dtype=float)
    bad = ~np.isfinite(vals)
    if bad.any():
        k = int(np.argmax(bad))
        zk = np.asarray(z)[:, k] if np.asarray(z).ndim == 2 else z
        raise EvaluationError(
            f"{what} returned a non-finite value at t={np.asarray(t).ravel()[k]!r}, "
            f"y={np.asarray(y).ravel()[k]!r}, z={np.asarray(zk).ravel()!r}")
    return vals


def validate_assumptions(g: GeneratorSpec, box: SamplingBox = None,
                         n_samples: int = 100_000, tol: float = 1e-9,
                         seed: int = 0) -> AssumptionReport:
    """Sample the driver and report the worst Lipschitz quotient and |g(t, y, 0)|.

    Each sample is keyed by (seed, sample index, slot), so the report is
    identical no matter how the sampling is chunked or parallelized.
    Identical sampled points (zero quotient denominator) are skipped.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    box = box or default_box()
    d = g.dimension
    idx = np.arange(n_samples)

    def draw(slot, lo, hi):
        return rng.counter_uniform_in(lo, hi, seed, idx, np.full(n_samples, slot))

    t = draw(0, *box.t)
    y1 = draw(1, *box.y)
    y2 = draw(2, *box.y)
    z1 = np.stack([draw(3 + k, *box.z) for k in range(d)])
    z2 = np.stack([draw(3 + d + k, *box.z) for k in range(d)])

    g1 = _check_finite(g(t, y1, z1), t, y1, z1)
    g2 = _check_finite(g(t, y2, z2), t, y2, z2)
    denom = np.abs(y1 - y2) + np.sqrt(np.sum((z1 - z2) ** 2, axis=0))
    ok = denom > 0.0
    quot = np.abs(g1 - g2)[ok] / denom[ok]
    a1_max = float(quot.max()) if quot.size else 0.0

    z0 = np.zeros((d, n_samples))
    g0 = _check_finite(g(t, y1, z0), t, y1, z0)
    a3_max = float(np.abs(g0).max())

    return AssumptionReport(
        a1_max_quotient=a1_max,
        a1_pass=bool(a1_max <= g.lipschitz * (1.0 + tol)),
        a3_max_abs=a3_max,
        a3_pass=bool(a3_max <= tol),
        samples=n_samples,
        tolerance=tol,
    )
