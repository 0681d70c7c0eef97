"""Recover the driver from small-horizon solution values.

Valuing the affine claim y + z . (B_{t+eps} - B_t) over a short window
[t, t + eps] and forming the slope (value - y) / eps converges to
g(t, y, z) as eps shrinks.  ``recover_generator`` computes the slope for a
schedule of shrinking windows and Richardson-extrapolates assuming the
error is first order in eps; ``local_average`` is the matching running
time-average of a deterministic function; ``limit_equivalence_check``
confirms the two limits agree for drivers that are deterministic in
(t, z).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import simpson

from .model import Claim, EvaluationError, GeneratorSpec, TimeGrid
from .solvers import PathBundle, simulate_paths, solve_lattice, solve_lsmc

DEFAULT_EPS_FRACTIONS = (2.0 ** -4, 2.0 ** -5, 2.0 ** -6, 2.0 ** -7, 2.0 ** -8)
DEFAULT_STEPS_PER_EPS = 64
SIMPSON_PANELS = 128


@dataclass(frozen=True)
class RecoveryResult:
    """Slopes of small-horizon values around (t, y, z) and their extrapolated limit."""

    t: float
    y: float
    z: np.ndarray
    eps_schedule: tuple
    raw_slopes: tuple
    extrapolated: float
    residual: float

    def __post_init__(self):
        eps = np.asarray(self.eps_schedule)
        if eps.size < 1 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
            raise ValueError("eps_schedule must be strictly decreasing and positive")
        if not np.all(np.isfinite(self.raw_slopes)):
            raise ValueError("raw slopes must be finite")


def _affine_increment_claim(y: float, z: np.ndarray, d: int) -> Claim:
    z = np.asarray(z, dtype=float).reshape(d)
    if d == 1:
        return Claim(kind="terminal_function",
                     terminal_function=lambda x: y + z[0] * np.asarray(x, dtype=float))
    return Claim(kind="terminal_function",
                 terminal_function=lambda x: y + np.tensordot(z, np.asarray(x, dtype=float),
                                                              axes=(0, 0)))


def recover_generator(g: GeneratorSpec, y: float, z, t: float = 0.0,
                      eps_schedule=None, steps_per_eps: int = DEFAULT_STEPS_PER_EPS,
                      method: str = "lattice", *, horizon: Optional[float] = None,
                      n_paths: int = 20_000, seed: int = 0, basis=2,
                      picard_iters: int = 3) -> RecoveryResult:
    """Estimate g(t, y, z) from short-horizon solution slopes.

    For each eps the backward equation is solved on [t, t + eps] (the driver
    time-shifted, the claim affine in the window's Brownian increment), the
    slope (value - y) / eps recorded, and the last two slopes extrapolated
    assuming error proportional to eps.  The residual is the gap between the
    last two raw slopes; large residuals mean the first-order model is off.
    """
    z = np.asarray(z, dtype=float).reshape(g.dimension)
    if eps_schedule is None:
        span = horizon if horizon is not None else 1.0
        eps_schedule = tuple(f * span for f in DEFAULT_EPS_FRACTIONS)
    eps_schedule = tuple(float(e) for e in eps_schedule)
    if horizon is not None and t + max(eps_schedule) > horizon + 1e-12:
        raise ValueError(f"t + max(eps) = {t + max(eps_schedule)} exceeds the "
                         f"horizon {horizon}")
    if method == "lattice" and g.dimension != 1:
        raise ValueError("lattice recovery requires dimension 1")

    g_local = g.time_shifted(t) if t != 0.0 else g
    claim = _affine_increment_claim(y, z, g.dimension)
    slopes = []
    for eps in eps_schedule:
        window = TimeGrid(eps, steps_per_eps)
        if method == "lattice":
            value = solve_lattice(g_local, claim, window).y0
        elif method == "lsmc":
            bundle = simulate_paths(g.dimension, window, n_paths, seed)
            value = solve_lsmc(g_local, claim, bundle, basis=basis,
                               picard_iters=picard_iters).y0
        else:
            raise ValueError(f"unknown method {method!r}")
        slope = (value - y) / eps
        if not math.isfinite(slope):
            raise EvaluationError(f"non-finite slope at eps = {eps}")
        slopes.append(slope)

    if len(slopes) >= 2:
        e1, e2 = eps_schedule[-2], eps_schedule[-1]
        s1, s2 = slopes[-2], slopes[-1]
        extrapolated = (e1 * s2 - e2 * s1) / (e1 - e2)
        residual = abs(s2 - s1)
    else:
        extrapolated = slopes[-1]
        residual = 0.0
    return RecoveryResult(t=t, y=y, z=z, eps_schedule=eps_schedule,
                          raw_slopes=tuple(slopes), extrapolated=float(extrapolated),
                          residual=float(residual))


def local_average(psi, t: float, eps: float) -> float:
    """Average (1/eps) * integral of psi over [t, t + eps], composite Simpson
    with a fixed 128 panels."""
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    s = np.linspace(t, t + eps, SIMPSON_PANELS + 1)
    vals = np.asarray(psi(s), dtype=float)
    vals = np.broadcast_to(vals, s.shape)
    if not np.isfinite(vals).all():
        bad = s[~np.isfinite(vals)][0]
        raise EvaluationError(f"non-finite integrand value at s = {bad}")
    return float(simpson(vals, dx=eps / SIMPSON_PANELS) / eps)


@dataclass(frozen=True)
class LimitEquivalenceResult:
    eps_schedule: tuple
    slopes: tuple           # small-horizon solution slopes, per eps
    averages: tuple         # running time-averages of the driver, per eps
    gaps: tuple
    max_gap: float


def limit_equivalence_check(g: GeneratorSpec, y: float, z, t: float = 0.0,
                            eps_schedule=None,
                            steps_per_eps: int = DEFAULT_STEPS_PER_EPS, *,
                            horizon: Optional[float] = None) -> LimitEquivalenceResult:
    """Compare the two routes to g(t, y, z): solution slopes versus running
    time-averages of s -> g(s, y, z).  Both sequences must approach the same
    value; the per-eps gaps and their max are reported."""
    z = np.asarray(z, dtype=float).reshape(g.dimension)
    rec = recover_generator(g, y, z, t, eps_schedule, steps_per_eps,
                            method="lattice", horizon=horizon)

    def driver_of_time(s):
        s = np.asarray(s, dtype=float)
        zz = np.broadcast_to(z[:, None], (g.dimension, s.size))
        return np.asarray(g(s, np.full(s.size, y), zz), dtype=float)

    averages = tuple(local_average(driver_of_time, t, eps)
                     for eps in rec.eps_schedule)
    gaps = tuple(abs(s - a) for s, a in zip(rec.raw_slopes, averages))
    return LimitEquivalenceResult(eps_schedule=rec.eps_schedule,
                                  slopes=rec.raw_slopes, averages=averages,
                                  gaps=gaps, max_gap=max(gaps))
