"""User-facing nonlinear expectation operators.

``g_expectation`` values a claim as the initial value of the backward
equation driven by g; ``conditional_g_expectation`` returns the time-t
representation (node values on the lattice, a fitted state function for
the regression solver).  ``tower_check`` re-values the conditional
representation as a fresh terminal claim on the truncated horizon and
compares with the direct value; ``indicator_factorization_check`` verifies
that restricting a claim to an observable event at time t just masks the
conditional value.

Strict mode (default) validates the driver's declared Lipschitz bound and
the normalization g(t, y, 0) = 0 before solving; raw mode downgrades a
normalization failure to a warning so the solvers remain usable for
unnormalized drivers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import (Claim, GeneratorSpec, SamplingBox, TimeGrid, constant_claim,
                    validate_assumptions)
from .solvers import (LatticeSolution, LsmcSolution, PathBundle, lsmc_conditional_fn,
                      simulate_paths, solve_lattice, solve_lsmc)

GATE_SAMPLES = 4096
GATE_SEED = 0
LATTICE_TOL = 1e-10


class AssumptionError(ValueError):
    """The driver failed validation of its declared standing assumptions."""


def check_driver(g: GeneratorSpec, grid: TimeGrid, strict: bool = True,
                 n_samples: int = GATE_SAMPLES, tol: float = 1e-9) -> None:
    """Gate a driver before use: Lipschitz bound always enforced, the
    g(t, y, 0) = 0 normalization enforced in strict mode and warned in raw."""
    box = SamplingBox(t=(0.0, grid.horizon))
    report = validate_assumptions(g, box, n_samples=n_samples, tol=tol,
                                  seed=GATE_SEED)
    if not report.a1_pass:
        raise AssumptionError(
            f"sampled Lipschitz quotient {report.a1_max_quotient:.6g} exceeds the "
            f"declared bound {g.lipschitz:.6g}")
    if not report.a3_pass:
        msg = (f"driver violates g(t, y, 0) = 0: sampled max "
               f"|g(t, y, 0)| = {report.a3_max_abs:.6g}")
        if strict:
            raise AssumptionError(msg)
        warnings.warn(msg + " (raw mode: continuing)", RuntimeWarning,
                      stacklevel=2)


@dataclass(frozen=True)
class GExpectationResult:
    value: float
    method: str
    error_estimate: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError("g-expectation value must be finite")
        if self.error_estimate < 0:
            raise ValueError("error_estimate must be >= 0")


def _lsmc_paths(g, grid, paths, n_paths, seed):
    if paths is not None:
        return paths
    if n_paths is None or seed is None:
        raise ValueError("lsmc method needs a PathBundle or (n_paths, seed)")
    return simulate_paths(g.dimension, grid, n_paths, seed)


def g_expectation(g: GeneratorSpec, claim: Claim, grid: TimeGrid,
                  method: str = "lattice", *, scheme: str = "implicit",
                  paths: Optional[PathBundle] = None, n_paths: Optional[int] = None,
                  seed: Optional[int] = None, basis=3, picard_iters: int = 3,
                  strict: bool = True) -> GExpectationResult:
    """Value of the claim under the nonlinear expectation induced by g."""
    check_driver(g, grid, strict=strict)
    if method == "lattice":
        sol = solve_lattice(g, claim, grid, scheme=scheme)
        return GExpectationResult(value=sol.y0, method="lattice", error_estimate=0.0,
                                  diagnostics={"scheme": scheme, "steps": grid.steps})
    if method == "lsmc":
        bundle = _lsmc_paths(g, grid, paths, n_paths, seed)
        sol = solve_lsmc(g, claim, bundle, basis=basis, picard_iters=picard_iters)
        return GExpectationResult(value=sol.y0, method="lsmc",
                                  error_estimate=sol.std_error,
                                  diagnostics={"paths": sol.paths_used,
                                               "ridge_steps": sol.ridge_steps})
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class ConditionalSlice:
    """Conditional value at a grid time as lattice node values."""

    time_index: int
    states: np.ndarray
    values: np.ndarray

    @property
    def scalar(self) -> float:
        if self.values.size != 1:
            raise ValueError("conditional value is not deterministic at this time")
        return float(self.values[0])


@dataclass(frozen=True)
class RegressionConditional:
    """Conditional value at a grid time as a fitted function of the Brownian state."""

    time_index: int
    solution: LsmcSolution
    fn: object

    def __call__(self, x):
        return self.fn(x)


def conditional_g_expectation(g: GeneratorSpec, claim: Claim, grid: TimeGrid,
                              t_index: int, method: str = "lattice", *,
                              scheme: str = "implicit",
                              paths: Optional[PathBundle] = None,
                              n_paths: Optional[int] = None,
                              seed: Optional[int] = None, basis=3,
                              picard_iters: int = 3, strict: bool = True):
    """Discrete representation of the conditional value given F_t at grid index t_index."""
    if not 0 <= t_index <= grid.steps:
        raise IndexError(f"t_index {t_index} out of range 0..{grid.steps}")
    check_driver(g, grid, strict=strict)
    if method == "lattice":
        sol = solve_lattice(g, claim, grid, scheme=scheme)
        return ConditionalSlice(time_index=t_index,
                                states=sol.node_states(t_index),
                                values=sol.slice_at(t_index))
    if method == "lsmc":
        bundle = _lsmc_paths(g, grid, paths, n_paths, seed)
        sol = solve_lsmc(g, claim, bundle, basis=basis, picard_iters=picard_iters)
        if t_index == grid.steps:
            fn = claim.terminal_function
            if fn is None:
                raise ValueError("terminal representation needs a terminal claim")
            return RegressionConditional(time_index=t_index, solution=sol, fn=fn)
        if t_index == 0:
            return RegressionConditional(time_index=0, solution=sol,
                                         fn=lambda x: np.full(np.shape(np.atleast_1d(x))[-1:],
                                                              sol.y0))
        return RegressionConditional(
            time_index=t_index, solution=sol,
            fn=lsmc_conditional_fn(sol, g, t_index, picard_iters=picard_iters))
    raise ValueError(f"unknown method {method!r}")


def claim_from_slice(values: np.ndarray, time_index: int, dt: float) -> Claim:
    """Terminal claim on a truncated grid that reproduces lattice node values exactly.

    Node j at time index i sits at (2j - i) * sqrt(dt); the claim looks the
    state back up, so re-solving from it repeats the original recursion bitwise.
    """
    values = np.asarray(values, dtype=float)
    sq = math.sqrt(dt)

    def terminal(x):
        j = np.rint((np.asarray(x, dtype=float) / sq + time_index) / 2.0).astype(int)
        if np.any(j < 0) or np.any(j >= values.size):
            raise ValueError("state outside the stored node range")
        return values[j]

    return Claim(kind="terminal_function", terminal_function=terminal)


@dataclass(frozen=True)
class TowerCheckResult:
    lhs: float
    rhs: float
    tol: float
    passed: bool


def tower_check(g: GeneratorSpec, claim: Claim, grid: TimeGrid, t_index: int,
                tol: Optional[float] = None, method: str = "lattice", *,
                paths: Optional[PathBundle] = None, n_paths: Optional[int] = None,
                seed: Optional[int] = None, basis=3, picard_iters: int = 3,
                strict: bool = True) -> TowerCheckResult:
    """Check that valuing the time-t conditional value as a fresh claim on
    [0, t] reproduces the direct value of the original claim."""
    if not 0 <= t_index <= grid.steps:
        raise IndexError(f"t_index {t_index} out of range 0..{grid.steps}")
    check_driver(g, grid, strict=strict)
    if method == "lattice":
        sol = solve_lattice(g, claim, grid)
        rhs = sol.y0
        if t_index == 0:
            lhs = sol.y0
        else:
            nested = claim_from_slice(sol.slice_at(t_index), t_index, grid.dt)
            lhs = solve_lattice(g, nested, grid.truncate(t_index)).y0
        tol = LATTICE_TOL if tol is None else tol
        return TowerCheckResult(lhs=lhs, rhs=rhs, tol=tol,
                                passed=bool(abs(lhs - rhs) <= tol))
    if method == "lsmc":
        bundle = _lsmc_paths(g, grid, paths, n_paths, seed)
        sol = solve_lsmc(g, claim, bundle, basis=basis, picard_iters=picard_iters)
        rhs = sol.y0
        if t_index == 0:
            return TowerCheckResult(lhs=rhs, rhs=rhs, tol=tol or 0.0, passed=True)
        if t_index == grid.steps:
            nested_claim = claim
        else:
            fn = lsmc_conditional_fn(sol, g, t_index, picard_iters=picard_iters)
            nested_claim = Claim(kind="terminal_function", terminal_function=fn)
        nested = solve_lsmc(g, nested_claim, bundle.truncate(t_index),
                            basis=basis, picard_iters=picard_iters)
        lhs = nested.y0
        if tol is None:
            tol = 3.0 * math.hypot(sol.std_error, nested.std_error)
        return TowerCheckResult(lhs=lhs, rhs=rhs, tol=tol,
                                passed=bool(abs(lhs - rhs) <= tol))
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class IndicatorCheckResult:
    max_abs_difference: float
    tol: float
    passed: bool
    diagnostics: str = ""


def indicator_factorization_check(g: GeneratorSpec, claim: Claim, grid: TimeGrid,
                                  t_index: int, event_nodes, tol: float = 1e-12,
                                  strict: bool = True) -> IndicatorCheckResult:
    """Compare the conditional value of the event-restricted claim with the
    masked conditional value of the claim itself.

    The event is a set of lattice nodes at ``t_index`` (any F_t-measurable
    event on the lattice).  The restricted claim is solved as two genuinely
    separate recursions over [t, T] (the claim on the event branch, the zero
    claim off it) collapsed at t; the driver must be independent of y and
    normalized, otherwise the factorization has no reason to hold.
    """
    if not 0 <= t_index <= grid.steps:
        raise IndexError(f"t_index {t_index} out of range 0..{grid.steps}")
    check_driver(g, grid, strict=strict)
    _check_y_free(g, grid)

    mask = np.zeros(t_index + 1, dtype=bool)
    event_nodes = np.asarray(list(event_nodes) if not isinstance(event_nodes, np.ndarray)
                             else event_nodes)
    if event_nodes.dtype == bool:
        if event_nodes.size != t_index + 1:
            raise ValueError(f"boolean event mask must have length {t_index + 1}")
        mask = event_nodes
    elif event_nodes.size:
        if event_nodes.min() < 0 or event_nodes.max() > t_index:
            raise ValueError(f"event node indices must lie in 0..{t_index}")
        mask[event_nodes] = True

    sol_claim = solve_lattice(g, claim, grid)
    sol_zero = solve_lattice(g, constant_claim(0.0), grid)
    restricted = np.where(mask, sol_claim.slice_at(t_index), sol_zero.slice_at(t_index))
    masked = np.where(mask, sol_claim.slice_at(t_index), 0.0)
    diff = float(np.max(np.abs(restricted - masked)))
    note = "" if mask.any() else "empty event: both sides are the zero claim"
    return IndicatorCheckResult(max_abs_difference=diff, tol=tol,
                                passed=bool(diff <= tol), diagnostics=note)


def _check_y_free(g: GeneratorSpec, grid: TimeGrid, n: int = 2048,
                  tol: float = 1e-9) -> None:
    from . import rng
    idx = np.arange(n)
    t = rng.counter_uniform_in(0.0, grid.horizon, 101, idx, np.full(n, 0))
    y1 = rng.counter_uniform_in(-10.0, 10.0, 101, idx, np.full(n, 1))
    y2 = rng.counter_uniform_in(-10.0, 10.0, 101, idx, np.full(n, 2))
    z = np.stack([rng.counter_uniform_in(-10.0, 10.0, 101, idx, np.full(n, 3 + k))
                  for k in range(g.dimension)])
    gap = float(np.max(np.abs(np.asarray(g(t, y1, z)) - np.asarray(g(t, y2, z)))))
    if gap > tol:
        raise ValueError(f"driver depends on y (sampled gap {gap:.3g}); "
                         "the indicator factorization requires a y-free driver")
