"""Two independent discretizations of the backward equation.

* A deterministic recombining random-walk lattice (d = 1, terminal-function
  claims): the walk moves by +-sqrt(dt) per step, so node j at time index i
  sits at state (2j - i) * sqrt(dt).  Backward induction is exact for claims
  affine in the terminal state when the driver is y-free, which makes this
  solver the project's high-accuracy oracle.

* A least-squares Monte Carlo regression solver (any dimension, terminal
  functions or path functionals): conditional means and the z-process are
  fitted by polynomial regression on the current Brownian state, step by
  step backwards.

Both evaluate the driver at step midpoints t_i + dt/2; the midpoint rule
integrates time-linear drivers exactly, which the small-horizon recovery
tolerances require.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng
from .model import Claim, EvaluationError, GeneratorSpec, TimeGrid

FIXED_POINT_TOL = 1e-14
FIXED_POINT_MAX_ITERS = 100
RIDGE_LAMBDA = 1e-8


class NumericError(ArithmeticError):
    """A solver produced or detected an invalid numeric state."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class LatticeSolution:
    """Discrete (Y, Z) on the recombining lattice.

    ``values[i]`` has length i + 1 (node j at state (2j - i) * sqrt(dt));
    ``z_values[i]`` exists for i < steps.
    """

    grid: TimeGrid
    scheme: str
    values: tuple
    z_values: tuple

    @property
    def y0(self) -> float:
        return float(self.values[0][0])

    @property
    def sqrt_dt(self) -> float:
        return math.sqrt(self.grid.dt)

    def node_states(self, i: int) -> np.ndarray:
        if not 0 <= i <= self.grid.steps:
            raise IndexError(f"time index {i} out of range 0..{self.grid.steps}")
        return (2.0 * np.arange(i + 1) - i) * self.sqrt_dt

    def slice_at(self, i: int) -> np.ndarray:
        if not 0 <= i <= self.grid.steps:
            raise IndexError(f"time index {i} out of range 0..{self.grid.steps}")
        return self.values[i]


def solve_lattice(g: GeneratorSpec, claim: Claim, grid: TimeGrid,
                  scheme: str = "implicit") -> LatticeSolution:
    """Backward induction for the pair (Y, Z) on the +-sqrt(dt) lattice.

    Parameters
    ----------
    g : GeneratorSpec
        Driver with dimension 1.  Requires lipschitz * dt <= 0.5.
    claim : Claim
        Terminal-function claim, evaluable on the node range.
    grid : TimeGrid
    scheme : {"implicit", "explicit"}
        Implicit solves v = ybar + g(t, v, z) * dt per node by fixed-point
        iteration (a contraction since K * dt < 1); explicit plugs in ybar.
    """
    if g.dimension != 1:
        raise ValueError(f"lattice solver requires dimension 1, got {g.dimension}")
    if claim.kind != "terminal_function":
        raise ValueError("lattice solver requires a terminal_function claim")
    if scheme not in ("implicit", "explicit"):
        raise ValueError(f"unknown scheme {scheme!r}")
    n = grid.steps
    dt = grid.dt
    if g.lipschitz * dt > 0.5:
        needed = math.ceil(2.0 * g.lipschitz * grid.horizon)
        raise ValueError(
            f"K*dt = {g.lipschitz * dt:.6g} > 0.5; use steps >= {needed}")

    sq = math.sqrt(dt)
    states = (2.0 * np.arange(n + 1) - n) * sq
    terminal = np.asarray(claim(states), dtype=float)
    terminal = np.broadcast_to(terminal, states.shape).astype(float)
    if not np.isfinite(terminal).all():
        raise NumericError(f"non-finite terminal claim value at step {n}")

    values = [None] * (n + 1)
    z_values = [None] * n
    values[n] = _freeze(terminal)
    y_next = terminal
    for i in range(n - 1, -1, -1):
        up = y_next[1:]
        down = y_next[:-1]
        ybar = 0.5 * (up + down)
        z = (up - down) / (2.0 * sq)
        z2d = z[None, :]
        t_mid = (i + 0.5) * dt
        if scheme == "explicit":
            y = ybar + np.asarray(g(t_mid, ybar, z2d), dtype=float) * dt
        else:
            y = _implicit_step(g, t_mid, ybar, z2d, dt, i)
        if not np.isfinite(y).all():
            raise NumericError(f"non-finite lattice value at step {i}")
        values[i] = _freeze(np.asarray(y, dtype=float))
        z_values[i] = _freeze(z)
        y_next = values[i]
    return LatticeSolution(grid=grid, scheme=scheme,
                           values=tuple(values), z_values=tuple(z_values))


def _implicit_step(g, t_mid, ybar, z2d, dt, step):
    v = ybar
    for _ in range(FIXED_POINT_MAX_ITERS):
        v_new = ybar + np.asarray(g(t_mid, v, z2d), dtype=float) * dt
        delta = float(np.max(np.abs(v_new - v)))
        v = v_new
        # the absolute target is unreachable once |Y| pushes the float
        # spacing above it, so also accept a machine-precision plateau
        if delta <= max(FIXED_POINT_TOL,
                        4.0 * np.finfo(float).eps * float(np.max(np.abs(v), initial=1.0))):
            return v
    raise NumericError(
        f"implicit fixed point did not converge in {FIXED_POINT_MAX_ITERS} "
        f"iterations at step {step}")


def conditional_slice(sol: LatticeSolution, i: int) -> np.ndarray:
    """Node values of the solution at time index i (the conditional value given F_t)."""
    return sol.slice_at(i)


@dataclass(frozen=True)
class PathBundle:
    """Brownian increments of shape (steps, n_paths, dimension), fully
    reproducible from (seed, dimension, grid, n_paths): each increment is a
    pure function of (seed, path, step, coordinate)."""

    dimension: int
    grid: TimeGrid
    n_paths: int
    seed: int
    increments: np.ndarray

    def brownian(self) -> np.ndarray:
        """Cumulative path, shape (steps + 1, n_paths, dimension), starting at 0."""
        n, m, d = self.increments.shape
        b = np.zeros((n + 1, m, d))
        np.cumsum(self.increments, axis=0, out=b[1:])
        return b

    def truncate(self, i: int) -> "PathBundle":
        """Bundle covering the first i steps (same paths, same seed)."""
        if not 1 <= i <= self.grid.steps:
            raise ValueError(f"truncation index must be in 1..{self.grid.steps}")
        return PathBundle(dimension=self.dimension, grid=self.grid.truncate(i),
                          n_paths=self.n_paths, seed=self.seed,
                          increments=self.increments[:i])


def simulate_paths(d: int, grid: TimeGrid, n_paths: int, seed: int) -> PathBundle:
    """Sample sqrt(dt)-scaled standard-normal increments, counter-keyed by
    (seed, path, step, coordinate) so any chunking of the work reproduces
    the same bundle bit for bit."""
    if n_paths < 2:
        raise ValueError(f"n_paths must be >= 2, got {n_paths}")
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    n = grid.steps
    try:
        path_ix = np.arange(n_paths, dtype=np.uint64)[None, :, None]
        step_ix = np.arange(n, dtype=np.uint64)[:, None, None]
        coord_ix = np.arange(d, dtype=np.uint64)[None, None, :]
        normals = rng.counter_normal(seed, path_ix, step_ix, coord_ix)
        increments = math.sqrt(grid.dt) * normals
    except MemoryError as exc:
        raise NumericError(
            f"cannot allocate {n} x {n_paths} x {d} increments") from exc
    return PathBundle(dimension=d, grid=grid, n_paths=n_paths, seed=seed,
                      increments=_freeze(increments))


@dataclass(frozen=True)
class PolynomialBasis:
    """All monomials of total degree <= degree in the regression state.

    The state is the current Brownian value; claims flagged with
    uses_running_extrema get the running per-coordinate max and min
    appended to it.
    """

    degree: int

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError(f"basis degree must be >= 1, got {self.degree}")

    def exponents(self, n_vars: int) -> tuple:
        out = []
        for total in range(self.degree + 1):
            for combo in itertools.combinations_with_replacement(range(n_vars), total):
                e = [0] * n_vars
                for v in combo:
                    e[v] += 1
                out.append(tuple(e))
        return tuple(out)

    def design_matrix(self, state: np.ndarray) -> np.ndarray:
        """state: (n_samples, n_vars) -> (n_samples, n_terms)."""
        exps = self.exponents(state.shape[1])
        cols = [np.prod([state[:, v] ** e for v, e in enumerate(exp) if e], axis=0)
                if any(exp) else np.ones(state.shape[0])
                for exp in exps]
        return np.column_stack(cols)

    def n_terms(self, n_vars: int) -> int:
        return len(self.exponents(n_vars))


@dataclass(frozen=True)
class LsmcSolution:
    """Regression-based solution: initial value, its sampling error, and the
    per-step fitted coefficients for the conditional mean and each z component."""

    y0: float
    std_error: float
    coeff_y: np.ndarray          # (steps, n_terms)
    coeff_z: np.ndarray          # (steps, dimension, n_terms)
    paths_used: int
    basis: PolynomialBasis
    grid: TimeGrid
    dimension: int
    ridge_steps: tuple = field(default=())
    uses_running_extrema: bool = False

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be >= 0")


def _fit(design: np.ndarray, target: np.ndarray, step: int):
    beta, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    ridge = rank < design.shape[1]
    if ridge:
        gram = design.T @ design + RIDGE_LAMBDA * np.eye(design.shape[1])
        beta = np.linalg.solve(gram, design.T @ target)
    fitted = design @ beta
    if not np.isfinite(fitted).all():
        raise NumericError(f"non-finite regression fit at step {step}")
    return beta, fitted, ridge


def _terminal_values(claim: Claim, paths: PathBundle, b: np.ndarray) -> np.ndarray:
    if claim.kind == "terminal_function":
        terminal = b[-1]                      # (m, d)
        x = terminal[:, 0] if paths.dimension == 1 else terminal.T
        vals = np.asarray(claim(x), dtype=float)
        return np.broadcast_to(vals, (paths.n_paths,)).astype(float)
    return np.asarray(claim.path_functional(b), dtype=float)


def solve_lsmc(g: GeneratorSpec, claim: Claim, paths: PathBundle,
               basis=3, picard_iters: int = 3) -> LsmcSolution:
    """Backward regression solve of the backward equation on sampled paths.

    At each step i the z components are fitted by regressing
    Y_{i+1} * dB_i / dt on the basis of the current state, the conditional
    mean by regressing Y_{i+1} itself, and Y_i = mean + g(t, Y_i, Z_i) * dt
    is resolved with ``picard_iters`` fixed-point sweeps.  Rank-deficient
    regressions fall back to ridge (lambda = 1e-8) on the full column set,
    never dropping columns, and are flagged in the result.
    """
    if isinstance(basis, int):
        basis = PolynomialBasis(basis)
    if picard_iters < 1:
        raise ValueError(f"picard_iters must be >= 1, got {picard_iters}")
    if g.dimension != paths.dimension:
        raise ValueError(f"driver dimension {g.dimension} != path dimension "
                         f"{paths.dimension}")
    n, m, d = paths.increments.shape
    dt = paths.grid.dt
    b = paths.brownian()

    extrema = claim.uses_running_extrema
    if extrema:
        run_max = np.maximum.accumulate(b, axis=0)
        run_min = np.minimum.accumulate(b, axis=0)

    y = _terminal_values(claim, paths, b)
    if not np.isfinite(y).all():
        raise NumericError(f"non-finite claim value at step {n}")

    n_vars = d * (3 if extrema else 1)
    coeff_y = np.empty((n, basis.n_terms(n_vars)))
    coeff_z = np.empty((n, d, basis.n_terms(n_vars)))
    ridge_steps = []
    # per-path contributions to y0: the terminal value plus every step's
    # fitted driver increment.  Regression projections preserve the sample
    # mean (the basis contains the constant), so y0 = mean(contributions)
    # and their spread measures the estimator's sampling error.
    contributions = y.copy()

    for i in range(n - 1, -1, -1):
        state = b[i]
        if extrema:
            state = np.concatenate([state, run_max[i], run_min[i]], axis=1)
        design = basis.design_matrix(state)

        z = np.empty((d, m))
        ridge_here = False
        for k in range(d):
            beta_k, fitted_k, ridge_k = _fit(design, y * paths.increments[i, :, k] / dt, i)
            coeff_z[i, k] = beta_k
            z[k] = fitted_k
            ridge_here = ridge_here or ridge_k
        beta_y, fitted, ridge_y = _fit(design, y, i)
        coeff_y[i] = beta_y
        if ridge_here or ridge_y:
            ridge_steps.append(i)

        t_mid = (i + 0.5) * dt
        v = fitted
        for _ in range(picard_iters):
            v = fitted + np.asarray(g(t_mid, v, z), dtype=float) * dt
        if not np.isfinite(v).all():
            raise NumericError(f"non-finite regression value at step {i}")
        contributions += v - fitted
        y = v

    y0 = float(np.mean(y))
    std_error = float(np.std(contributions, ddof=1) / math.sqrt(m))
    return LsmcSolution(y0=y0, std_error=std_error,
                        coeff_y=_freeze(coeff_y), coeff_z=_freeze(coeff_z),
                        paths_used=m, basis=basis, grid=paths.grid, dimension=d,
                        ridge_steps=tuple(sorted(ridge_steps)),
                        uses_running_extrema=extrema)


def lsmc_conditional_fn(sol: LsmcSolution, g: GeneratorSpec, i: int,
                        picard_iters: int = 3):
    """Callable representation of the conditional value at step i as a
    function of the Brownian state (shape (n,) for d = 1, else (d, n)).

    Only available for claims regressed on the plain Brownian state.
    """
    if sol.uses_running_extrema:
        raise ValueError("conditional representation needs a plain Brownian state")
    if not 0 <= i < sol.grid.steps:
        raise IndexError(f"step index {i} out of range 0..{sol.grid.steps - 1}")
    t_mid = (i + 0.5) * sol.grid.dt
    dt = sol.grid.dt

    def conditional(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        state = x[:, None] if sol.dimension == 1 else x.T
        design = sol.basis.design_matrix(state)
        fitted = design @ sol.coeff_y[i]
        z = np.stack([design @ sol.coeff_z[i, k] for k in range(sol.dimension)])
        v = fitted
        for _ in range(picard_iters):
            v = fitted + np.asarray(g(t_mid, v, z), dtype=float) * dt
        return v

    return conditional
