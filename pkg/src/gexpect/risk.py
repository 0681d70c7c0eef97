"""Risk measures induced by nonlinear expectations.

A position X is charged rho(X) = value of -X under the driver's expectation;
the dynamic variant is the conditional value of -X at each grid time.
``classify`` measures the monetary / convex / coherent axioms directly on the
operator (statically and nodewise at interior times), derives the same
verdicts from sampled driver properties, and insists the two routes agree:
a mismatch raises instead of picking a side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .expectation import (ConditionalSlice, check_driver, conditional_g_expectation,
                          g_expectation)
from .model import (Claim, GeneratorSpec, TimeGrid, combine_claims, negate_claim,
                    scale_claim, shift_claim)
from .properties import (DEFAULT_ALPHAS, DEFAULT_CONSTANTS,
                         DEFAULT_DYNAMIC_FRACTIONS, DEFAULT_LAMBDAS,
                         LATTICE_IDENTITY_TOL, PropertyReport, _dynamic_indices,
                         _report, check_generator_side, default_claims)
from .solvers import solve_lattice


def rho_static(g: GeneratorSpec, position: Claim, grid: TimeGrid,
               method: str = "lattice", **kwargs) -> float:
    """Risk charge of a position: the value of its negation."""
    return g_expectation(g, negate_claim(position), grid, method, **kwargs).value


def rho_dynamic(g: GeneratorSpec, position: Claim, grid: TimeGrid, t_index: int,
                method: str = "lattice", **kwargs):
    """Conditional risk charge at a grid time (node values on the lattice)."""
    return conditional_g_expectation(g, negate_claim(position), grid, t_index,
                                     method, **kwargs)


class ClassificationError(ValueError):
    """Operator-measured and driver-implied verdicts disagree."""

    def __init__(self, message, operator_verdicts, generator_verdicts,
                 axiom_reports, generator_reports):
        super().__init__(message)
        self.operator_verdicts = operator_verdicts
        self.generator_verdicts = generator_verdicts
        self.axiom_reports = axiom_reports
        self.generator_reports = generator_reports


@dataclass(frozen=True)
class RiskClassification:
    """Nested verdicts (coherent => convex => monetary) with the axiom
    evidence backing them."""

    monetary: bool
    convex: bool
    coherent: bool
    axiom_reports: dict
    route: str = "operator_tested"

    def __post_init__(self):
        if self.coherent and not self.convex:
            raise ValueError("coherent requires convex")
        if self.convex and not self.monetary:
            raise ValueError("convex requires monetary")


def _ordered_pairs(positions: dict) -> list:
    """Pointwise-ordered pairs (X, Y) with X <= Y, built by adding nonnegative
    claims to each battery position."""
    from .gdsl import parse_claim
    bumps = {"pos(x-0.5)": parse_claim("pos(x-0.5)", 1),
             "abs(x)": parse_claim("abs(x)", 1)}
    pairs = []
    for name, x in positions.items():
        for bump_name, bump in bumps.items():
            pairs.append(((name, x),
                          (f"{name}+{bump_name}", combine_claims(1.0, x, 1.0, bump))))
    return pairs


def classify(g: GeneratorSpec, positions: dict = None, grid: TimeGrid = None,
             tol: float = LATTICE_IDENTITY_TOL, *,
             constants=DEFAULT_CONSTANTS, alphas=DEFAULT_ALPHAS,
             lambdas=DEFAULT_LAMBDAS,
             dynamic_fractions=DEFAULT_DYNAMIC_FRACTIONS,
             generator_tol: float = 1e-9, n_samples: int = 4096, seed: int = 0,
             strict: bool = True) -> RiskClassification:
    """Measure the risk-measure axioms on a battery of positions and classify.

    Every axiom is universally quantified: a single witness beyond tolerance
    fails it, nothing is averaged.  The driver-implied classification (from
    sampled structural properties) must match the measured one; otherwise a
    ClassificationError carries both sets of reports.
    """
    positions = positions if positions is not None else default_claims()
    check_driver(g, grid, strict=strict)
    times = _dynamic_indices(grid, dynamic_fractions)

    solutions = {}

    def solve(key, claim):
        if key not in solutions:
            solutions[key] = solve_lattice(g, negate_claim(claim), grid)
        return solutions[key]

    mono_static, mono_dynamic = [], []
    for (name_x, x), (name_y, y_claim) in _ordered_pairs(positions):
        sol_x, sol_y = solve(name_x, x), solve(name_y, y_claim)
        # X <= Y pointwise must give rho(Y) <= rho(X)
        v = sol_y.y0 - sol_x.y0
        mono_static.append((max(v, 0.0), {"positions": (name_x, name_y),
                                          "level": "static_operator"}))
        for i in times:
            gap = float(np.max(sol_y.slice_at(i) - sol_x.slice_at(i)))
            mono_dynamic.append((max(gap, 0.0),
                                 {"positions": (name_x, name_y), "time_index": i,
                                  "level": "dynamic_operator"}))

    trans_static, trans_dynamic = [], []
    for name, x in positions.items():
        base = solve(name, x)
        for c in constants:
            shifted = solve((name, "+", c), shift_claim(x, c))
            v = abs(shifted.y0 - (base.y0 - c))
            trans_static.append((v, {"position": name, "c": c,
                                     "level": "static_operator"}))
            for i in times:
                gap = float(np.max(np.abs(shifted.slice_at(i)
                                          - (base.slice_at(i) - c))))
                trans_dynamic.append((gap, {"position": name, "c": c,
                                            "time_index": i,
                                            "level": "dynamic_operator"}))

    names = list(positions)
    conv_static, conv_dynamic = [], []
    for ia, name_a in enumerate(names):
        for name_b in names[ia + 1:]:
            xa, xb = positions[name_a], positions[name_b]
            sol_a, sol_b = solve(name_a, xa), solve(name_b, xb)
            for lam in alphas:
                mix = solve((name_a, name_b, lam),
                            combine_claims(lam, xa, 1.0 - lam, xb))
                v = mix.y0 - (lam * sol_a.y0 + (1.0 - lam) * sol_b.y0)
                conv_static.append((max(v, 0.0),
                                    {"positions": (name_a, name_b), "lambda": lam,
                                     "level": "static_operator"}))
                for i in times:
                    gap = float(np.max(mix.slice_at(i)
                                       - (lam * sol_a.slice_at(i)
                                          + (1.0 - lam) * sol_b.slice_at(i))))
                    conv_dynamic.append((max(gap, 0.0),
                                         {"positions": (name_a, name_b),
                                          "lambda": lam, "time_index": i,
                                          "level": "dynamic_operator"}))

    homog_static, homog_dynamic = [], []
    for name, x in positions.items():
        base = solve(name, x)
        for lam in lambdas:
            scaled = solve((name, "*", lam), scale_claim(x, lam))
            v = abs(scaled.y0 - lam * base.y0)
            homog_static.append((v, {"position": name, "lambda": lam,
                                     "level": "static_operator"}))
            for i in times:
                gap = float(np.max(np.abs(scaled.slice_at(i)
                                          - lam * base.slice_at(i))))
                homog_dynamic.append((gap, {"position": name, "lambda": lam,
                                            "time_index": i,
                                            "level": "dynamic_operator"}))

    # at the horizon the charge must be the negated position, node for node
    terminal = []
    n = grid.steps
    for name, x in positions.items():
        sol = solve(name, x)
        states = sol.node_states(n)
        direct = np.asarray(negate_claim(x)(states), dtype=float)
        gap = float(np.max(np.abs(sol.slice_at(n) - direct)))
        terminal.append((gap, {"position": name, "time_index": n,
                               "level": "dynamic_operator"}))

    axiom_reports = {
        "monotonicity": _report("monotonicity", "static_operator", mono_static, tol),
        "dynamic_monotonicity": _report("monotonicity", "dynamic_operator",
                                        mono_dynamic, tol),
        "translation_invariance": _report("translation_invariance",
                                          "static_operator", trans_static, tol),
        "dynamic_translation_invariance": _report("translation_invariance",
                                                  "dynamic_operator",
                                                  trans_dynamic, tol),
        "convexity": _report("convexity", "static_operator", conv_static, tol),
        "dynamic_convexity": _report("convexity", "dynamic_operator",
                                     conv_dynamic, tol),
        "positive_homogeneity": _report("positive_homogeneity", "static_operator",
                                        homog_static, tol),
        "dynamic_positive_homogeneity": _report("positive_homogeneity",
                                                "dynamic_operator",
                                                homog_dynamic, tol),
        "terminal_identity": _report("terminal_identity", "dynamic_operator",
                                     terminal, 0.0),
    }

    op_monetary = (axiom_reports["monotonicity"].passed
                   and axiom_reports["dynamic_monotonicity"].passed
                   and axiom_reports["translation_invariance"].passed
                   and axiom_reports["dynamic_translation_invariance"].passed
                   and axiom_reports["terminal_identity"].passed)
    op_convex = (op_monetary and axiom_reports["convexity"].passed
                 and axiom_reports["dynamic_convexity"].passed)
    op_coherent = (op_convex and axiom_reports["positive_homogeneity"].passed
                   and axiom_reports["dynamic_positive_homogeneity"].passed)

    gen_reports = check_generator_side(g, None, n_samples, seed, generator_tol,
                                       alphas=alphas,
                                       lambdas=tuple(l for l in lambdas if l >= 0))
    y_free = gen_reports["translation_invariance"].passed
    gen_monetary = y_free
    gen_convex = y_free and gen_reports["convexity"].passed
    gen_coherent = (y_free and gen_reports["subadditivity"].passed
                    and gen_reports["positive_homogeneity"].passed)

    ops = (op_monetary, op_convex, op_coherent)
    gens = (gen_monetary, gen_convex, gen_coherent)
    if ops != gens:
        raise ClassificationError(
            f"operator-measured verdicts {ops} != driver-implied verdicts {gens} "
            "(monetary, convex, coherent)", ops, gens, axiom_reports, gen_reports)

    return RiskClassification(monetary=op_monetary, convex=op_convex,
                              coherent=op_coherent, axiom_reports=axiom_reports,
                              route="operator_tested")
