"""Numerical harness for the operator/driver equivalences.

Four functional properties of the expectation operator each correspond to a
structural property of the driver:

* translation invariance  <->  driver independent of y
* convexity               <->  driver independent of y and convex in z
* subadditivity           <->  driver independent of y and subadditive in z
* positive homogeneity    <->  driver positively homogeneous in (y, z)

The harness measures both sides: operator-level violations over a battery of
claims (statically and nodewise at interior times), driver-level violations
by randomized sampling, and transform identities that tie the two levels
together.  ``theorem_verdict`` assembles the sides and judges whether they
agree.  When the driver side fails decisively but the claim battery exposes
no operator violation, the verdict is reported inconclusive rather than
consistent: the battery only searches a fixed set of claims.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng
from .expectation import check_driver
from .model import (Claim, GeneratorSpec, SamplingBox, TimeGrid, combine_claims,
                    scale_claim, shift_claim)
from .solvers import solve_lattice

THEOREMS = ("translation_invariance", "convexity", "subadditivity",
            "positive_homogeneity")

LATTICE_IDENTITY_TOL = 1e-9
GENERATOR_TOL = 1e-9
TRANSFORM_TOL = 1e-12

DEFAULT_CLAIM_SOURCES = ("x", "-x", "x*x", "abs(x)", "pos(x-0.5)", "min(x,1)")
DEFAULT_CONSTANTS = (-2.0, -0.5, 0.0, 1.0, 5.0)
DEFAULT_ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_LAMBDAS = (0.0, 0.5, 1.0, 2.0, 2.5)
DEFAULT_DYNAMIC_FRACTIONS = (0.25, 0.5)


def default_claims() -> dict:
    from .gdsl import parse_claim
    return {src: parse_claim(src, 1) for src in DEFAULT_CLAIM_SOURCES}


@dataclass(frozen=True)
class PropertyReport:
    """Worst observed violation of one property at one or more levels."""

    property: str
    level: str  # "static_operator" | "dynamic_operator" | "generator"
    instances_tested: int
    max_violation: float
    witness: Optional[dict]
    tol: float
    passed: bool

    def __post_init__(self):
        if self.passed != (self.max_violation <= self.tol):
            raise ValueError("passed must equal (max_violation <= tol)")
        if self.instances_tested >= 1 and self.witness is None:
            raise ValueError("witness required when instances were tested")


def _report(prop, level, instances, tol):
    """Build a PropertyReport from (violation, witness) pairs."""
    if not instances:
        return PropertyReport(property=prop, level=level, instances_tested=0,
                              max_violation=0.0, witness=None, tol=tol, passed=True)
    worst = max(instances, key=lambda vw: vw[0])
    return PropertyReport(property=prop, level=level,
                          instances_tested=len(instances),
                          max_violation=float(worst[0]),
                          witness=dict(worst[1], violation=float(worst[0])),
                          tol=tol, passed=bool(worst[0] <= tol))


def _merge_reports(prop, reports, tol):
    instances = sum(r.instances_tested for r in reports)
    worst = max(reports, key=lambda r: r.max_violation)
    return PropertyReport(property=prop, level=worst.level,
                          instances_tested=instances,
                          max_violation=worst.max_violation,
                          witness=worst.witness, tol=tol,
                          passed=bool(worst.max_violation <= tol))


def _dynamic_indices(grid: TimeGrid, fractions) -> tuple:
    idx = sorted({max(1, min(grid.steps - 1, round(grid.steps * f)))
                  for f in fractions}) if grid.steps > 1 else []
    return tuple(idx)


class _LatticeCache:
    """One backward solve per distinct claim, slices shared by every instance."""

    def __init__(self, g, grid, strict=True):
        check_driver(g, grid, strict=strict)
        self.g = g
        self.grid = grid
        self._solutions = {}

    def solve(self, key, claim):
        if key not in self._solutions:
            self._solutions[key] = solve_lattice(self.g, claim, self.grid)
        return self._solutions[key]


def check_translation_invariance(g: GeneratorSpec, claims: dict = None,
                                 constants=DEFAULT_CONSTANTS,
                                 grid: TimeGrid = None,
                                 tol: float = LATTICE_IDENTITY_TOL, *,
                                 dynamic_fractions=DEFAULT_DYNAMIC_FRACTIONS,
                                 strict: bool = True) -> PropertyReport:
    """Worst violation of value(claim + c) = value(claim) + c over the battery,
    statically and nodewise at interior times."""
    static, dynamic = translation_reports(g, claims, constants, grid, tol,
                                          dynamic_fractions=dynamic_fractions,
                                          strict=strict)
    return _merge_reports("translation_invariance", [static, dynamic], tol)


def translation_reports(g, claims=None, constants=DEFAULT_CONSTANTS, grid=None,
                        tol=LATTICE_IDENTITY_TOL, *,
                        dynamic_fractions=DEFAULT_DYNAMIC_FRACTIONS,
                        strict=True):
    claims = claims if claims is not None else default_claims()
    cache = _LatticeCache(g, grid, strict=strict)
    times = _dynamic_indices(grid, dynamic_fractions)
    static, dynamic = [], []
    for name, xi in claims.items():
        base = cache.solve(name, xi)
        for c in constants:
            shifted = cache.solve((name, "+", c), shift_claim(xi, c))
            v = abs(shifted.y0 - base.y0 - c)
            static.append((v, {"claim": name, "c": c, "level": "static_operator"}))
            for i in times:
                gap = float(np.max(np.abs(shifted.slice_at(i) - base.slice_at(i) - c)))
                dynamic.append((gap, {"claim": name, "c": c, "time_index": i,
                                      "level": "dynamic_operator"}))
    return (_report("translation_invariance", "static_operator", static, tol),
            _report("translation_invariance", "dynamic_operator", dynamic, tol))


def check_convexity(g: GeneratorSpec, claim_pairs=None, alphas=DEFAULT_ALPHAS,
                    grid: TimeGrid = None, tol: float = LATTICE_IDENTITY_TOL, *,
                    dynamic_fractions=DEFAULT_DYNAMIC_FRACTIONS,
                    strict: bool = True) -> PropertyReport:
    """Worst positive part of value(mix) - mixed values over claim pairs and weights."""
    static, dynamic = convexity_reports(g, claim_pairs, alphas, grid, tol,
                                        dynamic_fractions=dynamic_fractions,
                                        strict=strict)
    return _merge_reports("convexity", [static, dynamic], tol)


def _battery_pairs(claims):
    names = list(claims)
    return [((a, claims[a]), (b, claims[b]))
            for i, a in enumerate(names) for b in names[i + 1:]]


def convexity_reports(g, claim_pairs=None, alphas=DEFAULT_ALPHAS, grid=None,
                      tol=LATTICE_IDENTITY_TOL, *,
                      dynamic_fractions=DEFAULT_DYNAMIC_FRACTIONS, strict=True):
    if claim_pairs is None:
        claim_pairs = _battery_pairs(default_claims())
    cache = _LatticeCache(g, grid, strict=strict)
    times = _dynamic_indices(grid, dynamic_fractions)
    static, dynamic = [], []
    for (name_a, xi), (name_b, eta) in claim_pairs:
        sol_a = cache.solve(name_a, xi)
        sol_b = cache.solve(name_b, eta)
        for a in alphas:
            mix = cache.solve((name_a, name_b, a),
                              combine_claims(a, xi, 1.0 - a, eta))
            v = mix.y0 - (a * sol_a.y0 + (1.0 - a) * sol_b.y0)
            static.append((max(v, 0.0), {"claims": (name_a, name_b), "alpha": a,
                                         "level": "static_operator"}))
            for i in times:
                gap = float(np.max(mix.slice_at(i)
                                   - (a * sol_a.slice_at(i)
                                      + (1.0 - a) * sol_b.slice_at(i))))
                dynamic.append((max(gap, 0.0),
                                {"claims": (name_a, name_b), "alpha": a,
                                 "time_index": i, "level": "dynamic_operator"}))
    return (_report("convexity", "static_operator", static, tol),
            _report("convexity", "dynamic_operator", dynamic, tol))


def check_subadditivity(g: GeneratorSpec, claim_pairs=None, grid: TimeGrid = None,
                        tol: float = LATTICE_IDENTITY_TOL, *,
                        dynamic_fractions=DEFAULT_DYNAMIC_FRACTIONS,
                        strict: bool = True) -> PropertyReport:
    """Worst positive part of value(xi + eta) - value(xi) - value(eta)."""
    static, dynamic = subadditivity_reports(g, claim_pairs, grid, tol,
                                            dynamic_fractions=dynamic_fractions,
                                            strict=strict)
    return _merge_reports("subadditivity", [static, dynamic], tol)


def subadditivity_reports(g, claim_pairs=None, grid=None,
                          tol=LATTICE_IDENTITY_TOL, *,
                          dynamic_fractions=DEFAULT_DYNAMIC_FRACTIONS,
                          strict=True):
    if claim_pairs is None:
        claim_pairs = _battery_pairs(default_claims())
    cache = _LatticeCache(g, grid, strict=strict)
    times = _dynamic_indices(grid, dynamic_fractions)
    static, dynamic = [], []
    for (name_a, xi), (name_b, eta) in claim_pairs:
        sol_a = cache.solve(name_a, xi)
        sol_b = cache.solve(name_b, eta)
        total = cache.solve((name_a, "+", name_b), combine_claims(1.0, xi, 1.0, eta))
        v = total.y0 - sol_a.y0 - sol_b.y0
        static.append((max(v, 0.0), {"claims": (name_a, name_b),
                                     "level": "static_operator"}))
        for i in times:
            gap = float(np.max(total.slice_at(i) - sol_a.slice_at(i)
                               - sol_b.slice_at(i)))
            dynamic.append((max(gap, 0.0), {"claims": (name_a, name_b),
                                            "time_index": i,
                                            "level": "dynamic_operator"}))
    return (_report("subadditivity", "static_operator", static, tol),
            _report("subadditivity", "dynamic_operator", dynamic, tol))


def check_positive_homogeneity(g: GeneratorSpec, claims: dict = None,
                               lambdas=DEFAULT_LAMBDAS, grid: TimeGrid = None,
                               tol: float = LATTICE_IDENTITY_TOL, *,
                               dynamic_fractions=DEFAULT_DYNAMIC_FRACTIONS,
                               strict: bool = True) -> PropertyReport:
    """Worst |value(lam * claim) - lam * value(claim)| over the battery and scalings."""
    static, dynamic = homogeneity_reports(g, claims, lambdas, grid, tol,
                                          dynamic_fractions=dynamic_fractions,
                                          strict=strict)
    return _merge_reports("positive_homogeneity", [static, dynamic], tol)


def homogeneity_reports(g, claims=None, lambdas=DEFAULT_LAMBDAS, grid=None,
                        tol=LATTICE_IDENTITY_TOL, *,
                        dynamic_fractions=DEFAULT_DYNAMIC_FRACTIONS, strict=True):
    if any(lam < 0 for lam in lambdas):
        raise ValueError("homogeneity scalings must be >= 0")
    claims = claims if claims is not None else default_claims()
    cache = _LatticeCache(g, grid, strict=strict)
    times = _dynamic_indices(grid, dynamic_fractions)
    static, dynamic = [], []
    for name, xi in claims.items():
        base = cache.solve(name, xi)
        for lam in lambdas:
            scaled = cache.solve((name, "*", lam), scale_claim(xi, lam))
            v = abs(scaled.y0 - lam * base.y0)
            static.append((v, {"claim": name, "lambda": lam,
                               "level": "static_operator"}))
            for i in times:
                gap = float(np.max(np.abs(scaled.slice_at(i)
                                          - lam * base.slice_at(i))))
                dynamic.append((gap, {"claim": name, "lambda": lam,
                                      "time_index": i,
                                      "level": "dynamic_operator"}))
    return (_report("positive_homogeneity", "static_operator", static, tol),
            _report("positive_homogeneity", "dynamic_operator", dynamic, tol))


def check_generator_side(g: GeneratorSpec, box: SamplingBox = None,
                         n: int = 4096, seed: int = 0,
                         tol: float = GENERATOR_TOL,
                         alphas=DEFAULT_ALPHAS, lambdas=DEFAULT_LAMBDAS) -> dict:
    """Sampled driver-level violations, one report per property.

    Returns reports keyed by theorem name: y-dependence (translation),
    convexity defect in z, subadditivity defect in z, and homogeneity defect
    in (y, z).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    box = box or SamplingBox()
    d = g.dimension
    idx = np.arange(n)

    def draw(slot, lo, hi):
        return rng.counter_uniform_in(lo, hi, seed, idx, np.full(n, slot))

    t = draw(0, *box.t)
    y1 = draw(1, *box.y)
    y2 = draw(2, *box.y)
    z1 = np.stack([draw(3 + k, *box.z) for k in range(d)])
    z2 = np.stack([draw(3 + d + k, *box.z) for k in range(d)])

    def witness(k, extra):
        return dict({"t": float(t[k]), "level": "generator"}, **extra)

    reports = {}

    # y-dependence: |g(t, y1, z) - g(t, y2, z)|
    dep = np.abs(np.asarray(g(t, y1, z1)) - np.asarray(g(t, y2, z1)))
    k = int(np.argmax(dep))
    reports["translation_invariance"] = PropertyReport(
        property="translation_invariance", level="generator", instances_tested=n,
        max_violation=float(dep[k]),
        witness=witness(k, {"y1": float(y1[k]), "y2": float(y2[k]),
                            "z": z1[:, k].tolist(), "violation": float(dep[k])}),
        tol=tol, passed=bool(dep[k] <= tol))

    # convexity in z at fixed y: positive part of the chord defect
    best = (0.0, witness(0, {"alpha": alphas[0]}))
    count = 0
    for a in alphas:
        mix = np.asarray(g(t, y1, a * z1 + (1.0 - a) * z2))
        defect = mix - (a * np.asarray(g(t, y1, z1))
                        + (1.0 - a) * np.asarray(g(t, y1, z2)))
        count += n
        k = int(np.argmax(defect))
        if defect[k] > best[0]:
            best = (float(defect[k]),
                    witness(k, {"alpha": a, "y": float(y1[k]),
                                "z1": z1[:, k].tolist(), "z2": z2[:, k].tolist()}))
    reports["convexity"] = PropertyReport(
        property="convexity", level="generator", instances_tested=count,
        max_violation=max(best[0], 0.0),
        witness=dict(best[1], violation=max(best[0], 0.0)), tol=tol,
        passed=bool(best[0] <= tol))

    # subadditivity in z: g(t, z1 + z2) - g(t, z1) - g(t, z2), y fixed
    sub = (np.asarray(g(t, y1, z1 + z2)) - np.asarray(g(t, y1, z1))
           - np.asarray(g(t, y1, z2)))
    k = int(np.argmax(sub))
    v = max(float(sub[k]), 0.0)
    reports["subadditivity"] = PropertyReport(
        property="subadditivity", level="generator", instances_tested=n,
        max_violation=v,
        witness=witness(k, {"y": float(y1[k]), "z1": z1[:, k].tolist(),
                            "z2": z2[:, k].tolist(), "violation": v}),
        tol=tol, passed=bool(v <= tol))

    # positive homogeneity in (y, z): |g(t, lam*y, lam*z) - lam*g(t, y, z)|
    base_val = np.asarray(g(t, y1, z1))
    best = (0.0, witness(0, {"lambda": lambdas[0]}))
    count = 0
    for lam in lambdas:
        gap = np.abs(np.asarray(g(t, lam * y1, lam * z1)) - lam * base_val)
        count += n
        k = int(np.argmax(gap))
        if gap[k] > best[0]:
            best = (float(gap[k]),
                    witness(k, {"lambda": lam, "y": float(y1[k]),
                                "z": z1[:, k].tolist()}))
    reports["positive_homogeneity"] = PropertyReport(
        property="positive_homogeneity", level="generator", instances_tested=count,
        max_violation=best[0], witness=dict(best[1], violation=best[0]),
        tol=tol, passed=bool(best[0] <= tol))

    return reports


@dataclass(frozen=True)
class TransformCheckResult:
    shift_gap: float      # value under the y-shifted driver of claim + c, vs value + c
    scale_gap: float      # value under the rescaled driver of alpha * claim, vs alpha * value
    tol: float
    passed: bool


def transform_identity_checks(g: GeneratorSpec, c: float, alpha: float,
                              claim: Claim, grid: TimeGrid,
                              tol: float = TRANSFORM_TOL, *,
                              strict: bool = True) -> TransformCheckResult:
    """Structural change-of-variables identities of the backward recursion.

    Shifting the driver's y argument by c makes the value of claim + c equal
    the original value + c; rescaling the driver by alpha makes the value of
    alpha * claim equal alpha times the original.  Both are exact up to
    rounding, whatever the driver.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    check_driver(g, grid, strict=strict)
    base = solve_lattice(g, claim, grid).y0
    shifted = solve_lattice(g.shifted_in_y(c), shift_claim(claim, c), grid).y0
    scaled = solve_lattice(g.scaled(alpha), scale_claim(claim, alpha), grid).y0
    shift_gap = abs(shifted - (base + c))
    scale_gap = abs(scaled - alpha * base)
    return TransformCheckResult(shift_gap=shift_gap, scale_gap=scale_gap, tol=tol,
                                passed=bool(max(shift_gap, scale_gap) <= tol))


@dataclass(frozen=True)
class TheoremConfig:
    grid: TimeGrid
    claims: dict = None
    constants: tuple = DEFAULT_CONSTANTS
    alphas: tuple = DEFAULT_ALPHAS
    lambdas: tuple = DEFAULT_LAMBDAS
    dynamic_fractions: tuple = DEFAULT_DYNAMIC_FRACTIONS
    operator_tol: float = LATTICE_IDENTITY_TOL
    generator_tol: float = GENERATOR_TOL
    box: SamplingBox = field(default_factory=SamplingBox)
    n_samples: int = 4096
    seed: int = 0
    strict: bool = True

    def battery(self) -> dict:
        return self.claims if self.claims is not None else default_claims()


@dataclass(frozen=True)
class TheoremVerdict:
    """Driver-side and operator-side reports for one equivalence, plus the
    judgement whether they tell the same story."""

    theorem: str
    generator_side: PropertyReport
    operator_side: tuple
    consistent: bool
    notes: str = ""


def _combine_generator_reports(theorem, reports, tol):
    """The convexity/subadditivity equivalences require y-independence too."""
    if theorem in ("translation_invariance", "positive_homogeneity"):
        return reports[theorem]
    return _merge_reports(theorem, [reports["translation_invariance"],
                                    reports[theorem]], tol)


def theorem_verdict(theorem: str, g: GeneratorSpec,
                    config: TheoremConfig) -> TheoremVerdict:
    """Assemble the driver-side and operator-side evidence for one equivalence."""
    if theorem not in THEOREMS:
        raise ValueError(f"unknown theorem {theorem!r}; choose from {THEOREMS}")
    claims = config.battery()
    gen_reports = check_generator_side(g, config.box, config.n_samples,
                                       config.seed, config.generator_tol,
                                       alphas=config.alphas, lambdas=config.lambdas)
    generator_side = _combine_generator_reports(theorem, gen_reports,
                                                config.generator_tol)

    kw = dict(grid=config.grid, tol=config.operator_tol,
              dynamic_fractions=config.dynamic_fractions, strict=config.strict)
    if theorem == "translation_invariance":
        ops = translation_reports(g, claims, config.constants, **kw)
    elif theorem == "convexity":
        ops = convexity_reports(g, _battery_pairs(claims), config.alphas, **kw)
    elif theorem == "subadditivity":
        ops = subadditivity_reports(g, _battery_pairs(claims), **kw)
    else:
        ops = homogeneity_reports(g, claims, config.lambdas, **kw)

    all_op_pass = all(r.passed for r in ops)
    any_op_witness = any(r.max_violation > r.tol for r in ops)
    forward_ok = (not generator_side.passed) or all_op_pass
    decisive_failure = generator_side.max_violation > 10.0 * generator_side.tol
    backward_ok = (not decisive_failure) or any_op_witness
    consistent = forward_ok and backward_ok

    notes = ""
    if decisive_failure and not any_op_witness:
        notes = ("driver-side failure but no operator witness in the battery: "
                 "inconclusive, not consistent")
    elif generator_side.passed and all_op_pass:
        notes = "both sides hold"
    elif not generator_side.passed and any_op_witness:
        notes = "both sides fail, witnesses found"
    return TheoremVerdict(theorem=theorem, generator_side=generator_side,
                          operator_side=tuple(ops), consistent=bool(consistent),
                          notes=notes)
