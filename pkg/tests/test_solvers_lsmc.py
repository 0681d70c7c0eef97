import math

import numpy as np
import pytest

import gexpect as gx
from fixtures import LINEAR_BSDE_VALUE


class TestSimulatePaths:
    def test_reproducible(self, grid50):
        a = gx.simulate_paths(1, grid50, 500, seed=7)
        b = gx.simulate_paths(1, grid50, 500, seed=7)
        assert np.array_equal(a.increments, b.increments)

    def test_path_prefix_stability(self, grid50):
        # counter keying: the first paths of a bigger bundle are unchanged
        small = gx.simulate_paths(1, grid50, 100, seed=3)
        big = gx.simulate_paths(1, grid50, 200, seed=3)
        assert np.array_equal(big.increments[:, :100], small.increments)

    def test_moments(self):
        grid = gx.TimeGrid(1.0, 1)
        bundle = gx.simulate_paths(1, grid, 1_000_000, seed=7)
        db = bundle.increments[0, :, 0]
        assert abs(db.mean()) <= 5 * math.sqrt(grid.dt / bundle.n_paths)
        assert abs(db.var() - grid.dt) <= 5 * grid.dt * math.sqrt(2.0 / bundle.n_paths)

    def test_coordinates_uncorrelated(self):
        grid = gx.TimeGrid(1.0, 4)
        bundle = gx.simulate_paths(2, grid, 100_000, seed=11)
        x = bundle.increments[0, :, 0]
        y = bundle.increments[0, :, 1]
        corr = np.corrcoef(x, y)[0, 1]
        assert abs(corr) <= 5 / math.sqrt(bundle.n_paths)

    def test_brownian_starts_at_zero(self, paths50):
        b = paths50.brownian()
        assert np.array_equal(b[0], np.zeros_like(b[0]))
        assert b.shape == (51, 20_000, 1)

    def test_truncate(self, paths50):
        sub = paths50.truncate(10)
        assert sub.grid.steps == 10
        assert sub.grid.dt == paths50.grid.dt
        assert np.array_equal(sub.increments, paths50.increments[:10])

    def test_preconditions(self, grid50):
        with pytest.raises(ValueError):
            gx.simulate_paths(1, grid50, 1, seed=0)
        with pytest.raises(ValueError):
            gx.simulate_paths(0, grid50, 10, seed=0)


class TestSolveLsmc:
    def test_zero_driver_unbiased(self, g_zero, claim_x, paths50):
        sol = gx.solve_lsmc(g_zero, claim_x, paths50, basis=3)
        assert abs(sol.y0) <= 3 * sol.std_error

    def test_scaled_abs_matches_oracle(self, g_abs, claim_x, paths50):
        sol = gx.solve_lsmc(g_abs, claim_x, paths50, basis=3)
        assert abs(sol.y0 - 0.3) <= max(3 * sol.std_error, 1e-2)

    def test_linear_driver_closed_form(self, g_linear, claim_x):
        paths = gx.simulate_paths(1, gx.TimeGrid(1.0, 400), 10_000, seed=13)
        sol = gx.solve_lsmc(g_linear, claim_x, paths, basis=3)
        assert abs(sol.y0 - LINEAR_BSDE_VALUE) <= 3 * sol.std_error

    def test_two_dimensional_driver(self):
        # 0.2|z1| + 0.1|z2| with claim B1 + B2: 0.2 + 0.1 by the same
        # verification as in one dimension, coordinate by coordinate
        g = gx.parse_generator("0.2*abs(z1) + 0.1*abs(z2)", 2, lipschitz=0.3)
        xi = gx.parse_claim("x1 + x2", 2)
        paths = gx.simulate_paths(2, gx.TimeGrid(1.0, 30), 30_000, seed=5)
        sol = gx.solve_lsmc(g, xi, paths, basis=2)
        assert abs(sol.y0 - 0.3) <= max(3 * sol.std_error, 3e-2)

    def test_running_extrema_functional(self, g_zero):
        # driver 0: the regression solve telescopes to the plain sample mean
        pf = gx.Claim(kind="path_functional",
                      path_functional=lambda b: b[:, :, 0].max(axis=0),
                      uses_running_extrema=True)
        paths = gx.simulate_paths(1, gx.TimeGrid(1.0, 50), 20_000, seed=8)
        sol = gx.solve_lsmc(g_zero, pf, paths, basis=2)
        direct = float(paths.brownian()[:, :, 0].max(axis=0).mean())
        assert sol.y0 == pytest.approx(direct, abs=1e-9)
        assert sol.uses_running_extrema

    def test_determinism(self, g_abs, claim_x, paths50):
        a = gx.solve_lsmc(g_abs, claim_x, paths50, basis=3)
        b = gx.solve_lsmc(g_abs, claim_x, paths50, basis=3)
        assert a.y0 == b.y0 and a.std_error == b.std_error

    def test_ridge_fallback_at_degenerate_state(self, g_abs, claim_x, paths50):
        # the state at time 0 is identically zero, so every column beyond the
        # intercept vanishes and the ridge path must engage
        sol = gx.solve_lsmc(g_abs, claim_x, paths50, basis=3)
        assert 0 in sol.ridge_steps

    def test_coefficient_shapes(self, g_abs, claim_x, paths50):
        sol = gx.solve_lsmc(g_abs, claim_x, paths50, basis=3)
        n_terms = sol.basis.n_terms(1)
        assert sol.coeff_y.shape == (50, n_terms)
        assert sol.coeff_z.shape == (50, 1, n_terms)

    def test_preconditions(self, g_abs, claim_x, paths50):
        with pytest.raises(ValueError):
            gx.solve_lsmc(g_abs, claim_x, paths50, basis=0)
        with pytest.raises(ValueError):
            gx.solve_lsmc(g_abs, claim_x, paths50, basis=3, picard_iters=0)
        g2 = gx.parse_generator("abs(z1)+abs(z2)", 2, lipschitz=2.0)
        with pytest.raises(ValueError, match="dimension"):
            gx.solve_lsmc(g2, claim_x, paths50)

    def test_non_finite_claim_named(self, g_abs, paths50):
        bad = gx.Claim(kind="terminal_function",
                       terminal_function=lambda x: np.where(x > 2, np.nan, x))
        with pytest.raises(gx.NumericError, match="step 50"):
            gx.solve_lsmc(g_abs, bad, paths50)


class TestConditionalFn:
    def test_matches_reference_solution(self, g_zero, claim_x, paths50):
        from gexpect.solvers import lsmc_conditional_fn
        sol = gx.solve_lsmc(g_zero, claim_x, paths50, basis=3)
        fn = lsmc_conditional_fn(sol, g_zero, 25)
        xs = np.linspace(-1.5, 1.5, 9)
        # martingale: conditional value of B_T given B_t = x is x
        assert np.allclose(fn(xs), xs, atol=0.05)

    def test_extrema_blocked(self, g_zero, paths50):
        from gexpect.solvers import lsmc_conditional_fn
        pf = gx.Claim(kind="path_functional",
                      path_functional=lambda b: b[:, :, 0].max(axis=0),
                      uses_running_extrema=True)
        sol = gx.solve_lsmc(g_zero, pf, paths50, basis=2)
        with pytest.raises(ValueError):
            lsmc_conditional_fn(sol, g_zero, 10)


class TestPolynomialBasis:
    def test_one_dimension_is_vandermonde(self):
        basis = gx.PolynomialBasis(3)
        x = np.array([[2.0], [3.0]])
        design = basis.design_matrix(x)
        assert np.allclose(design, [[1, 2, 4, 8], [1, 3, 9, 27]])

    def test_total_degree_count(self):
        # number of monomials of total degree <= p in v variables
        basis = gx.PolynomialBasis(2)
        assert basis.n_terms(2) == 6  # 1, x, y, x^2, xy, y^2

    def test_degree_guard(self):
        with pytest.raises(ValueError):
            gx.PolynomialBasis(0)
