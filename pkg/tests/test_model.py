import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import gexpect as gx
from gexpect.model import EvaluationError


class TestTimeGrid:
    def test_basic(self):
        grid = gx.TimeGrid(2.0, 8)
        assert grid.dt == 0.25
        assert np.allclose(grid.times(), np.arange(9) * 0.25)

    def test_invalid(self):
        with pytest.raises(ValueError):
            gx.TimeGrid(1.0, 0)
        with pytest.raises(ValueError):
            gx.TimeGrid(-1.0, 4)
        with pytest.raises(ValueError):
            gx.TimeGrid(1.0, 4, dt=0.3)

    def test_truncate_keeps_dt_bitwise(self):
        grid = gx.TimeGrid(1.0, 10)  # dt = 0.1 is not dyadic
        sub = grid.truncate(3)
        assert sub.dt == grid.dt
        assert sub.steps == 3
        with pytest.raises(ValueError):
            grid.truncate(0)
        with pytest.raises(ValueError):
            grid.truncate(11)


class TestValidateAssumptions:
    def test_scaled_abs_passes(self, g_abs):
        rep = gx.validate_assumptions(g_abs, n_samples=20_000, seed=1)
        assert rep.a1_pass
        assert rep.a3_max_abs == 0.0
        assert rep.a3_pass

    def test_pure_y_driver_fails_normalization(self):
        g = gx.GeneratorSpec(body=lambda t, y, z: y + 0.0 * z[0],
                             dimension=1, lipschitz=1.0)
        rep = gx.validate_assumptions(g, n_samples=5_000, seed=2)
        assert not rep.a3_pass
        assert rep.a3_max_abs > 0.5  # |y| samples reach well beyond any tol

    def test_sin_min_quotient_within_declared_bound(self, g_sin):
        # independent oracle: dense-grid maximization of the difference
        # quotient over the sampling box, confirming the bound of 1
        ys = np.linspace(-10, 10, 41)
        zs = np.linspace(-10, 10, 41)
        y1, y2, z1, z2 = np.meshgrid(ys, ys, zs, zs, indexing="ij", sparse=True)
        num = np.abs(np.sin(y1) * np.minimum(np.abs(z1), 1.0)
                     - np.sin(y2) * np.minimum(np.abs(z2), 1.0))
        den = np.abs(y1 - y2) + np.abs(z1 - z2)
        quot = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        assert quot.max() <= 1.0 + 1e-12

        rep = gx.validate_assumptions(g_sin, n_samples=50_000, tol=1e-9, seed=3)
        assert rep.a1_pass
        assert rep.a3_pass

    def test_declared_bound_falsified(self):
        g = gx.GeneratorSpec(body=lambda t, y, z: np.abs(z[0]),
                             dimension=1, lipschitz=0.5)
        rep = gx.validate_assumptions(g, n_samples=20_000, seed=4)
        assert not rep.a1_pass

    def test_deterministic_given_seed(self, g_abs):
        a = gx.validate_assumptions(g_abs, n_samples=10_000, seed=9)
        b = gx.validate_assumptions(g_abs, n_samples=10_000, seed=9)
        assert a == b

    def test_non_finite_named(self):
        def bad(t, y, z):
            with np.errstate(divide="ignore"):
                return y / (0.0 * y + 0.0)

        g = gx.GeneratorSpec(body=bad, dimension=1, lipschitz=1.0)
        with pytest.raises(EvaluationError, match="non-finite"):
            gx.validate_assumptions(g, n_samples=100, seed=0)

    def test_preconditions(self, g_abs):
        with pytest.raises(ValueError):
            gx.validate_assumptions(g_abs, n_samples=0)
        with pytest.raises(ValueError):
            gx.validate_assumptions(g_abs, tol=0.0)

    @settings(max_examples=25, deadline=None)
    @given(a=st.floats(-2, 2, allow_nan=False), b=st.floats(-2, 2, allow_nan=False),
           seed=st.integers(0, 2 ** 32))
    def test_affine_always_within_bound(self, a, b, seed):
        bound = max(abs(a), abs(b))
        g = gx.GeneratorSpec(body=lambda t, y, z: a * y + b * z[0],
                             dimension=1, lipschitz=bound)
        rep = gx.validate_assumptions(g, n_samples=2_000, seed=seed)
        assert rep.a1_pass

    def test_syntactic_z_factor_gives_exact_zero(self):
        for src in ("0.3*abs(z1)", "sin(y)*min(abs(z1),1)", "z1*z1/(1+abs(z1))"):
            g = gx.parse_generator(src, 1, lipschitz=10.0)
            rep = gx.validate_assumptions(g, n_samples=2_000, seed=5)
            assert rep.a3_max_abs == 0.0


class TestClaimCombinators:
    def test_combine(self, claim_x, claim_x2):
        mix = gx.combine_claims(2.0, claim_x, -1.0, claim_x2)
        assert mix(3.0) == pytest.approx(2 * 3 - 9)

    def test_shift_scale_negate(self, claim_x):
        assert gx.shift_claim(claim_x, 5.0)(1.0) == 6.0
        assert gx.scale_claim(claim_x, -2.0)(3.0) == -6.0
        assert gx.negate_claim(claim_x)(3.0) == -3.0

    def test_constant(self):
        c = gx.constant_claim(4.0)
        assert np.allclose(c(np.array([1.0, -2.0])), [4.0, 4.0])

    def test_lipschitz_propagates(self, claim_x):
        xi = gx.parse_claim("x", 1, lipschitz=1.0)
        mix = gx.combine_claims(2.0, xi, 3.0, xi)
        assert mix.lipschitz == pytest.approx(5.0)

    def test_kind_guard(self):
        pf = gx.Claim(kind="path_functional", path_functional=lambda b: b[-1, :, 0])
        with pytest.raises(ValueError):
            gx.shift_claim(pf, 1.0)
        with pytest.raises(ValueError):
            pf(1.0)


class TestGeneratorSpec:
    def test_transforms(self, g_sin):
        shifted = g_sin.shifted_in_y(2.0)
        z = np.array([1.0])
        assert shifted(0.0, 2.0, z) == pytest.approx(g_sin(0.0, 0.0, z))
        scaled = g_sin.scaled(3.0)
        assert scaled(0.0, 3.0, 3.0 * z) == pytest.approx(3.0 * g_sin(0.0, 1.0, z))
        moved = g_sin.time_shifted(0.5)
        assert moved(0.1, 1.0, z) == g_sin(0.6, 1.0, z)

    def test_validation(self):
        with pytest.raises(ValueError):
            gx.GeneratorSpec(body=lambda t, y, z: 0.0, dimension=0, lipschitz=1.0)
        with pytest.raises(ValueError):
            gx.GeneratorSpec(body=lambda t, y, z: 0.0, dimension=1, lipschitz=-1.0)
        with pytest.raises(ValueError):
            g = gx.GeneratorSpec(body=lambda t, y, z: 0.0, dimension=1, lipschitz=1.0)
            g.scaled(0.0)
