import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import gexpect as gx
from gexpect import gdsl
from gexpect.model import EvaluationError


class TestParseGenerator:
    def test_scaled_abs(self):
        g = gx.parse_generator("0.3*abs(z1)", 1, lipschitz=0.3)
        assert g(0.0, 5.0, np.array([2.0])) == pytest.approx(0.6)

    def test_free_parameters_rejected(self):
        with pytest.raises(gx.ParseError, match="unknown identifier 'a'"):
            gx.parse_generator("a*y + b*z1", 1, lipschitz=1.0)

    def test_sin_min(self):
        g = gx.parse_generator("sin(y)*min(abs(z1),1)", 1, lipschitz=1.0)
        assert g(0.0, math.pi / 2, np.array([0.5])) == pytest.approx(0.5)

    def test_z_index_out_of_range(self):
        with pytest.raises(gx.ParseError, match="z-index out of range"):
            gx.parse_generator("z3", 2, lipschitz=1.0)

    def test_claim_variable_rejected(self):
        with pytest.raises(gx.ParseError, match="unknown identifier 'x'"):
            gx.parse_generator("x + z1", 1, lipschitz=1.0)

    def test_vectorized_body(self):
        g = gx.parse_generator("0.3*abs(z1)", 1, lipschitz=0.3)
        z = np.array([[-1.0, 0.0, 2.0]])
        assert np.allclose(g(0.0, 0.0, z), [0.3, 0.0, 0.6])


class TestParseClaim:
    def test_identity(self):
        phi = gx.parse_claim("x", 1)
        assert phi(3.5) == 3.5

    def test_square(self):
        phi = gx.parse_claim("x*x", 1)
        assert phi(2.0) == 4.0

    def test_pos(self):
        phi = gx.parse_claim("pos(x-0.5)", 1)
        assert phi(0.3) == 0.0
        assert phi(1.0) == pytest.approx(0.5)

    def test_generator_variables_rejected(self):
        for src in ("t", "y + x", "z1"):
            with pytest.raises(gx.ParseError):
                gx.parse_claim(src, 1)

    def test_multidim_claim(self):
        phi = gx.parse_claim("x1 + 2*x2", 2)
        assert phi(np.array([1.0, 3.0])) == pytest.approx(7.0)
        with pytest.raises(gx.ParseError, match="x-index out of range"):
            gx.parse_claim("x3", 2)

    def test_plain_x_only_for_d1(self):
        with pytest.raises(gx.ParseError, match="x-index out of range"):
            gx.parse_claim("x1", 1)


class TestSyntaxErrors:
    def test_offset_and_expected_set(self):
        with pytest.raises(gx.ParseError) as err:
            gdsl.parse_expr("1 + * 2", {"x"})
        assert err.value.offset == 4
        assert err.value.expected

    def test_empty(self):
        with pytest.raises(gx.ParseError):
            gdsl.parse_expr("   ", {"x"})

    def test_trailing_garbage(self):
        with pytest.raises(gx.ParseError, match="trailing"):
            gdsl.parse_expr("1 2", {"x"})

    def test_unbalanced_paren(self):
        with pytest.raises(gx.ParseError):
            gdsl.parse_expr("(1 + 2", {"x"})

    def test_unknown_function(self):
        with pytest.raises(gx.ParseError, match="unknown function"):
            gdsl.parse_expr("tan(x)", {"x"})

    def test_bad_arity(self):
        with pytest.raises(gx.ParseError, match="argument"):
            gdsl.parse_expr("abs(x, x)", {"x"})
        with pytest.raises(gx.ParseError, match="argument"):
            gdsl.parse_expr("min(x)", {"x"})

    def test_depth_limit(self):
        src = "(" * 70 + "x" + ")" * 70
        with pytest.raises(gx.ParseError, match="depth"):
            gdsl.parse_expr(src, {"x"})

    def test_byte_offset_for_nonascii(self):
        with pytest.raises(gx.ParseError) as err:
            gdsl.parse_expr("x + é", {"x"})
        assert err.value.offset == 4


class TestEvaluation:
    def test_division_by_zero(self):
        tree = gdsl.parse_expr("1/x", {"x"})
        with pytest.raises(EvaluationError, match="division by zero"):
            gdsl.evaluate(tree, {"x": np.array([1.0, 0.0])})

    def test_negative_sqrt(self):
        tree = gdsl.parse_expr("sqrt(x)", {"x"})
        with pytest.raises(EvaluationError, match="sqrt"):
            gdsl.evaluate(tree, {"x": -1.0})

    def test_purity(self):
        tree = gdsl.parse_expr("sin(x)*exp(x) - cos(x)/max(x, 2)", {"x"})
        vals = np.linspace(-2, 2, 101)
        a = gdsl.evaluate(tree, {"x": vals})
        b = gdsl.evaluate(tree, {"x": vals})
        assert np.array_equal(a, b)

    def test_precedence(self):
        tree = gdsl.parse_expr("2 + 3 * 4", set())
        assert gdsl.evaluate(tree, {}) == 14.0

    def test_unary_binds_to_factor(self):
        tree = gdsl.parse_expr("-2*3", set())
        assert gdsl.evaluate(tree, {}) == -6.0


_LEAVES = st.one_of(
    st.floats(min_value=0.0, max_value=100.0, allow_nan=False).map(gdsl.Num),
    st.sampled_from(["x"]).map(gdsl.Var),
)


def _trees(depth):
    if depth == 0:
        return _LEAVES
    sub = _trees(depth - 1)
    return st.one_of(
        _LEAVES,
        st.tuples(st.sampled_from("+-*/"), sub, sub).map(lambda t: gdsl.Binary(*t)),
        st.tuples(sub,).map(lambda t: gdsl.Unary("-", t[0])),
        st.tuples(st.sampled_from(["abs", "sin", "cos", "exp", "pos"]), sub)
        .map(lambda t: gdsl.Call(t[0], (t[1],))),
        st.tuples(st.sampled_from(["min", "max"]), sub, sub)
        .map(lambda t: gdsl.Call(t[0], (t[1], t[2]))),
    )


@settings(max_examples=200, deadline=None)
@given(_trees(4))
def test_pretty_print_round_trip(tree):
    text = gdsl.pretty(tree)
    assert gdsl.parse_expr(text, {"x"}) == tree
