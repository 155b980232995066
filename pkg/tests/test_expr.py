import math

import numpy as np
import pytest

from ifsthermo import expr as E


def ev(src, *point):
    return E.evaluate(E.parse(src), list(point))


class TestParse:
    def test_affine_map(self):
        e = E.parse("x1/2 + 1/2", 1)
        assert e == E.BinOp("+", E.BinOp("/", E.Var(0), E.Num(2.0)), E.BinOp("/", E.Num(1.0), E.Num(2.0)))

    def test_function_node(self):
        e = E.parse("exp(x1)", 1)
        assert isinstance(e, E.Call) and e.name == "exp" and e.args == (E.Var(0),)

    def test_one_minus_x(self):
        assert ev("1 - x1", 0.25) == 0.75

    @pytest.mark.parametrize("src, value", [
        ("2^3^2", 512.0),          # right associative
        ("-2^2", -4.0),            # ^ binds tighter than unary minus
        ("8/4/2", 1.0),            # left associative
        ("10-4-3", 3.0),
        ("2+3*4", 14.0),
        ("(2+3)*4", 20.0),
        ("--3", 3.0),
        ("2*-3", -6.0),
        ("min(2, 3) + max(2, 3)", 5.0),
        ("abs(-1.5e1)", 15.0),
        ("sqrt(16)", 4.0),
    ])
    def test_precedence(self, src, value):
        assert ev(src) == value

    def test_x_alias_only_in_one_dimension(self):
        assert E.parse("x", 1) == E.Var(0)
        with pytest.raises(E.ExprSyntaxError):
            E.parse("x", 2)

    def test_variable_beyond_dimension(self):
        with pytest.raises(E.ExprSyntaxError):
            E.parse("x2", 1)
        assert E.parse("x1 + x2", 2)

    def test_constants(self):
        assert ev("pi") == math.pi
        assert ev("e") == math.e

    @pytest.mark.parametrize("src, pos", [("1 +", 3), ("(1 + 2", 6), ("1 $ 2", 2), ("2 3", 2)])
    def test_syntax_error_position(self, src, pos):
        with pytest.raises(E.ExprSyntaxError) as info:
            E.parse(src)
        assert info.value.position == pos

    def test_unknown_identifier(self):
        with pytest.raises(E.ExprSyntaxError, match="foo"):
            E.parse("foo(x1)", 1)

    @pytest.mark.parametrize("src", ["sin(1, 2)", "max(1)", "exp()"])
    def test_arity(self, src):
        with pytest.raises(E.ExprSyntaxError):
            E.parse(src)

    def test_empty(self):
        with pytest.raises(E.ExprSyntaxError):
            E.parse("   ")


class TestEvaluate:
    def test_logistic(self):
        assert ev("x1*(1-x1)", 0.5) == 0.25

    def test_exp(self):
        assert abs(ev("exp(x1)", 1.0) - 2.718281828459045) <= 1e-15

    @pytest.mark.parametrize("src, point", [("ln(x1)", 0.0), ("sqrt(x1 - 1)", 0.5), ("1/x1", 0.0)])
    def test_domain_errors(self, src, point):
        with pytest.raises(E.ExprDomainError) as info:
            ev(src, point)
        assert info.value.subexpr is not None

    def test_overflow_is_domain_error(self):
        with pytest.raises(E.ExprDomainError):
            ev("exp(1000)")

    def test_many_matches_scalar(self, rng):
        e = E.parse("sin(pi*x1) * exp(x2) - min(x1, x2)^2", 2)
        pts = rng.random((50, 2))
        many = E.evaluate_many(e, pts)
        assert np.array_equal(many, [E.evaluate(e, p) for p in pts])
        assert np.array_equal(e(pts), many)

    def test_num_vars_and_substitute(self):
        e = E.parse("x1 + x2^2", 2)
        assert E.num_vars(e) == 2
        s = E.substitute(e, [E.parse("x1/2", 2), E.Num(1.0)])
        assert E.evaluate(s, [0.5, 0.0]) == 1.25

    def test_to_python_matches(self, rng):
        e = E.parse("sqrt(abs(x1 - 0.3)) + ln(1 + x1) / 2", 1)
        fn = eval("lambda x1: " + E.to_python(e), {"math": math})
        for x in rng.random(20):
            assert fn(x) == pytest.approx(E.evaluate(e, [x]), rel=1e-15)


@pytest.mark.parametrize("src", [
    "x1/2 + 1/2", "1 - (x1 - 2)", "2^(3^2)", "(2^3)^2", "-x1^2", "(-x1)^2",
    "x1 - -x1", "exp(-(x1 + 1)) * max(x1, 1/3)", "x1/(2*x1 + 1)",
])
def test_round_trip(src):
    e = E.parse(src, 1)
    assert E.parse(E.to_string(e), 1) == e
