import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_form, random_unit
from hrsos.polyform import (
    FormError,
    HomogeneousForm,
    MultiForm,
    ParseError,
    build_spectral_norm_form,
    denormalize_coeffs,
    form_from_records,
    format_form,
    multi_form_from_records,
    multi_sphere_power,
    normalize_coeffs,
    odd_lift,
    odd_lift_scale,
    parse_form,
    parse_multi_form,
    sphere_power,
    tensor_norm,
)

XYZ = ["x", "y", "z"]


def test_parse_expands_products_and_powers(motzkin):
    assert motzkin.n == 3 and motzkin.degree == 6
    assert dict(motzkin.terms) == {
        (4, 2, 0): 1,
        (2, 4, 0): 1,
        (2, 2, 2): -3,
        (0, 0, 6): 1,
    }
    assert all(isinstance(c, Fraction) for c in motzkin.terms.values())


def test_parse_rationals_decimals_and_double_star():
    p = parse_form("1/2*x**2 - 0.25*y^2 + 3/4*x*y", ["x", "y"])
    assert p.terms[(2, 0)] == Fraction(1, 2)
    assert p.terms[(1, 1)] == Fraction(3, 4)
    assert p.terms[(0, 2)] == -0.25


def test_parse_binomial_expansion():
    p = parse_form("(x+y)^4", ["x", "y"])
    assert [p.terms[(4 - j, j)] for j in range(5)] == [1, 4, 6, 4, 1]


def test_parse_cancellation_keeps_degree():
    p = parse_form("x^2 - x^2", ["x"])
    assert p.is_zero and p.degree == 2


def test_parse_unary_minus_and_parentheses():
    p = parse_form("-(x - y)*(x + y)", ["x", "y"])
    assert dict(p.terms) == {(2, 0): -1, (0, 2): 1}


@pytest.mark.parametrize(
    "text,column",
    [
        ("x + * y", 5),
        ("x^-2", 3),
        ("x^2.5", 3),
        ("w^2", 1),
        ("(x + y", 7),
        ("x^2 )", 5),
        ("x $ y", 3),
    ],
)
def test_parse_errors_report_columns(text, column):
    with pytest.raises(ParseError) as info:
        parse_form(text, ["x", "y"])
    assert info.value.column == column
    assert f"column {column}" in str(info.value)


def test_parse_rejects_inhomogeneous():
    with pytest.raises(FormError):
        parse_form("x^2 + y", ["x", "y"])


def test_parse_rejects_division_by_variables():
    with pytest.raises(ParseError):
        parse_form("x/y", ["x", "y"])


def test_format_roundtrip(rng):
    for _ in range(10):
        p = random_form(rng, 3, 4, exact=True)
        assert parse_form(format_form(p, XYZ), XYZ) == p


def test_zero_form_prints_and_parses():
    z = HomogeneousForm(2, 4, {})
    text = format_form(z, ["a", "b"])
    assert parse_form(text, ["a", "b"]) == z


def test_evaluate_single_batch_and_complex(motzkin, rng):
    pts = rng.standard_normal((20, 3))
    x, y, z = pts.T
    want = x**4 * y**2 + x**2 * y**4 - 3 * x**2 * y**2 * z**2 + z**6
    np.testing.assert_allclose(motzkin.evaluate(pts), want, rtol=1e-12)
    assert motzkin(pts[0]) == pytest.approx(want[0], rel=1e-12)
    zc = np.array([1j, 1.0, 0.5])
    val = motzkin.evaluate(zc)
    assert val == pytest.approx((1j) ** 4 + (1j) ** 2 - 3 * (1j) ** 2 * 0.25 + 0.5**6)


def test_gradient_matches_finite_differences(rng):
    p = random_form(rng, 4, 5)
    x = rng.standard_normal(4)
    h = 1e-6
    fd = np.array([(p(x + h * e) - p(x - h * e)) / (2 * h) for e in np.eye(4)])
    np.testing.assert_allclose(p.gradient(x), fd, rtol=1e-6, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 5.0))
def test_homogeneity(seed, t):
    rng = np.random.default_rng(seed)
    p = random_form(rng, 3, 4)
    x = rng.standard_normal(3)
    assert p(t * x) == pytest.approx(t**4 * p(x), rel=1e-9, abs=1e-9)


def test_normalize_roundtrip_and_values():
    p = parse_form("x^2*y^2", ["x", "y"])
    nc = normalize_coeffs(p)
    assert nc.coeffs[(2, 2)] == Fraction(1, 6)
    assert denormalize_coeffs(nc) == p
    with pytest.raises(FormError):
        normalize_coeffs(parse_form("x^3", ["x"]))


def test_sphere_power_evaluates_to_norm(rng):
    for n, d in [(2, 1), (3, 2), (4, 3)]:
        p = sphere_power(n, d)
        x = rng.standard_normal(n)
        assert p(x) == pytest.approx(float(x @ x) ** d, rel=1e-12)


def test_multi_sphere_power(rng):
    q = multi_sphere_power([2, 3], [1, 2])
    x, y = rng.standard_normal(2), rng.standard_normal(3)
    assert q.evaluate([x, y]) == pytest.approx(float(x @ x) * float(y @ y) ** 2, rel=1e-12)


def test_odd_lift_cubic():
    p = parse_form("x^3", ["x"])
    lifted, scale = odd_lift(p)
    assert lifted.n == 2 and lifted.degree == 4
    assert lifted.variables == ("x", "_t0")
    assert scale == pytest.approx(16 / (3 * math.sqrt(3)), rel=1e-14)
    # Minimum of x^3 t on the circle is -3^(3/2)/16, at x = -sqrt(3)/2, t = 1/2.
    x = np.array([-math.sqrt(3) / 2, 0.5])
    assert lifted(x) == pytest.approx(-(3**1.5) / 16, rel=1e-14)
    assert scale * lifted(x) == pytest.approx(-1.0, rel=1e-14)


def test_odd_lift_scale_formula():
    for D in (1, 3, 5, 7):
        assert odd_lift_scale(D) == pytest.approx((D + 1) ** ((D + 1) / 2) / D ** (D / 2), rel=1e-12)
    with pytest.raises(FormError):
        odd_lift_scale(4)


def test_odd_lift_identity_on_grid(rng):
    # min over the sphere of p equals scale * min of the lift: check on a fine circle.
    p = parse_form("x^3 - 2*x*y^2", ["x", "y"])
    lifted, scale = odd_lift(p)
    t = np.linspace(0, 2 * np.pi, 20001)
    circle = np.column_stack([np.cos(t), np.sin(t)])
    direct = p.evaluate(circle).min()
    u = random_unit(rng, 3, 200_000)
    lifted_min = lifted.evaluate(u).min()
    assert scale * lifted_min >= direct - 1e-9
    assert scale * lifted_min == pytest.approx(direct, abs=5e-3)


def test_multi_form_parse_and_evaluate(rng):
    q = parse_multi_form("(x1*y1 + x2*y2)^2", [["x1", "x2"], ["y1", "y2"]])
    assert q.factors == ((2, 2), (2, 2))
    x, y = rng.standard_normal(2), rng.standard_normal(2)
    assert q.evaluate([x, y]) == pytest.approx(float(x @ y) ** 2, rel=1e-12)
    gx, gy = q.gradient([x, y])
    np.testing.assert_allclose(gx, 2 * float(x @ y) * y, rtol=1e-12)
    np.testing.assert_allclose(gy, 2 * float(x @ y) * x, rtol=1e-12)


def test_multi_form_rejects_mixed_degrees():
    with pytest.raises(FormError):
        parse_multi_form("x1*y1 + x1^2", [["x1"], ["y1"]])


def test_records_constructors():
    p = form_from_records([{"exponents": [2, 0], "coeff": "1/3"}, {"exponents": [0, 2], "coeff": 2}])
    assert p.terms[(2, 0)] == Fraction(1, 3) and p.terms[(0, 2)] == 2
    q = multi_form_from_records([{"exponents": [[1, 0], [0, 1]], "coeff": 1.5}])
    assert q.factors == ((2, 1), (2, 1))
    with pytest.raises(FormError):
        form_from_records([{"exponents": [2, 0], "coeff": 1}, {"exponents": [1, 0], "coeff": 1}])


def test_spectral_norm_form_matches_contraction(rng):
    T = rng.standard_normal((2, 3))
    form, fro = build_spectral_norm_form(T)
    assert fro == pytest.approx(np.linalg.norm(T))
    assert form.factors == ((3, 2), (4, 2))
    u = np.concatenate([rng.standard_normal(2), [0.7]])
    v = np.concatenate([rng.standard_normal(3), [-0.3]])
    want = (u[:2] @ T @ v[:3]) * u[2] * v[3]
    assert form.evaluate([u, v]) == pytest.approx(want, rel=1e-12)
    normalized, _ = build_spectral_norm_form(T, normalize=True)
    assert normalized.evaluate([u, v]) == pytest.approx(want / fro, rel=1e-12)
    with pytest.raises(FormError):
        build_spectral_norm_form(np.zeros((2, 2)), normalize=True)


def test_tensor_norm_of_sphere_power():
    # ||x||^2 is the identity matrix: Frobenius norm sqrt(n).
    assert tensor_norm(sphere_power(3, 1)) == pytest.approx(math.sqrt(3))
    T = np.arange(6.0).reshape(2, 3)
    form, _ = build_spectral_norm_form(T)
    # Each coefficient T[i,j] of x_i t1 y_j t2 is spread over 2*2 symmetric entries.
    assert tensor_norm(form) == pytest.approx(np.linalg.norm(T) / 2)


def test_form_validation_errors():
    with pytest.raises(FormError):
        HomogeneousForm(2, 3, {(2, 0): 1})
    with pytest.raises(FormError):
        HomogeneousForm(2, 2, {(1, 1, 0): 1})
    with pytest.raises(FormError):
        MultiForm(((2, 1),), {((1, 1),): 1})
