import numpy as np
import pytest

from conftest import random_form
from hrsos.oracle import (
    grid_min_sphere,
    lower_bound_max_sphere,
    riemannian_gradient_norm,
    spectral_norm_matrix,
    upper_bound_sphere,
)
from hrsos.polyform import FormError, HomogeneousForm, MultiForm, multi_sphere_power, parse_form, parse_multi_form, sphere_power


def test_motzkin_minimum_is_zero(motzkin):
    res = upper_bound_sphere(motzkin)
    assert -1e-12 <= res.value <= 1e-8
    assert np.linalg.norm(res.point[0]) == pytest.approx(1.0, abs=1e-14)
    assert motzkin(res.point[0]) == pytest.approx(res.value, abs=1e-15)


def test_quadratic_minimum_is_smallest_eigenvalue(rng):
    for n in (2, 4, 7):
        S = rng.standard_normal((n, n))
        S = S + S.T
        terms = {}
        for i in range(n):
            for j in range(i, n):
                e = [0] * n
                e[i] += 1
                e[j] += 1
                terms[tuple(e)] = S[i, j] * (1 if i == j else 2)
        res = upper_bound_sphere(HomogeneousForm(n, 2, terms), restarts=16)
        assert res.value == pytest.approx(np.linalg.eigvalsh(S)[0], abs=1e-10)


def test_sphere_power_is_constant():
    assert upper_bound_sphere(sphere_power(4, 3), restarts=8).value == pytest.approx(1.0, abs=1e-13)
    assert upper_bound_sphere(multi_sphere_power([2, 3], [1, 2]), restarts=8).value == pytest.approx(1.0, abs=1e-13)


def test_linear_form():
    c = np.array([1.0, -2.0, 2.0])
    p = HomogeneousForm(3, 1, {(1, 0, 0): c[0], (0, 1, 0): c[1], (0, 0, 1): c[2]})
    res = upper_bound_sphere(p, restarts=8)
    assert res.value == pytest.approx(-3.0, abs=1e-12)
    np.testing.assert_allclose(res.point[0], -c / 3.0, atol=1e-6)
    assert lower_bound_max_sphere(p, restarts=8).value == pytest.approx(3.0, abs=1e-12)


def test_zero_form():
    res = upper_bound_sphere(HomogeneousForm(3, 4, {}))
    assert res.value == 0.0
    assert grid_min_sphere(HomogeneousForm(2, 4, {}), 10).value == 0.0


def test_grid_agrees_with_descent(motzkin):
    res = grid_min_sphere(motzkin, resolution=1000)
    assert res.value == pytest.approx(0.0, abs=1e-4)
    assert res.value >= upper_bound_sphere(motzkin).value - 1e-12


def test_grid_on_circle(rng):
    p = parse_form("x^3 - 2*x*y^2", ["x", "y"])
    fine = grid_min_sphere(p, resolution=100_000).value
    assert upper_bound_sphere(p).value == pytest.approx(fine, abs=1e-8)
    assert upper_bound_sphere(p).value <= fine


def test_grid_dimension_guard(rng):
    with pytest.raises(ValueError):
        grid_min_sphere(random_form(rng, 4, 2))


def test_multi_form_bilinear_is_singular_value(rng):
    M = rng.standard_normal((3, 2))
    terms = {}
    for i in range(3):
        for j in range(2):
            x = [0, 0, 0]
            y = [0, 0]
            x[i], y[j] = 1, 1
            terms[(tuple(x), tuple(y))] = M[i, j]
    q = MultiForm(((3, 1), (2, 1)), terms)
    res = upper_bound_sphere(q, restarts=16)
    assert res.value == pytest.approx(-np.linalg.norm(M, 2), abs=1e-10)
    assert len(res.point) == 2


def test_stationary_point(rng):
    p = random_form(rng, 3, 4)
    res = upper_bound_sphere(p)
    assert res.grad_norm <= 1e-6
    assert riemannian_gradient_norm(p, res.point[0]) == pytest.approx(res.grad_norm, abs=1e-15)


def test_determinism(rng):
    p = random_form(rng, 4, 4)
    a = upper_bound_sphere(p, seed=11)
    b = upper_bound_sphere(p, seed=11)
    assert a.value == b.value
    np.testing.assert_array_equal(a.point[0], b.point[0])


def test_biquadratic_choi_is_nonnegative():
    q = parse_multi_form(
        "x1^2*y1^2 + x2^2*y2^2 + x3^2*y3^2 - 2*(x1*x2*y1*y2 + x2*x3*y2*y3 + x3*x1*y3*y1)"
        " + 2*(x1^2*y2^2 + x2^2*y3^2 + x3^2*y1^2)",
        [["x1", "x2", "x3"], ["y1", "y2", "y3"]],
    )
    assert upper_bound_sphere(q).value == pytest.approx(0.0, abs=1e-8)


def power_iteration(T, iters=5000):
    v = np.ones(T.shape[1])
    for _ in range(iters):
        v = T.T @ (T @ v)
        v /= np.linalg.norm(v)
    return float(np.linalg.norm(T @ v))


def test_spectral_norm_matrix():
    assert spectral_norm_matrix(np.diag([1.0, 0.5])).value == pytest.approx(1.0)
    assert spectral_norm_matrix(np.eye(3)).value == pytest.approx(1.0)
    assert spectral_norm_matrix([[0.0, 2.0], [0.0, 0.0]]).value == pytest.approx(2.0)
    with pytest.raises(FormError):
        spectral_norm_matrix(np.ones((2, 2, 2)))


def test_spectral_norm_matches_power_iteration(rng):
    for shape in [(2, 2), (3, 5), (6, 6)]:
        T = rng.standard_normal(shape)
        res = spectral_norm_matrix(T)
        assert res.value == pytest.approx(power_iteration(T), rel=1e-10)
        u, v = res.point
        assert u @ T @ v == pytest.approx(res.value, rel=1e-12)
