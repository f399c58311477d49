import math

import numpy as np
import pytest

from conftest import random_form
from hrsos.hierarchy import (
    GapBoundInputs,
    HierarchyResult,
    LevelRecord,
    MonotonicityError,
    _check_monotone,
    apriori_gap,
    default_levels,
    hrsos_bound,
    kappa_computed,
    kappa_table,
    mhrsos_bound,
    operator_norm,
    spectral_gap,
    spectral_norm_bound,
)
from hrsos.oracle import upper_bound_sphere
from hrsos.polyform import FormError, HomogeneousForm, multi_sphere_power, parse_form, parse_multi_form, sphere_power

CHOI = (
    "x1^2*y1^2 + x2^2*y2^2 + x3^2*y3^2"
    " - 2*(x1*x2*y1*y2 + x2*x3*y2*y3 + x3*x1*y3*y1)"
    " + 2*(x1^2*y2^2 + x2^2*y3^2 + x3^2*y1^2)"
)
CHOI_GROUPS = [["x1", "x2", "x3"], ["y1", "y2", "y3"]]


def quadratic(S):
    n = S.shape[0]
    terms = {}
    for i in range(n):
        for j in range(i, n):
            e = [0] * n
            e[i] += 1
            e[j] += 1
            terms[tuple(e)] = S[i, j] * (1 if i == j else 2)
    return HomogeneousForm(n, 2, terms)


def test_motzkin_low_levels(motzkin):
    res = hrsos_bound(motzkin, levels=[10, 20])
    assert res.level(10).bound == pytest.approx(-0.028748141, abs=1e-8)
    assert res.level(20).bound == pytest.approx(-0.010490211, abs=1e-8)
    assert res.direction == "lower" and res.ok


def test_quadratic_forms_are_exact_at_first_level(rng):
    for _ in range(20):
        n = int(rng.integers(2, 9))
        S = rng.standard_normal((n, n))
        S = S + S.T
        res = hrsos_bound(quadratic(S), levels=[1, 3])
        want = np.linalg.eigvalsh(S)[0]
        for lv in res.levels:
            assert lv.bound == pytest.approx(want, abs=1e-12)


def test_sphere_power_gives_one():
    for n, d in [(2, 2), (3, 3), (4, 2)]:
        res = hrsos_bound(sphere_power(n, d), levels=[d, d + 3])
        assert res.bounds == [1.0, 1.0]
    # A scaled copy does not hit the identical-pencil shortcut.
    res = hrsos_bound(sphere_power(3, 2).scaled(2.5), levels=[2, 4], solver="dense")
    for b in res.bounds:
        assert b == pytest.approx(2.5, abs=1e-12)


def test_zero_form_gives_zero():
    res = hrsos_bound(HomogeneousForm(3, 4, {}), levels=[2, 3])
    assert res.bounds == [0.0, 0.0]


def test_bounds_are_monotone_and_sound(rng):
    for n, D in [(3, 4), (2, 6), (4, 4)]:
        p = random_form(rng, n, D)
        d = D // 2
        res = hrsos_bound(p, levels=range(d, d + 7))
        bounds = res.bounds
        assert all(b >= a - 1e-9 * max(1, abs(a)) for a, b in zip(bounds, bounds[1:]))
        assert bounds[-1] <= upper_bound_sphere(p, restarts=32).value + 1e-9


def test_solver_modes_agree(motzkin):
    levels = [3, 6, 9]
    base = hrsos_bound(motzkin, levels=levels, solver="dense").bounds
    for solver in ("sparse", "shift-invert", "lanczos"):
        other = hrsos_bound(motzkin, levels=levels, solver=solver).bounds
        np.testing.assert_allclose(other, base, atol=1e-8)


def test_unknown_solver_and_bad_levels(motzkin):
    with pytest.raises(ValueError):
        hrsos_bound(motzkin, levels=[3], solver="magic")
    with pytest.raises(ValueError):
        hrsos_bound(motzkin, levels=[2])
    with pytest.raises(ValueError):
        hrsos_bound(motzkin, levels=[])
    with pytest.raises(TypeError):
        hrsos_bound(motzkin.as_multi(), levels=[3])


def test_odd_degree_is_lifted_and_rescaled():
    p = parse_form("x^3", ["x", "y"])
    res = hrsos_bound(p, levels=[2, 4, 8, 16])
    assert res.scale == pytest.approx(16 / (3 * math.sqrt(3)))
    bounds = res.bounds
    assert all(b <= -1.0 + 1e-9 for b in bounds)
    assert all(b2 >= b1 - 1e-9 for b1, b2 in zip(bounds, bounds[1:]))
    assert bounds[-1] > bounds[0]
    assert res.problem["odd_lift_scale"] == res.scale


def test_single_factor_multi_agrees(motzkin):
    a = hrsos_bound(motzkin, levels=[3, 7]).bounds
    b = mhrsos_bound(motzkin.as_multi(), levels=[3, 7]).bounds
    np.testing.assert_allclose(a, b, atol=1e-10)


def test_biquadratic_nonnegative_form():
    q = parse_multi_form(CHOI, CHOI_GROUPS)
    res = mhrsos_bound(q, levels=[1, 2, 3, 5])
    bounds = res.bounds
    assert all(b <= 1e-9 for b in bounds)
    assert all(b2 >= b1 - 1e-9 for b1, b2 in zip(bounds, bounds[1:]))
    assert bounds[-1] > bounds[0]


def test_product_of_sphere_norms_gives_one():
    res = mhrsos_bound(multi_sphere_power([2, 3], [1, 1]), levels=[1, 2, 4])
    for b in res.bounds:
        assert b == pytest.approx(1.0, abs=1e-12)


def test_apriori_gap_examples():
    inputs = GapBoundInputs(normP_inf=2.0, kappa=1.0, n=4, d=1)
    for k in (1, 5, 10):
        assert apriori_gap(inputs, k) == pytest.approx(8 * 2.0 * 3 / (k + 1))
    motzkin_like = GapBoundInputs(1.0, 3.5, 3, 3)
    values = [apriori_gap(motzkin_like, k) for k in range(3, 40)]
    assert all(b < a for a, b in zip(values, values[1:]))
    with pytest.raises(ValueError):
        GapBoundInputs(1.0, 0.5, 3, 2)


def test_gap_bound_holds_on_motzkin(motzkin):
    res = hrsos_bound(motzkin, levels=[3, 5, 10])
    inputs = res.gap_inputs
    assert inputs.normP_inf == pytest.approx(1.0, abs=1e-10)
    assert inputs.kappa == pytest.approx(3.5, rel=1e-10)
    for lv in res.levels:
        assert 0.0 - lv.bound <= lv.gap_bound


def test_operator_norm_and_kappa(motzkin):
    assert operator_norm(motzkin.as_multi()) == pytest.approx(1.0, abs=1e-10)
    assert kappa_computed([3], [3]) == pytest.approx(3.5, rel=1e-10)
    assert kappa_computed([2, 3], [2, 2]) == pytest.approx(2.0 * 2.5, rel=1e-10)
    rows = kappa_table([(2, 2), (3, 2)])
    assert [r["computed"] for r in rows] == pytest.approx([2.0, 2.5])


def test_default_levels():
    assert default_levels(3) == [3, 4, 5, 7, 11, 19]
    assert default_levels(1, count=3) == [1, 2, 3]
    assert default_levels(2, max_dim=50, n=3) == [2, 3, 4, 6]
    assert default_levels(2, max_dim=1, n=3) == [2]


def test_monotonicity_violation_is_raised():
    result = HierarchyResult(problem={}, direction="lower")
    result.levels = [LevelRecord(k=2, bound=-0.1, seconds=0.0, dim=1), LevelRecord(k=3, bound=-0.2, seconds=0.0, dim=1)]
    with pytest.raises(MonotonicityError) as info:
        _check_monotone(result)
    assert info.value.result is result
    result.direction = "upper"
    _check_monotone(result)
    # Failed levels are skipped.
    result.levels[1].error = "boom"
    result.direction = "lower"
    _check_monotone(result)


def test_failed_level_is_recorded(motzkin):
    res = hrsos_bound(motzkin, levels=[3, 30], solver="lobpcg", maxiter=1, gap=False)
    assert res.level(30).error is not None and res.level(30).bound is None
    assert not res.ok
    assert res.to_dict()["levels"][1]["error"].startswith("ConvergenceError")


def test_spectral_norm_of_diagonal_matrix():
    res = spectral_norm_bound(np.diag([1.0, 0.5]), levels=[1, 2, 4, 8])
    bounds = res.bounds
    assert res.direction == "upper"
    assert all(b >= 1.0 - 1e-9 for b in bounds)
    assert all(b2 <= b1 + 1e-9 for b1, b2 in zip(bounds, bounds[1:]))
    for lv in res.levels:
        assert lv.bound - 1.0 <= lv.gap_bound


def test_spectral_norm_of_vector():
    v = np.array([3.0, -4.0, 1.0])
    res = spectral_norm_bound(v, levels=[1, 2, 3])
    assert res.level(2).bound == pytest.approx(np.linalg.norm(v), rel=1e-8)
    assert all(b >= np.linalg.norm(v) - 1e-9 for b in res.bounds)


def test_spectral_norm_of_random_matrices(rng):
    for shape in [(2, 2), (2, 3), (3, 3)]:
        T = rng.standard_normal(shape)
        sigma = np.linalg.norm(T, 2)
        res = spectral_norm_bound(T, levels=[1, 2, 4])
        assert all(b >= sigma - 1e-9 * sigma for b in res.bounds)


def test_spectral_norm_rank_one_tensor():
    T = np.zeros((2, 2, 2))
    T[0, 0, 0] = T[1, 1, 1] = 1.0
    res = spectral_norm_bound(T, levels=[1, 2, 3])
    assert all(b >= 1.0 - 1e-9 for b in res.bounds)
    assert res.half_degree == (1, 1, 1)


def test_spectral_norm_scale_equivariance(rng):
    T = rng.standard_normal((2, 3))
    a = spectral_norm_bound(T, levels=[1, 3]).bounds
    b = spectral_norm_bound(7.0 * T, levels=[1, 3]).bounds
    np.testing.assert_allclose(b, 7.0 * np.asarray(a), rtol=1e-10)


def test_spectral_gap_formula():
    assert spectral_gap(2, [3, 3], 1) == pytest.approx(2**4 * 2 * 2 / 2)
    with pytest.raises(FormError):
        spectral_norm_bound(np.zeros((2, 2)))
