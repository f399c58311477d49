"""Independent reference values for forms on spheres.

These never touch the Gram machinery: the gradient oracle works directly on
the monomial expansion, the grid oracle evaluates on spherical coordinates,
and the matrix case uses an SVD.  A minimization oracle returns a value
attained at a feasible point, hence an upper bound on the true minimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc, norm

from .polyform import FormError, HomogeneousForm, MultiForm, _eval_monomials, _gradient

__all__ = [
    "OracleResult",
    "upper_bound_sphere",
    "lower_bound_max_sphere",
    "grid_min_sphere",
    "spectral_norm_matrix",
    "riemannian_gradient_norm",
]


@dataclass
class OracleResult:
    value: float
    point: list[np.ndarray]  # one unit vector per factor
    method: str
    restarts: int = 1
    grad_norm: float = float("nan")


class _Objective:
    def __init__(self, p: HomogeneousForm | MultiForm):
        if isinstance(p, HomogeneousForm):
            p = p.as_multi()
        self.dims = p.dims
        self.exps = np.array([sum(key, ()) for key in p.terms], dtype=np.int64).reshape(len(p.terms), sum(self.dims))
        self.coeffs = np.array([float(c) for c in p.terms.values()])
        bounds = np.cumsum((0,) + self.dims)
        self.slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]

    def value(self, X: np.ndarray) -> np.ndarray:
        return _eval_monomials(X, self.exps) @ self.coeffs

    def project(self, X: np.ndarray) -> np.ndarray:
        X = X.copy()
        for s in self.slices:
            X[:, s] /= np.linalg.norm(X[:, s], axis=1, keepdims=True)
        return X

    def rgrad(self, X: np.ndarray) -> np.ndarray:
        G = _gradient(X, self.exps, self.coeffs)
        for s in self.slices:
            G[:, s] -= np.sum(G[:, s] * X[:, s], axis=1, keepdims=True) * X[:, s]
        return G

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        return [x[s].copy() for s in self.slices]


def _starts(total_dim: int, restarts: int, seed: int) -> np.ndarray:
    n_sobol = restarts // 2
    rng = np.random.default_rng(seed)
    parts = []
    if n_sobol:
        sob = qmc.Sobol(d=total_dim, scramble=True, seed=seed).random(n_sobol)
        parts.append(norm.ppf(np.clip(sob, 1e-12, 1 - 1e-12)))
    parts.append(rng.standard_normal((restarts - n_sobol, total_dim)))
    return np.vstack(parts)


def _descend(obj: _Objective, X: np.ndarray, max_iter: int, gtol: float, patience: int = 25):
    """Projected gradient with per-row Armijo backtracking, vectorized over rows.

    A row stops once its Riemannian gradient is below ``gtol`` or its value has
    not moved (beyond rounding) for ``patience`` consecutive iterations.
    """
    X = obj.project(X)
    f = obj.value(X)
    step = np.ones(X.shape[0])
    stalled = np.zeros(X.shape[0], dtype=int)
    for _ in range(max_iter):
        G = obj.rgrad(X)
        gn2 = np.sum(G * G, axis=1)
        active = (gn2 > gtol**2) & (stalled < patience)
        if not active.any():
            break
        for _ in range(60):
            Xn = obj.project(X - step[:, None] * G)
            fn = obj.value(Xn)
            ok = (fn <= f - 1e-4 * step * gn2) | ~active
            if ok.all():
                break
            step = np.where(ok, step, step * 0.5)
        accept = active & (fn <= f)
        moved = f - fn > 1e-15 * np.maximum(1.0, np.abs(f))
        stalled = np.where(accept & moved, 0, stalled + 1)
        X = np.where(accept[:, None], Xn, X)
        f = np.where(accept, fn, f)
        step = np.where(accept, step * 2.0, step)
    return X, f


def upper_bound_sphere(
    p: HomogeneousForm | MultiForm,
    restarts: int = 64,
    seed: int = 0,
    max_iter: int = 3000,
    gtol: float = 1e-10,
) -> OracleResult:
    """Best minimum of ``p`` over the unit sphere (product of spheres for a
    multi-form) found by multi-start projected gradient descent."""
    if p.is_zero:
        dims = p.dims if isinstance(p, MultiForm) else (p.n,)
        return OracleResult(0.0, [np.eye(n)[0] for n in dims], "gradient", restarts, 0.0)
    obj = _Objective(p)
    X0 = _starts(sum(obj.dims), restarts, seed)
    X, f = _descend(obj, X0, max_iter, gtol)
    best = int(np.argmin(f))
    # Polish the winner further; cheap for a single row.
    xb, fb = _descend(obj, X[best : best + 1], 5 * max_iter, gtol, patience=200)
    x = xb[0]
    gn = float(np.linalg.norm(obj.rgrad(xb)[0]))
    return OracleResult(float(fb[0]), obj.split(x), "gradient", restarts, gn)


def lower_bound_max_sphere(p: HomogeneousForm | MultiForm, restarts: int = 64, seed: int = 0) -> OracleResult:
    """Best maximum of ``p`` found over the sphere(s): a lower bound on the true maximum."""
    res = upper_bound_sphere(p.scaled(-1), restarts=restarts, seed=seed)
    res.value = -res.value
    return res


def riemannian_gradient_norm(p: HomogeneousForm | MultiForm, point) -> float:
    obj = _Objective(p)
    x = np.concatenate([np.asarray(v, dtype=float) for v in (point if isinstance(point, list) else [point])])
    return float(np.linalg.norm(obj.rgrad(x[None, :])[0]))


def grid_min_sphere(p: HomogeneousForm, resolution: int = 1000) -> OracleResult:
    """Minimum over a spherical-coordinate grid.  ``n = 2`` uses ``resolution``
    angles; ``n = 3`` uses a ``resolution x resolution`` (polar, azimuth) grid."""
    if not isinstance(p, HomogeneousForm):
        raise TypeError("grid scan takes a single homogeneous form")
    if p.n > 3:
        raise ValueError(f"grid scan is limited to n <= 3, got n={p.n}")
    if p.n == 1:
        pts = np.array([[1.0], [-1.0]])
    elif p.n == 2:
        t = np.linspace(0.0, 2 * math.pi, resolution, endpoint=False)
        pts = np.column_stack([np.cos(t), np.sin(t)])
    else:
        theta = np.linspace(0.0, math.pi, resolution)
        phi = np.linspace(0.0, 2 * math.pi, resolution, endpoint=False)
        T, P = np.meshgrid(theta, phi, indexing="ij")
        pts = np.column_stack([(np.sin(T) * np.cos(P)).ravel(), (np.sin(T) * np.sin(P)).ravel(), np.cos(T).ravel()])
    if p.is_zero:
        return OracleResult(0.0, [pts[0]], "grid", 1)
    vals = np.empty(pts.shape[0])
    chunk = 200_000
    pf = p.to_float()
    for start in range(0, pts.shape[0], chunk):
        vals[start : start + chunk] = pf.evaluate(pts[start : start + chunk])
    i = int(np.argmin(vals))
    return OracleResult(float(vals[i]), [pts[i]], "grid", 1)


def spectral_norm_matrix(T) -> OracleResult:
    """Largest singular value of a matrix, with its singular vectors."""
    T = np.asarray(T, dtype=float)
    if T.ndim != 2:
        raise FormError(f"expected a 2-way tensor, got {T.ndim} ways")
    U, s, Vt = np.linalg.svd(T)
    return OracleResult(float(s[0]), [U[:, 0], Vt[0]], "svd", 1)
