"""Smallest generalized eigenpair of a symmetric pencil ``(A, B)``, ``B`` positive definite.

Small pencils go through a dense Cholesky reduction.  Large ones use ARPACK in
shift-invert mode with a shift placed below the target eigenvalue; the shift is
certified by the inertia of a symmetric LU factorization of ``A - sigma B``.
The reported eigenvalue is always the Rayleigh quotient of the returned vector.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .gram import OrthoVec, SparseSymMatrix

__all__ = [
    "PencilProblem",
    "EigResult",
    "PencilError",
    "ConvergenceError",
    "matvec",
    "min_gen_eig",
    "min_gen_eig_dense",
    "min_gen_eig_sparse",
    "residual",
    "METHODS",
]

log = logging.getLogger(__name__)

METHODS = ("auto", "dense", "shift-invert", "lanczos", "lobpcg")
DENSE_LIMIT = 1000
DENSE_CEILING = 4000
FILL_BUDGET = 2.0e7


class PencilError(ValueError):
    """The right-hand operator is not positive definite or shapes disagree."""


class ConvergenceError(RuntimeError):
    """The solver stopped before reaching the residual tolerance; ``best`` holds
    the last iterate."""

    def __init__(self, message: str, best: "EigResult | None" = None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class PencilProblem:
    A: SparseSymMatrix
    B: SparseSymMatrix | None = None  # None means the identity

    def __post_init__(self):
        if self.B is not None and self.B.dim != self.A.dim:
            raise PencilError(f"dimension mismatch: A is {self.A.dim}, B is {self.B.dim}")

    @property
    def dim(self) -> int:
        return self.A.dim


@dataclass
class EigResult:
    eigenvalue: float
    eigenvector: OrthoVec
    residual: float
    iterations: int
    method: str
    seconds: float = 0.0
    info: dict = field(default_factory=dict)


def matvec(A: SparseSymMatrix, v) -> np.ndarray:
    return A.matvec(v)


def _frobenius(A: SparseSymMatrix) -> float:
    data = A.upper.data
    diag = A.upper.diagonal()
    return math.sqrt(max(0.0, 2.0 * float(data @ data) - float(diag @ diag)))


def _b_csr(prob: PencilProblem) -> sp.csr_matrix:
    if prob.B is None:
        return sp.identity(prob.dim, format="csr")
    return prob.B.csr


def residual(prob: PencilProblem, lam: float, v: np.ndarray) -> float:
    """``||A v - lam B v|| / (||A||_F ||v||)``; absolute when ``A`` vanishes."""
    Av = prob.A.csr @ v
    Bv = v if prob.B is None else prob.B.csr @ v
    num = float(np.linalg.norm(Av - lam * Bv))
    den = _frobenius(prob.A) * float(np.linalg.norm(v))
    return num / den if den > 0 else num


def _rayleigh(prob: PencilProblem, v: np.ndarray) -> float:
    Bv = v if prob.B is None else prob.B.csr @ v
    return float(v @ (prob.A.csr @ v)) / float(v @ Bv)


def _normalize(prob: PencilProblem, v: np.ndarray) -> np.ndarray:
    Bv = v if prob.B is None else prob.B.csr @ v
    v = v / math.sqrt(float(v @ Bv))
    # Fix the sign so runs are reproducible: largest-magnitude entry positive.
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return v


def _result(prob, v, method, iterations, t0, **info) -> EigResult:
    v = _normalize(prob, np.asarray(v, dtype=float))
    lam = _rayleigh(prob, v)
    return EigResult(
        eigenvalue=lam,
        eigenvector=OrthoVec(v, prob.A.basis),
        residual=residual(prob, lam, v),
        iterations=iterations,
        method=method,
        seconds=time.perf_counter() - t0,
        info=info,
    )


def min_gen_eig_dense(prob: PencilProblem) -> EigResult:
    """Explicit Cholesky ``B = L L^T`` and a dense symmetric eigensolve of
    ``L^-1 A L^-T``."""
    if prob.dim > DENSE_CEILING:
        raise ValueError(f"dimension {prob.dim} exceeds the dense ceiling {DENSE_CEILING}")
    t0 = time.perf_counter()
    A = prob.A.to_dense()
    if prob.B is None:
        w, y = sla.eigh(A, subset_by_index=[0, 0])
        return _result(prob, y[:, 0], "dense", 1, t0)
    try:
        L = np.linalg.cholesky(prob.B.to_dense())
    except np.linalg.LinAlgError as exc:
        raise PencilError("right-hand operator is not positive definite") from exc
    C = sla.solve_triangular(L, A, lower=True)
    C = sla.solve_triangular(L, C.T, lower=True)
    C = 0.5 * (C + C.T)
    w, y = sla.eigh(C, subset_by_index=[0, 0])
    v = sla.solve_triangular(L.T, y[:, 0], lower=False)
    return _result(prob, v, "dense", 1, t0)


# ---------------------------------------------------------------------------
# Sparse paths
# ---------------------------------------------------------------------------


def _symmetric_lu(S: sp.csc_matrix):
    """LU with diagonal pivoting on a symmetric ordering.  Returns the
    factorization and, when the pivoting stayed symmetric, the number of
    negative pivots (the inertia); otherwise ``None``."""
    lu = spla.splu(
        S,
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options=dict(SymmetricMode=True),
    )
    if not np.array_equal(lu.perm_r, lu.perm_c):
        return lu, None
    return lu, int(np.count_nonzero(lu.U.diagonal() <= 0))


def _scale_estimate(prob: PencilProblem) -> float:
    """Cheap upper estimate of the eigenvalue magnitude ``|lambda| <= ||A||_1 / lambda_min(B)``
    with ``lambda_min(B)`` replaced by its smallest diagonal (an upper bound, so this is
    only a scale)."""
    a = float(abs(prob.A.csr).sum(axis=1).max()) if prob.A.nnz else 0.0
    b = 1.0 if prob.B is None else float(prob.B.diagonal().min())
    return a / b if b > 0 else a


def _lobpcg_estimate(prob: PencilProblem, seed: int, tol: float = 1e-4, maxiter: int = 300):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((prob.dim, 1))
    B = None if prob.B is None else prob.B.csr
    diag = prob.A.diagonal()
    shift = float(np.abs(diag).max()) + 1.0
    precond = sp.diags(1.0 / (diag + shift))
    if prob.dim < 5 * X.shape[1]:
        # LOBPCG needs a tall block; tiny problems are solved densely.
        res = min_gen_eig_dense(prob)
        return res.eigenvalue, res.eigenvector.coords
    with warnings.catch_warnings():
        # Accuracy is judged by the caller from the true residual.
        warnings.simplefilter("ignore", UserWarning)
        lam, vec = spla.lobpcg(prob.A.csr, X, B=B, M=precond, tol=tol, maxiter=maxiter, largest=False)
    return float(lam[0]), vec[:, 0]


def _certified_shift(prob: PencilProblem, start: float, margin: float, max_tries: int = 40):
    """Lower ``sigma`` from ``start - margin`` until ``A - sigma B`` is positive
    definite by inertia.  Returns ``(sigma, lu, tries)``."""
    Acsc = prob.A.csr.tocsc()
    Bcsc = _b_csr(prob).tocsc()
    step = margin
    sigma = start - step
    for attempt in range(1, max_tries + 1):
        S = (Acsc - sigma * Bcsc).tocsc()
        try:
            lu, negatives = _symmetric_lu(S)
        except RuntimeError:  # exactly singular
            lu, negatives = None, None
        if negatives == 0:
            return sigma, lu, attempt
        log.debug("shift %.6e rejected (negative pivots: %s)", sigma, negatives)
        step *= 4.0
        sigma = start - step
    raise ConvergenceError(f"could not place a shift below the spectrum after {max_tries} tries")


def _refine(prob, lu, sigma, v, tol, max_steps=20):
    """Inverse iteration with the existing factorization until the residual
    drops below ``tol``."""
    B = _b_csr(prob)
    steps = 0
    lam = _rayleigh(prob, v)
    res = residual(prob, lam, v)
    while res > tol and steps < max_steps:
        v = lu.solve(B @ v)
        v = v / np.linalg.norm(v)
        lam = _rayleigh(prob, v)
        res = residual(prob, lam, v)
        steps += 1
    return v, steps


def _shift_invert(prob: PencilProblem, tol: float, hint: float | None, seed: int, maxiter: int | None) -> EigResult:
    t0 = time.perf_counter()
    scale = max(_scale_estimate(prob), 1e-300)
    if hint is None:
        est, _ = _lobpcg_estimate(prob, seed)
        start = est
    else:
        start = float(hint)
    margin = 1e-3 * max(abs(start), 1e-6 * scale) + 1e-12 * scale
    sigma, lu, tries = _certified_shift(prob, start, margin)
    B = _b_csr(prob)
    calls = [0]

    def solve(x):
        calls[0] += 1
        return lu.solve(np.asarray(x, dtype=float))

    OPinv = spla.LinearOperator(prob.A.csr.shape, matvec=solve, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(prob.dim)
    info = dict(sigma=sigma, shift_tries=tries, fill=int(lu.L.nnz + lu.U.nnz))
    try:
        w, V = spla.eigsh(
            prob.A.csr, k=1, M=B, sigma=sigma, which="LM", OPinv=OPinv, v0=v0, maxiter=maxiter, tol=0
        )
        v = V[:, 0]
    except spla.ArpackNoConvergence as exc:
        if exc.eigenvectors is None or exc.eigenvectors.shape[1] == 0:
            raise ConvergenceError("ARPACK did not converge and returned no iterate") from exc
        v = exc.eigenvectors[:, 0]
        best = _result(prob, v, "shift-invert", calls[0], t0, **info)
        if best.residual > tol:
            raise ConvergenceError(f"ARPACK did not converge (residual {best.residual:.2e})", best) from exc
    v, steps = _refine(prob, lu, sigma, v, tol)
    res = _result(prob, v, "shift-invert", calls[0] + steps, t0, **info)
    if res.residual > tol:
        raise ConvergenceError(f"residual {res.residual:.2e} above tolerance {tol:.1e}", res)
    return res


def _cg_solver(B: sp.csr_matrix, rtol: float = 1e-14, maxiter: int = 1000):
    """``x -> B^-1 x`` by Jacobi-preconditioned conjugate gradients.  The
    hierarchy's ``B`` operators have condition number bounded independently of
    the level, so a few dozen iterations reach machine precision."""
    diag = B.diagonal()
    if np.any(diag <= 0):
        raise PencilError("right-hand operator has a nonpositive diagonal entry")
    pre = sp.diags(1.0 / diag)
    calls = [0]

    def solve(x):
        calls[0] += 1
        y, info = spla.cg(B, np.asarray(x, dtype=float), rtol=rtol, atol=0.0, M=pre, maxiter=maxiter)
        if info != 0:
            raise PencilError(f"right-hand solve did not converge (cg info {info})")
        return y

    return solve, calls


def _lanczos(prob: PencilProblem, tol: float, seed: int, maxiter: int | None, ncv: int = 60) -> EigResult:
    """Lanczos on ``B^-1 A`` in the ``B`` inner product; ``B^-1`` applied
    iteratively, so nothing is factorized."""
    t0 = time.perf_counter()
    v0 = np.random.default_rng(seed).standard_normal(prob.dim)
    ncv = min(ncv, prob.dim)
    kwargs = {}
    calls = [0]
    if prob.B is not None:
        solve, calls = _cg_solver(prob.B.csr)
        kwargs = dict(M=prob.B.csr, Minv=spla.LinearOperator(prob.B.csr.shape, matvec=solve, dtype=float))
    try:
        w, V = spla.eigsh(prob.A.csr, k=1, which="SA", v0=v0, maxiter=maxiter, tol=0, ncv=ncv, **kwargs)
    except spla.ArpackNoConvergence as exc:
        best = None
        if exc.eigenvectors is not None and exc.eigenvectors.shape[1]:
            best = _result(prob, exc.eigenvectors[:, 0], "lanczos", calls[0], t0)
        raise ConvergenceError("Lanczos did not converge", best) from exc
    res = _result(prob, V[:, 0], "lanczos", calls[0], t0)
    if res.residual > tol:
        raise ConvergenceError(f"residual {res.residual:.2e} above tolerance {tol:.1e}", res)
    return res


def _lobpcg(prob: PencilProblem, tol: float, seed: int, maxiter: int | None) -> EigResult:
    t0 = time.perf_counter()
    maxiter = maxiter or 5000
    lam, v = _lobpcg_estimate(prob, seed, tol=tol, maxiter=maxiter)
    res = _result(prob, v, "lobpcg", maxiter, t0)
    if res.residual > tol:
        raise ConvergenceError(f"LOBPCG residual {res.residual:.2e} above tolerance {tol:.1e}", res)
    return res


def min_gen_eig_sparse(
    prob: PencilProblem,
    method: str = "shift-invert",
    tol: float = 1e-8,
    hint: float | None = None,
    seed: int = 0,
    maxiter: int | None = None,
) -> EigResult:
    """Sparse smallest-eigenpair solve.

    ``hint`` should be a value at or slightly below the target eigenvalue (the
    previous hierarchy level works); it seeds the shift.  When the
    factorization runs out of memory the solve falls back to factorization-free
    Lanczos.
    """
    if method == "shift-invert":
        try:
            return _shift_invert(prob, tol, hint, seed, maxiter)
        except MemoryError:
            log.warning("factorization ran out of memory; falling back to Lanczos")
            return _lanczos(prob, tol, seed, maxiter)
    if method == "lanczos":
        return _lanczos(prob, tol, seed, maxiter)
    if method == "lobpcg":
        return _lobpcg(prob, tol, seed, maxiter)
    raise ValueError(f"unknown sparse method {method!r}")


def min_gen_eig(
    A: SparseSymMatrix | PencilProblem,
    B: SparseSymMatrix | None = None,
    method: str = "auto",
    tol: float = 1e-8,
    hint: float | None = None,
    seed: int = 0,
    dense_limit: int = DENSE_LIMIT,
    maxiter: int | None = None,
    predicted_fill: float | None = None,
    fill_budget: float = FILL_BUDGET,
) -> EigResult:
    """Smallest ``lambda`` with ``A v = lambda B v``.  ``B=None`` is the identity.

    ``auto`` solves densely up to ``dense_limit``; above it, shift-invert unless
    ``predicted_fill`` (factor entries of ``A - sigma B``) exceeds
    ``fill_budget``, in which case Lanczos.
    """
    prob = A if isinstance(A, PencilProblem) else PencilProblem(A, B)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    if method == "dense" or (method == "auto" and prob.dim <= dense_limit):
        res = min_gen_eig_dense(prob)
        if res.residual > tol:
            raise ConvergenceError(f"dense residual {res.residual:.2e} above tolerance {tol:.1e}", res)
        return res
    if method == "auto":
        method = "shift-invert"
        if predicted_fill is not None and predicted_fill > fill_budget:
            method = "lanczos"
    return min_gen_eig_sparse(prob, method, tol, hint, seed, maxiter)
