"""Level-by-level drivers for the sphere, product-of-spheres and tensor-norm hierarchies.

Each level ``k`` solves one pencil ``(P_k, N_k)``.  Lower bounds ``eta_k`` on the
sphere minimum are nondecreasing in ``k``; the tensor-norm upper bounds
``mu_k`` are nonincreasing.  Both facts are checked on every run.
"""
from __future__ import annotations

import contextlib
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse.linalg as spla

from .combinat import basis_size, delta
from .eigsolve import (
    DENSE_CEILING,
    DENSE_LIMIT,
    FILL_BUDGET,
    METHODS,
    ConvergenceError,
    PencilError,
    PencilProblem,
    _symmetric_lu,
    min_gen_eig,
)
from .gram import SparseSymMatrix, build_multi_Nk, build_multi_Pk, kappa_conjectured
from .polyform import (
    FormError,
    HomogeneousForm,
    MultiForm,
    build_spectral_norm_form,
    odd_lift,
)

__all__ = [
    "LevelRecord",
    "HierarchyResult",
    "GapBoundInputs",
    "MonotonicityError",
    "apriori_gap",
    "spectral_gap",
    "default_levels",
    "operator_norm",
    "kappa_computed",
    "hrsos_bound",
    "mhrsos_bound",
    "spectral_norm_bound",
]

log = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-9
SOLVERS = METHODS + ("sparse",)
DEFAULT_MAX_DIM = 200_000


class MonotonicityError(RuntimeError):
    """Consecutive levels moved the wrong way by more than the slack; this
    points at a solver tolerance failure.  ``result`` holds the full run."""

    def __init__(self, message: str, result: "HierarchyResult"):
        super().__init__(message)
        self.result = result


@dataclass
class LevelRecord:
    k: int
    bound: float | None
    seconds: float
    dim: int
    nnz: int = 0
    eigenvalue: float | None = None  # raw pencil eigenvalue before scaling
    residual: float | None = None
    iterations: int | None = None
    method: str | None = None
    gap_bound: float | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class HierarchyResult:
    problem: dict
    direction: str  # "lower" or "upper"
    levels: list[LevelRecord] = field(default_factory=list)
    scale: float = 1.0
    half_degree: int | tuple = 0
    gap_inputs: "GapBoundInputs | None" = None

    @property
    def bounds(self) -> list[float | None]:
        return [lv.bound for lv in self.levels]

    @property
    def ok(self) -> bool:
        return all(lv.ok for lv in self.levels)

    def level(self, k: int) -> LevelRecord:
        for lv in self.levels:
            if lv.k == k:
                return lv
        raise KeyError(k)

    def to_dict(self) -> dict:
        out = {
            "problem": self.problem,
            "direction": self.direction,
            "scale": self.scale,
            "half_degree": self.half_degree,
            "levels": [asdict(lv) for lv in self.levels],
        }
        if self.gap_inputs is not None:
            out["gap_inputs"] = asdict(self.gap_inputs)
        return out


@dataclass
class GapBoundInputs:
    normP_inf: float
    kappa: float
    n: int | tuple
    d: int | tuple
    k: int = 0

    def __post_init__(self):
        if self.kappa < 1 - 1e-12:
            raise ValueError(f"condition number {self.kappa} is below 1")
        if self.normP_inf < 0:
            raise ValueError("operator norm must be nonnegative")


def apriori_gap(inputs: GapBoundInputs, k: int | None = None) -> float:
    """Upper bound on ``p_min - eta_k``:
    ``||P|| (1 + kappa) 4 |d| (max n - 1) / (delta(d) (k + 1))`` with ``delta``
    multiplied over factors for a multi-form."""
    k = inputs.k if k is None else k
    ns = inputs.n if isinstance(inputs.n, tuple) else (inputs.n,)
    ds = inputs.d if isinstance(inputs.d, tuple) else (inputs.d,)
    delta_prod = math.prod(float(delta(d)) for d in ds if d >= 1)
    total_d = sum(ds)
    return inputs.normP_inf * (1.0 + inputs.kappa) * 4.0 * total_d * (max(ns) - 1) / (delta_prod * (k + 1))


def spectral_gap(m: int, dims: Sequence[int], k: int) -> float:
    """``2^(m/2 + 3) m (max n_j - 1) / (k + 1)`` for a unit-norm tensor."""
    return 2.0 ** (m / 2 + 3) * m * (max(dims) - 1) / (k + 1)


def default_levels(d: int, count: int = 6, max_dim: int | None = None, n: int | Sequence[int] | None = None) -> list[int]:
    """``d, d+1, d+2, d+4, d+8, ...``; stops early once the basis dimension
    would exceed ``max_dim`` (needs ``n``)."""
    levels = [d]
    step = 1
    while len(levels) < count:
        levels.append(d + step)
        step *= 2
    if max_dim is not None and n is not None:
        ns = (n,) if isinstance(n, int) else tuple(n)
        levels = [k for k in levels if math.prod(basis_size(m, k) for m in ns) <= max_dim] or [d]
    return levels


def _extreme_eigs(S: SparseSymMatrix) -> tuple[float, float]:
    if S.dim <= DENSE_CEILING:
        w = np.linalg.eigvalsh(S.to_dense())
        return float(w[0]), float(w[-1])
    lo = spla.eigsh(S.csr, k=1, which="SA", return_eigenvectors=False, tol=1e-10)[0]
    hi = spla.eigsh(S.csr, k=1, which="LA", return_eigenvectors=False, tol=1e-10)[0]
    return float(lo), float(hi)


def operator_norm(form: MultiForm) -> float:
    """Largest absolute eigenvalue of the maximally symmetric Gram operator."""
    ds = tuple(D // 2 for D in form.degrees)
    lo, hi = _extreme_eigs(build_multi_Pk(form, ds))
    return max(abs(lo), abs(hi))


def kappa_computed(dims: Sequence[int], ds: Sequence[int]) -> float:
    """Condition number of the ``prod ||x_i||^(2 d_i)`` Gram operator, as the
    product of the per-factor values (the operator is a tensor product)."""
    out = 1.0
    for n, d in zip(dims, ds):
        if d <= 1:
            continue
        lo, hi = _extreme_eigs(build_multi_Nk([n], [d], d))
        out *= hi / lo
    return out


class _FillModel:
    """Predicts factorization fill at a new dimension from a power law fitted
    to earlier factorizations."""

    def __init__(self):
        self.points: list[tuple[int, int]] = []

    def add(self, dim: int, fill: int):
        if fill > 0 and dim > 1:
            self.points.append((dim, fill))

    def predict(self, dim: int) -> float | None:
        pts = sorted(set(self.points))
        if not pts:
            return None
        d2, f2 = pts[-1]
        if dim <= d2:
            return float(f2)
        alpha = 1.5
        if len(pts) >= 2:
            d1, f1 = pts[-2]
            if d1 != d2:
                alpha = min(2.5, max(1.0, math.log(f2 / f1) / math.log(d2 / d1)))
        return f2 * (dim / d2) ** alpha


def _probe(form: MultiForm, ds: tuple, k: int, model: _FillModel, probe_dim: int = 4000):
    """Record fill of two smaller levels so the model can extrapolate to ``k``."""
    lo = max(ds)
    small = [j for j in range(lo, k) if math.prod(basis_size(n, j) for n in form.dims) <= probe_dim]
    for j in small[-2:]:
        A = build_multi_Pk(form, j)
        B = build_multi_Nk(form.dims, ds, j)
        shift = float(abs(A.csr).sum(axis=1).max()) / float(B.diagonal().min()) + 1.0
        try:
            lu, _ = _symmetric_lu((A.csr + shift * B.csr).tocsc())
            model.add(A.dim, lu.L.nnz + lu.U.nnz)
        except (RuntimeError, MemoryError):
            pass


def _thread_limit(threads: int | None):
    if not threads:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(threads))


def _run(
    form: MultiForm,
    levels: Iterable[int],
    direction: str,
    transform,
    problem: dict,
    solver: str,
    tol: float,
    seed: int,
    threads: int | None,
    identity_B: bool,
    gap_fn=None,
    fill_budget: float = FILL_BUDGET,
    check_monotone: bool = True,
    maxiter: int | None = None,
) -> HierarchyResult:
    ds = tuple(D // 2 for D in form.degrees)
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    # "sparse" is "auto" without the dense shortcut.
    method, dense_limit = ("auto", 0) if solver == "sparse" else (solver, DENSE_LIMIT)
    levels = sorted(set(int(k) for k in levels))
    if not levels:
        raise ValueError("no levels requested")
    if levels[0] < max(ds):
        raise ValueError(f"level {levels[0]} is below the half-degree {max(ds)}")
    result = HierarchyResult(problem=problem, direction=direction, half_degree=ds[0] if len(ds) == 1 else ds)
    model = _FillModel()
    hint = None
    probed = False
    with _thread_limit(threads):
        for k in levels:
            t0 = time.perf_counter()
            dim = math.prod(basis_size(n, k) for n in form.dims)
            rec = LevelRecord(k=k, bound=None, seconds=0.0, dim=dim)
            try:
                if form.is_zero:
                    lam, res = 0.0, None
                    rec.method, rec.residual, rec.iterations = "zero-form", 0.0, 0
                else:
                    A = build_multi_Pk(form, k)
                    B = None if identity_B else build_multi_Nk(form.dims, ds, k)
                    rec.nnz = A.nnz
                    if B is not None and A.same_entries(B):
                        lam, res = 1.0, None
                        rec.method, rec.residual, rec.iterations = "identical-pencil", 0.0, 0
                    else:
                        predicted = None
                        if method == "auto" and dim > dense_limit:
                            if not model.points and not probed and dim > 4000:
                                _probe(form, ds, k, model)
                                probed = True
                            predicted = model.predict(dim)
                        res = min_gen_eig(
                            PencilProblem(A, B),
                            method=method,
                            tol=tol,
                            hint=hint,
                            seed=seed,
                            dense_limit=dense_limit,
                            maxiter=maxiter,
                            predicted_fill=predicted,
                            fill_budget=fill_budget,
                        )
                        lam = res.eigenvalue
                        if "fill" in res.info:
                            model.add(dim, res.info["fill"])
                        rec.method, rec.residual, rec.iterations = res.method, res.residual, res.iterations
                rec.eigenvalue = lam
                rec.bound = transform(lam)
                # Pencil eigenvalues never decrease with k, so the last one is a safe shift hint.
                hint = lam if hint is None else max(hint, lam)
            except (ConvergenceError, PencilError, MemoryError, ValueError, ArithmeticError) as exc:
                rec.error = f"{type(exc).__name__}: {exc}"
                log.warning("level %d failed: %s", k, rec.error)
            rec.seconds = time.perf_counter() - t0
            if gap_fn is not None:
                rec.gap_bound = gap_fn(k)
            result.levels.append(rec)
    if check_monotone:
        _check_monotone(result)
    return result


def _check_monotone(result: HierarchyResult):
    good = [lv for lv in result.levels if lv.ok]
    for a, b in zip(good, good[1:]):
        slack = MONOTONE_SLACK * max(1.0, abs(a.bound))
        if result.direction == "lower" and b.bound < a.bound - slack:
            raise MonotonicityError(f"bound decreased from {a.bound!r} (k={a.k}) to {b.bound!r} (k={b.k})", result)
        if result.direction == "upper" and b.bound > a.bound + slack:
            raise MonotonicityError(f"bound increased from {a.bound!r} (k={a.k}) to {b.bound!r} (k={b.k})", result)


def _lift_all(form: MultiForm) -> tuple[MultiForm, float]:
    scale = 1.0
    for i, D in enumerate(form.degrees):
        if D % 2:
            form, s = odd_lift(form, factor=i)
            scale *= s
    return form, scale


def _gap_inputs(form: MultiForm) -> GapBoundInputs:
    ds = tuple(D // 2 for D in form.degrees)
    dims = form.dims
    norm = operator_norm(form)
    kappa = kappa_computed(dims, ds)
    if len(dims) == 1:
        return GapBoundInputs(norm, kappa, dims[0], ds[0])
    return GapBoundInputs(norm, kappa, tuple(dims), ds)


def mhrsos_bound(
    p: MultiForm | HomogeneousForm,
    levels: Iterable[int] | None = None,
    solver: str = "auto",
    tol: float = 1e-8,
    seed: int = 0,
    threads: int | None = None,
    gap: bool = True,
    max_dim: int = DEFAULT_MAX_DIM,
    check_monotone: bool = True,
    maxiter: int | None = None,
) -> HierarchyResult:
    """Lower bounds on the minimum of ``p`` over a product of unit spheres.

    Odd-degree factors are lifted first and the scale is folded into every
    reported bound, so bounds refer to the original ``p``.
    """
    single = isinstance(p, HomogeneousForm)
    form = p.as_multi() if single else p
    lifted, scale = _lift_all(form)
    ds = tuple(D // 2 for D in lifted.degrees)
    if levels is None:
        levels = default_levels(max(ds), max_dim=max_dim, n=lifted.dims)
    inputs = None
    gap_fn = None
    if gap and not lifted.is_zero:
        try:
            inputs = _gap_inputs(lifted)
            gap_fn = lambda k: scale * apriori_gap(inputs, k)  # noqa: E731
        except (ValueError, MemoryError, spla.ArpackNoConvergence) as exc:
            log.warning("gap annotation unavailable: %s", exc)
    problem = {
        "kind": "sphere-min" if single else "multi-sphere-min",
        "factors": [list(f) for f in form.factors],
        "odd_lift_scale": scale,
    }
    result = _run(
        lifted,
        levels,
        "lower",
        lambda lam: scale * lam,
        problem,
        solver,
        tol,
        seed,
        threads,
        identity_B=all(d <= 1 for d in ds),
        gap_fn=gap_fn,
        check_monotone=check_monotone,
        maxiter=maxiter,
    )
    result.scale = scale
    result.gap_inputs = inputs
    return result


def hrsos_bound(
    p: HomogeneousForm,
    levels: Iterable[int] | None = None,
    solver: str = "auto",
    tol: float = 1e-8,
    seed: int = 0,
    threads: int | None = None,
    gap: bool = True,
    max_dim: int = DEFAULT_MAX_DIM,
    check_monotone: bool = True,
    maxiter: int | None = None,
) -> HierarchyResult:
    """Lower bounds ``eta_k <= min_{|x|=1} p(x)`` at the requested levels."""
    if not isinstance(p, HomogeneousForm):
        raise TypeError("hrsos_bound takes a HomogeneousForm; use mhrsos_bound for multi-forms")
    return mhrsos_bound(p, levels, solver, tol, seed, threads, gap, max_dim, check_monotone, maxiter)


def spectral_norm_bound(
    T,
    levels: Iterable[int] | None = None,
    solver: str = "auto",
    tol: float = 1e-8,
    seed: int = 0,
    threads: int | None = None,
    max_dim: int = DEFAULT_MAX_DIM,
    check_monotone: bool = True,
    maxiter: int | None = None,
) -> HierarchyResult:
    """Upper bounds ``mu_k >= ||T||_sigma`` on the spectral norm of a tensor.

    The tensor is scaled to unit Frobenius norm before solving and the bounds
    are scaled back.
    """
    T = np.asarray(T, dtype=float)
    if not np.any(T):
        raise FormError("the zero tensor has no meaningful spectral-norm hierarchy")
    form, fro = build_spectral_norm_form(T, normalize=True)
    m = T.ndim
    lifted_dims = form.dims
    if levels is None:
        levels = default_levels(1, max_dim=max_dim, n=lifted_dims)
    problem = {"kind": "spectral-norm", "shape": list(T.shape), "frobenius_norm": fro}
    result = _run(
        form,
        levels,
        "upper",
        lambda lam: -(2.0**m) * lam * fro,
        problem,
        solver,
        tol,
        seed,
        threads,
        identity_B=True,
        gap_fn=lambda k: fro * spectral_gap(m, T.shape, k),
        check_monotone=check_monotone,
        maxiter=maxiter,
    )
    result.scale = fro
    result.half_degree = tuple(1 for _ in range(m))
    return result


def kappa_table(pairs: Sequence[tuple[int, int]]) -> list[dict]:
    """Computed and conjectured condition numbers for ``(n, d)`` pairs."""
    rows = []
    for n, d in pairs:
        rows.append({"n": n, "d": d, "computed": kappa_computed([n], [d]), "conjectured": kappa_conjectured(n, d)})
    return rows
