"""Sparse Gram operators of forms in the orthonormal symmetric-power basis.

For a form ``p`` of degree ``2d`` with normalized coefficients ``C_g`` the
maximally symmetric Gram operator has entries

    M(p)[a, b] = C_{a+b} sqrt(C(d,a) C(d,b))

in the orthonormal basis ``{sqrt(C(d,a)) e^a}`` of ``S^d``.  Multiplying the
Hermitian form by ``||z||^(2(k-d))`` gives the level-``k`` operator

    P_k[u, v] = sum_g C_{a+b} C(d,a) C(d,b) C(k-d,g) / sqrt(C(k,u) C(k,v)),

with ``u = a + g`` and ``v = b + g``.  The ratio of binomials is evaluated as a
product of ``d`` factors ``(g_i + t) / (k - s)``, each of order one, so
entries stay finite for any ``k``.

Matrices are stored as the upper triangle (diagonal included); symmetry is
structural.  Multi-homogeneous operators live on ``S^k(V_1) x ... x S^k(V_m)``
with row-major flattening of the per-factor ranks.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np
import scipy.sparse as sp

from .combinat import basis_array, basis_size, multinomial, rank, rank_array
from .polyform import (
    FormError,
    HomogeneousForm,
    MultiForm,
    multi_sphere_power,
    sphere_power,
)

__all__ = [
    "SparseSymMatrix",
    "OrthoVec",
    "embed",
    "build_M",
    "build_Pk",
    "build_Nk",
    "build_multi_Pk",
    "build_multi_Nk",
    "build_Pk_exact",
    "exact_trace",
    "exact_to_dense",
    "hermitian_value",
    "check_partial_transpose",
    "alternative_quartic_gram",
    "kappa_N",
    "kappa_conjectured",
    "write_coo",
    "read_coo",
]

MAX_ASSEMBLY_DIM = 50_000_000


@dataclass(frozen=True, eq=False)
class SparseSymMatrix:
    """Real symmetric sparse matrix on a tagged symmetric-power basis.

    ``upper`` holds the upper triangle in CSR form; ``basis`` is a tuple of
    ``(n_i, k_i)`` pairs, one per tensor factor.
    """

    upper: sp.csr_matrix
    basis: tuple

    def __post_init__(self):
        basis = tuple((int(n), int(k)) for n, k in self.basis)
        object.__setattr__(self, "basis", basis)
        dim = math.prod(basis_size(n, k) for n, k in basis)
        if self.upper.shape != (dim, dim):
            raise ValueError(f"matrix shape {self.upper.shape} does not match basis dimension {dim}")
        if sp.tril(self.upper, k=-1).nnz:
            raise ValueError("entries below the diagonal; pass the upper triangle only")

    @property
    def dim(self) -> int:
        return self.upper.shape[0]

    @property
    def nnz(self) -> int:
        """Stored entries (upper triangle, diagonal included)."""
        return self.upper.nnz

    @property
    def full_nnz(self) -> int:
        """Stored entries of the full symmetric matrix."""
        return self.csr.nnz

    @cached_property
    def csr(self) -> sp.csr_matrix:
        """Full symmetric matrix in CSR form (cached)."""
        strict = sp.triu(self.upper, k=1, format="csr")
        full = (self.upper + strict.T).tocsr()
        full.sort_indices()
        return full

    def to_dense(self) -> np.ndarray:
        return self.csr.toarray()

    def diagonal(self) -> np.ndarray:
        return self.upper.diagonal()

    def matvec(self, v) -> np.ndarray:
        """``A v`` from single-triangle storage (off-diagonals applied twice)."""
        v = np.asarray(v)
        if v.shape[0] != self.dim:
            raise ValueError(f"vector length {v.shape[0]} does not match dimension {self.dim}")
        diag = self.upper.diagonal()
        if v.ndim == 2:
            diag = diag[:, None]
        return self.upper @ v + self.upper.T @ v - diag * v

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """0-based ``(row, col, value)`` arrays of the stored upper triangle,
        sorted by row then column."""
        coo = self.upper.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]

    def scaled(self, factor: float) -> "SparseSymMatrix":
        return SparseSymMatrix((self.upper * factor).tocsr(), self.basis)

    def same_entries(self, other: "SparseSymMatrix") -> bool:
        """Entrywise (bitwise) equality of the stored upper triangles."""
        if self.basis != other.basis:
            return False
        a, b = self.triplets(), other.triplets()
        return all(np.array_equal(x, y) for x, y in zip(a, b))


@dataclass(frozen=True)
class OrthoVec:
    """Coordinates in the orthonormal basis of a tagged symmetric power."""

    coords: np.ndarray
    basis: tuple


def _embed_factor(z: np.ndarray, k: int) -> np.ndarray:
    n = z.shape[-1]
    B = basis_array(n, k)
    scale = np.sqrt(np.array([float(multinomial(k, row)) for row in B.tolist()]))
    mono = np.ones(B.shape[0], dtype=np.result_type(z.dtype, float))
    for i in range(n):
        mono = mono * z[i] ** B[:, i]
    return scale * mono


def embed(x, basis) -> np.ndarray:
    """Coordinates ``sqrt(C(k,u)) x^u`` of ``x^(tensor k)`` (Kronecker product
    over factors for a multi basis).  ``x`` is one vector or a list of vectors,
    matching ``basis`` (an ``(n, k)`` pair or a tuple of them)."""
    basis = _as_basis(basis)
    xs = [np.asarray(x)] if len(basis) == 1 and np.asarray(x, dtype=object).ndim == 1 else [np.asarray(v) for v in x]
    if len(xs) != len(basis):
        raise ValueError(f"expected {len(basis)} vectors, got {len(xs)}")
    out = np.ones(1)
    for v, (n, k) in zip(xs, basis):
        if v.shape != (n,):
            raise ValueError(f"vector of shape {v.shape} does not match basis factor (n={n}, k={k})")
        out = np.kron(out, _embed_factor(v, k))
    return out


def _as_basis(basis) -> tuple:
    if isinstance(basis[0], (int, np.integer)):
        return ((int(basis[0]), int(basis[1])),)
    return tuple((int(n), int(k)) for n, k in basis)


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


def _splits(gamma: tuple, d: int) -> list[tuple]:
    """All ``a`` with ``a <= gamma`` componentwise and ``|a| = d``."""
    out = []

    def rec(i, remaining, prefix):
        if i == len(gamma) - 1:
            if remaining <= gamma[i]:
                out.append(prefix + (remaining,))
            return
        tail_cap = sum(gamma[i + 1 :])
        for a in range(max(0, remaining - tail_cap), min(gamma[i], remaining) + 1):
            rec(i + 1, remaining - a, prefix + (a,))

    rec(0, d, ())
    return out


class _FactorKernel:
    """Per-factor ``(row rank, col rank, value)`` arrays for ``u = a + g``,
    ``v = b + g`` over all ``|g| = k - d``; value is
    ``C(k-d,g) / sqrt(C(k,u) C(k,v))``."""

    def __init__(self, n: int, d: int, k: int):
        self.n, self.d, self.k = n, d, k
        self.gammas = basis_array(n, k - d)
        self._ratio_cache: dict[tuple, np.ndarray] = {}
        self._rank_cache: dict[tuple, np.ndarray] = {}

    def ratio(self, a: tuple) -> np.ndarray:
        # prod_i (g_i + 1)...(g_i + a_i) / (k (k-1) ... (k-d+1)), as d paired factors.
        if a not in self._ratio_cache:
            G = self.gammas
            out = np.ones(G.shape[0])
            s = 0
            for i, ai in enumerate(a):
                for t in range(1, ai + 1):
                    out *= (G[:, i] + t) / (self.k - s)
                    s += 1
            self._ratio_cache[a] = out
        return self._ratio_cache[a]

    def ranks(self, a: tuple) -> np.ndarray:
        if a not in self._rank_cache:
            self._rank_cache[a] = rank_array(self.gammas + np.asarray(a, dtype=np.int64))
        return self._rank_cache[a]

    def values(self, a: tuple, b: tuple) -> np.ndarray:
        if a == b:
            return self.ratio(a)
        return np.sqrt(self.ratio(a) * self.ratio(b))


def _half_degrees(form: MultiForm) -> tuple[int, ...]:
    out = []
    for n, D in form.factors:
        if D % 2:
            raise FormError(f"factor degree {D} is odd; apply odd_lift first")
        out.append(D // 2)
    return tuple(out)


def _levels(k, ds: tuple) -> tuple:
    ks = tuple(int(x) for x in k) if isinstance(k, (tuple, list)) else tuple(int(k) for _ in ds)
    if len(ks) != len(ds):
        raise ValueError(f"{len(ks)} levels given for {len(ds)} factors")
    for ki, d in zip(ks, ds):
        if ki < d:
            raise ValueError(f"level k={ki} is below the half-degree {d}")
    return ks


def _assemble(form: MultiForm, k) -> SparseSymMatrix:
    """``k`` is a common level or one level per factor."""
    ds = _half_degrees(form)
    ks = _levels(k, ds)
    basis = tuple((n, ki) for n, ki in zip(form.dims, ks))
    sizes = [basis_size(n, ki) for n, ki in basis]
    dim = math.prod(sizes)
    if dim > MAX_ASSEMBLY_DIM:
        raise MemoryError(f"basis dimension {dim} exceeds the assembly limit {MAX_ASSEMBLY_DIM}")
    strides = [math.prod(sizes[i + 1 :]) for i in range(len(sizes))]
    kernels = [_FactorKernel(n, d, ki) for n, d, ki in zip(form.dims, ds, ks)]
    small_ranks = [{} for _ in ds]

    def small_rank(i, a):
        cache = small_ranks[i]
        if a not in cache:
            cache[a] = rank(a)
        return cache[a]

    rows, cols, vals = [], [], []
    for key, c in form.terms.items():
        C = float(c) / math.prod(multinomial(2 * d, g) for g, d in zip(key, ds))
        per_factor = [[(a, tuple(g - x for g, x in zip(gamma, a))) for a in _splits(gamma, d)] for gamma, d in zip(key, ds)]
        for choice in itertools.product(*per_factor):
            ra = tuple(small_rank(i, a) for i, (a, _) in enumerate(choice))
            rb = tuple(small_rank(i, b) for i, (_, b) in enumerate(choice))
            if ra > rb:
                continue
            w = C * math.prod(multinomial(d, a) * multinomial(d, b) for (a, b), d in zip(choice, ds))
            r_idx = np.zeros(1, dtype=np.int64)
            c_idx = np.zeros(1, dtype=np.int64)
            v = np.full(1, w)
            for kern, stride, (a, b) in zip(kernels, strides, choice):
                r_idx = (r_idx[:, None] + stride * kern.ranks(a)[None, :]).ravel()
                c_idx = (c_idx[:, None] + stride * kern.ranks(b)[None, :]).ravel()
                v = (v[:, None] * kern.values(a, b)[None, :]).ravel()
            rows.append(r_idx)
            cols.append(c_idx)
            vals.append(v)
    if rows:
        r = np.concatenate(rows)
        cc = np.concatenate(cols)
        vv = np.concatenate(vals)
    else:
        r = cc = np.zeros(0, dtype=np.int64)
        vv = np.zeros(0)
    upper = sp.coo_matrix((vv, (r, cc)), shape=(dim, dim)).tocsr()
    upper.sum_duplicates()
    upper.sort_indices()
    return SparseSymMatrix(upper, basis)


def _as_multi(p) -> MultiForm:
    if isinstance(p, HomogeneousForm):
        return p.as_multi()
    if isinstance(p, MultiForm):
        return p
    raise TypeError(f"expected a form, got {type(p).__name__}")


def build_M(p: HomogeneousForm) -> SparseSymMatrix:
    """Maximally symmetric Gram operator of an even-degree form."""
    if p.degree % 2:
        raise FormError(f"degree {p.degree} is odd; apply odd_lift first")
    return _assemble(p.as_multi(), p.degree // 2)


def build_Pk(p: HomogeneousForm, k: int) -> SparseSymMatrix:
    """Gram operator of ``p(x) ||x||^(2(k-d))`` induced by ``M(p)``."""
    if p.degree % 2:
        raise FormError(f"degree {p.degree} is odd; apply odd_lift first")
    if k < p.degree // 2:
        raise ValueError(f"level k={k} is below d={p.degree // 2}")
    return _assemble(p.as_multi(), k)


def build_Nk(n: int, d: int, k: int) -> SparseSymMatrix:
    """Level-``k`` operator of ``||x||^(2d)``; symmetric positive definite."""
    if d < 0 or k < d:
        raise ValueError(f"need 0 <= d <= k, got d={d}, k={k}")
    return _assemble(sphere_power(n, d).as_multi(), k)


def build_multi_Pk(p: MultiForm, k) -> SparseSymMatrix:
    """Level-``k`` operator of a multi-form; ``k`` may also be a tuple of
    per-factor levels (``k_i = d_i`` gives the degree-``d`` Gram operator)."""
    return _assemble(_as_multi(p), k)


def build_multi_Nk(dims: Sequence[int], ds: Sequence[int], k) -> SparseSymMatrix:
    if len(dims) != len(ds):
        raise ValueError("dims and half-degrees differ in length")
    return _assemble(multi_sphere_power(dims, ds), k)


# ---------------------------------------------------------------------------
# Exact (rational) assembly for validation
# ---------------------------------------------------------------------------


def build_Pk_exact(p: HomogeneousForm | MultiForm, k: int) -> tuple[dict, tuple]:
    """Exact monomial-basis coefficients of the level-``k`` operator.

    Returns ``(entries, basis)`` where ``entries[(row, col)]`` is the rational
    ``sum_g C_{a+b} C(d,a) C(d,b) C(k-d,g)`` multiplying ``e^u (e^v)^T``.  The
    orthonormal-basis entry is this divided by ``sqrt(C(k,u) C(k,v))``.
    Slow; intended for small ``k``.
    """
    form = _as_multi(p)
    if not form.is_exact:
        raise FormError("exact assembly needs rational coefficients")
    ds = _half_degrees(form)
    ks = _levels(k, ds)
    sizes = [basis_size(n, ki) for n, ki in zip(form.dims, ks)]
    strides = [math.prod(sizes[i + 1 :]) for i in range(len(sizes))]
    gamma_sets = [
        [(tuple(g), multinomial(ki - d, g)) for g in basis_array(n, ki - d).tolist()]
        for n, d, ki in zip(form.dims, ds, ks)
    ]
    entries: dict = {}
    for key, c in form.terms.items():
        C = Fraction(c) / math.prod(multinomial(2 * d, g) for g, d in zip(key, ds))
        per_factor = [[(a, tuple(g - x for g, x in zip(gamma, a))) for a in _splits(gamma, d)] for gamma, d in zip(key, ds)]
        for choice in itertools.product(*per_factor):
            w = C * math.prod(multinomial(d, a) * multinomial(d, b) for (a, b), d in zip(choice, ds))
            for gs in itertools.product(*gamma_sets):
                row = col = 0
                coeff = w
                for (a, b), (g, gmult), stride in zip(choice, gs, strides):
                    row += stride * rank(tuple(x + y for x, y in zip(a, g)))
                    col += stride * rank(tuple(x + y for x, y in zip(b, g)))
                    coeff *= gmult
                entries[(row, col)] = entries.get((row, col), Fraction(0)) + coeff
    return entries, tuple(zip(form.dims, ks))


def _basis_multinomials(basis: tuple) -> list[int]:
    out = [1]
    for n, k in basis:
        out = [a * multinomial(k, row) for a in out for row in basis_array(n, k).tolist()]
    return out


def exact_trace(p: HomogeneousForm | MultiForm, k: int) -> Fraction:
    """Exact trace of the level-``k`` operator in the orthonormal basis."""
    entries, basis = build_Pk_exact(p, k)
    mult = _basis_multinomials(basis)
    return sum((c / mult[r] for (r, col), c in entries.items() if r == col), Fraction(0))


def exact_to_dense(entries: dict, basis: tuple) -> np.ndarray:
    """Orthonormal-basis float matrix from :func:`build_Pk_exact` output; the
    only rounding is the final square root."""
    mult = _basis_multinomials(basis)
    dim = len(mult)
    out = np.zeros((dim, dim))
    for (r, c), val in entries.items():
        if val == 0:
            continue
        mag = math.sqrt(float(val * val / (mult[r] * mult[c])))
        out[r, c] = mag if val > 0 else -mag
    return out


# ---------------------------------------------------------------------------
# Evaluation and structural validators
# ---------------------------------------------------------------------------


def hermitian_value(A: SparseSymMatrix, z) -> float:
    """``psi(z)^H A psi(z)`` with ``psi(z) = z^(tensor k)`` in orthonormal
    coordinates.  ``z`` is a complex vector, or a list of them for a multi
    basis.  Real for symmetric real ``A``."""
    if len(A.basis) == 1:
        zs = [np.asarray(z, dtype=complex)]
    else:
        zs = [np.asarray(v, dtype=complex) for v in z]
    if len(zs) != len(A.basis):
        raise ValueError(f"expected {len(A.basis)} vectors, got {len(zs)}")
    for v, (n, _) in zip(zs, A.basis):
        if v.shape != (n,):
            raise ValueError(f"vector of shape {v.shape} does not match n={n}")
    psi = embed(zs if len(zs) > 1 else zs[0], A.basis)
    val = np.vdot(psi, A.csr @ psi)
    scale = max(1.0, float(np.abs(psi).max()) ** 2 * float(abs(A.csr).sum()))
    if abs(val.imag) > 1e-12 * scale:
        raise ArithmeticError(f"hermitian value has imaginary part {val.imag:.3e}")
    return float(val.real)


def _tensor_isometry(n: int, d: int) -> np.ndarray:
    """Columns are the orthonormal symmetric basis vectors inside ``(R^n)^(tensor d)``."""
    dim = basis_size(n, d)
    V = np.zeros((n**d, dim))
    for w_index, word in enumerate(itertools.product(range(n), repeat=d)):
        content = [0] * n
        for letter in word:
            content[letter] += 1
        V[w_index, rank(content)] = 1.0 / math.sqrt(multinomial(d, content))
    return V


def check_partial_transpose(A: SparseSymMatrix, tol: float = 1e-12, max_size: int = 4096) -> bool:
    """Whether the operator, embedded in the full tensor power, is unchanged by
    transposing its first tensor factor."""
    if len(A.basis) != 1:
        raise ValueError("partial-transpose check is defined for a single factor")
    n, d = A.basis[0]
    if n**d > max_size:
        raise ValueError(f"n^d = {n**d} exceeds the validation size guard {max_size}")
    if d == 0:
        return True
    V = _tensor_isometry(n, d)
    E = V @ A.to_dense() @ V.T
    rest = n ** (d - 1)
    E4 = E.reshape(n, rest, n, rest)
    swapped = E4.transpose(2, 1, 0, 3)
    scale = max(1.0, float(np.abs(E).max()))
    return bool(np.abs(E4 - swapped).max() <= tol * scale)


def alternative_quartic_gram() -> SparseSymMatrix:
    """A Gram operator of ``||x||^4 / 4`` on ``S^2(R^2)`` that is not maximally
    symmetric: ``(3/4) I - Pi_U`` with ``U`` spanned by the symmetrized
    ``e1 e2`` and ``e1 e1 - e2 e2``."""
    u1 = np.array([0.0, 1.0, 0.0])
    u2 = np.array([1.0, 0.0, -1.0]) / math.sqrt(2.0)
    Q = 0.75 * np.eye(3) - np.outer(u1, u1) - np.outer(u2, u2)
    return SparseSymMatrix(sp.csr_matrix(np.triu(Q)), ((2, 2),))


def kappa_conjectured(n: int, d: int) -> float:
    """``C(n/2 + d - 1, floor(d/2))`` with the binomial extended via Gamma."""
    top = n / 2 + d - 1
    bottom = d // 2
    return math.exp(math.lgamma(top + 1) - math.lgamma(bottom + 1) - math.lgamma(top - bottom + 1))


def kappa_N(n: int, d: int, max_dim: int = 5000) -> tuple[float, float]:
    """``(computed, conjectured)`` condition number of the ``||x||^(2d)`` Gram operator."""
    dim = basis_size(n, d)
    if dim > max_dim:
        raise ValueError(f"dimension {dim} exceeds the dense limit {max_dim}")
    eigs = np.linalg.eigvalsh(build_Nk(n, d, d).to_dense())
    return float(eigs[-1] / eigs[0]), kappa_conjectured(n, d)


# ---------------------------------------------------------------------------
# Coordinate text export
# ---------------------------------------------------------------------------


def write_coo(A: SparseSymMatrix, target: str | Path | TextIO) -> None:
    """Write ``row col value`` lines (1-based, upper triangle).  The first line
    is a ``%`` comment recording the dimension and basis."""
    basis = " ".join(f"{n},{k}" for n, k in A.basis)
    rows, cols, vals = A.triplets()
    lines = [f"% dim={A.dim} nnz={len(vals)} basis={basis}\n"]
    lines.extend(f"{r + 1} {c + 1} {v!r}\n" for r, c, v in zip(rows.tolist(), cols.tolist(), vals.tolist()))
    if isinstance(target, (str, Path)):
        Path(target).write_text("".join(lines))
    else:
        target.writelines(lines)


def read_coo(source: str | Path | TextIO) -> SparseSymMatrix:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    header, rows, cols, vals = None, [], [], []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("%"):
            header = line
            continue
        r, c, v = line.split()
        rows.append(int(r) - 1)
        cols.append(int(c) - 1)
        vals.append(float(v))
    if header is None or "basis=" not in header:
        raise ValueError("missing '% dim=... basis=...' header line")
    basis = tuple(tuple(int(x) for x in part.split(",")) for part in header.split("basis=")[1].split())
    dim = math.prod(basis_size(n, k) for n, k in basis)
    upper = sp.coo_matrix((np.array(vals), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))), shape=(dim, dim)).tocsr()
    upper.sort_indices()
    return SparseSymMatrix(upper, basis)
