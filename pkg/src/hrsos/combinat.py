"""Multi-index bookkeeping and exact combinatorial coefficients.

Multi-indices of a fixed degree are ordered graded reverse-lexicographically,
largest first: ``(2,0) > (1,1) > (0,2)``.  Equivalently, for a fixed degree the
canonical order sorts ascending by the reversed exponent tuple.  Every basis of
a symmetric power used elsewhere in the package follows this order, and
:func:`rank` / :func:`rank_array` give positions in it.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "MultiIndex",
    "enumerate_basis",
    "basis_array",
    "basis_size",
    "rank",
    "unrank",
    "rank_array",
    "multinomial",
    "log_multinomial",
    "delta",
    "delta_curve",
    "delta_curve_exact",
    "binomial_convolution_check",
    "vandermonde_check",
]


class MultiIndex(tuple):
    """Exponent vector ``(a_1, ..., a_n)`` with a cached degree.

    Equality and hashing are those of the underlying tuple, so a MultiIndex can
    be used interchangeably with a plain tuple as a dictionary key.  ``a < b``
    means ``a`` precedes ``b`` in the canonical order, so ``sorted`` reproduces
    :func:`enumerate_basis`.
    """

    __slots__ = ()

    def __new__(cls, exponents: Iterable[int]):
        exps = tuple(int(a) for a in exponents)
        if any(a < 0 for a in exps):
            raise ValueError(f"negative exponent in {exps}")
        return super().__new__(cls, exps)

    @property
    def exponents(self) -> tuple[int, ...]:
        return tuple(self)

    @property
    def degree(self) -> int:
        return sum(self)

    def __lt__(self, other):
        return _order_key(self) < _order_key(other)

    def __le__(self, other):
        return _order_key(self) <= _order_key(other)

    def __gt__(self, other):
        return _order_key(self) > _order_key(other)

    def __ge__(self, other):
        return _order_key(self) >= _order_key(other)

    def __repr__(self):
        return f"MultiIndex({tuple(self)})"


def _order_key(mi) -> tuple:
    # Larger monomials first; ascending sort on this key gives canonical order.
    return (-sum(mi), tuple(reversed(tuple(mi))))


def basis_size(n: int, d: int) -> int:
    """Dimension ``C(n+d-1, d)`` of the degree-``d`` symmetric power of R^n."""
    if n < 1 or d < 0:
        raise ValueError(f"need n >= 1 and d >= 0, got n={n}, d={d}")
    return math.comb(n + d - 1, d)


@lru_cache(maxsize=256)
def _basis_array_cached(n: int, d: int) -> np.ndarray:
    if n == 1:
        out = np.array([[d]], dtype=np.int64)
        out.setflags(write=False)
        return out
    # Canonical order sorts by the last coordinate first (ascending), then
    # recursively on the leading n-1 coordinates.
    blocks = []
    for last in range(d + 1):
        head = _basis_array_cached(n - 1, d - last)
        block = np.empty((head.shape[0], n), dtype=np.int64)
        block[:, :-1] = head
        block[:, -1] = last
        blocks.append(block)
    out = np.concatenate(blocks, axis=0)
    out.setflags(write=False)
    return out


def basis_array(n: int, d: int) -> np.ndarray:
    """All multi-indices of length ``n`` and degree ``d`` as a read-only
    ``(C(n+d-1,d), n)`` integer array in canonical order."""
    basis_size(n, d)
    return _basis_array_cached(n, d)


def enumerate_basis(n: int, d: int) -> list[MultiIndex]:
    return [MultiIndex(row) for row in basis_array(n, d).tolist()]


@lru_cache(maxsize=64)
def _comb_table(rows: int, cols: int) -> np.ndarray:
    # table[a, b] = C(a, b); int64 is ample for the dimensions we can store.
    table = np.zeros((rows + 1, cols + 1), dtype=np.int64)
    for a in range(rows + 1):
        for b in range(min(a, cols) + 1):
            table[a, b] = math.comb(a, b)
    table.setflags(write=False)
    return table


def rank(mi: Sequence[int]) -> int:
    """Position of ``mi`` in the canonical order of its degree."""
    exps = [int(a) for a in mi]
    if any(a < 0 for a in exps):
        raise ValueError(f"negative exponent in {tuple(exps)}")
    remaining = sum(exps)
    r = 0
    # Coordinate i (1-based) sorts before coordinates 1..i-1; each smaller
    # value v < a_i is followed by all completions of the leading i-1 slots.
    for i in range(len(exps), 1, -1):
        a = exps[i - 1]
        m = i - 1
        r += math.comb(remaining + m, m) - math.comb(remaining - a + m, m)
        remaining -= a
    return r


def rank_array(arr: np.ndarray) -> np.ndarray:
    """Vectorised :func:`rank` over the rows of an integer array."""
    arr = np.asarray(arr, dtype=np.int64)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D array of multi-indices")
    npts, n = arr.shape
    if npts == 0:
        return np.zeros(0, dtype=np.int64)
    deg = int(arr.sum(axis=1).max())
    table = _comb_table(deg + n, n)
    remaining = arr.sum(axis=1)
    out = np.zeros(npts, dtype=np.int64)
    for i in range(n, 1, -1):
        a = arr[:, i - 1]
        m = i - 1
        out += table[remaining + m, m] - table[remaining - a + m, m]
        remaining = remaining - a
    return out


def unrank(n: int, d: int, r: int) -> MultiIndex:
    size = basis_size(n, d)
    if not 0 <= r < size:
        raise IndexError(f"rank {r} out of range for n={n}, d={d} (size {size})")
    exps = [0] * n
    remaining = d
    for i in range(n, 1, -1):
        m = i - 1
        # Find the largest a with C(rem+m, m) - C(rem-a+m, m) <= r.
        a = 0
        while a < remaining:
            skipped = math.comb(remaining + m, m) - math.comb(remaining - a - 1 + m, m)
            if skipped > r:
                break
            a += 1
        r -= math.comb(remaining + m, m) - math.comb(remaining - a + m, m)
        exps[i - 1] = a
        remaining -= a
    exps[0] = remaining
    return MultiIndex(exps)


def multinomial(d: int, mi: Sequence[int]) -> int:
    """Exact multinomial coefficient ``d! / prod(a_i!)``."""
    exps = [int(a) for a in mi]
    if sum(exps) != d:
        raise ValueError(f"multi-index {tuple(exps)} has degree {sum(exps)}, expected {d}")
    out = 1
    acc = 0
    for a in exps:
        acc += a
        out *= math.comb(acc, a)
    return out


def log_multinomial(d: int, mi: Sequence[int]) -> float:
    exps = [int(a) for a in mi]
    if sum(exps) != d:
        raise ValueError(f"multi-index {tuple(exps)} has degree {sum(exps)}, expected {d}")
    return math.lgamma(d + 1) - math.fsum(math.lgamma(a + 1) for a in exps)


def delta(d: int) -> Fraction:
    """The real-to-Hermitian reduction constant ``2^d / C(2d, d)``."""
    if d < 1:
        raise ValueError("delta(d) needs d >= 1")
    return Fraction(2**d, math.comb(2 * d, d))


def delta_curve_exact(d: int, t: Fraction) -> Fraction:
    t = Fraction(t)
    if not 0 <= t <= 1:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return sum(
        (
            Fraction(math.comb(d, j) ** 2, math.comb(2 * d, 2 * j)) * t**j * (1 - t) ** (d - j)
            for j in range(d + 1)
        ),
        Fraction(0),
    )


def delta_curve(d: int, t: float) -> float:
    """``sum_j C(d,j)^2 / C(2d,2j) * t^j (1-t)^(d-j)``, summed exactly."""
    if d < 1:
        raise ValueError("delta_curve needs d >= 1")
    return float(delta_curve_exact(d, Fraction(t)))


def binomial_convolution_check(d: int, s: int, k: int) -> tuple[int, int]:
    """Both sides of the central-binomial convolution identity

        sum_j C(2j,j) C(j,k) C(2d-2j,d-j) C(d-j,s-k)
            = 4^(d-s) C(2k,k) C(2s-2k,s-k) C(d,s).

    The right side is zero when ``s > d``.
    """
    if not 0 <= k <= s:
        raise ValueError(f"need 0 <= k <= s, got k={k}, s={s}")
    if d < 0:
        raise ValueError("d must be nonnegative")
    lhs = sum(
        math.comb(2 * j, j) * math.comb(j, k) * math.comb(2 * d - 2 * j, d - j) * math.comb(d - j, s - k)
        for j in range(d + 1)
    )
    if s > d:
        rhs = 0
    else:
        rhs = 4 ** (d - s) * math.comb(2 * k, k) * math.comb(2 * s - 2 * k, s - k) * math.comb(d, s)
    return lhs, rhs


def vandermonde_check(d: int, gamma: Sequence[int]) -> tuple[int, int]:
    """``sum_{a+b=gamma, |a|=|b|=d} C(d,a) C(d,b)`` versus ``C(2d, gamma)``."""
    gamma = tuple(int(g) for g in gamma)
    if sum(gamma) != 2 * d:
        raise ValueError("gamma must have degree 2d")
    total = 0
    for a in basis_array(len(gamma), d).tolist():
        b = [g - x for g, x in zip(gamma, a)]
        if min(b) < 0:
            continue
        total += multinomial(d, a) * multinomial(d, b)
    return total, multinomial(2 * d, gamma)
