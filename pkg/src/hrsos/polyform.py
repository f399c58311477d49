"""Real homogeneous and multi-homogeneous forms.

A form is stored as a sparse map from exponent tuples to coefficients in the
monomial convention ``p(x) = sum_g c_g x^g``.  Coefficients stay exact
(:class:`fractions.Fraction`) when the input was exact and are only converted
to floats when a matrix is assembled.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational, Real
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .combinat import basis_array, multinomial, _order_key

Coeff = Union[Fraction, float]

__all__ = [
    "FormError",
    "ParseError",
    "HomogeneousForm",
    "MultiForm",
    "NormalizedCoeffs",
    "parse_form",
    "parse_multi_form",
    "format_form",
    "form_from_records",
    "multi_form_from_records",
    "normalize_coeffs",
    "denormalize_coeffs",
    "sphere_power",
    "multi_sphere_power",
    "odd_lift",
    "odd_lift_scale",
    "build_spectral_norm_form",
    "tensor_norm",
]


class FormError(ValueError):
    """Invalid form: wrong degree, non-homogeneous input, dimension mismatch."""


class ParseError(FormError):
    def __init__(self, message: str, position: int, text: str = ""):
        self.position = position
        self.column = position + 1
        self.text = text
        super().__init__(f"{message} (column {self.column})")


def _clean_coeff(c) -> Coeff:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)) and not isinstance(c, bool):
        return Fraction(c)
    if isinstance(c, (np.integer,)):
        return Fraction(int(c))
    if isinstance(c, Real):
        return float(c)
    raise TypeError(f"unsupported coefficient type {type(c).__name__}")


def _canonical_terms(terms: Mapping, key_check) -> dict:
    out = {}
    for key, c in terms.items():
        key = key_check(key)
        c = _clean_coeff(c)
        if c == 0:
            continue
        out[key] = out.get(key, 0) + c
        if out[key] == 0:
            del out[key]
    return dict(sorted(out.items(), key=lambda kv: _sort_key(kv[0])))


def _sort_key(key):
    if key and isinstance(key[0], tuple):
        return tuple(_order_key(k) for k in key)
    return _order_key(key)


@dataclass(frozen=True, eq=False)
class HomogeneousForm:
    """Homogeneous polynomial of degree ``degree`` in ``n`` variables."""

    n: int
    degree: int
    terms: Mapping[tuple, Coeff] = field(default_factory=dict)
    variables: tuple | None = None

    def __post_init__(self):
        if self.n < 1:
            raise FormError("a form needs at least one variable")
        if self.degree < 0:
            raise FormError("degree must be nonnegative")
        n, D = self.n, self.degree

        def check(key):
            key = tuple(int(a) for a in key)
            if len(key) != n:
                raise FormError(f"exponent {key} has length {len(key)}, expected {n}")
            if any(a < 0 for a in key):
                raise FormError(f"negative exponent in {key}")
            if sum(key) != D:
                raise FormError(f"monomial {key} has degree {sum(key)}, expected {D}")
            return key

        object.__setattr__(self, "terms", MappingProxyType(_canonical_terms(self.terms, check)))
        if self.variables is not None:
            names = tuple(self.variables)
            if len(names) != n:
                raise FormError(f"{len(names)} variable names for {n} variables")
            object.__setattr__(self, "variables", names)

    # -- basic properties ---------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self.terms.values())

    def __eq__(self, other):
        if not isinstance(other, HomogeneousForm):
            return NotImplemented
        return (self.n, self.degree, dict(self.terms)) == (other.n, other.degree, dict(other.terms))

    def __repr__(self):
        return f"HomogeneousForm(n={self.n}, degree={self.degree}, terms={dict(self.terms)})"

    def exponent_matrix(self) -> np.ndarray:
        if not self.terms:
            return np.zeros((0, self.n), dtype=np.int64)
        return np.array(list(self.terms.keys()), dtype=np.int64)

    def coefficient_vector(self) -> np.ndarray:
        return np.array([float(c) for c in self.terms.values()], dtype=float)

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, x) -> float | np.ndarray:
        """Value at one point (shape ``(n,)``) or at many (shape ``(m, n)``).

        Complex points are accepted and give complex values.
        """
        x = np.asarray(x)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.n:
            raise FormError(f"point has dimension {pts.shape[1]}, form has {self.n} variables")
        vals = _eval_monomials(pts, self.exponent_matrix()) @ self.coefficient_vector()
        return vals[0] if single else vals

    def __call__(self, x):
        return self.evaluate(x)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.n:
            raise FormError(f"point has dimension {pts.shape[1]}, form has {self.n} variables")
        grad = _gradient(pts, self.exponent_matrix(), self.coefficient_vector())
        return grad[0] if single else grad

    # -- conversions -----------------------------------------------------------

    def to_float(self) -> "HomogeneousForm":
        return HomogeneousForm(self.n, self.degree, {k: float(c) for k, c in self.terms.items()}, self.variables)

    def scaled(self, factor) -> "HomogeneousForm":
        factor = _clean_coeff(factor)
        return HomogeneousForm(self.n, self.degree, {k: c * factor for k, c in self.terms.items()}, self.variables)

    def as_multi(self) -> "MultiForm":
        return MultiForm(((self.n, self.degree),), {(k,): c for k, c in self.terms.items()})

    def __str__(self):
        return format_form(self)


def _eval_monomials(pts: np.ndarray, exps: np.ndarray) -> np.ndarray:
    # (m, T) matrix of monomial values; integer powers keep complex inputs exact.
    m = pts.shape[0]
    out = np.ones((m, exps.shape[0]), dtype=np.result_type(pts.dtype, float))
    for i in range(exps.shape[1]):
        col = exps[:, i]
        if not col.any():
            continue
        out *= pts[:, i : i + 1] ** col[None, :]
    return out


def _gradient(pts: np.ndarray, exps: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    m, n = pts.shape
    grad = np.zeros((m, n))
    for i in range(n):
        mask = exps[:, i] > 0
        if not mask.any():
            continue
        reduced = exps[mask].copy()
        reduced[:, i] -= 1
        grad[:, i] = _eval_monomials(pts, reduced) @ (coeffs[mask] * exps[mask, i])
    return grad


@dataclass(frozen=True, eq=False)
class MultiForm:
    """Multi-homogeneous form on ``V_1 x ... x V_m``.

    ``factors`` lists ``(n_i, D_i)`` and each term key is a tuple of exponent
    tuples, one per factor.
    """

    factors: tuple
    terms: Mapping[tuple, Coeff] = field(default_factory=dict)
    variables: tuple | None = None

    def __post_init__(self):
        factors = tuple((int(n), int(D)) for n, D in self.factors)
        if not factors:
            raise FormError("a multi-form needs at least one factor")
        if any(n < 1 or D < 0 for n, D in factors):
            raise FormError(f"invalid factor spec {factors}")
        object.__setattr__(self, "factors", factors)

        def check(key):
            if len(key) != len(factors):
                raise FormError(f"term key {key} has {len(key)} parts, expected {len(factors)}")
            out = []
            for part, (n, D) in zip(key, factors):
                part = tuple(int(a) for a in part)
                if len(part) != n or any(a < 0 for a in part):
                    raise FormError(f"bad exponent {part} for a factor with {n} variables")
                if sum(part) != D:
                    raise FormError(f"exponent {part} has degree {sum(part)}, expected {D}")
                out.append(part)
            return tuple(out)

        object.__setattr__(self, "terms", MappingProxyType(_canonical_terms(self.terms, check)))
        if self.variables is not None:
            names = tuple(tuple(v) for v in self.variables)
            if [len(v) for v in names] != [n for n, _ in factors]:
                raise FormError("variable names do not match factor sizes")
            object.__setattr__(self, "variables", names)

    @property
    def m(self) -> int:
        return len(self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(n for n, _ in self.factors)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(D for _, D in self.factors)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_exact(self) -> bool:
        return all(isinstance(c, Fraction) for c in self.terms.values())

    def __eq__(self, other):
        if not isinstance(other, MultiForm):
            return NotImplemented
        return (self.factors, dict(self.terms)) == (other.factors, dict(other.terms))

    def __repr__(self):
        return f"MultiForm(factors={self.factors}, terms={dict(self.terms)})"

    def _flat(self):
        exps = np.array([sum(key, ()) for key in self.terms], dtype=np.int64).reshape(
            len(self.terms), sum(self.dims)
        )
        coeffs = np.array([float(c) for c in self.terms.values()])
        return exps, coeffs

    def _stack(self, xs) -> tuple[np.ndarray, bool]:
        if len(xs) != self.m:
            raise FormError(f"expected {self.m} point blocks, got {len(xs)}")
        blocks = [np.asarray(x) for x in xs]
        single = blocks[0].ndim == 1
        blocks = [np.atleast_2d(b) for b in blocks]
        for b, n in zip(blocks, self.dims):
            if b.shape[1] != n:
                raise FormError(f"point block has dimension {b.shape[1]}, expected {n}")
        return np.concatenate(blocks, axis=1), single

    def evaluate(self, xs: Sequence) -> float | np.ndarray:
        pts, single = self._stack(xs)
        exps, coeffs = self._flat()
        vals = _eval_monomials(pts, exps) @ coeffs
        return vals[0] if single else vals

    def __call__(self, *xs):
        return self.evaluate(xs)

    def gradient(self, xs: Sequence) -> list[np.ndarray]:
        pts, single = self._stack([np.asarray(x, dtype=float) for x in xs])
        exps, coeffs = self._flat()
        grad = _gradient(pts, exps, coeffs)
        out, start = [], 0
        for n in self.dims:
            g = grad[:, start : start + n]
            out.append(g[0] if single else g)
            start += n
        return out

    def to_float(self) -> "MultiForm":
        return MultiForm(self.factors, {k: float(c) for k, c in self.terms.items()}, self.variables)

    def scaled(self, factor) -> "MultiForm":
        factor = _clean_coeff(factor)
        return MultiForm(self.factors, {k: c * factor for k, c in self.terms.items()}, self.variables)


# ---------------------------------------------------------------------------
# Parsing and printing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<pow>\*\*|\^)
  | (?P<op>[-+*/()])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens, pos = [], 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = match.lastgroup
        if kind != "ws":
            tokens.append((kind if kind != "op" else match.group(), match.group(), pos))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Poly(dict):
    """Expansion workspace: exponent tuple -> Fraction, keeping cancelled keys
    so the degree of an identically zero expression is still known."""


def _poly_mul(a: _Poly, b: _Poly) -> _Poly:
    out = _Poly()
    for ka, ca in a.items():
        for kb, cb in b.items():
            key = tuple(x + y for x, y in zip(ka, kb))
            out[key] = out.get(key, 0) + ca * cb
    return out


def _poly_add(a: _Poly, b: _Poly, sign: int = 1) -> _Poly:
    out = _Poly(a)
    for k, c in b.items():
        out[k] = out.get(k, 0) + sign * c
    return out


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.text = text
        self.index = {name: i for i, name in enumerate(variables)}
        if len(self.index) != len(variables):
            raise FormError("duplicate variable names")
        self.n = len(variables)
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def take(self, kind=None):
        tok = self.tokens[self.pos]
        if kind is not None and tok[0] != kind:
            expected = "end of input" if kind == "end" else repr(kind)
            got = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ParseError(f"expected {expected}, found {got}", tok[2], self.text)
        self.pos += 1
        return tok

    def constant(self, value) -> _Poly:
        return _Poly({(0,) * self.n: Fraction(value)})

    def parse(self) -> _Poly:
        if self.peek()[0] == "end":
            raise ParseError("empty expression", 0, self.text)
        poly = self.expr()
        self.take("end")
        return poly

    def expr(self) -> _Poly:
        poly = self.term()
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.term()
            poly = _poly_add(poly, rhs, 1 if op == "+" else -1)
        return poly

    def term(self) -> _Poly:
        poly = self.unary()
        while self.peek()[0] == "*":
            self.take()
            poly = _poly_mul(poly, self.unary())
        if self.peek()[0] == "/":
            raise ParseError("division is only allowed between numeric literals", self.peek()[2], self.text)
        return poly

    def unary(self) -> _Poly:
        kind = self.peek()[0]
        if kind in ("+", "-"):
            self.take()
            inner = self.unary()
            if kind == "-":
                return _Poly({k: -c for k, c in inner.items()})
            return inner
        return self.power()

    def power(self) -> _Poly:
        base = self.atom()
        if self.peek()[0] == "pow":
            self.take()
            tok = self.peek()
            if tok[0] == "-":
                raise ParseError("negative exponents are not allowed", tok[2], self.text)
            if tok[0] != "num":
                raise ParseError("exponent must be a nonnegative integer literal", tok[2], self.text)
            self.take()
            if not tok[1].isdigit():
                raise ParseError(f"exponent {tok[1]!r} is not a nonnegative integer", tok[2], self.text)
            if self.peek()[0] == "pow":
                raise ParseError("chained exponents are ambiguous; use parentheses", self.peek()[2], self.text)
            result = self.constant(1)
            for _ in range(int(tok[1])):
                result = _poly_mul(result, base)
            return result
        return base

    def atom(self) -> _Poly:
        tok = self.peek()
        if tok[0] == "num":
            self.take()
            value = Fraction(tok[1])
            if self.peek()[0] == "/":
                self.take()
                den = self.take()
                if den[0] != "num":
                    raise ParseError("division is only allowed between numeric literals", den[2], self.text)
                if Fraction(den[1]) == 0:
                    raise ParseError("division by zero", den[2], self.text)
                value = value / Fraction(den[1])
            return self.constant(value)
        if tok[0] == "name":
            self.take()
            if tok[1] not in self.index:
                raise ParseError(f"unknown variable {tok[1]!r}", tok[2], self.text)
            exps = [0] * self.n
            exps[self.index[tok[1]]] = 1
            return _Poly({tuple(exps): Fraction(1)})
        if tok[0] == "(":
            self.take()
            inner = self.expr()
            self.take(")")
            return inner
        got = "end of input" if tok[0] == "end" else repr(tok[1])
        raise ParseError(f"unexpected {got}", tok[2], self.text)


def _expand(text: str, variables: Sequence[str]) -> _Poly:
    if not variables:
        raise FormError("at least one variable is required")
    return _Parser(text, list(variables)).parse()


def _homogeneous_degree(poly: _Poly, describe) -> int:
    live = {sum(k) for k, c in poly.items() if c != 0}
    if len(live) > 1:
        raise FormError(f"{describe} is not homogeneous (degrees {sorted(live)})")
    if live:
        return live.pop()
    structural = {sum(k) for k in poly}
    if len(structural) != 1:
        raise FormError(f"{describe} is identically zero with no well-defined degree")
    return structural.pop()


def parse_form(text: str, variables: Sequence[str]) -> HomogeneousForm:
    """Expand ``text`` into a :class:`HomogeneousForm` over ``variables``.

    Supports ``+ - *``, ``^`` (or ``**``) with nonnegative integer exponents,
    parentheses, and decimal or ``a/b`` literals.
    """
    poly = _expand(text, variables)
    degree = _homogeneous_degree(poly, "expression")
    terms = {k: c for k, c in poly.items() if c != 0}
    return HomogeneousForm(len(variables), degree, terms, tuple(variables))


def parse_multi_form(text: str, variable_groups: Sequence[Sequence[str]]) -> MultiForm:
    """Parse a multi-homogeneous form; each variable group is one factor."""
    flat = [v for group in variable_groups for v in group]
    poly = _expand(text, flat)
    sizes = [len(g) for g in variable_groups]
    split_poly = {}
    for key, c in poly.items():
        parts, start = [], 0
        for s in sizes:
            parts.append(key[start : start + s])
            start += s
        split_poly[tuple(parts)] = c
    degrees = []
    for i, group in enumerate(variable_groups):
        live = {sum(k[i]) for k, c in split_poly.items() if c != 0}
        if len(live) > 1:
            raise FormError(f"expression is not homogeneous in variables {list(group)}")
        if not live:
            live = {sum(k[i]) for k in split_poly}
            if len(live) != 1:
                raise FormError("expression is identically zero with no well-defined multidegree")
        degrees.append(live.pop())
    terms = {k: c for k, c in split_poly.items() if c != 0}
    return MultiForm(tuple(zip(sizes, degrees)), terms, tuple(tuple(g) for g in variable_groups))


def _format_coeff(c) -> str:
    if isinstance(c, Fraction):
        return str(c)
    return repr(float(c))


def _format_monomial(key, names) -> str:
    parts = []
    for name, a in zip(names, key):
        if a == 1:
            parts.append(name)
        elif a > 1:
            parts.append(f"{name}^{a}")
    return "*".join(parts)


def format_form(p: HomogeneousForm | MultiForm, variables: Sequence | None = None) -> str:
    """Canonical text for ``p`` that :func:`parse_form` reads back exactly."""
    if isinstance(p, MultiForm):
        groups = variables or p.variables or [
            [f"x{i + 1}_{j + 1}" for j in range(n)] for i, (n, _) in enumerate(p.factors)
        ]
        names = [v for g in groups for v in g]
        keys = {sum(k, ()): c for k, c in p.terms.items()}
        degree_hint = "*".join(f"{g[0]}^{D}" for g, (_, D) in zip(groups, p.factors) if D > 0) or "1"
    else:
        names = list(variables or p.variables or [f"x{i + 1}" for i in range(p.n)])
        keys = dict(p.terms)
        degree_hint = f"{names[0]}^{p.degree}" if p.degree > 0 else "1"
    if not keys:
        return f"0*{degree_hint}"
    pieces = []
    for key, c in keys.items():
        mono = _format_monomial(key, names)
        neg = c < 0
        mag = -c if neg else c
        if mono and mag == 1:
            body = mono
        elif mono:
            body = f"{_format_coeff(mag)}*{mono}"
        else:
            body = _format_coeff(mag)
        if not pieces:
            pieces.append(f"-{body}" if neg else body)
        else:
            pieces.append(f"- {body}" if neg else f"+ {body}")
    return " ".join(pieces)


def form_from_records(records: Iterable[Mapping], n: int | None = None, degree: int | None = None) -> HomogeneousForm:
    """Build a form from ``[{"exponents": [...], "coeff": number}, ...]``."""
    terms: dict = {}
    for rec in records:
        key = tuple(int(a) for a in rec["exponents"])
        c = _record_coeff(rec["coeff"])
        terms[key] = terms.get(key, 0) + c
    if n is None:
        if not terms:
            raise FormError("cannot infer variable count from an empty term list")
        n = len(next(iter(terms)))
    if degree is None:
        degrees = {sum(k) for k in terms}
        if len(degrees) != 1:
            raise FormError(f"terms are not homogeneous (degrees {sorted(degrees)})")
        degree = degrees.pop()
    return HomogeneousForm(n, degree, terms)


def multi_form_from_records(records: Iterable[Mapping], factors: Sequence | None = None) -> MultiForm:
    terms: dict = {}
    for rec in records:
        key = tuple(tuple(int(a) for a in part) for part in rec["exponents"])
        terms[key] = terms.get(key, 0) + _record_coeff(rec["coeff"])
    if factors is None:
        if not terms:
            raise FormError("cannot infer factors from an empty term list")
        degs = {tuple(sum(p) for p in k) for k in terms}
        if len(degs) != 1:
            raise FormError("terms are not multi-homogeneous")
        first = next(iter(terms))
        factors = tuple((len(p), D) for p, D in zip(first, degs.pop()))
    return MultiForm(tuple(factors), terms)


def _record_coeff(c):
    if isinstance(c, str):
        return Fraction(c)
    if isinstance(c, int):
        return Fraction(c)
    return float(c)


# ---------------------------------------------------------------------------
# Coefficient normalization and special forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalizedCoeffs:
    """``C_g = c_g / C(2d, g)``: the coefficients entering the Gram formulas."""

    n: int
    degree: int
    coeffs: Mapping[tuple, Coeff]


def normalize_coeffs(p: HomogeneousForm) -> NormalizedCoeffs:
    if p.degree % 2:
        raise FormError(f"degree {p.degree} is odd; apply odd_lift first")
    out = {}
    for key, c in p.terms.items():
        mult = multinomial(p.degree, key)
        out[key] = c / mult if isinstance(c, Fraction) else float(c) / mult
    return NormalizedCoeffs(p.n, p.degree, MappingProxyType(out))


def denormalize_coeffs(nc: NormalizedCoeffs) -> HomogeneousForm:
    return HomogeneousForm(nc.n, nc.degree, {k: C * multinomial(nc.degree, k) for k, C in nc.coeffs.items()})


def sphere_power(n: int, d: int) -> HomogeneousForm:
    """``||x||^(2d)`` with exact coefficients ``C(d, b)`` on ``x^(2b)``."""
    terms = {tuple(2 * b for b in beta): Fraction(multinomial(d, beta)) for beta in basis_array(n, d).tolist()}
    return HomogeneousForm(n, 2 * d, terms)


def multi_sphere_power(dims: Sequence[int], half_degrees: Sequence[int]) -> MultiForm:
    """``prod_i ||x_i||^(2 d_i)`` as a multi-form."""
    parts = [sphere_power(n, d) for n, d in zip(dims, half_degrees)]
    terms: dict = {(): Fraction(1)}
    for part in parts:
        terms = {key + (k,): c * pc for key, c in terms.items() for k, pc in part.terms.items()}
    return MultiForm(tuple((n, 2 * d) for n, d in zip(dims, half_degrees)), terms)


def odd_lift_scale(D: int) -> float:
    """``(D+1)^((D+1)/2) / D^(D/2)`` for odd ``D``."""
    if D % 2 == 0:
        raise FormError(f"degree {D} is even; no lift needed")
    return math.exp((D + 1) / 2 * math.log(D + 1) - D / 2 * math.log(D))


def odd_lift(p: HomogeneousForm | MultiForm, factor: int = 0):
    """Multiply by a fresh variable appended to factor ``factor``.

    Returns ``(lifted, scale)`` with ``min p = scale * min lifted`` over the
    corresponding (products of) unit spheres.
    """
    if isinstance(p, HomogeneousForm):
        if factor != 0:
            raise FormError("a homogeneous form has a single factor")
        if p.degree % 2 == 0:
            raise FormError(f"degree {p.degree} is even; no lift needed")
        names = None
        if p.variables is not None:
            names = p.variables + (_fresh_name(p.variables),)
        lifted = HomogeneousForm(p.n + 1, p.degree + 1, {k + (1,): c for k, c in p.terms.items()}, names)
        return lifted, odd_lift_scale(p.degree)
    n_j, D_j = p.factors[factor]
    if D_j % 2 == 0:
        raise FormError(f"factor {factor} has even degree {D_j}; no lift needed")
    factors = list(p.factors)
    factors[factor] = (n_j + 1, D_j + 1)
    terms = {}
    for key, c in p.terms.items():
        parts = list(key)
        parts[factor] = parts[factor] + (1,)
        terms[tuple(parts)] = c
    names = None
    if p.variables is not None:
        names = [tuple(g) for g in p.variables]
        names[factor] = names[factor] + (_fresh_name(sum(p.variables, ())),)
    return MultiForm(tuple(factors), terms, names), odd_lift_scale(D_j)


def _fresh_name(existing) -> str:
    i = 0
    while f"_t{i}" in existing:
        i += 1
    return f"_t{i}"


def build_spectral_norm_form(T, normalize: bool = False) -> tuple[MultiForm, float]:
    """Lift an order-``m`` tensor to a multi-form of multidegree ``(2,...,2)``.

    Factor ``j`` lives on ``R^(n_j + 1)``; its last coordinate ``t_j`` is the
    auxiliary variable, and the form is ``sum_i T[i] prod_j x_j[i_j] t_j``.
    Returns ``(form, ||T||_2)``; with ``normalize=True`` the tensor is scaled
    to unit Frobenius norm first.
    """
    T = np.asarray(T, dtype=float)
    if T.ndim < 1:
        raise FormError("tensor must have at least one mode")
    if T.size == 0:
        raise FormError("tensor is empty")
    norm = float(np.linalg.norm(T.ravel()))
    if normalize:
        if norm == 0:
            raise FormError("cannot normalize the zero tensor")
        T = T / norm
    dims = T.shape
    terms = {}
    for idx in zip(*np.nonzero(T)):
        key = []
        for i, n in zip(idx, dims):
            e = [0] * (n + 1)
            e[int(i)] = 1
            e[n] = 1
            key.append(tuple(e))
        terms[tuple(key)] = float(T[idx])
    return MultiForm(tuple((n + 1, 2) for n in dims), terms), norm


def tensor_norm(p: HomogeneousForm | MultiForm) -> float:
    """Frobenius norm of the (partially) symmetric tensor representing ``p``."""
    if isinstance(p, HomogeneousForm):
        p = p.as_multi()
    total = 0.0
    for key, c in p.terms.items():
        mult = 1
        for part, D in zip(key, p.degrees):
            mult *= multinomial(D, part)
        total += float(c) ** 2 / mult
    return math.sqrt(total)
