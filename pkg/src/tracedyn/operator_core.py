"""Matrices over the Grassmann ring, trace polynomials and trace derivatives.

Two value representations flow through the evaluator:

* plain complex ``numpy`` arrays of shape ``(..., N, N)`` for bosonic
  degrees of freedom with ordinary complex entries (leading axes are
  treated as a batch), and
* :class:`OperatorMatrix`, whose entries are Grassmann numbers, stored as a
  dense ``(2**K, N, N)`` array indexed by generator bitmask.

The trace derivative puts the variation on the right: for a trace
polynomial ``P`` and a symbol ``v`` the derivative ``D`` satisfies
``delta Tr P = Tr(D delta_v)``.  Moving ``delta_v`` to the end of a word
uses graded cyclicity ``Tr(XY) = (-1)**(|X||Y|) Tr(YX)``.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from enum import Enum
from numbers import Number
from types import MappingProxyType
from typing import Union

import numpy as np

from .grassmann import (
    DimensionError,
    GrassmannNumber,
    Parity,
    blade_lengths,
    blade_product_table,
    blade_reversal_signs,
    grade,
)

__all__ = [
    "Grading",
    "OperatorMatrix",
    "TracePolynomial",
    "MatrixPolynomial",
    "PhasePoint",
    "SymbolError",
    "GradingError",
    "commutator",
    "anticommutator",
    "trace",
    "adjoint",
    "trace_derivative",
    "evaluate",
    "parse_terms",
]


class SymbolError(KeyError):
    """A symbol is unknown to a polynomial or missing from a phase point."""


class GradingError(ValueError):
    """A value does not carry the Grassmann parity its symbol declares."""


class Grading(str, Enum):
    BOSONIC = "bosonic"
    FERMIONIC = "fermionic"
    MIXED = "mixed"

    @property
    def parity(self) -> int | None:
        return {Grading.BOSONIC: 0, Grading.FERMIONIC: 1}.get(self)


def _combine_product(a: Grading, b: Grading) -> Grading:
    if Grading.MIXED in (a, b):
        return Grading.MIXED
    return Grading.BOSONIC if a == b else Grading.FERMIONIC


def _combine_sum(a: Grading, b: Grading) -> Grading:
    return a if a == b else Grading.MIXED


def _scalar_grading(s: GrassmannNumber) -> Grading:
    return {Parity.EVEN: Grading.BOSONIC, Parity.ODD: Grading.FERMIONIC}.get(
        grade(s), Grading.MIXED
    )


class OperatorMatrix:
    """N x N matrix with Grassmann-number entries and a parity tag.

    ``data[m]`` holds the complex coefficient matrix of the generator word
    with bitmask ``m``.  A bosonic matrix has non-zero data only on even
    words, a fermionic one only on odd words; ``MIXED`` carries no
    constraint and arises from e.g. a Grassmann-odd boost acting on
    ordinary coordinates.
    """

    __slots__ = ("_data", "_grading", "_k")
    __array_ufunc__ = None  # make ndarray operators defer to ours

    def __init__(self, data, grading: Grading | str | None = None, *, check: bool = True):
        data = np.asarray(data, dtype=complex)
        if data.ndim != 3 or data.shape[1] != data.shape[2]:
            raise DimensionError(f"expected (2**K, N, N) data, got shape {data.shape}")
        k = int(round(np.log2(data.shape[0])))
        if 2**k != data.shape[0]:
            raise DimensionError(f"leading axis {data.shape[0]} is not a power of two")
        self._k = k
        self._data = data
        self._data.setflags(write=False)
        if grading is None:
            grading = self._infer_grading()
        self._grading = Grading(grading)
        if check and self._grading is not Grading.MIXED:
            wrong = blade_lengths(k) % 2 != self._grading.parity
            if np.any(data[wrong] != 0):
                raise GradingError(f"{self._grading.value} matrix has entries of the wrong parity")

    def _infer_grading(self) -> Grading:
        lengths = blade_lengths(self._k)
        nonzero = np.any(self._data != 0, axis=(1, 2))
        odd = bool(np.any(nonzero & (lengths % 2 == 1)))
        even = bool(np.any(nonzero & (lengths % 2 == 0)))
        if odd and even:
            return Grading.MIXED
        return Grading.FERMIONIC if odd else Grading.BOSONIC

    # ---- constructors -----------------------------------------------
    @classmethod
    def from_complex(cls, array, num_generators: int = 0) -> OperatorMatrix:
        array = np.asarray(array, dtype=complex)
        if array.ndim != 2 or array.shape[0] != array.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {array.shape}")
        data = np.zeros((2**num_generators,) + array.shape, dtype=complex)
        data[0] = array
        return cls(data, Grading.BOSONIC)

    @classmethod
    def from_entries(cls, entries, grading: Grading | str | None = None) -> OperatorMatrix:
        """Build from a nested list of GrassmannNumber (or complex) entries."""
        rows = [list(r) for r in entries]
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise DimensionError("entries must form a square array")
        k = max((e.num_generators for r in rows for e in r if isinstance(e, GrassmannNumber)), default=0)
        data = np.zeros((2**k, n, n), dtype=complex)
        for i, r in enumerate(rows):
            for j, e in enumerate(r):
                if isinstance(e, GrassmannNumber):
                    if e.num_generators != k:
                        raise DimensionError("entries use different generator counts")
                    data[:, i, j] = e.to_blades()
                else:
                    data[0, i, j] = complex(e)
        return cls(data, grading)

    @classmethod
    def from_blade_matrices(
        cls, blades: Mapping[int, np.ndarray], dim: int, num_generators: int, grading=None
    ) -> OperatorMatrix:
        data = np.zeros((2**num_generators, dim, dim), dtype=complex)
        for mask, mat in blades.items():
            data[mask] = mat
        return cls(data, grading)

    @classmethod
    def identity(cls, dim: int, num_generators: int = 0) -> OperatorMatrix:
        return cls.from_complex(np.eye(dim), num_generators)

    @classmethod
    def zeros(cls, dim: int, num_generators: int = 0, grading=Grading.BOSONIC) -> OperatorMatrix:
        return cls(np.zeros((2**num_generators, dim, dim), dtype=complex), grading)

    # ---- accessors --------------------------------------------------
    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def grading(self) -> Grading:
        return self._grading

    @property
    def dim(self) -> int:
        return self._data.shape[1]

    @property
    def num_generators(self) -> int:
        return self._k

    @property
    def body(self) -> np.ndarray:
        """Complex matrix of grade-0 coefficients."""
        return self._data[0]

    def entry(self, i: int, j: int) -> GrassmannNumber:
        return GrassmannNumber.from_blades(self._data[:, i, j], self._k)

    def entries(self) -> list[list[GrassmannNumber]]:
        return [[self.entry(i, j) for j in range(self.dim)] for i in range(self.dim)]

    def lift(self, num_generators: int) -> OperatorMatrix:
        """Embed into an algebra with more generators (bitmasks are unchanged)."""
        if num_generators == self._k:
            return self
        if num_generators < self._k:
            raise DimensionError("cannot lift to fewer generators")
        data = np.zeros((2**num_generators, self.dim, self.dim), dtype=complex)
        data[: 2**self._k] = self._data
        return OperatorMatrix(data, self._grading, check=False)

    def with_grading(self, grading: Grading | str) -> OperatorMatrix:
        return OperatorMatrix(self._data, grading)

    def frobenius_norm(self) -> float:
        """Frobenius norm over all Grassmann coefficients."""
        return float(np.sqrt(np.sum(np.abs(self._data) ** 2)))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self._data), initial=0.0))

    def allclose(self, other: OperatorMatrix, atol: float = 1e-12) -> bool:
        a, b = _align(self, other)
        return bool(np.max(np.abs(a._data - b._data), initial=0.0) <= atol)

    def __eq__(self, other):
        if not isinstance(other, OperatorMatrix):
            return NotImplemented
        try:
            a, b = _align(self, other)
        except DimensionError:
            return False
        return bool(np.array_equal(a._data, b._data))

    __hash__ = None

    def __repr__(self):
        return f"OperatorMatrix(N={self.dim}, K={self._k}, {self._grading.value})"

    # ---- algebra ----------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, OperatorMatrix):
            return other
        if isinstance(other, np.ndarray) and other.ndim == 2:
            return OperatorMatrix.from_complex(other, self._k)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        a, b = _align(self, other)
        return OperatorMatrix(a._data + b._data, _combine_sum(a._grading, b._grading), check=False)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        a, b = _align(self, other)
        return OperatorMatrix(a._data - b._data, _combine_sum(a._grading, b._grading), check=False)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other - self

    def __neg__(self):
        return OperatorMatrix(-self._data, self._grading, check=False)

    def __mul__(self, other):
        # right multiplication of every entry by a scalar
        if isinstance(other, GrassmannNumber):
            return _grassmann_scale(self, other, left=False)
        if isinstance(other, Number):
            return OperatorMatrix(self._data * complex(other), self._grading, check=False)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, GrassmannNumber):
            return _grassmann_scale(self, other, left=True)
        if isinstance(other, Number):
            return OperatorMatrix(complex(other) * self._data, self._grading, check=False)
        return NotImplemented

    def __matmul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return matmul(self, other)

    def __rmatmul__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return matmul(other, self)

    def adjoint(self) -> OperatorMatrix:
        return adjoint(self)

    def trace(self) -> GrassmannNumber:
        return trace(self)


def _align(a: OperatorMatrix, b: OperatorMatrix) -> tuple[OperatorMatrix, OperatorMatrix]:
    if a.dim != b.dim:
        raise DimensionError(f"matrix dimensions differ: {a.dim} vs {b.dim}")
    k = max(a.num_generators, b.num_generators)
    return a.lift(k), b.lift(k)


def _nonzero_blades(data: np.ndarray) -> np.ndarray:
    return np.any(data != 0, axis=(1, 2))


def matmul(x: OperatorMatrix, y: OperatorMatrix) -> OperatorMatrix:
    """Matrix product over the Grassmann ring."""
    x, y = _align(x, y)
    k = x.num_generators
    if k == 0:
        return OperatorMatrix(x.data @ y.data, _combine_product(x.grading, y.grading), check=False)
    out = np.zeros_like(x.data)
    nx, ny = _nonzero_blades(x.data), _nonzero_blades(y.data)
    for ma, mb, mc, sign in blade_product_table(k):
        if nx[ma] and ny[mb]:
            out[mc] += sign * (x.data[ma] @ y.data[mb])
    return OperatorMatrix(out, _combine_product(x.grading, y.grading), check=False)


def _grassmann_scale(x: OperatorMatrix, s: GrassmannNumber, left: bool) -> OperatorMatrix:
    k = max(x.num_generators, s.num_generators)
    if s.num_generators < k:
        s = GrassmannNumber(k, s.terms)
    x = x.lift(k)
    coeffs = s.to_blades()
    out = np.zeros_like(x.data)
    nx = _nonzero_blades(x.data)
    for ma, mb, mc, sign in blade_product_table(k):
        # left: s[ma] * x[mb];  right: x[ma] * s[mb]
        if left and coeffs[ma] != 0 and nx[mb]:
            out[mc] += sign * coeffs[ma] * x.data[mb]
        elif not left and nx[ma] and coeffs[mb] != 0:
            out[mc] += sign * coeffs[mb] * x.data[ma]
    return OperatorMatrix(out, _combine_product(x.grading, _scalar_grading(s)), check=False)


def adjoint(x):
    """Transpose and Grassmann-conjugate every entry."""
    if isinstance(x, OperatorMatrix):
        signs = blade_reversal_signs(x.num_generators)[:, None, None]
        return OperatorMatrix(
            signs * np.conj(np.swapaxes(x.data, -1, -2)), x.grading, check=False
        )
    return np.conj(np.swapaxes(np.asarray(x), -1, -2))


def trace(x):
    """Matrix trace; a GrassmannNumber for OperatorMatrix input."""
    if isinstance(x, OperatorMatrix):
        return GrassmannNumber.from_blades(np.trace(x.data, axis1=1, axis2=2), x.num_generators)
    t = np.trace(np.asarray(x), axis1=-2, axis2=-1)
    return complex(t) if np.ndim(t) == 0 else t


def commutator(x, y):
    """``xy - yx``."""
    _check_same_dim(x, y)
    return x @ y - y @ x


def anticommutator(x, y):
    """``xy + yx``."""
    _check_same_dim(x, y)
    return x @ y + y @ x


def _check_same_dim(x, y) -> None:
    dx = x.dim if isinstance(x, OperatorMatrix) else np.shape(x)[-1]
    dy = y.dim if isinstance(y, OperatorMatrix) else np.shape(y)[-1]
    if dx != dy:
        raise DimensionError(f"matrix dimensions differ: {dx} vs {dy}")


# ---------------------------------------------------------------------------
# Phase points
# ---------------------------------------------------------------------------

MatrixValue = Union[np.ndarray, OperatorMatrix]


@dataclass(frozen=True)
class PhasePoint:
    """Assignment of matrix values to symbols at affine parameter ``tau``.

    Values are either complex arrays (bosonic, grade 0) or OperatorMatrix.
    """

    values: Mapping[str, MatrixValue]
    tau: float = 0.0

    def __post_init__(self):
        frozen = {}
        for name, value in self.values.items():
            if not isinstance(value, OperatorMatrix):
                value = np.array(value, dtype=complex)
                value.setflags(write=False)
            frozen[name] = value
        object.__setattr__(self, "values", MappingProxyType(frozen))

    def __getitem__(self, name: str) -> MatrixValue:
        try:
            return self.values[name]
        except KeyError:
            raise SymbolError(f"symbol {name!r} is not assigned in the phase point") from None

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __iter__(self):
        return iter(self.values)

    def replace(self, tau: float | None = None, **values) -> PhasePoint:
        merged = dict(self.values)
        merged.update(values)
        return PhasePoint(merged, self.tau if tau is None else tau)


# ---------------------------------------------------------------------------
# Symbolic polynomials
# ---------------------------------------------------------------------------

Word = tuple[str, ...]
_WORD_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def _collect(terms: Iterable[tuple[complex, Word]]) -> tuple[tuple[complex, Word], ...]:
    acc: dict[Word, complex] = {}
    order: list[Word] = []
    for coeff, word in terms:
        word = tuple(word)
        if word not in acc:
            acc[word] = 0j
            order.append(word)
        acc[word] += complex(coeff)
    return tuple((acc[w], w) for w in order if acc[w] != 0)


def _freeze_symbols(symbols: Mapping[str, Grading | str]) -> Mapping[str, Grading]:
    out = {}
    for name, g in symbols.items():
        if not _WORD_RE.match(name):
            raise ValueError(f"invalid symbol name {name!r}")
        out[name] = Grading(g)
        if out[name] is Grading.MIXED:
            raise GradingError(f"symbol {name!r} must be bosonic or fermionic")
    return MappingProxyType(out)


@dataclass(frozen=True)
class _Polynomial:
    terms: tuple[tuple[complex, Word], ...]
    symbols: Mapping[str, Grading] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "symbols", _freeze_symbols(self.symbols))
        object.__setattr__(self, "terms", _collect(self.terms))
        for _, word in self.terms:
            for s in word:
                if s not in self.symbols:
                    raise SymbolError(f"symbol {s!r} is not in the symbol table")

    def _like(self, terms, symbols=None):
        return type(self)(tuple(terms), self.symbols if symbols is None else symbols)

    def _merge_symbols(self, other) -> dict[str, Grading]:
        merged = dict(self.symbols)
        for k, g in other.symbols.items():
            if merged.setdefault(k, g) != g:
                raise GradingError(f"symbol {k!r} has conflicting gradings")
        return merged

    def __add__(self, other):
        if not isinstance(other, type(self)):
            return NotImplemented
        return self._like(self.terms + other.terms, self._merge_symbols(other))

    def __neg__(self):
        return self._like((-c, w) for c, w in self.terms)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, Number):
            return self._like((c * complex(other), w) for c, w in self.terms)
        return NotImplemented

    __rmul__ = __mul__

    @property
    def used_symbols(self) -> set[str]:
        return {s for _, w in self.terms for s in w}

    def is_zero(self) -> bool:
        return not self.terms

    def degree_in(self, names: Iterable[str]) -> int:
        names = set(names)
        return max((sum(s in names for s in w) for _, w in self.terms), default=0)

    def to_text(self) -> str:
        lines = []
        for c, w in self.terms:
            coeff = repr(c.real) if c.imag == 0 else repr(c)
            lines.append(f"{coeff} * {'.'.join(w)}" if w else coeff)
        return "\n".join(lines)

    @classmethod
    def parse(cls, text: str, symbols: Mapping[str, Grading | str]):
        return cls(parse_terms(text), symbols)


class TracePolynomial(_Polynomial):
    """``sum_k c_k Tr(w_k)`` for words ``w_k`` of noncommuting symbols.

    A term with the empty word is a plain c-number added to the trace (it
    is not multiplied by the matrix dimension).
    """

    def rotate_term(self, index: int, shift: int) -> TracePolynomial:
        """Cyclically rotate one word, applying the graded-cyclicity sign."""
        c, w = self.terms[index]
        if not w:
            return self
        shift %= len(w)
        head, tail = w[:shift], w[shift:]
        sign = (-1) ** (self._odd_count(head) * self._odd_count(tail))
        terms = list(self.terms)
        terms[index] = (sign * c, tail + head)
        return self._like(terms)

    def _odd_count(self, word: Word) -> int:
        return sum(self.symbols[s] is Grading.FERMIONIC for s in word)


class MatrixPolynomial(_Polynomial):
    """``sum_k c_k w_k`` as a matrix; the empty word is the identity."""


def parse_terms(text: str) -> list[tuple[complex, Word]]:
    """Parse ``coeff * sym1.sym2`` lines.

    Either side of ``*`` may be omitted (``q.q`` means coefficient 1, a bare
    number is a constant term).  ``#`` starts a comment.
    """
    terms = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "*" in line:
            coeff_txt, word_txt = (p.strip() for p in line.split("*", 1))
        elif _looks_numeric(line):
            coeff_txt, word_txt = line, ""
        else:
            coeff_txt, word_txt = "1", line
        sign = 1
        if coeff_txt in ("-", "+"):
            sign, coeff_txt = (-1 if coeff_txt == "-" else 1), "1"
        try:
            coeff = sign * complex(coeff_txt.replace(" ", ""))
        except ValueError:
            raise ValueError(f"line {lineno}: cannot parse coefficient {coeff_txt!r}") from None
        word = tuple(s.strip() for s in word_txt.split(".")) if word_txt else ()
        for s in word:
            if not _WORD_RE.match(s):
                raise ValueError(f"line {lineno}: invalid symbol {s!r}")
        terms.append((coeff, word))
    return terms


def _looks_numeric(text: str) -> bool:
    try:
        complex(text.replace(" ", ""))
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------------------
# Trace derivative
# ---------------------------------------------------------------------------


def trace_derivative(poly: TracePolynomial, symbol: str) -> MatrixPolynomial:
    """Matrix-valued derivative of ``poly`` with respect to ``symbol``.

    Every occurrence of ``symbol`` at position ``i`` of a word ``w``
    contributes ``w[i+1:] + w[:i]`` with sign ``(-1)**((g_pre+g_v)*g_suf)``
    where ``g`` counts Grassmann-odd symbols in the prefix, the varied
    symbol and the suffix.  For words of even total parity this is
    ``(-1)**g_suf``; for all-bosonic words it is always +1.
    """
    if symbol not in poly.symbols:
        raise SymbolError(f"unknown symbol {symbol!r}")
    odd = {s for s, g in poly.symbols.items() if g is Grading.FERMIONIC}
    g_v = 1 if symbol in odd else 0
    out = []
    for c, w in poly.terms:
        for i, s in enumerate(w):
            if s != symbol:
                continue
            pre, suf = w[:i], w[i + 1 :]
            g_pre = sum(x in odd for x in pre)
            g_suf = sum(x in odd for x in suf)
            sign = -1 if ((g_pre + g_v) * g_suf) % 2 else 1
            out.append((sign * c, suf + pre))
    return MatrixPolynomial(tuple(out), poly.symbols)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _prepare_values(poly: _Polynomial, point) -> tuple[dict[str, MatrixValue], int | None]:
    values = point.values if isinstance(point, PhasePoint) else point
    used = poly.used_symbols
    out: dict[str, MatrixValue] = {}
    k = None
    for s in sorted(used):
        if s not in values:
            raise SymbolError(f"symbol {s!r} is not assigned")
        v = values[s]
        want = poly.symbols[s]
        if isinstance(v, OperatorMatrix):
            if v.grading is not want and not (
                v.grading is Grading.BOSONIC and want is Grading.FERMIONIC and v.max_abs() == 0
            ):
                raise GradingError(f"symbol {s!r} is {want.value} but got a {v.grading.value} matrix")
            k = max(k or 0, v.num_generators)
        else:
            v = np.asarray(v)
            if want is not Grading.BOSONIC:
                raise GradingError(f"symbol {s!r} is {want.value}; complex arrays are bosonic only")
        out[s] = v
    dims = {(v.dim if isinstance(v, OperatorMatrix) else v.shape[-1]) for v in out.values()}
    if len(dims) > 1:
        raise DimensionError(f"inconsistent matrix dimensions {sorted(dims)}")
    if k is not None:
        out = {
            s: (v.lift(k) if isinstance(v, OperatorMatrix) else OperatorMatrix.from_complex(v, k))
            for s, v in out.items()
        }
    return out, k


class _ProductCache:
    def __init__(self, values):
        self.values = values
        self.cache: dict[Word, MatrixValue] = {}

    def product(self, word: Word) -> MatrixValue:
        hit = self.cache.get(word)
        if hit is not None:
            return hit
        if len(word) == 1:
            result = self.values[word[0]]
        else:
            result = self.product(word[:-1]) @ self.values[word[-1]]
        self.cache[word] = result
        return result


def evaluate(poly: TracePolynomial | MatrixPolynomial, point, *, dim: int | None = None):
    """Substitute matrix values into ``poly``.

    Returns a complex scalar (or batch array) / GrassmannNumber for a trace
    polynomial, a matrix for a matrix polynomial.  ``dim`` is only needed
    when a matrix polynomial consists of constants alone.
    """
    values, k = _prepare_values(poly, point)
    cache = _ProductCache(values)
    if isinstance(poly, TracePolynomial):
        total = 0j if k is None else GrassmannNumber(k)
        for c, w in poly.terms:
            total = total + (c if not w else c * trace(cache.product(w)))
        return total
    # matrix polynomial
    sample = next(iter(values.values()), None)
    if sample is None:
        point_values = point.values if isinstance(point, PhasePoint) else point
        sample = next(iter(point_values.values()), None) if point_values else None
    if sample is None and dim is None:
        raise DimensionError("cannot infer the matrix dimension of a constant polynomial")
    if isinstance(sample, OperatorMatrix):
        total = OperatorMatrix.zeros(sample.dim, sample.num_generators, Grading.BOSONIC)
        ident = OperatorMatrix.identity(sample.dim, sample.num_generators)
        first = True
        for c, w in poly.terms:
            term = c * (cache.product(w) if w else ident)
            total = term if first else total + term
            first = False
        return total
    n = dim if sample is None else np.shape(sample)[-1]
    shape = (n, n) if sample is None else np.shape(sample)
    total = np.zeros(shape, dtype=complex)
    for c, w in poly.terms:
        if w:
            total = total + c * cache.product(w)
        else:
            total = total + c * np.eye(n)
    return total
