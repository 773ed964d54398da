"""Exact arithmetic in a finite exterior (Grassmann) algebra.

A :class:`GrassmannNumber` over ``K`` generators ``theta_0 ... theta_{K-1}``
is stored as a map from canonically sorted generator words to complex
coefficients.  Words are tuples of strictly increasing generator indices;
the empty word is the body (the ordinary complex part).

The same algebra is also exposed in a dense "blade" layout used by
:mod:`tracedyn.operator_core`: a word is encoded as a bitmask and a
Grassmann-valued array carries a leading axis of length ``2**K``.
"""

from __future__ import annotations

import functools
import json
from collections.abc import Iterable, Mapping
from enum import Enum
from numbers import Number

import numpy as np

__all__ = [
    "GrassmannNumber",
    "Parity",
    "DimensionError",
    "gmul",
    "grade",
    "gconj",
    "generator",
    "scalar",
    "blade_words",
    "blade_product_table",
    "blade_reversal_signs",
    "blade_lengths",
]

DEFAULT_GENERATORS = 2


class DimensionError(ValueError):
    """Operands live in algebras or matrix spaces of different size."""


class Parity(str, Enum):
    EVEN = "even"
    ODD = "odd"
    MIXED = "mixed"


def _merge_sign(left: tuple[int, ...], right: tuple[int, ...]) -> int:
    # sign of the permutation sorting left+right: count inversions across the two words
    inversions = 0
    for i in left:
        for j in right:
            if i > j:
                inversions += 1
    return -1 if inversions % 2 else 1


def _reversal_sign(length: int) -> int:
    return -1 if (length * (length - 1) // 2) % 2 else 1


class GrassmannNumber:
    """Element of the exterior algebra over ``num_generators`` generators.

    Instances are immutable.  ``eps`` prunes coefficients whose magnitude is
    at or below it; the default of 0 keeps every non-zero coefficient, so
    arithmetic is exact up to complex floating point.

    Examples
    --------
    >>> t1, t2 = generator(0), generator(1)
    >>> (t1 * t1).is_zero()
    True
    >>> t2 * t1 == -(t1 * t2)
    True
    """

    __slots__ = ("_k", "_terms", "_eps", "_hash")

    def __init__(
        self,
        num_generators: int = DEFAULT_GENERATORS,
        terms: Mapping[Iterable[int], complex] | None = None,
        eps: float = 0.0,
    ):
        if num_generators < 0:
            raise ValueError("num_generators must be non-negative")
        self._k = int(num_generators)
        self._eps = float(eps)
        clean: dict[tuple[int, ...], complex] = {}
        for word, coeff in (terms or {}).items():
            word = tuple(int(g) for g in word)
            if any(g < 0 or g >= self._k for g in word):
                raise DimensionError(f"generator index out of range in word {word} for K={self._k}")
            if len(set(word)) != len(word):
                continue  # repeated generator annihilates the term
            order = sorted(word)
            sign = 1
            # bubble-sort parity of the given word
            w = list(word)
            for i in range(len(w)):
                for j in range(len(w) - 1 - i):
                    if w[j] > w[j + 1]:
                        w[j], w[j + 1] = w[j + 1], w[j]
                        sign = -sign
            key = tuple(order)
            clean[key] = clean.get(key, 0j) + sign * complex(coeff)
        self._terms = {w: c for w, c in clean.items() if abs(c) > self._eps}
        self._hash = None

    @property
    def num_generators(self) -> int:
        return self._k

    @property
    def terms(self) -> dict[tuple[int, ...], complex]:
        return dict(self._terms)

    @property
    def eps(self) -> float:
        return self._eps

    @property
    def body(self) -> complex:
        """The grade-0 (ordinary complex) part."""
        return self._terms.get((), 0j)

    def coefficient(self, word: Iterable[int]) -> complex:
        return self._terms.get(tuple(word), 0j)

    def is_zero(self) -> bool:
        return not self._terms

    def grade(self) -> Parity:
        return grade(self)

    def conj(self) -> GrassmannNumber:
        return gconj(self)

    def part(self, parity: Parity) -> GrassmannNumber:
        """Project onto the even or odd subspace."""
        keep = 0 if parity is Parity.EVEN else 1
        return GrassmannNumber(
            self._k, {w: c for w, c in self._terms.items() if len(w) % 2 == keep}, self._eps
        )

    # ---- arithmetic -------------------------------------------------
    def _coerce(self, other) -> GrassmannNumber:
        if isinstance(other, GrassmannNumber):
            if other._k != self._k:
                raise DimensionError(f"generator counts differ: {self._k} vs {other._k}")
            return other
        if isinstance(other, Number):
            return scalar(complex(other), self._k)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        out = dict(self._terms)
        for w, c in other._terms.items():
            out[w] = out.get(w, 0j) + c
        return GrassmannNumber(self._k, out, max(self._eps, other._eps))

    __radd__ = __add__

    def __neg__(self):
        return GrassmannNumber(self._k, {w: -c for w, c in self._terms.items()}, self._eps)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, Number) and not isinstance(other, GrassmannNumber):
            return GrassmannNumber(
                self._k, {w: c * complex(other) for w, c in self._terms.items()}, self._eps
            )
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return gmul(self, other)

    def __rmul__(self, other):
        if isinstance(other, Number):
            return self * other
        return NotImplemented

    def __eq__(self, other):
        try:
            other = self._coerce(other)
        except DimensionError:
            return False
        if other is NotImplemented:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._k, frozenset(self._terms.items())))
        return self._hash

    def allclose(self, other, atol: float = 1e-12) -> bool:
        return (self - other).max_abs() <= atol

    def max_abs(self) -> float:
        """Largest coefficient magnitude (0 for the zero element)."""
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def __repr__(self):
        if not self._terms:
            return f"GrassmannNumber(K={self._k}, 0)"
        parts = []
        for w in sorted(self._terms, key=lambda w: (len(w), w)):
            label = "".join(f"θ{g}" for g in w) or "1"
            parts.append(f"({self._terms[w]:g}){label}")
        return f"GrassmannNumber(K={self._k}, {' + '.join(parts)})"

    # ---- serialization ----------------------------------------------
    def to_json_obj(self) -> dict:
        terms = [
            [list(w), [c.real, c.imag]]
            for w, c in sorted(self._terms.items(), key=lambda kv: (len(kv[0]), kv[0]))
        ]
        return {"K": self._k, "terms": terms}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> GrassmannNumber:
        terms: dict[tuple[int, ...], complex] = {}
        for word, (re, im) in obj["terms"]:
            key = tuple(word)
            terms[key] = terms.get(key, 0j) + complex(re, im)
        return cls(int(obj["K"]), terms)

    @classmethod
    def from_json(cls, text: str) -> GrassmannNumber:
        return cls.from_json_obj(json.loads(text))

    # ---- dense blade layout -----------------------------------------
    def to_blades(self) -> np.ndarray:
        out = np.zeros(2**self._k, dtype=complex)
        for w, c in self._terms.items():
            out[_word_to_mask(w)] = c
        return out

    @classmethod
    def from_blades(cls, coeffs: np.ndarray, num_generators: int) -> GrassmannNumber:
        words = blade_words(num_generators)
        return cls(
            num_generators,
            {words[m]: complex(c) for m, c in enumerate(coeffs) if c != 0},
        )


def generator(index: int, num_generators: int = DEFAULT_GENERATORS) -> GrassmannNumber:
    """The generator ``theta_index``."""
    return GrassmannNumber(num_generators, {(index,): 1.0})


def scalar(value: complex, num_generators: int = DEFAULT_GENERATORS) -> GrassmannNumber:
    return GrassmannNumber(num_generators, {(): value})


def gmul(a: GrassmannNumber, b: GrassmannNumber) -> GrassmannNumber:
    """Exterior product.  Repeated generators annihilate; the sign is that of
    the permutation that sorts the concatenated word."""
    if a.num_generators != b.num_generators:
        raise DimensionError(f"generator counts differ: {a.num_generators} vs {b.num_generators}")
    out: dict[tuple[int, ...], complex] = {}
    for wa, ca in a._terms.items():
        sa = set(wa)
        for wb, cb in b._terms.items():
            if sa.intersection(wb):
                continue
            key = tuple(sorted(wa + wb))
            out[key] = out.get(key, 0j) + _merge_sign(wa, wb) * ca * cb
    return GrassmannNumber(a.num_generators, out, max(a.eps, b.eps))


def grade(a: GrassmannNumber) -> Parity:
    """Even if every word has even length (zero counts as even), odd if all
    are odd, mixed otherwise."""
    parities = {len(w) % 2 for w in a._terms}
    if parities == {1}:
        return Parity.ODD
    if parities <= {0}:
        return Parity.EVEN
    return Parity.MIXED


def gconj(a: GrassmannNumber) -> GrassmannNumber:
    """Conjugate coefficients and reverse every word.

    Reversal of a length-m word costs ``(-1)**(m*(m-1)/2)``, so this is an
    involutive anti-automorphism: ``gconj(a*b) == gconj(b)*gconj(a)``.
    """
    return GrassmannNumber(
        a.num_generators,
        {w: _reversal_sign(len(w)) * c.conjugate() for w, c in a._terms.items()},
        a.eps,
    )


# ---- dense blade layout helpers ---------------------------------------


def _word_to_mask(word: Iterable[int]) -> int:
    mask = 0
    for g in word:
        mask |= 1 << g
    return mask


@functools.lru_cache(maxsize=None)
def blade_words(num_generators: int) -> tuple[tuple[int, ...], ...]:
    """Generator word for every bitmask ``0 .. 2**K - 1``."""
    return tuple(
        tuple(g for g in range(num_generators) if m >> g & 1) for m in range(2**num_generators)
    )


@functools.lru_cache(maxsize=None)
def blade_lengths(num_generators: int) -> np.ndarray:
    out = np.array([len(w) for w in blade_words(num_generators)], dtype=int)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=None)
def blade_reversal_signs(num_generators: int) -> np.ndarray:
    out = np.array([_reversal_sign(len(w)) for w in blade_words(num_generators)], dtype=float)
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=None)
def blade_product_table(num_generators: int) -> tuple[tuple[int, int, int, int], ...]:
    """All non-vanishing blade products as ``(mask_a, mask_b, mask_out, sign)``."""
    words = blade_words(num_generators)
    table = []
    for ma, wa in enumerate(words):
        for mb, wb in enumerate(words):
            if ma & mb:
                continue
            table.append((ma, mb, ma | mb, _merge_sign(wa, wb)))
    return tuple(table)
