"""Noncommutative Minkowski line element and generalized boosts.

Coordinates ``(t, x, y, z)`` are matrices.  The trace line element
``Tr[t^2 - x^2 - y^2 - z^2]`` is preserved by the boost family

    t' = A t + B x + aC y + aC z
    x' = A x + B t + aC y + aC z
    y' = y + D x - D t
    z' = z + D x - D t

with ``A**2 - B**2 = 1``, ``C`` Grassmann-odd and ``D = a (B - A) C``.
For a fixed ``C`` the 4x4 matrices of this form close under products; the
composite carries ``a'' = a1 + a2 (A1 + B1)`` and the rapidities add.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grassmann import DimensionError, GrassmannNumber, Parity, generator, grade
from .operator_core import OperatorMatrix

__all__ = [
    "GeneralizedBoost",
    "CoordinateFrame",
    "FamilyMember",
    "make_boost",
    "apply_boost",
    "line_element",
    "boost_matrix",
    "matrix_product",
    "family_parameters",
    "compose",
    "classical_limit",
    "rotate_yz",
    "translate",
    "random_frame",
    "random_odd",
    "boost_check",
]

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class GeneralizedBoost:
    alpha: float
    A: float
    B: float
    C: GrassmannNumber
    D: GrassmannNumber = field(default=None)

    def __post_init__(self):
        if grade(self.C) is not Parity.ODD and not self.C.is_zero():
            raise ValueError("boost parameter C must be purely Grassmann-odd")
        if not abs(self.A**2 - self.B**2 - 1.0) < _UNIT_TOL * max(1.0, self.A**2):
            raise ValueError(f"A^2 - B^2 must equal 1, got {self.A**2 - self.B**2!r}")
        if self.A < 1.0 - _UNIT_TOL:
            raise ValueError("only the orthochronous branch A >= 1 is supported")
        expected = self.alpha * (self.B - self.A) * self.C
        if self.D is None:
            object.__setattr__(self, "D", expected)
        elif not self.D.allclose(expected, atol=0.0):
            raise ValueError("D must equal alpha * (B - A) * C")

    @property
    def rapidity(self) -> float:
        return math.asinh(self.B)

    @property
    def num_generators(self) -> int:
        return self.C.num_generators


def make_boost(alpha: float, rapidity: float, C: GrassmannNumber) -> GeneralizedBoost:
    """Boost with ``A = cosh(rapidity)``, ``B = sinh(rapidity)``."""
    if grade(C) is not Parity.ODD:
        raise ValueError("boost parameter C must be purely Grassmann-odd")
    return GeneralizedBoost(float(alpha), math.cosh(rapidity), math.sinh(rapidity), C)


@dataclass(frozen=True)
class CoordinateFrame:
    t: OperatorMatrix
    x: OperatorMatrix
    y: OperatorMatrix
    z: OperatorMatrix

    def __post_init__(self):
        coords = []
        for name in "txyz":
            v = getattr(self, name)
            if not isinstance(v, OperatorMatrix):
                v = np.atleast_2d(np.asarray(v, dtype=complex))
                v = OperatorMatrix.from_complex(v)
            coords.append(v)
        dims = {c.dim for c in coords}
        if len(dims) != 1:
            raise DimensionError(f"frame coordinates have different dimensions {sorted(dims)}")
        k = max(c.num_generators for c in coords)
        for name, c in zip("txyz", coords):
            object.__setattr__(self, name, c.lift(k))

    @property
    def dim(self) -> int:
        return self.t.dim

    @property
    def num_generators(self) -> int:
        return self.t.num_generators

    def coords(self) -> tuple[OperatorMatrix, ...]:
        return (self.t, self.x, self.y, self.z)

    def lift(self, num_generators: int) -> CoordinateFrame:
        return CoordinateFrame(*(c.lift(num_generators) for c in self.coords()))

    def allclose(self, other: CoordinateFrame, atol: float = 1e-12) -> bool:
        return all(a.allclose(b, atol) for a, b in zip(self.coords(), other.coords()))

    def __sub__(self, other: CoordinateFrame) -> CoordinateFrame:
        return CoordinateFrame(*(a - b for a, b in zip(self.coords(), other.coords())))


def _lift_scalar(s: GrassmannNumber, k: int) -> GrassmannNumber:
    return s if s.num_generators == k else GrassmannNumber(k, s.terms)


def apply_boost(b: GeneralizedBoost, f: CoordinateFrame) -> CoordinateFrame:
    k = max(b.num_generators, f.num_generators)
    f = f.lift(k)
    aC = _lift_scalar(b.alpha * b.C, k)
    D = _lift_scalar(b.D, k)
    t, x, y, z = f.coords()
    return CoordinateFrame(
        b.A * t + b.B * x + aC * y + aC * z,
        b.A * x + b.B * t + aC * y + aC * z,
        y + D * x - D * t,
        z + D * x - D * t,
    )


def line_element(f: CoordinateFrame) -> GrassmannNumber:
    """``Tr[t^2 - x^2 - y^2 - z^2]``."""
    t, x, y, z = f.coords()
    return (t @ t - x @ x - y @ y - z @ z).trace()


def boost_matrix(b: GeneralizedBoost) -> np.ndarray:
    """4x4 object array of GrassmannNumber acting on ``(t, x, y, z)``."""
    k = b.num_generators
    aC = b.alpha * b.C
    one, zero = GrassmannNumber(k, {(): 1.0}), GrassmannNumber(k)
    A, B = GrassmannNumber(k, {(): b.A}), GrassmannNumber(k, {(): b.B})
    rows = [
        [A, B, aC, aC],
        [B, A, aC, aC],
        [-b.D, b.D, one, zero],
        [-b.D, b.D, zero, one],
    ]
    out = np.empty((4, 4), dtype=object)
    for i in range(4):
        for j in range(4):
            out[i, j] = rows[i][j]
    return out


def matrix_product(m1: np.ndarray, m2: np.ndarray) -> np.ndarray:
    """Product of two square object arrays of GrassmannNumber."""
    n = m1.shape[0]
    out = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            acc = m1[i, 0] * m2[0, j]
            for r in range(1, n):
                acc = acc + m1[i, r] * m2[r, j]
            out[i, j] = acc
    return out


@dataclass(frozen=True)
class FamilyMember:
    alpha: float
    A: float
    B: float
    max_error: float


def _multiple_of(value: GrassmannNumber, C: GrassmannNumber) -> float:
    # real a with value == a*C, using C's largest coefficient
    word, coeff = max(C.terms.items(), key=lambda kv: abs(kv[1]))
    return (value.coefficient(word) / coeff).real


def family_parameters(m: np.ndarray, C: GrassmannNumber, atol: float = 1e-12) -> FamilyMember | None:
    """Recover ``(alpha, A, B)`` if ``m`` has the boost-family form for ``C``.

    Returns None when any entry departs from the form by more than ``atol``.
    """
    A, B = m[0, 0].body.real, m[0, 1].body.real
    aC = m[0, 2]
    alpha = _multiple_of(aC, C) if not C.is_zero() else 0.0
    try:
        ref = boost_matrix(GeneralizedBoost(alpha, A, B, C))
    except ValueError:
        return None
    err = max((m[i, j] - ref[i, j]).max_abs() for i in range(4) for j in range(4))
    if err > atol * max(1.0, abs(A), abs(alpha)):
        return None
    return FamilyMember(alpha, A, B, err)


def compose(b1: GeneralizedBoost, b2: GeneralizedBoost) -> GeneralizedBoost:
    """Boost whose matrix is ``boost_matrix(b1) @ boost_matrix(b2)``."""
    if b1.C != b2.C:
        raise ValueError("only boosts sharing the same C compose within the family")
    return GeneralizedBoost(
        b1.alpha + b2.alpha * (b1.A + b1.B),
        b1.A * b2.A + b1.B * b2.B,
        b1.A * b2.B + b2.A * b1.B,
        b1.C,
    )


def classical_limit(b: GeneralizedBoost) -> np.ndarray:
    """The alpha -> 0 boost with Grassmann parts dropped: a standard x-boost."""
    out = np.eye(4)
    out[0, 0] = out[1, 1] = b.A
    out[0, 1] = out[1, 0] = b.B
    return out


def rotate_yz(f: CoordinateFrame, angle: float) -> CoordinateFrame:
    c, s = math.cos(angle), math.sin(angle)
    return CoordinateFrame(f.t, f.x, c * f.y - s * f.z, s * f.y + c * f.z)


def translate(f: CoordinateFrame, shifts) -> CoordinateFrame:
    """Add ``shift * I`` to each coordinate."""
    ident = OperatorMatrix.identity(f.dim, f.num_generators)
    return CoordinateFrame(*(c + complex(s) * ident for c, s in zip(f.coords(), shifts)))


# ---------------------------------------------------------------------------
# random instances and the boost-check report
# ---------------------------------------------------------------------------


def _random_hermitian(rng: np.random.Generator, dim: int) -> np.ndarray:
    a = rng.uniform(-1, 1, (dim, dim)) + 1j * rng.uniform(-1, 1, (dim, dim))
    return (a + a.conj().T) / 2


def random_frame(rng: np.random.Generator, dim: int = 2, num_generators: int = 2) -> CoordinateFrame:
    return CoordinateFrame(
        *(OperatorMatrix.from_complex(_random_hermitian(rng, dim), num_generators) for _ in range(4))
    )


def random_odd(rng: np.random.Generator, num_generators: int = 2) -> GrassmannNumber:
    """Random real combination of the generators (purely odd, squares to zero)."""
    c = GrassmannNumber(num_generators)
    for g in range(num_generators):
        c = c + rng.uniform(-1, 1) * generator(g, num_generators)
    return c


def boost_check(trials: int, rng: np.random.Generator, dim: int = 2, num_generators: int = 2) -> dict:
    """Invariance, closure and classical-limit checks on random boosts."""
    inv_err = 0.0
    closure_ok = True
    limit_ok = True
    closure_err = 0.0
    for _ in range(trials):
        C = random_odd(rng, num_generators)
        alpha = rng.uniform(0.1, 2.0) * rng.choice([-1.0, 1.0])
        b1 = make_boost(alpha, rng.uniform(-1.5, 1.5), C)
        b2 = make_boost(rng.uniform(-2.0, 2.0), rng.uniform(-1.5, 1.5), C)
        f = random_frame(rng, dim, num_generators)
        inv_err = max(inv_err, (line_element(apply_boost(b1, f)) - line_element(f)).max_abs())

        prod = matrix_product(boost_matrix(b1), boost_matrix(b2))
        member = family_parameters(prod, C, atol=1e-12)
        expected = compose(b1, b2)
        if member is None or not (
            math.isclose(member.A, expected.A, rel_tol=1e-12)
            and math.isclose(member.B, expected.B, rel_tol=1e-12, abs_tol=1e-12)
            and math.isclose(member.alpha, expected.alpha, rel_tol=1e-12, abs_tol=1e-12)
        ):
            closure_ok = False
        else:
            closure_err = max(closure_err, member.max_error)

        eta = b1.rapidity
        zero_alpha = boost_matrix(GeneralizedBoost(0.0, b1.A, b1.B, C))
        pure = all(
            set(zero_alpha[i, j].terms) <= {()} for i in range(4) for j in range(4)
        )
        body = np.array([[e.body.real for e in row] for row in zero_alpha])
        standard = np.eye(4)
        standard[0, 0] = standard[1, 1] = math.cosh(eta)
        standard[0, 1] = standard[1, 0] = math.sinh(eta)
        lim = classical_limit(b1)
        if not (pure and np.array_equal(body, lim) and np.allclose(lim, standard, rtol=1e-14, atol=0)):
            limit_ok = False
    return {
        "trials": trials,
        "invariance_max_error": inv_err,
        "closure_ok": closure_ok,
        "closure_max_error": closure_err,
        "classical_limit_ok": limit_ok,
    }
