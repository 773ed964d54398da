"""Hamiltonian trace dynamics of matrix degrees of freedom.

Equations of motion are generated from the trace Hamiltonian by trace
differentiation, never written by hand:

    xdot_r = eps_r * dH/dp_r,     pdot_r = -dH/dx_r

with ``eps_r = +1`` for bosonic and ``-1`` for fermionic pairs.  The
conserved matrix charge associated with global unitary invariance is

    Q = sum_bosonic [x_r, p_r] - sum_fermionic {x_r, p_r}.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from .grassmann import DimensionError, GrassmannNumber
from .operator_core import (
    Grading,
    MatrixPolynomial,
    OperatorMatrix,
    PhasePoint,
    SymbolError,
    TracePolynomial,
    anticommutator,
    commutator,
    evaluate,
    trace_derivative,
)

__all__ = [
    "DofDescriptor",
    "TraceModel",
    "PhasePoint",
    "Trajectory",
    "EquationsOfMotion",
    "IntegrationError",
    "GradeContaminationError",
    "derive_equations",
    "integrate",
    "adler_millard_charge",
    "trace_hamiltonian_value",
    "mass_shell_residual",
    "harmonic_model",
    "free_particle_model",
    "four_vector_model",
    "commutator_squared_model",
    "fermionic_oscillator_model",
    "random_hermitian",
    "random_odd_matrix",
    "conjugate_point",
]

log = logging.getLogger(__name__)

SCHEMES = ("rk4", "leapfrog")


class IntegrationError(FloatingPointError):
    """Integration produced non-finite values."""


class GradeContaminationError(ValueError):
    """A quantity expected to be Grassmann-even has odd components."""


@dataclass(frozen=True)
class DofDescriptor:
    """A configuration symbol, its conjugate momentum and its grading."""

    name: str
    momentum: str
    grading: Grading = Grading.BOSONIC
    dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "grading", Grading(self.grading))
        if self.grading is Grading.MIXED:
            raise ValueError("a degree of freedom is either bosonic or fermionic")

    @property
    def epsilon(self) -> int:
        return 1 if self.grading is Grading.BOSONIC else -1


@dataclass(frozen=True)
class TraceModel:
    hamiltonian: TracePolynomial
    dofs: tuple[DofDescriptor, ...]
    mass: float | None = None
    four_momentum: tuple[str, str, str, str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "dofs", tuple(self.dofs))
        if not self.dofs:
            raise ValueError("a model needs at least one degree of freedom")
        dims = {d.dim for d in self.dofs}
        if len(dims) != 1:
            raise DimensionError(f"degrees of freedom have different dimensions {sorted(dims)}")
        gradings = {}
        for d in self.dofs:
            for s in (d.name, d.momentum):
                if s in gradings:
                    raise ValueError(f"symbol {s!r} declared twice")
                gradings[s] = d.grading
        for s, g in self.hamiltonian.symbols.items():
            if s not in gradings:
                raise SymbolError(f"hamiltonian symbol {s!r} has no degree of freedom")
            if gradings[s] is not g:
                raise ValueError(f"symbol {s!r} grading disagrees with its degree of freedom")
        if self.four_momentum is not None:
            missing = [s for s in self.four_momentum if s not in gradings]
            if missing:
                raise SymbolError(f"four-momentum symbols {missing} are not momenta of the model")

    @property
    def dim(self) -> int:
        return self.dofs[0].dim

    @property
    def symbols(self) -> dict[str, Grading]:
        out = {}
        for d in self.dofs:
            out[d.name] = d.grading
            out[d.momentum] = d.grading
        return out

    @property
    def coordinates(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.dofs)

    @property
    def momenta(self) -> tuple[str, ...]:
        return tuple(d.momentum for d in self.dofs)

    def is_separable(self) -> bool:
        """True when no Hamiltonian word mixes coordinates with momenta."""
        xs, ps = set(self.coordinates), set(self.momenta)
        return all(not (xs & set(w) and ps & set(w)) for _, w in self.hamiltonian.terms)


def _zeros_like(value):
    if isinstance(value, OperatorMatrix):
        return OperatorMatrix.zeros(value.dim, value.num_generators, value.grading)
    return np.zeros_like(value)


@dataclass(frozen=True)
class EquationsOfMotion:
    """Generated right-hand side; ``rates[s]`` gives ``d s / d tau``."""

    rates: Mapping[str, MatrixPolynomial]

    def __call__(self, point: PhasePoint) -> dict:
        out = {}
        for s, poly in self.rates.items():
            out[s] = _zeros_like(point[s]) if poly.is_zero() else evaluate(poly, point)
        return out


def derive_equations(model: TraceModel) -> EquationsOfMotion:
    """Hamilton's equations from trace derivatives of the model Hamiltonian."""
    symbols = model.symbols
    h = TracePolynomial(model.hamiltonian.terms, symbols)
    rates = {}
    for d in model.dofs:
        rates[d.name] = d.epsilon * trace_derivative(h, d.momentum)
        rates[d.momentum] = -1 * trace_derivative(h, d.name)
    return EquationsOfMotion(rates)


@dataclass(frozen=True)
class Trajectory:
    points: tuple[PhasePoint, ...]
    scheme: str
    dt: float
    seed: int | None = None

    def __post_init__(self):
        taus = np.array([p.tau for p in self.points])
        if np.any(np.diff(taus) <= 0):
            raise ValueError("trajectory samples must have strictly increasing tau")
        object.__setattr__(self, "points", tuple(self.points))

    @property
    def taus(self) -> np.ndarray:
        return np.array([p.tau for p in self.points])

    @property
    def initial(self) -> PhasePoint:
        return self.points[0]

    @property
    def final(self) -> PhasePoint:
        return self.points[-1]

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def series(self, fn: Callable[[PhasePoint], float]) -> np.ndarray:
        return np.array([fn(p) for p in self.points])


def _axpy(point: PhasePoint, rates: Mapping, h: float, tau: float) -> PhasePoint:
    return PhasePoint({s: v + h * rates[s] if s in rates else v for s, v in point.values.items()}, tau)


def _check_finite(point: PhasePoint) -> None:
    for s, v in point.values.items():
        data = v.data if isinstance(v, OperatorMatrix) else v
        if not np.all(np.isfinite(data)):
            raise IntegrationError(f"non-finite value in {s!r} at tau={point.tau:g}")


def _rk4_step(eom: EquationsOfMotion, y: PhasePoint, h: float) -> PhasePoint:
    k1 = eom(y)
    k2 = eom(_axpy(y, k1, h / 2, y.tau + h / 2))
    k3 = eom(_axpy(y, k2, h / 2, y.tau + h / 2))
    k4 = eom(_axpy(y, k3, h, y.tau + h))
    new = {}
    for s, v in y.values.items():
        if s in k1:
            v = v + (h / 6) * (k1[s] + 2 * k2[s] + 2 * k3[s] + k4[s])
        new[s] = v
    return PhasePoint(new, y.tau + h)


def _leapfrog_step(eom: EquationsOfMotion, model: TraceModel, y: PhasePoint, h: float) -> PhasePoint:
    xs, ps = model.coordinates, model.momenta
    forces = eom(y)
    half = {s: y[s] + (h / 2) * forces[s] for s in ps}
    y = y.replace(**half)
    vel = eom(y)
    y = y.replace(tau=y.tau + h, **{s: y[s] + h * vel[s] for s in xs})
    forces = eom(y)
    return y.replace(**{s: y[s] + (h / 2) * forces[s] for s in ps})


def integrate(
    model: TraceModel,
    initial: PhasePoint,
    tau_end: float,
    dt: float,
    scheme: str = "rk4",
    *,
    sample_every: int = 1,
) -> Trajectory:
    """Integrate from ``initial.tau`` to ``tau_end`` with fixed step ``dt``.

    The last step is shortened if ``dt`` does not divide the interval.
    ``leapfrog`` (velocity Verlet) requires a separable Hamiltonian.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not tau_end > initial.tau:
        raise ValueError("tau_end must exceed the initial tau")
    if scheme == "leapfrog" and not model.is_separable():
        raise ValueError("leapfrog requires a Hamiltonian with no mixed coordinate-momentum words")
    for s in model.symbols:
        initial[s]  # raises SymbolError if absent
    eom = derive_equations(model)
    span = tau_end - initial.tau
    n_steps = max(1, math.ceil(span / dt - 1e-9))
    points = [initial]
    y = initial
    for i in range(n_steps):
        h = min(dt, tau_end - y.tau) if i == n_steps - 1 else dt
        if scheme == "rk4":
            y = _rk4_step(eom, y, h)
        else:
            y = _leapfrog_step(eom, model, y, h)
        _check_finite(y)
        if (i + 1) % sample_every == 0 or i == n_steps - 1:
            points.append(y)
    return Trajectory(tuple(points), scheme, dt)


def adler_millard_charge(point: PhasePoint, model: TraceModel):
    """Bosonic commutators minus fermionic anticommutators over all pairs."""
    total = None
    for d in model.dofs:
        x, p = point[d.name], point[d.momentum]
        term = commutator(x, p) if d.grading is Grading.BOSONIC else -anticommutator(x, p)
        total = term if total is None else total + term
    return total


def _even_body(value, tol: float) -> complex:
    if isinstance(value, GrassmannNumber):
        odd = max((abs(c) for w, c in value.terms.items() if len(w) % 2), default=0.0)
        if odd > tol:
            raise GradeContaminationError(f"odd Grassmann component of size {odd:g}")
        return value.body
    return complex(value)


def trace_hamiltonian_value(model: TraceModel, point: PhasePoint, *, tol: float = 1e-12) -> float:
    """Real part of the evaluated trace Hamiltonian (its grade-0 body).

    A non-negligible imaginary part, which signals non-self-adjoint data,
    is logged rather than raised.
    """
    value = _even_body(evaluate(model.hamiltonian, point), tol)
    if abs(value.imag) > 1e-9 * max(1.0, abs(value.real)):
        log.warning("trace Hamiltonian has imaginary part %.3e", value.imag)
    return value.real


def mass_shell_residual(point: PhasePoint, m: float, momenta: Sequence[str] = ("E", "px", "py", "pz")) -> float:
    """``Tr[E^2 - px^2 - py^2 - pz^2] - m^2`` (real part)."""
    if len(momenta) != 4:
        raise ValueError("a four-momentum needs exactly four components")
    missing = [s for s in momenta if s not in point]
    if missing:
        raise SymbolError(f"phase point lacks four-momentum components {missing}")
    e, px, py, pz = (point[s] for s in momenta)
    sq = e @ e - px @ px - py @ py - pz @ pz
    tr = sq.trace() if isinstance(sq, OperatorMatrix) else np.trace(sq)
    return (_even_body(tr, 1e-12) - m**2).real


# ---------------------------------------------------------------------------
# model library and initial data
# ---------------------------------------------------------------------------


def harmonic_model(mass: float = 1.0, omega: float = 1.0, dim: int = 3, names=("q", "p")) -> TraceModel:
    """``H = Tr(p^2 / 2m + m omega^2 q^2 / 2)``."""
    q, p = names
    h = TracePolynomial(
        ((1 / (2 * mass), (p, p)), (mass * omega**2 / 2, (q, q))),
        {q: Grading.BOSONIC, p: Grading.BOSONIC},
    )
    return TraceModel(h, (DofDescriptor(q, p, Grading.BOSONIC, dim),), mass=mass)


def free_particle_model(mass: float = 1.0, dim: int = 3, names=("q", "p")) -> TraceModel:
    q, p = names
    h = TracePolynomial(((1 / (2 * mass), (p, p)),), {q: Grading.BOSONIC, p: Grading.BOSONIC})
    return TraceModel(h, (DofDescriptor(q, p, Grading.BOSONIC, dim),), mass=mass)


def four_vector_model(mass: float = 1.0, dim: int = 3) -> TraceModel:
    """Free matrix particle ``H = Tr(E^2 - px^2 - py^2 - pz^2) / 2m``.

    Coordinates ``t, x, y, z`` pair with ``E, px, py, pz``.
    """
    pairs = (("t", "E", 1.0), ("x", "px", -1.0), ("y", "py", -1.0), ("z", "pz", -1.0))
    symbols = {s: Grading.BOSONIC for c, m, _ in pairs for s in (c, m)}
    h = TracePolynomial(tuple((sign / (2 * mass), (m, m)) for _, m, sign in pairs), symbols)
    dofs = tuple(DofDescriptor(c, m, Grading.BOSONIC, dim) for c, m, _ in pairs)
    return TraceModel(h, dofs, mass=mass, four_momentum=("E", "px", "py", "pz"))


def commutator_squared_model(coupling: float = 1.0, omega: float = 1.0, dim: int = 3) -> TraceModel:
    """Two matrices with a ``-g/4 Tr([q1,q2]^2)`` interaction.

    ``-Tr([q1,q2]^2) = 2 Tr(q1 q1 q2 q2) - 2 Tr(q1 q2 q1 q2)``.
    """
    symbols = {s: Grading.BOSONIC for s in ("q1", "p1", "q2", "p2")}
    terms = [
        (0.5, ("p1", "p1")),
        (0.5, ("p2", "p2")),
        (omega**2 / 2, ("q1", "q1")),
        (omega**2 / 2, ("q2", "q2")),
        (coupling / 2, ("q1", "q1", "q2", "q2")),
        (-coupling / 2, ("q1", "q2", "q1", "q2")),
    ]
    dofs = (
        DofDescriptor("q1", "p1", Grading.BOSONIC, dim),
        DofDescriptor("q2", "p2", Grading.BOSONIC, dim),
    )
    return TraceModel(TracePolynomial(tuple(terms), symbols), dofs)


def fermionic_oscillator_model(
    omega: float = 1.0, coupling: float = 0.5, dim: int = 2
) -> TraceModel:
    """Bosonic oscillator ``(q, p)`` coupled to a fermionic pair ``(psi, chi)``.

    ``H = Tr(p^2/2 + q^2/2) + omega Tr(chi psi) + coupling Tr(chi q psi)``;
    the Hamiltonian is quadratic in the fermionic symbols.
    """
    symbols = {"q": Grading.BOSONIC, "p": Grading.BOSONIC, "psi": Grading.FERMIONIC, "chi": Grading.FERMIONIC}
    terms = [
        (0.5, ("p", "p")),
        (0.5, ("q", "q")),
        (omega, ("chi", "psi")),
        (coupling, ("chi", "q", "psi")),
    ]
    dofs = (
        DofDescriptor("q", "p", Grading.BOSONIC, dim),
        DofDescriptor("psi", "chi", Grading.FERMIONIC, dim),
    )
    return TraceModel(TracePolynomial(tuple(terms), symbols), dofs)


def random_hermitian(rng: np.random.Generator, dim: int, scale: float = 1.0) -> np.ndarray:
    a = rng.uniform(-1, 1, (dim, dim)) + 1j * rng.uniform(-1, 1, (dim, dim))
    return scale * (a + a.conj().T) / 2


def random_odd_matrix(rng: np.random.Generator, dim: int, num_generators: int, scale: float = 1.0) -> OperatorMatrix:
    """Fermionic matrix whose entries are linear in the generators."""
    data = np.zeros((2**num_generators, dim, dim), dtype=complex)
    for g in range(num_generators):
        data[1 << g] = random_hermitian(rng, dim, scale)
    return OperatorMatrix(data, Grading.FERMIONIC)


def conjugate_point(point: PhasePoint, u: np.ndarray) -> PhasePoint:
    """Apply ``X -> U X U^dagger`` to every matrix of the phase point."""
    out = {}
    ud = u.conj().T
    for s, v in point.values.items():
        if isinstance(v, OperatorMatrix):
            out[s] = OperatorMatrix(u @ v.data @ ud, v.grading, check=False)
        else:
            out[s] = u @ v @ ud
    return PhasePoint(out, point.tau)
