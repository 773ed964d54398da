"""Canonical-ensemble Monte Carlo over Hermitian matrix phase space.

The target density over the independent real components of every
bosonic matrix is

    exp(-beta * Tr H - Re Tr(lambda_tilde Q))

with ``Q`` the matrix charge of :func:`tracedyn.trace_dynamics.adler_millard_charge`
and ``lambda_tilde`` an anti-self-adjoint multiplier.  Independent chains
are advanced together as a numpy batch; chain ``c`` draws its random
numbers from its own child seed, so results are independent of the batch
layout.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field

import numpy as np

from .operator_core import Grading, PhasePoint, TracePolynomial, evaluate, trace_derivative
from .seeding import child_rng
from .trace_dynamics import TraceModel, adler_millard_charge

__all__ = [
    "EnsembleConfig",
    "EnsembleSamples",
    "EnsembleReport",
    "IeffDecomposition",
    "WardResult",
    "SamplingError",
    "sample_ensemble",
    "weight_polynomial",
    "hermitian_basis",
    "canonical_average",
    "canonical_average_with_error",
    "ieff_decomposition",
    "ward_check",
    "ward_estimate",
    "run_ensemble",
]

log = logging.getLogger(__name__)

LAMBDA_SYMBOL = "_lambda_tilde"
_CHUNK = 2048


class SamplingError(FloatingPointError):
    """The Monte Carlo weight became non-finite."""


@dataclass(frozen=True)
class EnsembleConfig:
    """Parameters of a canonical-ensemble run.

    ``n_samples`` is the total over all chains (rounded up to a multiple of
    ``n_chains``); ``n_burnin`` and ``thinning`` count single-component
    Metropolis steps per chain.
    """

    model: TraceModel
    beta: float = 1.0
    lambda_tilde: np.ndarray | None = None
    proposal_scale: float = 1.0
    n_samples: int = 10_000
    n_burnin: int = 2_000
    thinning: int = 8
    seed: int = 0
    n_chains: int = 32

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.n_samples <= 0 or self.n_chains <= 0 or self.thinning <= 0 or self.n_burnin < 0:
            raise ValueError("n_samples, n_chains and thinning must be positive, n_burnin non-negative")
        if any(d.grading is not Grading.BOSONIC for d in self.model.dofs):
            raise ValueError("the ensemble sampler handles bosonic degrees of freedom only")
        n = self.model.dim
        lam = np.zeros((n, n), complex) if self.lambda_tilde is None else np.asarray(self.lambda_tilde, complex)
        if lam.shape != (n, n):
            raise ValueError(f"lambda_tilde must be {n}x{n}")
        if not np.allclose(lam, -lam.conj().T, atol=1e-12, rtol=0):
            raise ValueError("lambda_tilde must be anti-self-adjoint")
        lam = lam.copy()
        lam.setflags(write=False)
        object.__setattr__(self, "lambda_tilde", lam)

    @property
    def samples_per_chain(self) -> int:
        return math.ceil(self.n_samples / self.n_chains)


def weight_polynomial(cfg: EnsembleConfig) -> TracePolynomial:
    """``beta * H + Tr(lambda_tilde Q)`` as a trace polynomial."""
    symbols = dict(cfg.model.symbols)
    symbols[LAMBDA_SYMBOL] = Grading.BOSONIC
    terms = [(cfg.beta * c, w) for c, w in cfg.model.hamiltonian.terms]
    for d in cfg.model.dofs:
        terms.append((1.0, (LAMBDA_SYMBOL, d.name, d.momentum)))
        terms.append((-1.0, (LAMBDA_SYMBOL, d.momentum, d.name)))
    return TracePolynomial(tuple(terms), symbols)


def hermitian_basis(dim: int) -> np.ndarray:
    """Real-coordinate basis of Hermitian matrices: E_kk, E_kl+E_lk, i(E_kl-E_lk)."""
    basis = []
    for k in range(dim):
        m = np.zeros((dim, dim), complex)
        m[k, k] = 1
        basis.append(m)
    for k in range(dim):
        for l in range(k + 1, dim):
            m = np.zeros((dim, dim), complex)
            m[k, l] = m[l, k] = 1
            basis.append(m)
            m = np.zeros((dim, dim), complex)
            m[k, l], m[l, k] = 1j, -1j
            basis.append(m)
    return np.array(basis)


@dataclass(frozen=True)
class EnsembleSamples:
    """Stored samples: ``values[s]`` has shape ``(n_chains, per_chain, N, N)``."""

    values: dict[str, np.ndarray]
    acceptance_rate: float
    n_chains: int
    lambda_tilde: np.ndarray

    @property
    def per_chain(self) -> int:
        return next(iter(self.values.values())).shape[1]

    def __len__(self) -> int:
        return self.n_chains * self.per_chain

    def __getitem__(self, i: int) -> PhasePoint:
        c, k = divmod(i, self.per_chain)
        return PhasePoint({s: v[c, k] for s, v in self.values.items()})

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def batched(self) -> PhasePoint:
        """All samples as one phase point with a leading batch axis (chain-major)."""
        return PhasePoint({s: v.reshape((-1,) + v.shape[2:]) for s, v in self.values.items()})

    def head(self, per_chain: int) -> EnsembleSamples:
        """The first ``per_chain`` samples of every chain."""
        return EnsembleSamples(
            {s: v[:, :per_chain] for s, v in self.values.items()},
            self.acceptance_rate,
            self.n_chains,
            self.lambda_tilde,
        )


def sample_ensemble(cfg: EnsembleConfig) -> EnsembleSamples:
    """Single-component Metropolis-Hastings over all chains of ``cfg``."""
    model = cfg.model
    n = model.dim
    names = [s for d in model.dofs for s in (d.name, d.momentum)]
    basis = hermitian_basis(n)
    n_basis = len(basis)
    n_comp = n_basis * len(names)
    poly = weight_polynomial(cfg)
    C = cfg.n_chains
    lam = np.broadcast_to(cfg.lambda_tilde, (C, n, n))

    def energy(state: dict[str, np.ndarray]) -> np.ndarray:
        e = np.real(evaluate(poly, {**state, LAMBDA_SYMBOL: lam}))
        if not np.all(np.isfinite(e)):
            raise SamplingError("non-finite Monte Carlo weight")
        return e

    state = {s: np.zeros((C, n, n), complex) for s in names}
    e_cur = energy(state)
    rngs = [child_rng(cfg.seed, "ensemble.chain", c) for c in range(C)]
    per_chain = cfg.samples_per_chain
    total_steps = cfg.n_burnin + per_chain * cfg.thinning
    out = {s: np.empty((C, per_chain, n, n), complex) for s in names}
    accepted = np.zeros(C)
    chains = np.arange(C)
    stored = 0
    step = 0
    while step < total_steps:
        length = min(_CHUNK, total_steps - step)
        comp = np.empty((length, C), dtype=np.int64)
        xi = np.empty((length, C))
        logu = np.empty((length, C))
        for c, g in enumerate(rngs):
            comp[:, c] = g.integers(n_comp, size=length)
            xi[:, c] = g.standard_normal(length)
            logu[:, c] = np.log(g.random(length))
        for j in range(length):
            which, b = np.divmod(comp[j], n_basis)
            delta = (cfg.proposal_scale * xi[j])[:, None, None] * basis[b]
            proposal = {}
            for si, s in enumerate(names):
                mask = (which == si)[:, None, None]
                proposal[s] = state[s] + np.where(mask, delta, 0)
            e_new = energy(proposal)
            accept = logu[j] < -(e_new - e_cur)
            for s in names:
                state[s] = np.where(accept[:, None, None], proposal[s], state[s])
            e_cur = np.where(accept, e_new, e_cur)
            step += 1
            if step > cfg.n_burnin:
                accepted += accept
                if (step - cfg.n_burnin) % cfg.thinning == 0:
                    for s in names:
                        out[s][chains, stored] = state[s]
                    stored += 1
    rate = float(accepted.sum() / (C * per_chain * cfg.thinning))
    if not 0.05 <= rate <= 0.95:
        log.warning("acceptance rate %.3f outside [0.05, 0.95]; adjust proposal_scale", rate)
    return EnsembleSamples(out, rate, C, cfg.lambda_tilde)


def _as_points(samples) -> list[PhasePoint]:
    return list(samples)


def canonical_average(samples, observable: Callable[[PhasePoint], np.ndarray], *, batched: bool = False):
    """Elementwise mean of ``observable`` over the samples.

    With ``batched=True`` and :class:`EnsembleSamples` input the observable
    is called once on a phase point carrying a leading batch axis.
    """
    if batched and isinstance(samples, EnsembleSamples):
        if len(samples) == 0:
            raise ValueError("no samples to average")
        return np.mean(np.asarray(observable(samples.batched())), axis=0)
    points = _as_points(samples)
    if not points:
        raise ValueError("no samples to average")
    acc = None
    for p in points:
        v = np.asarray(observable(p), dtype=complex)
        acc = v.copy() if acc is None else acc + v
    return acc / len(points)


def _grouped_stderr(values: np.ndarray, n_chains: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error from chain means (or within-chain batches).

    ``values`` is chain-major with a leading axis of length n_chains*per_chain.
    """
    per_chain = values.shape[0] // n_chains
    grouped = values.reshape((n_chains, per_chain) + values.shape[1:])
    batches = max(1, math.ceil(16 / n_chains))
    usable = (per_chain // batches) * batches
    means = grouped[:, :usable].reshape((n_chains * batches, usable // batches) + values.shape[1:]).mean(axis=1)
    g = means.shape[0]
    se = np.std(means, axis=0, ddof=1) / math.sqrt(g) if g > 1 else np.full(means.shape[1:], np.inf)
    return values.mean(axis=0), se


def canonical_average_with_error(samples: EnsembleSamples, observable) -> tuple[np.ndarray, np.ndarray]:
    """Batched mean plus a standard error (real and imaginary parts treated
    separately for complex observables)."""
    vals = np.asarray(observable(samples.batched()))
    if np.iscomplexobj(vals):
        mean_re, se_re = _grouped_stderr(vals.real, samples.n_chains)
        mean_im, se_im = _grouped_stderr(vals.imag, samples.n_chains)
        return mean_re + 1j * mean_im, se_re + 1j * se_im
    return _grouped_stderr(vals, samples.n_chains)


@dataclass(frozen=True)
class IeffDecomposition:
    D: float
    i_eff: np.ndarray
    residual: float
    degenerate: bool

    @property
    def signs(self) -> list[int]:
        return [int(round(v.imag)) for v in np.diag(self.i_eff)]


def ieff_decomposition(mean_q: np.ndarray) -> IeffDecomposition:
    """Split ``mean_q`` into ``D * i_eff`` with ``i_eff = diag(+-i)``.

    Diagonal entries with zero imaginary part get ``+i`` and set the
    ``degenerate`` flag.
    """
    m = np.asarray(mean_q, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("mean_Q must be a square matrix")
    im = np.diag(m).imag
    signs = np.where(im < 0, -1.0, 1.0)
    degenerate = bool(np.any(im == 0))
    mags = np.abs(im)
    # equal magnitudes are returned as-is so that D * i_eff inputs round-trip exactly
    D = float(mags[0]) if np.all(mags == mags[0]) else float(np.mean(mags))
    i_eff = np.diag(1j * signs)
    norm = np.linalg.norm(m)
    residual = float(np.linalg.norm(m - D * i_eff) / max(norm, np.finfo(float).tiny))
    return IeffDecomposition(D, i_eff, residual, degenerate)


@dataclass(frozen=True)
class WardResult:
    """Per-symbol Frobenius norm of the mean identity violation and its
    Monte Carlo noise scale."""

    per_symbol: dict[str, tuple[float, float]]

    @property
    def residual(self) -> float:
        return max(r for r, _ in self.per_symbol.values())

    @property
    def stderr(self) -> float:
        return max(s for _, s in self.per_symbol.values())

    def consistent_with_zero(self, n_sigma: float = 3.0) -> bool:
        return all(r < n_sigma * s for r, s in self.per_symbol.values())


def ward_estimate(cfg: EnsembleConfig, samples: EnsembleSamples, w: TracePolynomial) -> WardResult:
    """Monte Carlo estimate of ``<dW/dX - W dS/dX>`` for every matrix ``X``.

    Shift invariance of the flat measure makes each expectation vanish; the
    returned norms are the empirical violation.
    """
    s_poly = weight_polynomial(cfg)
    symbols = dict(s_poly.symbols)
    w = TracePolynomial(w.terms, {**symbols, **w.symbols})
    point = samples.batched()
    m = len(samples)
    lam = np.broadcast_to(cfg.lambda_tilde, (m,) + cfg.lambda_tilde.shape)
    values = {**point.values, LAMBDA_SYMBOL: lam}
    w_val = evaluate(w, values)
    w_val = np.broadcast_to(np.asarray(w_val, complex), (m,))
    n = cfg.model.dim
    out = {}
    for sym in (s for d in cfg.model.dofs for s in (d.name, d.momentum)):
        dw = trace_derivative(w, sym)
        dw_val = evaluate(dw, values, dim=n) if not dw.is_zero() else np.zeros((m, n, n), complex)
        dw_val = np.broadcast_to(dw_val, (m, n, n))
        ds_val = evaluate(trace_derivative(s_poly, sym), values)
        integrand = dw_val - w_val[:, None, None] * ds_val
        mean_re, se_re = _grouped_stderr(integrand.real, samples.n_chains)
        mean_im, se_im = _grouped_stderr(integrand.imag, samples.n_chains)
        resid = float(np.sqrt(np.sum(mean_re**2 + mean_im**2)))
        noise = float(np.sqrt(np.sum(se_re**2 + se_im**2)))
        if not (math.isfinite(resid) and math.isfinite(noise)):
            raise SamplingError(f"non-finite Ward estimate for {sym!r}")
        out[sym] = (resid, noise)
    return WardResult(out)


def ward_check(cfg: EnsembleConfig, samples: EnsembleSamples, w: TracePolynomial) -> float:
    """Largest per-matrix Ward-identity residual (Frobenius norm)."""
    return ward_estimate(cfg, samples, w).residual


@dataclass(frozen=True)
class EnsembleReport:
    mean_Q: np.ndarray
    mean_Q_stderr: np.ndarray
    D: float
    i_eff: np.ndarray
    decomposition_residual: float
    degenerate: bool
    acceptance_rate: float
    ward_residual: float
    ward_stderr: float
    warnings: tuple[str, ...] = field(default_factory=tuple)

    def to_json_obj(self) -> dict:
        return {
            "mean_Q": {"re": self.mean_Q.real.tolist(), "im": self.mean_Q.imag.tolist()},
            "D": self.D,
            "i_eff_signs": [int(round(v.imag)) for v in np.diag(self.i_eff)],
            "residual": self.decomposition_residual,
            "ward_residual": self.ward_residual,
            "acceptance_rate": self.acceptance_rate,
            "ward_stderr": self.ward_stderr,
            "degenerate": self.degenerate,
            "warnings": list(self.warnings),
        }


def run_ensemble(cfg: EnsembleConfig, w: TracePolynomial | None = None) -> EnsembleReport:
    """Sample, average the charge, decompose it and run the Ward check
    (with ``W = H`` unless given)."""
    samples = sample_ensemble(cfg)
    model = cfg.model
    mean, se = canonical_average_with_error(samples, lambda p: adler_millard_charge(p, model))
    mean = (mean - mean.conj().T) / 2
    dec = ieff_decomposition(mean)
    ward = ward_estimate(cfg, samples, model.hamiltonian if w is None else w)
    warnings = []
    if not 0.05 <= samples.acceptance_rate <= 0.95:
        warnings.append(f"acceptance rate {samples.acceptance_rate:.3f} outside [0.05, 0.95]")
    if dec.degenerate:
        warnings.append("mean charge has zero diagonal entries; i_eff signs defaulted to +i")
    return EnsembleReport(
        mean_Q=mean,
        mean_Q_stderr=se,
        D=dec.D,
        i_eff=dec.i_eff,
        decomposition_residual=dec.residual,
        degenerate=dec.degenerate,
        acceptance_rate=samples.acceptance_rate,
        ward_residual=ward.residual,
        ward_stderr=ward.stderr,
        warnings=tuple(warnings),
    )
