"""Norm-preserving stochastic Schrodinger evolution and its collapse statistics.

Each trajectory follows the state-diffusion equation

    dpsi = [-i H dt + sqrt(k) (A - <A>) dW - (k/2) (A - <A>)^2 dt] psi,
    k = lambda * N,

with a real Wiener increment ``dW ~ Normal(0, dt)`` and renormalization
after every step.  In the default ``"exponential"`` scheme the Hamiltonian
part is applied as the exact one-step propagator ``exp(-i H dt)`` and the
fluctuation part by Euler-Maruyama; ``"euler"`` applies both by
Euler-Maruyama.

Trajectory ``i`` draws its noise from the child seed
``(seed, "collapse.traj", i)``; batches and threads only change how
trajectories are grouped, never their results.
"""

from __future__ import annotations

import dataclasses
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .seeding import child_rng, child_seed

__all__ = [
    "CollapseConfig",
    "StepSizeError",
    "StateTrajectory",
    "PopulationRecord",
    "BornResult",
    "VarianceCurve",
    "MartingaleResult",
    "ScalingResult",
    "eigenspaces",
    "evolve_trajectory",
    "simulate_populations",
    "born_statistics",
    "variance_decay_curve",
    "martingale_check",
    "fit_decay_rate",
    "collapse_time_scaling",
    "normalized_state",
]

STABILITY_BOUND = 0.1
_NOISE_CHUNK = 1024


class StepSizeError(ArithmeticError):
    """A single step changed the norm by more than the configured tolerance."""


@dataclass(frozen=True)
class CollapseConfig:
    H: np.ndarray
    A: np.ndarray
    lam: float = 1.0
    amplification: int = 1
    dt: float = 1e-3
    t_end: float = 5.0
    n_traj: int = 1000
    seed: int = 0
    n_records: int = 200
    resolution: float = 0.999
    scheme: str = "exponential"
    norm_tol: float = 0.5

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=complex))
        A = np.atleast_2d(np.asarray(self.A, dtype=complex))
        if H.shape != A.shape or H.shape[0] != H.shape[1]:
            raise ValueError("H and A must be square matrices of the same size")
        for name, m in (("H", H), ("A", A)):
            if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-12:
                raise ValueError(f"{name} must be Hermitian")
            m.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "A", A)
        if self.lam < 0 or self.amplification < 1:
            raise ValueError("lam must be >= 0 and amplification >= 1")
        if not (self.dt > 0 and self.t_end > 0 and self.n_traj > 0):
            raise ValueError("dt, t_end and n_traj must be positive")
        if self.scheme not in ("exponential", "euler"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        spread = float(np.ptp(np.linalg.eigvalsh(A)))
        if self.dt * self.rate * spread**2 >= STABILITY_BOUND:
            raise ValueError(
                f"dt * lam * N * spread(A)^2 = {self.dt * self.rate * spread**2:.3g} "
                f"violates the stability bound {STABILITY_BOUND}"
            )

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def rate(self) -> float:
        """Effective fluctuation strength ``lam * N``."""
        return self.lam * self.amplification

    @property
    def n_steps(self) -> int:
        return max(1, round(self.t_end / self.dt))

    @property
    def record_every(self) -> int:
        return max(1, self.n_steps // self.n_records)

    def replace(self, **changes) -> CollapseConfig:
        return dataclasses.replace(self, **changes)


def normalized_state(amplitudes) -> np.ndarray:
    psi = np.asarray(amplitudes, dtype=complex)
    return psi / np.linalg.norm(psi)


def eigenspaces(A: np.ndarray, tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distinct eigenvalues, eigenvectors (columns) and a one-hot map from
    eigenvector to eigenspace."""
    vals, vecs = np.linalg.eigh(A)
    scale = max(1.0, float(np.max(np.abs(vals))))
    distinct: list[float] = []
    labels = []
    for v in vals:
        if distinct and abs(v - distinct[-1]) <= tol * scale:
            labels.append(len(distinct) - 1)
        else:
            distinct.append(float(v))
            labels.append(len(distinct) - 1)
    group = np.zeros((len(vals), len(distinct)))
    group[np.arange(len(vals)), labels] = 1.0
    return np.array(distinct), vecs, group


class _Stepper:
    def __init__(self, cfg: CollapseConfig):
        self.cfg = cfg
        self.At = cfg.A.T.copy()
        self.Ht = cfg.H.T.copy()
        self.Ut = expm(-1j * cfg.H * cfg.dt).T.copy()
        self.sqrt_k = math.sqrt(cfg.rate)
        self.k = cfg.rate

    def step(self, psi: np.ndarray, dw: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        a_psi = psi @ self.At
        mean = np.real(np.sum(psi.conj() * a_psi, axis=1))
        d1 = a_psi - mean[:, None] * psi
        d2 = d1 @ self.At - mean[:, None] * d1
        new = psi + self.sqrt_k * dw[:, None] * d1 - (0.5 * self.k * cfg.dt) * d2
        if cfg.scheme == "exponential":
            new = new @ self.Ut
        else:
            new = new - 1j * cfg.dt * (psi @ self.Ht)
        norm = np.linalg.norm(new, axis=1)
        if np.any(np.abs(norm - 1.0) > cfg.norm_tol):
            raise StepSizeError(
                f"norm changed by {np.max(np.abs(norm - 1.0)):.3g} in one step; reduce dt"
            )
        return new / norm[:, None]


def _noise_rngs(cfg: CollapseConfig, indices: Sequence[int], seed: int | None = None):
    master = cfg.seed if seed is None else seed
    return [child_rng(master, "collapse.traj", int(i)) for i in indices]


def _run_batch(cfg: CollapseConfig, psi0: np.ndarray, indices: Sequence[int], keep_states: bool, seed=None):
    stepper = _Stepper(cfg)
    _, vecs, group = eigenspaces(cfg.A)
    rngs = _noise_rngs(cfg, indices, seed)
    b = len(indices)
    psi = np.broadcast_to(psi0, (b, cfg.dim)).copy()
    n_steps = cfg.n_steps
    rec_steps = record_steps(cfg)
    slot = {k: r for r, k in enumerate(rec_steps)}
    n_rec = len(rec_steps)
    pops = np.empty((b, n_rec, group.shape[1]))
    states = np.empty((b, n_rec, cfg.dim), complex) if keep_states else None

    def record(r):
        amp = psi @ vecs.conj()
        pops[:, r] = (np.abs(amp) ** 2) @ group
        if keep_states:
            states[:, r] = psi

    record(0)
    sdt = math.sqrt(cfg.dt)
    step = 0
    while step < n_steps:
        length = min(_NOISE_CHUNK, n_steps - step)
        noise = np.stack([g.standard_normal(length) for g in rngs], axis=1) * sdt
        for j in range(length):
            psi = stepper.step(psi, noise[j])
            step += 1
            if step in slot:
                record(slot[step])
    return pops, states


def record_steps(cfg: CollapseConfig) -> list[int]:
    """Step indices at which states are recorded; always includes the last."""
    steps = list(range(0, cfg.n_steps + 1, cfg.record_every))
    if steps[-1] != cfg.n_steps:
        steps.append(cfg.n_steps)
    return steps


@dataclass(frozen=True)
class StateTrajectory:
    times: np.ndarray
    states: np.ndarray
    populations: np.ndarray
    eigenvalues: np.ndarray


def evolve_trajectory(
    cfg: CollapseConfig, psi0, seed: int | None = None, index: int = 0
) -> StateTrajectory:
    """One trajectory recorded on the configuration's time grid.

    With the default seed this reproduces trajectory ``index`` of
    :func:`simulate_populations`.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
        raise ValueError("initial state must be normalized")
    pops, states = _run_batch(cfg, psi0, [index], keep_states=True, seed=seed)
    times = np.array(record_steps(cfg)) * cfg.dt
    vals, _, _ = eigenspaces(cfg.A)
    return StateTrajectory(times, states[0], pops[0], vals)


@dataclass(frozen=True)
class PopulationRecord:
    """Eigenspace populations, shape ``(n_traj, n_times, n_outcomes)``."""

    times: np.ndarray
    populations: np.ndarray
    eigenvalues: np.ndarray
    config: CollapseConfig

    @property
    def n_traj(self) -> int:
        return self.populations.shape[0]

    def variances(self) -> np.ndarray:
        a = self.eigenvalues
        mean = self.populations @ a
        return self.populations @ (a**2) - mean**2


def simulate_populations(
    cfg: CollapseConfig, psi0, *, batch_size: int = 2000, threads: int = 1
) -> PopulationRecord:
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (cfg.dim,):
        raise ValueError(f"initial state must have {cfg.dim} components")
    if abs(np.linalg.norm(psi0) - 1.0) > 1e-9:
        raise ValueError("initial state must be normalized")
    batches = [range(i, min(i + batch_size, cfg.n_traj)) for i in range(0, cfg.n_traj, batch_size)]
    if threads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _run_batch(cfg, psi0, r, False)[0], batches))
    else:
        results = [_run_batch(cfg, psi0, r, False)[0] for r in batches]
    pops = np.concatenate(results, axis=0)
    times = np.array(record_steps(cfg)) * cfg.dt
    vals, _, _ = eigenspaces(cfg.A)
    return PopulationRecord(times, pops, vals, cfg)


def _check_commuting(cfg: CollapseConfig) -> None:
    comm = cfg.A @ cfg.H - cfg.H @ cfg.A
    if np.max(np.abs(comm), initial=0.0) > 1e-10:
        raise ValueError("collapse statistics require [A, H] = 0")


def _expected_weights(cfg: CollapseConfig, psi0) -> np.ndarray:
    _, vecs, group = eigenspaces(cfg.A)
    amp = np.asarray(psi0, dtype=complex) @ vecs.conj()
    return (np.abs(amp) ** 2) @ group


@dataclass(frozen=True)
class BornResult:
    eigenvalues: np.ndarray
    expected: np.ndarray
    frequencies: np.ndarray
    stderr: np.ndarray
    counts: np.ndarray
    unresolved: int
    n_traj: int

    @property
    def flagged(self) -> bool:
        """More than 1% of trajectories did not resolve: t_end too small."""
        return self.unresolved > 0.01 * self.n_traj

    def within(self, n_sigma: float = 3.0) -> bool:
        return bool(np.all(np.abs(self.frequencies - self.expected) <= n_sigma * self.stderr))


def _born_from_record(rec: PopulationRecord, expected: np.ndarray) -> BornResult:
    final = rec.populations[:, -1, :]
    resolved = final > rec.config.resolution
    counts = resolved.sum(axis=0)
    unresolved = int(rec.n_traj - resolved.any(axis=1).sum())
    freq = counts / rec.n_traj
    stderr = np.sqrt(expected * (1 - expected) / rec.n_traj)
    return BornResult(rec.eigenvalues, expected, freq, stderr, counts, unresolved, rec.n_traj)


def born_statistics(cfg: CollapseConfig, psi0, *, record: PopulationRecord | None = None, threads: int = 1) -> BornResult:
    """Outcome frequencies over ``n_traj`` trajectories run to ``t_end``.

    A trajectory counts for outcome ``a`` when its eigenspace population
    exceeds ``cfg.resolution``; the binomial band uses the expected weight.
    """
    _check_commuting(cfg)
    rec = record or simulate_populations(cfg, psi0, threads=threads)
    return _born_from_record(rec, _expected_weights(cfg, psi0))


@dataclass(frozen=True)
class VarianceCurve:
    times: np.ndarray
    mean_var: np.ndarray
    stderr: np.ndarray

    def monotone_within(self, n_sigma: float = 2.0) -> bool:
        """No step-to-step increase larger than ``n_sigma`` standard errors."""
        rise = np.diff(self.mean_var)
        return bool(np.all(rise <= n_sigma * self.stderr[1:]))


def variance_decay_curve(
    cfg: CollapseConfig, psi0, *, record: PopulationRecord | None = None, threads: int = 1
) -> VarianceCurve:
    _check_commuting(cfg)
    rec = record or simulate_populations(cfg, psi0, threads=threads)
    var = rec.variances()
    mean = var.mean(axis=0)
    se = var.std(axis=0, ddof=1) / math.sqrt(rec.n_traj) if rec.n_traj > 1 else np.zeros_like(mean)
    return VarianceCurve(rec.times, mean, se)


@dataclass(frozen=True)
class MartingaleResult:
    eigenvalues: np.ndarray
    drift: np.ndarray
    band: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.drift <= self.band))


def martingale_check(
    cfg: CollapseConfig, psi0, *, record: PopulationRecord | None = None, threads: int = 1
) -> MartingaleResult:
    """Max over time of ``|mean p_a(t) - p_a(0)|`` per eigenspace, with the
    3-standard-error band ``3 * max_t se_a(t)``."""
    _check_commuting(cfg)
    rec = record or simulate_populations(cfg, psi0, threads=threads)
    pops = rec.populations
    mean = pops.mean(axis=0)
    drift = np.max(np.abs(mean - mean[0]), axis=0)
    se = pops.std(axis=0, ddof=1) / math.sqrt(rec.n_traj) if rec.n_traj > 1 else np.zeros_like(mean)
    band = 3.0 * np.max(se, axis=0)
    return MartingaleResult(rec.eigenvalues, drift, band)


def fit_decay_rate(curve: VarianceCurve, floor: float = 1e-2) -> float:
    """Least-squares exponential rate of the mean variance.

    Uses points with ``mean_var > floor * mean_var[0]``; returns NaN when
    fewer than three points qualify or the fit does not decay.
    """
    v0 = curve.mean_var[0]
    if not v0 > 0:
        return float("nan")
    keep = curve.mean_var > floor * v0
    if keep.sum() < 3:
        return float("nan")
    slope = np.polyfit(curve.times[keep], np.log(curve.mean_var[keep]), 1)[0]
    return float(-slope) if slope < 0 else float("nan")


@dataclass(frozen=True)
class ScalingResult:
    amplifications: np.ndarray
    rates: np.ndarray
    curves: tuple[VarianceCurve, ...]

    @property
    def failed(self) -> bool:
        return bool(np.any(~np.isfinite(self.rates)))

    def ratios(self) -> np.ndarray:
        """``rate[i+1] / rate[i]`` for consecutive amplifications."""
        return self.rates[1:] / self.rates[:-1]

    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.rates) > 0))


def collapse_time_scaling(
    cfg: CollapseConfig, psi0, amplifications: Sequence[int], *, floor: float = 1e-2, threads: int = 1
) -> ScalingResult:
    """Fitted decay rate of the mean variance for each amplification ``N``.

    Each run uses ``dt`` and ``t_end`` scaled by ``cfg.amplification / N`` so
    that every amplification is integrated with the same ``lam*N*dt``
    stability margin and the same number of steps; noise streams come from
    ``(seed, "collapse.scaling", N)``.
    """
    _check_commuting(cfg)
    rates, curves = [], []
    for n in amplifications:
        factor = cfg.amplification / n
        sub = cfg.replace(
            amplification=int(n),
            dt=cfg.dt * factor,
            t_end=cfg.t_end * factor,
            seed=child_seed(cfg.seed, "collapse.scaling", int(n)),
        )
        curve = variance_decay_curve(sub, psi0, threads=threads)
        curves.append(curve)
        rates.append(fit_decay_rate(curve, floor))
    return ScalingResult(np.array(amplifications), np.array(rates), tuple(curves))
