"""TOML configuration loading for the command-line tools.

Matrices are written either as nested lists of reals or as tables
``{re = [[...]], im = [[...]]}``.  A model section names a builtin model
or gives an explicit Hamiltonian in the ``coeff * a.b.c`` text format
together with its degrees of freedom::

    [model]
    hamiltonian = '''
    0.5 * p.p
    0.5 * q.q
    '''
    dim = 3
    [[model.dof]]
    name = "q"
    momentum = "p"
    grading = "bosonic"
"""

from __future__ import annotations

import sys
from collections.abc import Mapping
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .collapse import CollapseConfig
from .ensemble import EnsembleConfig
from .operator_core import Grading, OperatorMatrix, PhasePoint, TracePolynomial
from .trace_dynamics import (
    DofDescriptor,
    TraceModel,
    commutator_squared_model,
    fermionic_oscillator_model,
    four_vector_model,
    free_particle_model,
    harmonic_model,
    random_hermitian,
    random_odd_matrix,
)

__all__ = [
    "ConfigError",
    "load_toml",
    "parse_matrix",
    "parse_vector",
    "build_model",
    "build_initial",
    "build_ensemble_config",
    "build_collapse_config",
    "BUILTIN_MODELS",
]


class ConfigError(ValueError):
    """A configuration file is malformed or inconsistent."""


BUILTIN_MODELS = {
    "harmonic": (harmonic_model, ("mass", "omega", "dim")),
    "free": (free_particle_model, ("mass", "dim")),
    "four_vector": (four_vector_model, ("mass", "dim")),
    "commutator_squared": (commutator_squared_model, ("coupling", "omega", "dim")),
    "fermionic_oscillator": (fermionic_oscillator_model, ("omega", "coupling", "dim")),
}


def load_toml(path: str | Path) -> dict:
    """Read a TOML file; a missing file raises FileNotFoundError naming it."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _section(cfg: Mapping, name: str, required: bool = True) -> dict:
    sec = cfg.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing [{name}] section")
        return {}
    if not isinstance(sec, Mapping):
        raise ConfigError(f"[{name}] must be a table")
    return dict(sec)


def _check_keys(sec: Mapping, allowed, where: str) -> None:
    extra = sorted(set(sec) - set(allowed))
    if extra:
        raise ConfigError(f"unknown keys in [{where}]: {', '.join(extra)}")


def parse_matrix(value, name: str = "matrix") -> np.ndarray:
    """Complex 2-D array from a nested list or an ``{re, im}`` table."""
    try:
        if isinstance(value, Mapping):
            _check_keys(value, ("re", "im"), name)
            re = np.asarray(value.get("re", 0.0), dtype=float)
            im = np.asarray(value.get("im", np.zeros_like(re)), dtype=float)
            out = re + 1j * im
        else:
            out = np.asarray(value, dtype=float).astype(complex)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: not a numeric matrix ({exc})") from exc
    if out.ndim != 2 or out.shape[0] != out.shape[1]:
        raise ConfigError(f"{name}: expected a square matrix, got shape {out.shape}")
    return out


def parse_vector(value, name: str = "vector") -> np.ndarray:
    try:
        if isinstance(value, Mapping):
            re = np.asarray(value.get("re", 0.0), dtype=float)
            im = np.asarray(value.get("im", np.zeros_like(re)), dtype=float)
            out = re + 1j * im
        else:
            out = np.asarray(value, dtype=float).astype(complex)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: not a numeric vector ({exc})") from exc
    if out.ndim != 1:
        raise ConfigError(f"{name}: expected a vector, got shape {out.shape}")
    return out


def build_model(sec: Mapping) -> TraceModel:
    """Model from a ``[model]`` table (builtin or explicit)."""
    sec = dict(sec)
    if "builtin" in sec:
        name = sec.pop("builtin")
        if name not in BUILTIN_MODELS:
            raise ConfigError(f"unknown builtin model {name!r}; choose from {sorted(BUILTIN_MODELS)}")
        factory, params = BUILTIN_MODELS[name]
        _check_keys(sec, params, "model")
        return factory(**sec)
    _check_keys(sec, ("hamiltonian", "dim", "dof", "mass", "four_momentum"), "model")
    if "hamiltonian" not in sec or "dof" not in sec:
        raise ConfigError("[model] needs either 'builtin' or both 'hamiltonian' and [[model.dof]]")
    dim = int(sec.get("dim", 3))
    dofs = []
    for i, d in enumerate(sec["dof"]):
        _check_keys(d, ("name", "momentum", "grading"), f"model.dof[{i}]")
        try:
            grading = Grading(d.get("grading", "bosonic"))
        except ValueError as exc:
            raise ConfigError(f"model.dof[{i}]: {exc}") from exc
        dofs.append(DofDescriptor(d["name"], d["momentum"], grading, dim))
    symbols = {}
    for d in dofs:
        symbols[d.name] = symbols[d.momentum] = d.grading
    h = TracePolynomial.parse(sec["hamiltonian"], symbols)
    four = sec.get("four_momentum")
    return TraceModel(h, tuple(dofs), mass=sec.get("mass"), four_momentum=tuple(four) if four else None)


def build_initial(sec: Mapping, model: TraceModel, rng: np.random.Generator) -> PhasePoint:
    """Initial phase point from an ``[initial]`` table.

    Symbols listed under ``[initial.values]`` take the given matrices; the
    rest are random Hermitian matrices of size ``scale`` (fermionic ones
    are linear in ``num_generators`` generators).
    """
    sec = dict(sec)
    _check_keys(sec, ("scale", "num_generators", "values"), "initial")
    scale = float(sec.get("scale", 1.0))
    k = int(sec.get("num_generators", 2))
    given = dict(sec.get("values", {}))
    unknown = sorted(set(given) - set(model.symbols))
    if unknown:
        raise ConfigError(f"[initial.values] names symbols not in the model: {', '.join(unknown)}")
    values = {}
    for sym, grading in model.symbols.items():
        if grading is Grading.FERMIONIC:
            if sym in given:
                raise ConfigError(f"explicit values for fermionic symbol {sym!r} are not supported")
            values[sym] = random_odd_matrix(rng, model.dim, k, scale)
            continue
        if sym in given:
            m = parse_matrix(given[sym], f"initial.values.{sym}")
            if m.shape[0] != model.dim:
                raise ConfigError(f"initial.values.{sym}: expected {model.dim}x{model.dim}")
        else:
            m = random_hermitian(rng, model.dim, scale)
        values[sym] = m
    if any(isinstance(v, OperatorMatrix) for v in values.values()):
        values = {
            s: v if isinstance(v, OperatorMatrix) else OperatorMatrix.from_complex(v, k)
            for s, v in values.items()
        }
    return PhasePoint(values, 0.0)


_ENSEMBLE_KEYS = ("beta", "lambda_tilde", "proposal_scale", "n_samples", "n_burnin", "thinning", "n_chains", "ward")


def build_ensemble_config(cfg: Mapping, seed: int) -> tuple[EnsembleConfig, TracePolynomial | None]:
    model = build_model(_section(cfg, "model"))
    sec = _section(cfg, "ensemble", required=False)
    _check_keys(sec, _ENSEMBLE_KEYS, "ensemble")
    ward_text = sec.pop("ward", None)
    if "lambda_tilde" in sec:
        sec["lambda_tilde"] = parse_matrix(sec["lambda_tilde"], "ensemble.lambda_tilde")
    ecfg = EnsembleConfig(model, seed=seed, **sec)
    ward = TracePolynomial.parse(ward_text, model.symbols) if ward_text is not None else None
    return ecfg, ward


_COLLAPSE_KEYS = ("H", "A", "psi0", "lam", "amplification", "dt", "t_end", "n_traj", "n_records", "resolution", "scheme")


def build_collapse_config(cfg: Mapping, seed: int) -> tuple[CollapseConfig, np.ndarray, dict]:
    """Collapse run, initial state and the optional ``[scaling]`` table."""
    sec = _section(cfg, "collapse")
    _check_keys(sec, _COLLAPSE_KEYS, "collapse")
    for key in ("H", "A", "psi0"):
        if key not in sec:
            raise ConfigError(f"[collapse] needs '{key}'")
    H = parse_matrix(sec.pop("H"), "collapse.H")
    A = parse_matrix(sec.pop("A"), "collapse.A")
    psi0 = parse_vector(sec.pop("psi0"), "collapse.psi0")
    norm = np.linalg.norm(psi0)
    if not norm > 0:
        raise ConfigError("collapse.psi0 must be nonzero")
    ccfg = CollapseConfig(H, A, seed=seed, **sec)
    if psi0.shape != (ccfg.dim,):
        raise ConfigError(f"collapse.psi0 must have {ccfg.dim} components")
    scaling = _section(cfg, "scaling", required=False)
    _check_keys(scaling, ("amplifications", "floor"), "scaling")
    return ccfg, psi0 / norm, scaling
