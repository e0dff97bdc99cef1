"""Exact interaction-picture propagation of composite pure states.

Basis layout: ``index = sys_level * (N1 + N2) + env_level`` with the lower
band first in the environment. The interaction only couples the "bright"
states |1, n1> and |0, n2>; the "dark" states |0, n1> and |1, n2> are
annihilated by V(t) and stay frozen. The default integration path therefore
evolves the N1 + N2 bright amplitudes only (see ``tclham._kernels``); the
``"full"`` sector integrates the whole 2(N1 + N2) vector and is used to check
that closure.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .model import ConfigurationError, EnvVector, TwoBandModel, interaction_coupling


class IntegrationAccuracyError(RuntimeError):
    """Norm drift exceeded the configured tolerance."""

    def __init__(self, drift, tolerance, time):
        super().__init__(
            f"norm drift {drift:.3e} exceeds tolerance {tolerance:.1e} at t={time:g}")
        self.drift = drift
        self.tolerance = tolerance
        self.time = time


class RecurrenceWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.size % 2:
            raise ConfigurationError("pure state needs an even-length 1-d amplitude vector")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def blocks(self) -> np.ndarray:
        """Amplitudes as a (2, env_dim) array indexed [sys_level, env_level]."""
        return self.amplitudes.reshape(2, -1)


def product_state(system: np.ndarray, env: EnvVector | np.ndarray) -> PureState:
    """|s> (x) |chi> for system amplitudes ``system = (s0, s1)``."""
    env_amps = env.amplitudes if isinstance(env, EnvVector) else np.asarray(env)
    return PureState(np.kron(np.asarray(system, dtype=complex), env_amps))


@dataclass(frozen=True)
class IntegratorOptions:
    dt: float | None = None
    norm_tolerance: float = 1e-9
    sector: str = "bright"
    backend: str = "auto"

    def __post_init__(self):
        if self.sector not in ("bright", "full"):
            raise ConfigurationError(f"unknown sector {self.sector!r}")
        if self.backend not in ("auto", "compiled", "numpy"):
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        if self.dt is not None and not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt!r}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Reduced observables of one run sampled on a time grid.

    ``rho``, ``rho1`` and ``rho2`` have shape (T, 2, 2) with element
    ``[k, i, j] = rho_ij(t_k)``; ``band_populations[k, a]`` is tr{Pi_a rho}.
    """
    times: np.ndarray
    rho: np.ndarray
    rho1: np.ndarray | None = None
    rho2: np.ndarray | None = None
    norms: np.ndarray | None = None
    band_populations: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or (times.size > 1 and np.any(np.diff(times) <= 0)):
            raise ConfigurationError("trajectory times must be strictly increasing")
        if len(self.rho) != times.size:
            raise ConfigurationError("record count must equal time count")
        for name in ("times", "rho", "rho1", "rho2", "norms", "band_populations"):
            v = getattr(self, name) if name != "times" else times
            if v is not None:
                v = np.array(v)
                v.setflags(write=False)
                object.__setattr__(self, name, v)

    @property
    def rho11(self) -> np.ndarray:
        return self.rho[:, 1, 1].real

    @property
    def rho01(self) -> np.ndarray:
        return self.rho[:, 0, 1]

    @property
    def norm_drift(self) -> np.ndarray | None:
        if self.norms is None:
            return None
        return np.abs(self.norms - self.norms[0])


def _as_blocks(model: TwoBandModel, psi) -> np.ndarray:
    amps = psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi)
    if amps.size != 2 * model.env_dim:
        raise ConfigurationError(
            f"state has {amps.size} amplitudes, model needs {2 * model.env_dim}")
    return amps.reshape(2, model.env_dim)


def _band_gram(m: np.ndarray) -> np.ndarray:
    # [i, j] = sum_e m[i, e] * conj(m[j, e])
    return m @ m.conj().T


def reduced_density(model: TwoBandModel, psi) -> np.ndarray:
    """rho_ij = sum_e psi(i, e) psi*(j, e)."""
    return _band_gram(_as_blocks(model, psi))


def conditional_densities(model: TwoBandModel, psi) -> tuple[np.ndarray, np.ndarray]:
    """Un-normalized band-resolved densities tr_E{Pi_a rho}, a = 1, 2."""
    m = _as_blocks(model, psi)
    n1 = model.N1
    return _band_gram(m[:, :n1]), _band_gram(m[:, n1:])


def relevant_expectations(model: TwoBandModel, psi) -> np.ndarray:
    """B[i, j, a-1] = <psi| (|i><j| (x) Pi_a) |psi> = rho_a[j, i]."""
    rho1, rho2 = conditional_densities(model, psi)
    return np.stack([rho1.T, rho2.T], axis=-1)


def default_step(model_or_params) -> float:
    p = getattr(model_or_params, "params", model_or_params)
    dt = 0.05 / p.band_width
    vhat = p.coupling_strength * (math.sqrt(p.N1) + math.sqrt(p.N2))
    if vhat > 0:
        dt = min(dt, 0.1 / vhat)
    return dt


def recurrence_time(model_or_params) -> float:
    """Discrete-spectrum recurrence scale 2 pi min(N1, N2) / band_width."""
    p = getattr(model_or_params, "params", model_or_params)
    return 2.0 * math.pi * min(p.N1, p.N2) / p.band_width


def _rk4_full(model: TwoBandModel, psi: np.ndarray, t0: float, dt: float, nsteps: int):
    n1 = model.N1

    def rhs(t, y):
        B = interaction_coupling(model, t)
        y = y.reshape(2, -1)
        out = np.zeros_like(y)
        # V = sigma_+ (x) B + sigma_- (x) B^H, B maps band 2 -> band 1
        out[1, :n1] = B @ y[0, n1:]
        out[0, n1:] = B.conj().T @ y[1, :n1]
        return -1j * out.ravel()

    for k in range(nsteps):
        t = t0 + k * dt
        k1 = rhs(t, psi)
        k2 = rhs(t + dt / 2, psi + dt / 2 * k1)
        k3 = rhs(t + dt / 2, psi + dt / 2 * k2)
        k4 = rhs(t + dt, psi + dt * k3)
        psi = psi + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


def _select_kernel(backend: str):
    if backend == "numpy":
        return _kernels.rk4_bright_py
    if backend == "compiled":
        if _kernels.rk4_bright_compiled is None:
            raise ConfigurationError("compiled kernel requested but not built")
        return _kernels.rk4_bright_compiled
    return _kernels.rk4_bright


def evolve(model: TwoBandModel, psi0, grid, opts: IntegratorOptions | None = None,
           metadata: dict | None = None) -> Trajectory:
    """Integrate i d psi/dt = V(t) psi with fixed-step RK4 and sample on ``grid``.

    Each grid interval is split into the smallest number of equal steps not
    exceeding ``opts.dt`` (default :func:`default_step`). Raises
    :class:`IntegrationAccuracyError` when the norm drifts by more than
    ``opts.norm_tolerance``; the state is never renormalized.
    """
    opts = opts or IntegratorOptions()
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise ConfigurationError("time grid must be a non-empty 1-d array")
    if grid[0] < 0 or np.any(np.diff(grid) <= 0):
        raise ConfigurationError("time grid must start at t >= 0 and be strictly increasing")
    dt_max = opts.dt if opts.dt is not None else default_step(model)
    if grid[-1] > 0.5 * recurrence_time(model):
        warnings.warn(
            f"t_max={grid[-1]:g} exceeds half the recurrence time "
            f"{recurrence_time(model):g}; finite-band recurrences may show",
            RecurrenceWarning, stacklevel=2)

    psi = np.array(_as_blocks(model, psi0), dtype=complex)
    norm0 = float(np.linalg.norm(psi))
    if abs(norm0 - 1.0) > 1e-9:
        raise ConfigurationError(f"initial state must have unit norm, got {norm0!r}")
    n1 = model.N1
    lam = model.params.coupling_strength
    kernel = _select_kernel(opts.backend)
    C = model.couplings.entries
    e1 = np.ascontiguousarray(model.lower_energies)
    e2 = np.ascontiguousarray(model.upper_energies)
    a = np.ascontiguousarray(psi[1, :n1])
    b = np.ascontiguousarray(psi[0, n1:])
    full = psi.ravel().copy()

    T = grid.size
    rho = np.empty((T, 2, 2), dtype=complex)
    rho1 = np.empty((T, 2, 2), dtype=complex)
    rho2 = np.empty((T, 2, 2), dtype=complex)
    norms = np.empty(T)
    pops = np.empty((T, 2))

    def record(k, state):
        r1 = _band_gram(state[:, :n1])
        r2 = _band_gram(state[:, n1:])
        rho1[k], rho2[k] = r1, r2
        rho[k] = r1 + r2
        pops[k] = (np.trace(r1).real, np.trace(r2).real)
        norms[k] = math.sqrt(pops[k].sum())
        drift = abs(norms[k] - norm0)
        if drift > opts.norm_tolerance:
            raise IntegrationAccuracyError(drift, opts.norm_tolerance, grid[k])

    record(0, psi)
    for k in range(1, T):
        span = grid[k] - grid[k - 1]
        nsteps = max(1, math.ceil(span / dt_max * (1 - 1e-12)))
        h = span / nsteps
        if opts.sector == "full":
            full = _rk4_full(model, full, grid[k - 1], h, nsteps)
            state = full.reshape(2, -1)
        else:
            if lam > 0:
                kernel(C, e1, e2, lam, a, b, float(grid[k - 1]), h, nsteps)
            psi[1, :n1] = a
            psi[0, n1:] = b
            state = psi
        record(k, state)

    meta = {
        "method": "exact",
        "sector": opts.sector,
        "backend": _kernels.BACKEND if opts.backend == "auto" else opts.backend,
        "dt_max": dt_max,
        "coupling_seed": model.couplings.seed,
        "params": asdict(model.params),
    }
    if metadata:
        meta.update(metadata)
    return Trajectory(times=grid, rho=rho, rho1=rho1, rho2=rho2, norms=norms,
                      band_populations=pops, metadata=meta)

