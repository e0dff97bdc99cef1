"""Approximate reduced dynamics: standard TCL2/TCL4, HAM, correlated-projection TCL.

Conventions: 2x2 density matrices are indexed ``rho[i, j] = <i|rho|j>`` with
|0> the lower and |1> the upper system level; ``sigma_+ = |1><0|``. Time
arguments may be scalars or 1-d arrays; array input gives a leading time axis.

Every ODE here is integrated with classical fixed-step RK4. Each grid
interval is split into equal sub-steps no longer than the solver's step bound.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .correlations import Kernel, RateSet, memory_factor, memory_integral_Gamma
from .model import ConfigurationError

SIGMA_P = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_M = SIGMA_P.T.copy()
P_UP = SIGMA_P @ SIGMA_M    # |1><1|
P_DOWN = SIGMA_M @ SIGMA_P  # |0><0|

# RK4 step bounds, in units of the inverse total rate and the inverse band width
RATE_STEP = 0.002
BAND_STEP = 0.05


def _check_rho(rho0) -> np.ndarray:
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (2, 2):
        raise ConfigurationError(f"expected a 2x2 density matrix, got shape {rho0.shape}")
    return rho0


def _times(t):
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise ValueError("times must be >= 0")
    return arr


def _assemble(rho0, rho11, rho01):
    """Density matrices from population and coherence arrays (trace preserved)."""
    rho11 = np.asarray(rho11)
    out = np.empty(rho11.shape + (2, 2), dtype=complex)
    out[..., 1, 1] = rho11
    out[..., 0, 0] = np.trace(rho0).real - rho11
    out[..., 0, 1] = rho01
    out[..., 1, 0] = np.conj(rho01)
    return out


def density_matrix(rho11: float, rho01: complex = 0.0) -> np.ndarray:
    return np.array([[1.0 - rho11, rho01], [np.conj(rho01), rho11]], dtype=complex)


# --- standard projection ------------------------------------------------------

def tcl2_standard(rates: RateSet, rho0, t) -> np.ndarray:
    """Second-order TCL with the factorizing projection: Lindblad decay at gamma2."""
    rho0 = _check_rho(rho0)
    t = _times(t)
    g2 = rates.gamma2
    return _assemble(rho0, rho0[1, 1].real * np.exp(-g2 * t), rho0[0, 1] * np.exp(-0.5 * g2 * t))


def tcl4_standard(rates: RateSet, rho0, t) -> np.ndarray:
    """Fourth-order TCL with the factorizing projection.

    The population grows without bound for t > 1/gamma1 (minimum at
    t = 1/gamma1); that divergence is the expected behaviour.
    """
    rho0 = _check_rho(rho0)
    t = _times(t)
    g1, g2 = rates.gamma1, rates.gamma2
    pop = rho0[1, 1].real * np.exp(-g2 * t + 0.5 * g1 * g2 * t * t)
    return _assemble(rho0, pop, rho0[0, 1] * np.exp(-0.5 * g2 * t))


def ham_two_band(rates: RateSet, rho0, t) -> np.ndarray:
    """HAM populations for an environment initially in the lower band."""
    rho0 = _check_rho(rho0)
    t = _times(t)
    g1, g2 = rates.gamma1, rates.gamma2
    g = g1 + g2
    if g == 0:
        return np.broadcast_to(rho0, t.shape + (2, 2)).copy()
    pop = rho0[1, 1].real * (g1 / g + g2 / g * np.exp(-g * t))
    return _assemble(rho0, pop, rho0[0, 1] * np.exp(-0.5 * g2 * t))


def _lindblad_dissipator(L, rho):
    LdL = L.conj().T @ L
    return L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)


def _rk4(f, y0, grid, max_step):
    grid = np.asarray(grid, dtype=float)
    ys = np.empty((grid.size,) + np.shape(y0), dtype=complex)
    y = np.array(y0, dtype=complex)
    ys[0] = y
    for k in range(1, grid.size):
        span = grid[k] - grid[k - 1]
        n = max(1, math.ceil(span / max_step * (1 - 1e-12)))
        h = span / n
        t0 = grid[k - 1]
        for s in range(n):
            t = t0 + s * h
            k1 = f(t, y)
            k2 = f(t + h / 2, y + h / 2 * k1)
            k3 = f(t + h / 2, y + h / 2 * k2)
            k4 = f(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[k] = y
    return ys


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or grid[0] < 0 or np.any(np.diff(grid) <= 0):
        raise ConfigurationError("grid must be a non-empty increasing array starting at t >= 0")
    return grid


def _rate_step(*rates):
    total = sum(abs(r) for r in rates)
    return RATE_STEP / total if total > 0 else np.inf


def tcl2_standard_ode(rates: RateSet, rho0, grid) -> np.ndarray:
    """ODE form of :func:`tcl2_standard` (Lindblad equation with L = sigma_-)."""
    grid = _check_grid(grid)
    g2 = rates.gamma2
    f = lambda t, r: g2 * _lindblad_dissipator(SIGMA_M, r)  # noqa: E731
    return _rk4(f, _check_rho(rho0), grid, _rate_step(g2))


def tcl4_standard_ode(rates: RateSet, rho0, grid) -> np.ndarray:
    """ODE form of :func:`tcl4_standard` with rates gamma2 (1 - gamma1 t) and gamma1 gamma2 t."""
    grid = _check_grid(grid)
    g1, g2 = rates.gamma1, rates.gamma2

    def f(t, r):
        rate = g2 * (1 - g1 * t)
        rate_tilde = g1 * g2 * t
        anti = P_UP @ r + r @ P_UP
        return (rate * _lindblad_dissipator(SIGMA_M, r)
                + rate_tilde * (P_UP @ r @ P_UP - 0.5 * anti))

    return _rk4(f, _check_rho(rho0), grid, _rate_step(g1, g2))


# --- correlated projection ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class CorrelatedState:
    """Band-correlated conditional densities rho^(1), rho^(2) (un-normalized)."""
    rho1: np.ndarray
    rho2: np.ndarray

    def __post_init__(self):
        for name in ("rho1", "rho2"):
            m = np.array(getattr(self, name), dtype=complex)
            if m.shape != (2, 2):
                raise ConfigurationError(f"{name} must be 2x2")
            m.setflags(write=False)
            object.__setattr__(self, name, m)

    @classmethod
    def lower_band(cls, rho0) -> "CorrelatedState":
        """Whole system state correlated with the lower band (upper band empty)."""
        return cls(_check_rho(rho0), np.zeros((2, 2), dtype=complex))

    @property
    def rho(self) -> np.ndarray:
        return self.rho1 + self.rho2

    def validate(self, atol: float = 1e-10):
        for name, m in (("rho1", self.rho1), ("rho2", self.rho2)):
            if not np.allclose(m, m.conj().T, atol=atol, rtol=0):
                raise ConfigurationError(f"{name} is not Hermitian")
            if np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min() < -atol:
                raise ConfigurationError(f"{name} is not positive semidefinite")
        tr = np.trace(self.rho).real
        if abs(tr - 1.0) > atol:
            raise ConfigurationError(f"conditional densities must sum to unit trace, got {tr}")
        return self


@dataclass(frozen=True, eq=False)
class CorrelatedTrajectory:
    times: np.ndarray
    rho1: np.ndarray
    rho2: np.ndarray

    @property
    def rho(self) -> np.ndarray:
        return self.rho1 + self.rho2

    @property
    def rho11(self) -> np.ndarray:
        return self.rho[:, 1, 1].real

    @property
    def rho01(self) -> np.ndarray:
        return self.rho[:, 0, 1]

    @property
    def exchange_invariant(self) -> np.ndarray:
        """rho^(1)_11 + rho^(2)_00, conserved by both correlated solvers."""
        return (self.rho1[:, 1, 1] + self.rho2[:, 0, 0]).real

    def state(self, k: int) -> CorrelatedState:
        return CorrelatedState(self.rho1[k], self.rho2[k])


def _correlated_rhs(rate_up_to_1, rate_out_1, rate_up_to_2, rate_out_2, g3=0.0, g3t=0.0):
    # Generic pair:
    #   d rho1 = A s+ rho2 s- - (B/2){s+s-, rho1} - g3 s+s- rho1 s+s-
    #   d rho2 = C s- rho1 s+ - (D/2){s-s+, rho2} - g3t s-s+ rho2 s-s+
    def f(y):
        r1, r2 = y[0], y[1]
        d1 = (rate_up_to_1 * SIGMA_P @ r2 @ SIGMA_M
              - 0.5 * rate_out_1 * (P_UP @ r1 + r1 @ P_UP)
              - g3 * P_UP @ r1 @ P_UP)
        d2 = (rate_up_to_2 * SIGMA_M @ r1 @ SIGMA_P
              - 0.5 * rate_out_2 * (P_DOWN @ r2 + r2 @ P_DOWN)
              - g3t * P_DOWN @ r2 @ P_DOWN)
        return np.stack([d1, d2])
    return f


def correlated_tcl2(kernel: Kernel | None, rates: RateSet, state0: CorrelatedState, grid,
                    mode: str = "markov") -> CorrelatedTrajectory:
    """Second-order TCL with the band-correlated projection.

    ``mode="markov"`` integrates the time-local pair with constant rates;
    ``mode="memory"`` multiplies the right-hand side by 2 int_0^t h(s) ds,
    which keeps the kernel's finite build-up time.
    """
    if mode not in ("markov", "memory"):
        raise ConfigurationError(f"unknown mode {mode!r}")
    if mode == "memory" and kernel is None:
        raise ConfigurationError("memory mode needs a kernel")
    state0.validate()
    grid = _check_grid(grid)
    g1, g2 = rates.gamma1, rates.gamma2
    base = _correlated_rhs(g1, g2, g2, g1)
    step = _rate_step(g1, g2)
    if mode == "memory":
        step = min(step, BAND_STEP / kernel.band_width)
        f = lambda t, y: memory_factor(kernel, t) * base(y)  # noqa: E731
    else:
        f = lambda t, y: base(y)  # noqa: E731
    ys = _rk4(f, np.stack([state0.rho1, state0.rho2]), grid, step)
    return CorrelatedTrajectory(grid, ys[:, 0], ys[:, 1])


def correlated_tcl2_population(kernel: Kernel, rates: RateSet, rho11_0: float, t) -> np.ndarray:
    """Closed form of the memory-mode population for a lower-band initial state."""
    g = rates.total
    gamma_t = memory_integral_Gamma(kernel, rates, t)
    return rho11_0 * (rates.gamma1 / g + rates.gamma2 / g * np.exp(-np.asarray(gamma_t)))


def correlated_tcl4(rates: RateSet, state0: CorrelatedState, grid) -> CorrelatedTrajectory:
    """Fourth-order TCL with the band-correlated projection (exponential-kernel rates).

    ``grid`` may be a scalar time, in which case the state at that time is
    returned as a :class:`CorrelatedState`.
    """
    fo = rates.fourth_order
    if fo is None:
        raise ConfigurationError("correlated_tcl4 needs fourth-order rates (see with_fourth_order)")
    state0.validate()
    scalar = np.ndim(grid) == 0
    grid = _check_grid(np.array([0.0, float(grid)]) if scalar and grid > 0 else np.atleast_1d(grid))
    f0 = _correlated_rhs(fo.Gamma1, fo.Gamma2, fo.GammaTilde2, fo.GammaTilde1,
                         fo.Gamma3, fo.GammaTilde3)
    step = _rate_step(fo.Gamma1, fo.GammaTilde2)
    ys = _rk4(lambda t, y: f0(y), np.stack([state0.rho1, state0.rho2]), grid, step)
    traj = CorrelatedTrajectory(grid, ys[:, 0], ys[:, 1])
    return traj.state(-1) if scalar else traj


def correlated_tcl4_population(rates: RateSet, rho11_0: float, t) -> np.ndarray:
    fo = rates.fourth_order
    if fo is None:
        raise ConfigurationError("fourth-order rates missing")
    g = rates.total
    relax = fo.Gamma1 + fo.GammaTilde2
    return rho11_0 * (rates.gamma1 / g + rates.gamma2 / g * np.exp(-relax * _times(t)))


# --- multiband HAM engine -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class MultibandRates:
    """Rate tensor ``gamma[i, j, a, b]`` for transitions |j, b> -> |i, a>.

    Band labels count from 0 here. ``gamma[i, j, a, b] * N_b / N_a`` is the
    rate out of (i, a) into (j, b).
    """
    gamma: np.ndarray
    band_sizes: tuple

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float)
        nb = len(self.band_sizes)
        if g.shape != (2, 2, nb, nb):
            raise ConfigurationError(f"rate tensor must have shape (2, 2, {nb}, {nb})")
        if np.any(g < 0):
            raise ConfigurationError("rates must be nonnegative")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "band_sizes", tuple(int(n) for n in self.band_sizes))

    @classmethod
    def two_band(cls, rates: RateSet, N1: int, N2: int) -> "MultibandRates":
        g = np.zeros((2, 2, 2, 2))
        g[1, 0, 0, 1] = rates.gamma1   # |0, band 2> -> |1, band 1>
        g[0, 1, 1, 0] = rates.gamma2   # |1, band 1> -> |0, band 2>
        return cls(g, (N1, N2))

    def symmetry_violation(self) -> float:
        """max |N_b gamma(ijab) - N_a gamma(jiba)|."""
        n = np.asarray(self.band_sizes, dtype=float)
        lhs = self.gamma * n[None, None, None, :]
        rhs = np.transpose(self.gamma, (1, 0, 3, 2)) * n[None, None, :, None]
        return float(np.abs(lhs - rhs).max())

    def out_rates(self) -> np.ndarray:
        """Total decay rate of each (i, a): sum_jb gamma(ijab) N_b / N_a."""
        n = np.asarray(self.band_sizes, dtype=float)
        return np.einsum("ijab,b->ia", self.gamma, n) / n[None, :]


@dataclass(frozen=True, eq=False)
class MultibandTrajectory:
    times: np.ndarray
    B: np.ndarray               # (T, 2, 2, n_bands)
    symmetric: bool

    @property
    def probability(self) -> np.ndarray:
        return np.einsum("tiia->t", self.B).real

    @property
    def probability_drift(self) -> float:
        p = self.probability
        return float(np.abs(p - p[0]).max())

    @property
    def rho(self) -> np.ndarray:
        """rho_ij = sum_a B_jia."""
        return np.swapaxes(self.B.sum(axis=-1), 1, 2)


def ham_multiband(rates: MultibandRates, B0, grid) -> MultibandTrajectory:
    """HAM rate equations for band-resolved expectations ``B[i, j, a]``.

    Populations follow
        dB_iia/dt = sum_jb gamma(ijab) (B_jjb - N_b/N_a B_iia),
    and each coherence B_ija decays at half the sum of the out-rates of
    (i, a) and (j, a). With detailed symmetry N_b gamma(ijab) = N_a gamma(jiba)
    the total probability sum_ia B_iia is conserved.
    """
    B0 = np.asarray(B0, dtype=complex)
    nb = len(rates.band_sizes)
    if B0.shape != (2, 2, nb):
        raise ConfigurationError(f"B0 must have shape (2, 2, {nb})")
    diag = np.einsum("iia->ia", B0)
    if np.abs(diag.imag).max() > 1e-12:
        raise ConfigurationError("diagonal expectations B_iia must be real")
    if abs(diag.real.sum() - 1.0) > 1e-10:
        raise ConfigurationError("sum_ia B_iia must equal 1")
    grid = _check_grid(grid)

    violation = rates.symmetry_violation()
    symmetric = violation <= 1e-12 * max(1.0, float(rates.gamma.max()))
    if not symmetric:
        warnings.warn(f"rate tensor violates detailed symmetry by {violation:.3e}; "
                      "total probability will not be conserved", RuntimeWarning, stacklevel=2)

    g = rates.gamma
    n = np.asarray(rates.band_sizes, dtype=float)
    out = rates.out_rates()                       # (2, nb)
    coh = 0.5 * (out[:, None, :] + out[None, :, :])  # (i, j, a)
    eye = np.eye(2, dtype=bool)[:, :, None]

    def f(t, B):
        pops = np.einsum("iia->ia", B)
        dpop = np.einsum("ijab,jb->ia", g, pops) - out * pops
        dB = np.where(eye, 0.0, -coh * B)
        dB[0, 0] = dpop[0]
        dB[1, 1] = dpop[1]
        return dB

    ys = _rk4(f, B0, grid, _rate_step(float(out.max())))
    return MultibandTrajectory(grid, ys, symmetric)
