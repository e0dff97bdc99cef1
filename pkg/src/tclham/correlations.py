"""Environmental correlation kernels, Golden-Rule rates and empirical correlators.

Kernel convention: both kernels integrate to one half on the half line,

    int_0^inf h(tau) dtau = 1/2,

so a one-sided time integral of ``gamma * h`` contributes ``gamma / 2``. All
rates below are built on that convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import sici

from .model import ConfigurationError, ModelParams, build_model, interaction_coupling

KERNEL_KINDS = ("sinc2", "exponential")
MAX_F4_DIM = 64
MAX_TRANSITION_DIM = 64
_GAUSS = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class Kernel:
    kind: str
    band_width: float

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigurationError(f"unknown kernel kind {self.kind!r}; use one of {KERNEL_KINDS}")
        if not self.band_width > 0:
            raise ConfigurationError("kernel band_width must be > 0")


@dataclass(frozen=True)
class FourthOrderRates:
    Gamma1: float
    Gamma2: float
    Gamma3: float
    GammaTilde1: float
    GammaTilde2: float
    GammaTilde3: float


@dataclass(frozen=True)
class RateSet:
    gamma1: float
    gamma2: float
    band_width: float
    fourth_order: FourthOrderRates | None = None

    @property
    def total(self) -> float:
        return self.gamma1 + self.gamma2


def kernel_h(kernel: Kernel, tau):
    """Correlation kernel h(tau); accepts scalars or arrays."""
    de = kernel.band_width
    tau = np.asarray(tau, dtype=float)
    if kernel.kind == "sinc2":
        x = de * tau / 2.0
        # np.sinc(y) = sin(pi y) / (pi y)
        out = de / (2.0 * math.pi) * np.sinc(x / math.pi) ** 2
    else:
        out = de / 2.0 * np.exp(-de * np.abs(tau))
    return out if out.ndim else float(out)


def kernel_integral(kernel: Kernel, t):
    """Closed-form int_0^t h(s) ds (odd in t)."""
    de = kernel.band_width
    t = np.asarray(t, dtype=float)
    if kernel.kind == "sinc2":
        x = de * np.abs(t) / 2.0
        si, _ = sici(2.0 * x)
        with np.errstate(invalid="ignore", divide="ignore"):
            tail = np.where(x > 0, np.sin(x) ** 2 / np.where(x > 0, x, 1.0), 0.0)
        out = np.sign(t) * (si - tail) / math.pi
    else:
        out = np.sign(t) * 0.5 * (1.0 - np.exp(-de * np.abs(t)))
    return out if out.ndim else float(out)


def golden_rule_rates(params: ModelParams, fourth_order: bool = False) -> RateSet:
    """gamma_a = 2 pi lambda^2 N_a / band_width, optionally with fourth-order rates.

    The fourth-order rates are the exponential-kernel values; each carries a
    correction of relative order gamma / band_width.
    """
    de = params.band_width
    pref = 2.0 * math.pi * params.coupling_strength ** 2 / de
    g1 = pref * params.N1
    g2 = pref * params.N2
    fo = fourth_order_rates(g1, g2, de) if fourth_order else None
    return RateSet(gamma1=g1, gamma2=g2, band_width=de, fourth_order=fo)


def fourth_order_rates(g1: float, g2: float, band_width: float) -> FourthOrderRates:
    de = band_width
    return FourthOrderRates(
        Gamma1=g1 * (1.0 + (g1 + g2) / (2.0 * de)),
        Gamma2=g2 * (1.0 + (2.0 * g2 - g1) / (4.0 * de)),
        Gamma3=3.0 * g1 * g2 / (4.0 * de),
        GammaTilde1=g1 * (1.0 + (2.0 * g1 - g2) / (4.0 * de)),
        GammaTilde2=g2 * (1.0 + (g1 + g2) / (2.0 * de)),
        GammaTilde3=3.0 * g1 * g2 / (4.0 * de),
    )


def with_fourth_order(rates: RateSet) -> RateSet:
    return RateSet(rates.gamma1, rates.gamma2, rates.band_width,
                   fourth_order_rates(rates.gamma1, rates.gamma2, rates.band_width))


def memory_integral_Gamma(kernel: Kernel, rates: RateSet, t, step: float | None = None):
    """Gamma(t) = 2 (gamma1 + gamma2) int_0^t dt1 int_0^t1 dt2 h(t1 - t2).

    Uses int_0^t dt1 int_0^t1 h = t H0(t) - H1(t) with H0 = int_0^t h and
    H1 = int_0^t s h(s) ds, both accumulated panel by panel with 5-point
    Gauss-Legendre on a grid of spacing ``step`` (default and maximum
    0.02 / band_width) merged with the requested times.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise ValueError("memory integral is defined for t >= 0 only")
    de = kernel.band_width
    h_step = step if step is not None else 0.02 / de
    if not 0 < h_step <= 0.02 / de * (1 + 1e-12):
        raise ConfigurationError("quadrature step must resolve 1/band_width (<= 0.02/band_width)")
    tmax = float(t_arr.max()) if t_arr.size else 0.0
    n = max(1, math.ceil(tmax / h_step))
    grid = np.union1d(np.linspace(0.0, tmax, n + 1), t_arr)
    x, w = _GAUSS
    mid = 0.5 * (grid[1:] + grid[:-1])
    half = 0.5 * (grid[1:] - grid[:-1])
    s = mid[:, None] + half[:, None] * x[None, :]
    hs = kernel_h(kernel, s)
    H0 = np.concatenate([[0.0], np.cumsum(half * (hs @ w))])
    H1 = np.concatenate([[0.0], np.cumsum(half * ((s * hs) @ w))])
    k = np.searchsorted(grid, t_arr)
    out = 2.0 * rates.total * (t_arr * H0[k] - H1[k])
    return out if np.ndim(t) else float(out[0])


def memory_factor(kernel: Kernel, t):
    """2 int_0^t h, the time-dependent prefactor of the memory-kernel equations."""
    return 2.0 * kernel_integral(kernel, t)


# --- empirical correlators over sampled coupling matrices ---------------------

def _seed_models(params: ModelParams, seeds):
    seeds = list(seeds)
    if not seeds:
        raise ConfigurationError("at least one seed is required")
    for s in seeds:
        yield build_model(params, s)


def empirical_two_point_samples(params: ModelParams, seeds, tau_grid) -> np.ndarray:
    """Per-seed f2(tau) = (lambda^2/N1) sum |c|^2 exp(-i omega tau); shape (M, T)."""
    tau = np.asarray(tau_grid, dtype=float)
    lam2 = params.coupling_strength ** 2
    rows = []
    for model in _seed_models(params, seeds):
        w = np.abs(model.couplings.entries) ** 2
        p1 = np.exp(1j * np.outer(tau, model.lower_energies))
        p2 = np.exp(-1j * np.outer(tau, model.upper_energies))
        rows.append(lam2 / params.N1 * np.einsum("tn,nm,tm->t", p1, w, p2))
    return np.array(rows)


def empirical_two_point(params: ModelParams, seeds, tau_grid) -> np.ndarray:
    return empirical_two_point_samples(params, seeds, tau_grid).mean(axis=0)


def empirical_four_point_samples(params: ModelParams, seeds, t, t1, t2, t3) -> np.ndarray:
    """Per-seed tr_E{B(t) B^H(t1) B(t2) B^H(t3) Pi_1 / N1}."""
    if params.N1 > MAX_F4_DIM or params.N2 > MAX_F4_DIM:
        raise ConfigurationError(f"four-point correlator limited to N1, N2 <= {MAX_F4_DIM}")
    out = []
    for model in _seed_models(params, seeds):
        Bt, B1, B2, B3 = (interaction_coupling(model, s) for s in (t, t1, t2, t3))
        prod = Bt @ B1.conj().T @ B2 @ B3.conj().T
        out.append(np.trace(prod) / params.N1)
    return np.array(out)


def empirical_four_point(params: ModelParams, seeds, t, t1, t2, t3) -> complex:
    return complex(empirical_four_point_samples(params, seeds, t, t1, t2, t3).mean())


def wick_four_point(params: ModelParams, t, t1, t2, t3) -> tuple[complex, complex]:
    """Coupling-averaged four-point function split into its two pair contractions.

    Exact for Gaussian couplings at finite N1, N2. Returns ``(peak1, peak2)``:
    the contraction peaked at t = t1, t2 = t3 and the one peaked at
    t = t3, t1 = t2. Their sum is the full average.
    """
    lam4 = params.coupling_strength ** 4
    de = params.band_width
    e1 = de * np.arange(1, params.N1 + 1) / params.N1
    e2 = de * np.arange(1, params.N2 + 1) / params.N2
    omega = e2[None, :] - e1[:, None]
    s_a = np.exp(-1j * omega * (t - t1)).sum(axis=1)
    s_b = np.exp(-1j * omega * (t2 - t3)).sum(axis=1)
    peak1 = lam4 / params.N1 * np.sum(s_a * s_b)
    u = np.exp(-1j * omega * (t - t3)).sum(axis=0)
    v = np.exp(1j * omega * (t1 - t2)).sum(axis=0)
    peak2 = lam4 / params.N1 * np.sum(u * v)
    return complex(peak1), complex(peak2)


def _system_block(model, i: int, j: int, s: float) -> np.ndarray:
    """<i| V(s) |j> as a dense environment operator."""
    d, n1 = model.env_dim, model.N1
    op = np.zeros((d, d), dtype=complex)
    if i == 1 and j == 0:
        op[:n1, n1:] = interaction_coupling(model, s)
    elif i == 0 and j == 1:
        op[n1:, :n1] = interaction_coupling(model, s).conj().T
    return op


def transition_integral(params: ModelParams, seed: int, i: int, j: int, a: int, b: int,
                        tau, step: float | None = None):
    """f(ijab, tau) = 2 int_0^tau dtau' int_0^tau' dtau'' tr{Pi_a <i|V(tau'')|j> Pi_b <j|V(0)|i>}.

    Band labels ``a``, ``b`` are 1 or 2. Evaluated with dense environment
    matrices and twofold cumulative trapezoid quadrature; returns the real
    part (the imaginary part is a level shift that the rate equations drop).
    """
    if params.N1 > MAX_TRANSITION_DIM or params.N2 > MAX_TRANSITION_DIM:
        raise ConfigurationError(f"transition integral limited to N1, N2 <= {MAX_TRANSITION_DIM}")
    if a not in (1, 2) or b not in (1, 2) or i not in (0, 1) or j not in (0, 1):
        raise ConfigurationError("indices: i, j in {0, 1}; a, b in {1, 2}")
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau_arr < 0):
        raise ValueError("tau must be >= 0")
    model = build_model(params, seed)
    d, n1 = model.env_dim, model.N1
    pa = np.zeros(d)
    pb = np.zeros(d)
    pa[slice(0, n1) if a == 1 else slice(n1, d)] = 1.0
    pb[slice(0, n1) if b == 1 else slice(n1, d)] = 1.0

    h_step = step if step is not None else 0.02 / params.band_width
    tmax = float(tau_arr.max())
    n = max(1, math.ceil(tmax / h_step))
    grid = np.union1d(np.linspace(0.0, tmax, n + 1), tau_arr)
    # tr{X Y} = sum(X * Y.T)
    right_t = (pb[:, None] * _system_block(model, j, i, 0.0)).T
    g = np.empty(grid.size, dtype=complex)
    for k, s in enumerate(grid):
        g[k] = np.sum(pa[:, None] * _system_block(model, i, j, s) * right_t)
    inner = cumulative_trapezoid(g, grid, initial=0.0)
    outer = cumulative_trapezoid(inner, grid, initial=0.0)
    out = 2.0 * outer[np.searchsorted(grid, tau_arr)].real
    return out if np.ndim(tau) else float(out[0])
