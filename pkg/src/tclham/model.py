"""Two-band environment model: band energies, random couplings, initial states.

Everything is expressed in the interaction picture, so the system gap never
appears; only the transition frequencies

    omega(n1, n2) = band_width * (n2/N2 - n1/N1)

enter the dynamics. Levels are labelled 1..N within each band.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ConfigurationError(ValueError):
    """Invalid parameters, dimensions or grids."""


@dataclass(frozen=True)
class ModelParams:
    N1: int
    N2: int
    band_width: float
    coupling_strength: float

    def __post_init__(self):
        if int(self.N1) != self.N1 or self.N1 < 1:
            raise ConfigurationError(f"N1 must be a positive integer, got {self.N1!r}")
        if int(self.N2) != self.N2 or self.N2 < 1:
            raise ConfigurationError(f"N2 must be a positive integer, got {self.N2!r}")
        if not self.band_width > 0:
            raise ConfigurationError(f"band_width must be > 0, got {self.band_width!r}")
        if not self.coupling_strength >= 0:
            raise ConfigurationError(
                f"coupling_strength must be >= 0, got {self.coupling_strength!r}")
        object.__setattr__(self, "N1", int(self.N1))
        object.__setattr__(self, "N2", int(self.N2))
        object.__setattr__(self, "band_width", float(self.band_width))
        object.__setattr__(self, "coupling_strength", float(self.coupling_strength))

    @property
    def env_dim(self) -> int:
        return self.N1 + self.N2


@dataclass(frozen=True, eq=False)
class CouplingMatrix:
    entries: np.ndarray
    seed: int


@dataclass(frozen=True, eq=False)
class TwoBandModel:
    params: ModelParams
    couplings: CouplingMatrix
    lower_energies: np.ndarray = field(repr=False)
    upper_energies: np.ndarray = field(repr=False)

    @property
    def N1(self) -> int:
        return self.params.N1

    @property
    def N2(self) -> int:
        return self.params.N2

    @property
    def env_dim(self) -> int:
        return self.params.env_dim

    def transition_frequencies(self) -> np.ndarray:
        """omega(n1, n2) as an N1 x N2 array."""
        return self.upper_energies[None, :] - self.lower_energies[:, None]


@dataclass(frozen=True, eq=False)
class EnvVector:
    amplitudes: np.ndarray


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def realization_seeds(master_seed: int, k: int) -> tuple[int, int]:
    """Coupling and initial-state seeds for realization ``k`` of an ensemble.

    Pure function of ``(master_seed, k)``: a numpy ``SeedSequence`` with
    entropy ``master_seed`` and spawn key ``(k,)`` generates two 63-bit words.
    Independent of how realizations are scheduled across workers.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(k),))
    words = ss.generate_state(2, dtype=np.uint64) >> np.uint64(1)
    return int(words[0]), int(words[1])


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    # variance 1/2 per quadrature, so <|c|^2> = 1 and <c c> = 0
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * np.sqrt(0.5)


def sample_couplings(N1: int, N2: int, seed: int) -> CouplingMatrix:
    """Draw the N1 x N2 matrix of i.i.d. complex Gaussian couplings c(n1, n2)."""
    if int(N1) != N1 or int(N2) != N2 or N1 < 1 or N2 < 1:
        raise ConfigurationError(f"coupling matrix dimensions must be >= 1, got ({N1}, {N2})")
    rng = np.random.default_rng(int(seed))
    c = np.ascontiguousarray(_complex_gaussian(rng, (int(N1), int(N2))))
    return CouplingMatrix(entries=_readonly(c), seed=int(seed))


def band_energies(n: int, band_width: float) -> np.ndarray:
    return band_width * np.arange(1, n + 1) / n


def build_model(params: ModelParams, seed: int) -> TwoBandModel:
    couplings = sample_couplings(params.N1, params.N2, seed)
    return TwoBandModel(
        params=params,
        couplings=couplings,
        lower_energies=_readonly(band_energies(params.N1, params.band_width)),
        upper_energies=_readonly(band_energies(params.N2, params.band_width)),
    )


def random_lower_band_state(model: TwoBandModel, seed: int) -> EnvVector:
    """Environment vector with Gaussian random amplitudes on the lower band only."""
    rng = np.random.default_rng(int(seed))
    chi = _complex_gaussian(rng, model.N1)
    amps = np.zeros(model.env_dim, dtype=complex)
    amps[: model.N1] = chi / np.linalg.norm(chi)
    return EnvVector(amplitudes=_readonly(amps))


def interaction_coupling(model: TwoBandModel, t: float) -> np.ndarray:
    """B(t): entry (n1, n2) = lambda c(n1, n2) exp(-i omega(n1, n2) t)."""
    lam = model.params.coupling_strength
    phase = np.exp(-1j * model.transition_frequencies() * t)
    return lam * model.couplings.entries * phase
