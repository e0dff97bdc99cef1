"""Dense projection superoperators on small composite density matrices.

These are explicit-matrix implementations meant for environment dimensions
of a few dozen at most. They serve as the reference against which the
closed-form master equations are checked.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ConfigurationError, TwoBandModel, interaction_coupling

MAX_DENSE_ENV_DIM = 64


@dataclass(frozen=True)
class BandPartition:
    band_sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.band_sizes)
        if not sizes or any(n < 1 for n in sizes):
            raise ConfigurationError(f"band sizes must be positive, got {self.band_sizes!r}")
        object.__setattr__(self, "band_sizes", sizes)

    @classmethod
    def from_model(cls, model: TwoBandModel) -> "BandPartition":
        return cls((model.N1, model.N2))

    @property
    def env_dim(self) -> int:
        return sum(self.band_sizes)

    @property
    def n_bands(self) -> int:
        return len(self.band_sizes)

    def indicator(self, a: int) -> np.ndarray:
        """0/1 diagonal of Pi_a (``a`` counts from 0)."""
        d = np.zeros(self.env_dim)
        start = sum(self.band_sizes[:a])
        d[start:start + self.band_sizes[a]] = 1.0
        return d

    def projector(self, a: int) -> np.ndarray:
        return np.diag(self.indicator(a))


def _check_total(rho: np.ndarray, env_dim: int):
    rho = np.asarray(rho)
    if rho.shape != (2 * env_dim, 2 * env_dim):
        raise ConfigurationError(
            f"density matrix shape {rho.shape} does not match environment dimension {env_dim}")
    return rho


def partial_trace_env(rho: np.ndarray, env_dim: int) -> np.ndarray:
    r = np.asarray(rho).reshape(2, env_dim, 2, env_dim)
    return np.einsum("iejf,ef->ij", r, np.eye(env_dim))


def partial_trace_env_weighted(rho: np.ndarray, env_weight: np.ndarray) -> np.ndarray:
    """tr_E{(1 (x) W) rho} for a diagonal environment weight ``W``."""
    d = len(env_weight)
    r = np.asarray(rho).reshape(2, d, 2, d)
    return np.einsum("ieje,e->ij", r, env_weight)


def project_standard(rho: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """(tr_E rho) (x) reference."""
    reference = np.asarray(reference)
    d = reference.shape[0]
    if reference.shape != (d, d):
        raise ConfigurationError("reference state must be a square matrix")
    rho = _check_total(rho, d)
    return np.kron(partial_trace_env(rho, d), reference)


def project_correlated(rho: np.ndarray, partition: BandPartition) -> np.ndarray:
    """sum_a tr_E{Pi_a rho} (x) Pi_a / N_a."""
    d = partition.env_dim
    rho = _check_total(rho, d)
    out = np.zeros_like(rho, dtype=complex)
    for a, n in enumerate(partition.band_sizes):
        w = partition.indicator(a)
        out += np.kron(partial_trace_env_weighted(rho, w), np.diag(w) / n)
    return out


def relevant_operators(partition: BandPartition):
    """Index list ``[(i, j, a), ...]`` and dense operators |i><j| (x) Pi_a."""
    labels, ops = [], []
    for i in range(2):
        for j in range(2):
            for a in range(partition.n_bands):
                e = np.zeros((2, 2))
                e[i, j] = 1.0
                labels.append((i, j, a))
                ops.append(np.kron(e, partition.projector(a)))
    return labels, ops


def _check_B(B: np.ndarray, partition: BandPartition, atol: float = 1e-12) -> np.ndarray:
    B = np.asarray(B, dtype=complex)
    if B.shape != (2, 2, partition.n_bands):
        raise ConfigurationError(f"expected B with shape (2, 2, {partition.n_bands}), got {B.shape}")
    if not np.allclose(B, np.conj(np.swapaxes(B, 0, 1)), atol=atol, rtol=0):
        raise ConfigurationError("inconsistent expectations: B_ija != conj(B_jia)")
    return B


def ham_average_state(B: np.ndarray, partition: BandPartition, method: str = "closed") -> np.ndarray:
    """Hilbert-space-average state for given band-resolved expectations.

    ``B[i, j, a]`` holds <|i><j| (x) Pi_a>. The closed form is
    ``sum_ija B_jia / N_a * |i><j| (x) Pi_a``; ``method="gram"`` instead
    expands alpha = sum_n b_n B_n and solves B_m = sum_n tr{B_m B_n} b_n.
    """
    B = _check_B(B, partition)
    if method == "closed":
        alpha = 0
        for a, n in enumerate(partition.band_sizes):
            alpha = alpha + np.kron(B[:, :, a].T, partition.projector(a)) / n
        return alpha
    if method != "gram":
        raise ConfigurationError(f"unknown method {method!r}")

    labels, ops = relevant_operators(partition)
    G = np.array([[np.trace(m @ n) for n in ops] for m in ops])
    expected = np.array([[float(j == l and i == m and a == b) * partition.band_sizes[a]
                          for (l, m, b) in labels] for (i, j, a) in labels])
    if not np.allclose(G, expected, atol=1e-12, rtol=0):
        raise AssertionError("Gram matrix of band operators lost its permutation structure")
    rhs = np.array([B[i, j, a] for (i, j, a) in labels])
    coeffs = np.linalg.solve(G, rhs)
    return sum(c * op for c, op in zip(coeffs, ops))


def dense_interaction(model: TwoBandModel, t: float) -> np.ndarray:
    """V(t) = sigma_+ (x) B(t) + sigma_- (x) B(t)^H as a dense matrix."""
    d = model.env_dim
    if d > MAX_DENSE_ENV_DIM:
        raise ConfigurationError(f"dense operators limited to env_dim <= {MAX_DENSE_ENV_DIM}")
    Benv = np.zeros((d, d), dtype=complex)
    Benv[: model.N1, model.N1:] = interaction_coupling(model, t)
    sp = np.array([[0, 0], [1, 0]])
    return np.kron(sp, Benv) + np.kron(sp.T, Benv.conj().T)


def liouvillian(V: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """L rho = -i [V, rho]."""
    return -1j * (V @ rho - rho @ V)
