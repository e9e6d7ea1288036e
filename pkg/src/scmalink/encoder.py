"""Linear multi-user SCMA encoder.

Each user's encoder is a single real matrix gbar_j of shape (2N, log2 M)
mapping a +/-1 bit vector to the stacked real/imaginary parts of its
N-dimensional complex symbol: first N rows are the real parts, last N rows
the imaginary parts. These matrices are the trainable encoder parameters.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Codebook,
    ConfigError,
    DegenerateCodebookError,
    DegenerateCodebookWarning,
    IndicatorMatrix,
    ShapeError,
    SystemConfig,
)


@dataclass(frozen=True)
class GeneratorSet:
    """The J trainable generator matrices, stacked as one (J, 2N, log2 M) array."""

    gbar: np.ndarray
    config: SystemConfig

    def __post_init__(self):
        g = np.asarray(self.gbar, dtype=float)
        expected = (self.config.J, 2 * self.config.N, self.config.bits_per_symbol)
        if g.shape != expected:
            raise ShapeError(f"generator stack shape {g.shape}, expected {expected}")
        if not np.all(np.isfinite(g)):
            raise ConfigError("generator entries must be finite")
        object.__setattr__(self, "gbar", g)

    def complex_generators(self) -> np.ndarray:
        """(J, N, log2 M) complex view: G_j = real rows + i * imaginary rows."""
        n = self.config.N
        return self.gbar[:, :n, :] + 1j * self.gbar[:, n:, :]

    def user_energies(self, bit_matrix: np.ndarray) -> np.ndarray:
        """Per-user average codeword energy (1/M) sum_m ||gbar_j b_m||^2."""
        splits = np.einsum("jab,bm->jam", self.gbar, bit_matrix.astype(float))
        return (splits**2).sum(axis=(1, 2)) / bit_matrix.shape[1]


def encode_user(gen: GeneratorSet, j: int, bits) -> np.ndarray:
    """User j's length-N complex symbol for one +/-1 bit vector."""
    if not 0 <= j < gen.config.J:
        raise ConfigError(f"user index {j} out of range [0, {gen.config.J})")
    b = np.asarray(bits, dtype=float)
    n_bits = gen.config.bits_per_symbol
    if b.shape != (n_bits,):
        raise ShapeError(f"expected {n_bits} bits, got shape {b.shape}")
    split = gen.gbar[j] @ b
    n = gen.config.N
    return split[:n] + 1j * split[n:]


@dataclass(frozen=True)
class SuperimposedSignal:
    """Sum of the users' resource-mapped symbols (pre-channel)."""

    s: np.ndarray  # (K,) complex
    contributions: np.ndarray | None = None  # optional (J, K) per-user terms


def superimpose(gen: GeneratorSet, ind: IndicatorMatrix, bits, keep_contributions: bool = False) -> SuperimposedSignal:
    """Map every user's symbol onto its resources and add them up."""
    bits = np.asarray(bits, dtype=float)
    J = gen.config.J
    if bits.shape != (J, gen.config.bits_per_symbol):
        raise ShapeError(f"expected {J} bit vectors of length {gen.config.bits_per_symbol}, got shape {bits.shape}")
    K = gen.config.K
    contrib = np.zeros((J, K), dtype=complex)
    for j in range(J):
        contrib[j, list(ind.supports[j])] = encode_user(gen, j, bits[j])
    s = contrib.sum(axis=0)
    return SuperimposedSignal(s=s, contributions=contrib if keep_contributions else None)


def normalize(gen: GeneratorSet, bit_matrix: np.ndarray) -> GeneratorSet:
    """Scale each user's generator so its average codeword energy is 1."""
    energies = gen.user_energies(bit_matrix)
    if np.any(energies == 0):
        dead = np.flatnonzero(energies == 0).tolist()
        raise DegenerateCodebookError(f"users {dead} have all-zero generators")
    scale = 1.0 / np.sqrt(energies)
    return GeneratorSet(gbar=gen.gbar * scale[:, None, None], config=gen.config)


def init_generators(codebook: Codebook, bit_matrix: np.ndarray) -> GeneratorSet:
    """Least-squares generator fit to an existing codebook.

    Uses G_j = C_j B^T (B B^T)^{-1} where C_j is user j's codebook with the
    zero resources removed. Exact (zero residual) whenever the source
    codebook is linear in the bit vector, which holds iff complementary
    messages carry negated codewords.
    """
    cfg = codebook.config
    B = np.asarray(bit_matrix, dtype=float)
    if B.shape != (cfg.bits_per_symbol, cfg.M):
        raise ShapeError(f"bit matrix shape {B.shape}, expected {(cfg.bits_per_symbol, cfg.M)}")
    gram_inv = np.linalg.inv(B @ B.T)  # = I/M since rows are orthogonal
    gbar = np.empty((cfg.J, 2 * cfg.N, cfg.bits_per_symbol))
    for j in range(cfg.J):
        c = codebook.entries[j][list(codebook.indicator.supports[j]), :]  # (N, M)
        g = c @ B.T @ gram_inv
        gbar[j] = np.vstack([g.real, g.imag])
    return GeneratorSet(gbar=gbar, config=cfg)


def linear_fit_residual(codebook: Codebook, gen: GeneratorSet, bit_matrix: np.ndarray) -> np.ndarray:
    """Per-user Frobenius residual ||C_j - G_j B|| of the linear fit."""
    B = np.asarray(bit_matrix, dtype=float)
    g = gen.complex_generators()
    res = np.empty(codebook.config.J)
    for j in range(codebook.config.J):
        c = codebook.entries[j][list(codebook.indicator.supports[j]), :]
        res[j] = np.linalg.norm(c - g[j] @ B)
    return res


def codeword_table(gen: GeneratorSet, bit_matrix: np.ndarray, ind: IndicatorMatrix) -> Codebook:
    """Materialize the full sparse codebook X_j = V_j G_j B for every user."""
    cfg = gen.config
    B = np.asarray(bit_matrix, dtype=float)
    if B.shape != (cfg.bits_per_symbol, cfg.M):
        raise ShapeError(f"bit matrix shape {B.shape}, expected {(cfg.bits_per_symbol, cfg.M)}")
    if ind.n_users != cfg.J or ind.n_resources != cfg.K or ind.n_nonzero != cfg.N:
        raise ShapeError("indicator matrix dimensions do not match the generator config")
    entries = np.zeros((cfg.J, cfg.K, cfg.M), dtype=complex)
    g = gen.complex_generators()
    for j in range(cfg.J):
        entries[j, list(ind.supports[j]), :] = g[j] @ B
    if np.any((np.abs(entries) ** 2).sum(axis=(1, 2)) == 0):
        warnings.warn("codeword table contains an all-zero user codebook", DegenerateCodebookWarning)
    return Codebook(entries=entries, config=cfg, indicator=ind)
