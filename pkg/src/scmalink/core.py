"""Core SCMA domain types: system dimensions, factor-graph structure and codecs.

Conventions used throughout the package:
  * bit vectors are +/-1 valued, row 1 (index 0) is the most significant bit,
    -1 encodes binary 0 and +1 encodes binary 1;
  * message indices are 0-based in code, so message m corresponds to the m-th
    column of the bit matrix and the m-th column of a user codebook.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


class ScmaError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ScmaError):
    """Invalid system or algorithm configuration."""


class ShapeError(ScmaError):
    """Array argument has the wrong shape or length."""


class DegenerateCodebookError(ScmaError):
    """A user codebook (or generator) is identically zero."""


class SearchSpaceError(ScmaError):
    """An exhaustive enumeration would exceed its guard size."""


class DegenerateCodebookWarning(UserWarning):
    """Emitted when an all-zero user codebook is constructed."""


def is_power_of_two(m: int) -> bool:
    return m >= 1 and (m & (m - 1)) == 0


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions of one SCMA configuration.

    n_users (J) data streams share n_resources (K) orthogonal resources; each
    codeword has n_nonzero (N) nonzero entries drawn from an alphabet of
    alphabet_size (M) messages.
    """

    n_users: int
    n_resources: int
    n_nonzero: int
    alphabet_size: int

    def __post_init__(self):
        if self.n_users < 1 or self.n_resources < 1 or self.n_nonzero < 1:
            raise ConfigError("user/resource/nonzero counts must be positive")
        # N <= K (equality allowed: degenerate dense configs are used as
        # oracles in tests, e.g. single-resource BPSK superpositions)
        if self.n_nonzero > self.n_resources:
            raise ConfigError(
                f"nonzero entries per codeword ({self.n_nonzero}) cannot "
                f"exceed resource count ({self.n_resources})"
            )
        if self.alphabet_size < 2 or not is_power_of_two(self.alphabet_size):
            raise ConfigError(
                f"alphabet size must be a power of two >= 2, got {self.alphabet_size}"
            )

    # conventional short names
    @property
    def J(self) -> int:
        return self.n_users

    @property
    def K(self) -> int:
        return self.n_resources

    @property
    def N(self) -> int:
        return self.n_nonzero

    @property
    def M(self) -> int:
        return self.alphabet_size

    @property
    def bits_per_symbol(self) -> int:
        return int(round(np.log2(self.alphabet_size)))

    @property
    def overloading(self) -> float:
        """Users per resource (lambda)."""
        return self.n_users / self.n_resources


def build_bit_matrix(alphabet_size: int) -> np.ndarray:
    """All +/-1 bit patterns of log2(M) bits as columns, ascending by value.

    Column m holds the bits of integer m, most significant bit in row 0,
    with -1 for binary 0 and +1 for binary 1. Rows are mutually orthogonal:
    B @ B.T == M * I exactly (integer arithmetic).
    """
    if not is_power_of_two(alphabet_size) or alphabet_size < 2:
        raise ConfigError(f"alphabet size must be a power of two >= 2, got {alphabet_size}")
    n_bits = int(round(np.log2(alphabet_size)))
    cols = np.arange(alphabet_size)
    shifts = np.arange(n_bits - 1, -1, -1)  # MSB first
    bits = (cols[None, :] >> shifts[:, None]) & 1
    return (2 * bits - 1).astype(np.int64)


def bit_index(bits) -> int:
    """Message index of a +/-1 bit vector (MSB first)."""
    b = np.asarray(bits)
    if b.ndim != 1:
        raise ShapeError(f"expected a 1-d bit vector, got shape {b.shape}")
    if not np.all(np.abs(b) == 1):
        raise ShapeError("bit vector entries must be +/-1")
    binary = (b > 0).astype(np.int64)
    return int(binary @ (1 << np.arange(b.size - 1, -1, -1)))


def bits_for_index(m: int, n_bits: int) -> np.ndarray:
    """Inverse of bit_index: the +/-1 bit vector of message m."""
    if not 0 <= m < (1 << n_bits):
        raise ConfigError(f"message index {m} out of range for {n_bits} bits")
    shifts = np.arange(n_bits - 1, -1, -1)
    return (2 * ((m >> shifts) & 1) - 1).astype(np.int64)


@dataclass(frozen=True)
class OneHotCodec:
    """Maps message indices to one-hot rows of I_M and probability vectors back."""

    alphabet_size: int

    def __post_init__(self):
        if not is_power_of_two(self.alphabet_size) or self.alphabet_size < 2:
            raise ConfigError(f"alphabet size must be a power of two >= 2, got {self.alphabet_size}")

    def encode(self, m: int) -> np.ndarray:
        if not 0 <= m < self.alphabet_size:
            raise ConfigError(f"message index {m} out of range [0, {self.alphabet_size})")
        v = np.zeros(self.alphabet_size)
        v[m] = 1.0
        return v

    def decode(self, p) -> int:
        p = np.asarray(p)
        if p.shape != (self.alphabet_size,):
            raise ShapeError(f"expected length-{self.alphabet_size} vector, got shape {p.shape}")
        return int(np.argmax(p))


def one_hot_encode(bits, codec: OneHotCodec) -> np.ndarray:
    """One-hot vector of the message carried by a +/-1 bit vector."""
    b = np.asarray(bits)
    n_bits = int(round(np.log2(codec.alphabet_size)))
    if b.shape != (n_bits,):
        raise ShapeError(f"expected {n_bits} bits for alphabet size {codec.alphabet_size}, got shape {b.shape}")
    return codec.encode(bit_index(b))


@dataclass(frozen=True)
class IndicatorMatrix:
    """Sparse resource-occupancy structure of the J user codebooks.

    F is the K x J binary matrix whose column j marks the resources occupied
    by user j; V[j] is the K x N column-selection matrix placing user j's
    N-dimensional symbols onto its resources (ascending row order).
    """

    F: np.ndarray
    V: tuple = field(repr=False)
    supports: tuple  # per-user ascending resource indices
    row_degrees: np.ndarray

    @property
    def n_resources(self) -> int:
        return self.F.shape[0]

    @property
    def n_users(self) -> int:
        return self.F.shape[1]

    @property
    def n_nonzero(self) -> int:
        return len(self.supports[0])

    @property
    def is_regular(self) -> bool:
        return bool(np.all(self.row_degrees == self.row_degrees[0]))

    @property
    def max_row_degree(self) -> int:
        return int(self.row_degrees.max())

    def users_on_resource(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.F[k])


def build_indicator(F) -> IndicatorMatrix:
    """Validate an occupancy matrix and derive the per-user mapping matrices."""
    F = np.asarray(F)
    if F.ndim != 2:
        raise ShapeError(f"indicator matrix must be 2-d, got shape {F.shape}")
    if not np.all((F == 0) | (F == 1)):
        raise ConfigError("indicator matrix entries must be 0/1")
    F = F.astype(np.int64)
    col_weights = F.sum(axis=0)
    if not np.all(col_weights == col_weights[0]):
        raise ConfigError(f"ragged column weights {col_weights.tolist()}: every user must occupy the same number of resources")
    if col_weights[0] == 0:
        raise ConfigError("indicator matrix has empty columns")
    K = F.shape[0]
    supports = []
    vs = []
    for j in range(F.shape[1]):
        rows = np.flatnonzero(F[:, j])
        supports.append(tuple(int(r) for r in rows))
        V = np.zeros((K, rows.size), dtype=np.int64)
        V[rows, np.arange(rows.size)] = 1
        vs.append(V)
    ind = IndicatorMatrix(
        F=F,
        V=tuple(vs),
        supports=tuple(supports),
        row_degrees=F.sum(axis=1),
    )
    # structural identity f_j = diag(V_j V_j^T)
    for j, V in enumerate(ind.V):
        assert np.array_equal(np.diag(V @ V.T), F[:, j])
    return ind


def paper_indicator_4x6() -> IndicatorMatrix:
    """The standard 4-resource / 6-user occupancy pattern (d_f = 3, N = 2)."""
    return build_indicator(
        [
            [0, 1, 1, 0, 1, 0],
            [1, 0, 1, 0, 0, 1],
            [0, 1, 0, 1, 0, 1],
            [1, 0, 0, 1, 1, 0],
        ]
    )


@dataclass(frozen=True)
class Codebook:
    """J sparse complex codebooks: entries[j][:, m] is user j's m-th codeword."""

    entries: np.ndarray  # (J, K, M) complex
    config: SystemConfig
    indicator: IndicatorMatrix

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        expected = (self.config.J, self.config.K, self.config.M)
        if e.shape != expected:
            raise ShapeError(f"codebook entries shape {e.shape}, expected {expected}")
        object.__setattr__(self, "entries", e)
        self.validate_support()

    def validate_support(self):
        for j in range(self.config.J):
            off = np.setdiff1d(np.arange(self.config.K), self.indicator.supports[j])
            if off.size and np.any(self.entries[j][off] != 0):
                k_bad = off[np.any(self.entries[j][off] != 0, axis=1)][0]
                raise ConfigError(
                    f"user {j} has energy on resource {int(k_bad)} outside its support {self.indicator.supports[j]}"
                )

    def user_energies(self) -> np.ndarray:
        """Average codeword energy per user."""
        return (np.abs(self.entries) ** 2).sum(axis=1).mean(axis=1)

    def normalized(self) -> "Codebook":
        """Rescale each user to unit average codeword energy."""
        energies = self.user_energies()
        if np.any(energies == 0):
            raise DegenerateCodebookError(f"users {np.flatnonzero(energies == 0).tolist()} have all-zero codebooks")
        scaled = self.entries / np.sqrt(energies)[:, None, None]
        return Codebook(entries=scaled, config=self.config, indicator=self.indicator)

    def codeword(self, j: int, m: int) -> np.ndarray:
        return self.entries[j][:, m]


def superimposed_constellation(codebook: Codebook, guard: int = 1_000_000) -> np.ndarray:
    """All M^J sums of one codeword per user, shape (M^J, K).

    Row order is lexicographic in the message tuple with user 0 as the most
    significant digit, i.e. row index = sum_j m_j * M^(J-1-j).
    """
    J, M = codebook.config.J, codebook.config.M
    size = M**J
    if size > guard:
        raise SearchSpaceError(
            f"superimposed constellation has {size} points, guard is {guard}; "
            "use a sampled lower-bound search instead"
        )
    pts = np.zeros((1, codebook.config.K), dtype=complex)
    for j in range(J):
        pts = (pts[:, None, :] + codebook.entries[j].T[None, :, :]).reshape(-1, codebook.config.K)
    return pts
