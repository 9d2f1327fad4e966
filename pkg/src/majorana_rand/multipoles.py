"""State multipoles rho_Kq, their squared lengths and derived scalars."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .angular import CGTable, HalfInteger, as_spin, cg_table
from .errors import DomainError
from .states import SpinState

__all__ = [
    "MultipoleSpectrum",
    "multipoles",
    "cumulative",
    "cumulative_curve",
    "quantumness",
    "quantumness_from_lengths",
    "k_max",
    "k_max_from_lengths",
    "batch_squared_multipoles",
    "lengths_from_squares",
]


@dataclass(frozen=True)
class MultipoleSpectrum:
    """Multipoles of one state.

    ``rho[K, q + 2S]`` holds rho_Kq for 0 <= K <= 2S and |q| <= K; entries
    with |q| > K are zero.
    """

    spin: HalfInteger
    rho: np.ndarray

    def __post_init__(self):
        spin = as_spin(self.spin)
        n = spin.twice + 1
        rho = np.asarray(self.rho, dtype=complex)
        if rho.shape != (n, 2 * n - 1):
            raise DomainError(f"rho must have shape {(n, 2 * n - 1)}, got {rho.shape}")
        rho = rho.copy()
        rho.setflags(write=False)
        object.__setattr__(self, "spin", spin)
        object.__setattr__(self, "rho", rho)

    @property
    def two_s(self) -> int:
        return self.spin.twice

    def get(self, K: int, q: int) -> complex:
        if not 0 <= K <= self.two_s or abs(q) > K:
            raise DomainError(f"(K, q) = ({K}, {q}) outside the spectrum")
        return complex(self.rho[K, q + self.two_s])

    @property
    def lengths(self) -> np.ndarray:
        """L_K = sum_q |rho_Kq|^2, summed with math.fsum."""
        sq = np.abs(self.rho) ** 2
        return np.array([math.fsum(row) for row in sq])

    def items(self):
        """Iterate (K, q, rho_Kq) in ascending K then q."""
        for K in range(self.two_s + 1):
            for q in range(-K, K + 1):
                yield K, q, complex(self.rho[K, q + self.two_s])


def _resolve_table(spin: HalfInteger, table: CGTable | None, mode: str) -> CGTable:
    if table is None:
        return cg_table(spin, mode)
    if table.spin != spin:
        raise DomainError(f"CG table is for spin {table.spin}, state has spin {spin}")
    return table


def multipoles(s: SpinState, table: CGTable | None = None, mode: str = "float") -> MultipoleSpectrum:
    """rho_Kq = sqrt((2K+1)/(2S+1)) sum_m C^{S,m+q}_{S m,K q} psi_{m+q} psi*_m."""
    spin = s.spin
    two_s = spin.twice
    table = _resolve_table(spin, table, mode)
    psi = s.amps
    rho = np.zeros((two_s + 1, 2 * two_s + 1), dtype=complex)
    for q in range(-two_s, two_s + 1):
        lo = table.m_offset(q)
        width = two_s + 1 - abs(q)
        v = psi[lo + q : lo + q + width] * np.conj(psi[lo : lo + width])
        t = table.tensor(q)
        rho[abs(q) :, q + two_s] = t @ v.real + 1j * (t @ v.imag)
    return MultipoleSpectrum(spin, rho)


def batch_squared_multipoles(amps: np.ndarray, table: CGTable) -> np.ndarray:
    """|rho_Kq|^2 for q >= 0 over a batch of normalized amplitude vectors.

    Returns shape (batch, 2S+1, 2S+1) indexed [sample, K, q]; the q < 0 half
    follows from |rho_{K,-q}| = |rho_Kq|.
    """
    amps = np.atleast_2d(np.asarray(amps, dtype=complex))
    two_s = table.two_s
    batch = amps.shape[0]
    out = np.zeros((batch, two_s + 1, two_s + 1))
    for q in range(two_s + 1):
        width = two_s + 1 - q
        v = amps[:, q : q + width] * np.conj(amps[:, :width])
        tt = table.tensor(q).T
        re = v.real @ tt
        im = v.imag @ tt
        out[:, q:, q] = re * re + im * im
    return out


def lengths_from_squares(sq: np.ndarray) -> np.ndarray:
    """Per-K lengths from [.., K, q>=0] squared multipoles, Kahan-summed over q."""
    total = sq[..., 0].copy()
    comp = np.zeros_like(total)
    for q in range(1, sq.shape[-1]):
        y = 2.0 * sq[..., q] - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return total


def cumulative_curve(spec: MultipoleSpectrum) -> np.ndarray:
    """Array of A_M for M = 0..2S (A_0 = 0, the monopole is excluded)."""
    lengths = spec.lengths
    out = np.zeros(lengths.size)
    for M in range(1, lengths.size):
        out[M] = math.fsum(lengths[1 : M + 1])
    return out


def cumulative(spec: MultipoleSpectrum, M: int) -> float:
    """A_M = sum_{K=1}^{M} L_K."""
    if not 0 <= M <= spec.two_s:
        raise DomainError(f"M={M} outside 0..{spec.two_s}")
    return float(math.fsum(spec.lengths[1 : M + 1]))


def quantumness_from_lengths(lengths) -> np.ndarray | float:
    """1 - sum_K L_K / (2K+1), over the last axis."""
    lengths = np.asarray(lengths, dtype=float)
    K = np.arange(lengths.shape[-1])
    return 1.0 - np.sum(lengths / (2.0 * K + 1.0), axis=-1)


def quantumness(spec: MultipoleSpectrum) -> float:
    lengths = spec.lengths
    K = np.arange(lengths.size)
    return 1.0 - math.fsum(lengths / (2.0 * K + 1.0))


def k_max_from_lengths(lengths) -> int:
    """Smallest K >= 1 with the largest L_K."""
    lengths = np.asarray(lengths, dtype=float)
    if lengths.size < 2:
        raise DomainError("need at least one K >= 1")
    return int(np.argmax(lengths[1:])) + 1


def k_max(spec: MultipoleSpectrum) -> int:
    return k_max_from_lengths(spec.lengths)
