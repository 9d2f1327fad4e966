"""Seedable samplers for random Majorana constellations, Haar (CUE) states and
symmetric projections of random qubits.

Each sample owns one counter-based RNG substream, addressed by
(seed, stream_index), so a sample's draws never depend on how samples
are split between workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .angular import HalfInteger, as_spin
from .errors import DomainError
from .states import (
    Constellation,
    SpinState,
    UnnormalizedSymState,
    constellation_amplitudes,
    make_coherent_state,
    symmetric_amplitudes,
)

__all__ = [
    "EnsembleKind",
    "RngStream",
    "sample_majorana",
    "sample_cue",
    "sample_symmetric_projection",
    "draw_block",
    "SampleBlock",
    "symproj_weight_log_scale",
]

_MASK64 = (1 << 64) - 1


class EnsembleKind(str, Enum):
    """Random-state families, plus the deterministic coherent-state baseline."""

    MAJORANA = "majorana"
    CUE = "cue"
    SYMPROJ = "symproj"
    COHERENT = "coherent"

    @classmethod
    def parse(cls, value) -> EnsembleKind:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise DomainError(f"unknown ensemble {value!r}; expected one of {names}") from None

    @property
    def is_random(self) -> bool:
        return self is not EnsembleKind.COHERENT


@dataclass(frozen=True)
class RngStream:
    """Independent substream ``stream_index`` of the Philox generator keyed by ``seed``."""

    seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_index"):
            value = int(getattr(self, name))
            if not 0 <= value <= _MASK64:
                raise DomainError(f"{name} must be a 64-bit unsigned integer, got {value}")
            object.__setattr__(self, name, value)

    def generator(self) -> np.random.Generator:
        # the stream index occupies the third counter word, so streams are
        # 2^128 draws apart and never overlap
        counter = np.array([0, 0, self.stream_index, 0], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=self.seed, counter=counter))


def _draw_directions(rng: np.random.Generator, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Haar-uniform directions: cos(theta) ~ U(-1, 1), phi ~ U[0, 2 pi)."""
    u = rng.random((2, count))
    cos_theta = 2.0 * u[0] - 1.0
    return np.arccos(np.clip(cos_theta, -1.0, 1.0)), 2.0 * np.pi * u[1]


def _draw_gaussian(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = rng.standard_normal((2, dim))
    return z[0] + 1j * z[1]


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngStream or numpy Generator")


def sample_majorana(S, rng) -> tuple[Constellation, SpinState]:
    """2S i.i.d. Haar points and the state they define."""
    spin = as_spin(S)
    theta, phi = _draw_directions(_as_generator(rng), spin.twice)
    c = Constellation(theta, phi)
    scaled, _ = constellation_amplitudes(theta, phi)
    return c, SpinState.normalized(spin, scaled[0])


def sample_cue(S, rng) -> SpinState:
    """Haar-random pure state: normalized i.i.d. complex Gaussians."""
    spin = as_spin(S)
    return SpinState.normalized(spin, _draw_gaussian(_as_generator(rng), spin.twice + 1))


def sample_symmetric_projection(S, rng, identical: bool = False) -> tuple[UnnormalizedSymState, SpinState]:
    """Project 2S Haar qubits onto the symmetric subspace.

    ``identical=True`` copies the first qubit to all slots (the projection
    then acts trivially and the unnormalized norm is 1).
    """
    spin = as_spin(S)
    theta, phi = _draw_directions(_as_generator(rng), spin.twice)
    if identical:
        theta = np.full_like(theta, theta[0])
        phi = np.full_like(phi, phi[0])
    scaled, log_scale = symmetric_amplitudes(theta, phi)
    raw = UnnormalizedSymState(spin, scaled[0], float(log_scale[0]))
    return raw, raw.normalized()


def symproj_weight_log_scale(two_s: int) -> float:
    """ln of (E|P psi_raw|^2)^2 = ((2S+1) / 4^S)^2, the scale divided out of the weights."""
    return 2.0 * (math.log(two_s + 1) - two_s * math.log(2.0))


@dataclass
class SampleBlock:
    """Normalized states for a contiguous range of sample indices.

    ``log_weight`` is zero except for the symmetric-projection ensemble, where
    it is ln(|psi_raw|^4) minus :func:`symproj_weight_log_scale`.
    """

    amps: np.ndarray
    log_weight: np.ndarray


def draw_block(kind, S, seed: int, start: int, count: int) -> SampleBlock:
    """Samples ``start .. start+count-1``, sample i drawn from RngStream(seed, i)."""
    kind = EnsembleKind.parse(kind)
    spin = as_spin(S)
    n = spin.twice
    if kind is EnsembleKind.COHERENT:
        amps = np.tile(make_coherent_state(spin, (0.0, 0.0)).amps, (count, 1))
        return SampleBlock(amps, np.zeros(count))
    if kind is EnsembleKind.CUE:
        z = np.empty((count, n + 1), dtype=complex)
        for k in range(count):
            z[k] = _draw_gaussian(RngStream(seed, start + k).generator(), n + 1)
        amps = z / np.linalg.norm(z, axis=1, keepdims=True)
        return SampleBlock(amps, np.zeros(count))
    theta = np.empty((count, n))
    phi = np.empty((count, n))
    for k in range(count):
        theta[k], phi[k] = _draw_directions(RngStream(seed, start + k).generator(), n)
    if kind is EnsembleKind.MAJORANA:
        scaled, _ = constellation_amplitudes(theta, phi)
        log_weight = np.zeros(count)
    else:
        scaled, log_scale = symmetric_amplitudes(theta, phi)
        log_norm = np.log(np.linalg.norm(scaled, axis=1)) + log_scale
        log_weight = 4.0 * log_norm - symproj_weight_log_scale(n)
    norms = np.linalg.norm(scaled, axis=1, keepdims=True)
    return SampleBlock(scaled / norms, log_weight)


def describe(kind) -> str:
    kind = EnsembleKind.parse(kind)
    return {
        EnsembleKind.MAJORANA: "Haar-random Majorana constellations",
        EnsembleKind.CUE: "Haar-random states (CUE first column)",
        EnsembleKind.SYMPROJ: "symmetric projections of Haar qubits, weighted by |P psi|^4",
        EnsembleKind.COHERENT: "coherent state along +z",
    }[kind]


def spin_label(S) -> str:
    return str(HalfInteger.parse(S))
