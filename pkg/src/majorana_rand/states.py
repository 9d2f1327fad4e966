"""Pure spin-S states, Majorana constellations and the maps between them.

Conventions used throughout the package:

* amplitudes are stored in an array indexed by ``a = m + S`` (so ``amps[0]``
  is m = -S);
* a coherent state pointing along n = (theta, phi) has amplitudes
  sqrt(C(2S, S+m)) cos(theta/2)^(S+m) (sin(theta/2) e^{i phi})^(S-m);
* a :class:`Constellation` is the zero set of the Husimi function, so each
  point u contributes the qubit pointing along -u to the symmetrised product.

With z = tan(theta/2) e^{-i phi}, the Majorana polynomial
P(z) = sum_j sqrt(C(2S, j)) psi_{S-j} z^j has the constellation points as
roots, and points at the south pole show up as a drop in degree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .angular import HalfInteger, as_spin, log_factorial
from .errors import DegenerateState, DomainError, RootFindingFailure, SizeLimit

__all__ = [
    "Constellation",
    "SpinState",
    "UnnormalizedSymState",
    "state_from_constellation",
    "symmetric_projection",
    "convolution_norm_squared",
    "constellation_from_state",
    "coherent_amplitude",
    "coherent_amplitudes",
    "make_coherent_state",
    "normalization_permanent",
    "rotate_constellation",
    "leja_order",
    "PERMANENT_CAP",
]

NORM_TOLERANCE = 1e-12
RESCALE_EVERY = 32
PERMANENT_CAP = 14
COMPANION_MAX_DEGREE = 64
ROOT_RESIDUAL_LIMIT = 1e-6
CLUSTER_RADIUS = 1e-6


@dataclass(frozen=True)
class Constellation:
    """2S points on the unit sphere, stored as arrays of polar and azimuthal angles."""

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float)).copy()
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float)).copy()
        if theta.ndim != 1 or theta.shape != phi.shape:
            raise DomainError("theta and phi must be 1-d arrays of equal length")
        if theta.size < 1:
            raise DomainError("a constellation needs at least one point")
        if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(phi))):
            raise DomainError("constellation angles must be finite")
        if np.any(theta < 0.0) or np.any(theta > np.pi):
            raise DomainError("theta must lie in [0, pi]")
        phi = np.mod(phi, 2.0 * np.pi)
        phi[phi >= 2.0 * np.pi] = 0.0
        theta.setflags(write=False)
        phi.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_points(cls, points) -> Constellation:
        arr = np.asarray(points, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @property
    def two_s(self) -> int:
        return int(self.theta.size)

    @property
    def spin(self) -> HalfInteger:
        return HalfInteger(self.two_s)

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.theta, self.phi])

    def unit_vectors(self) -> np.ndarray:
        st = np.sin(self.theta)
        return np.column_stack([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])

    def __len__(self) -> int:
        return self.two_s


def _check_amps(spin: HalfInteger, amps) -> np.ndarray:
    amps = np.asarray(amps, dtype=complex).reshape(-1).copy()
    if amps.size != spin.twice + 1:
        raise DomainError(f"spin {spin} needs {spin.twice + 1} amplitudes, got {amps.size}")
    if not np.all(np.isfinite(amps)):
        raise DomainError("amplitudes must be finite")
    amps.setflags(write=False)
    return amps


@dataclass(frozen=True)
class SpinState:
    """Normalized pure state sum_m psi_m |S, m>, with ``amps[m + S] = psi_m``."""

    spin: HalfInteger
    amps: np.ndarray

    def __post_init__(self):
        spin = as_spin(self.spin)
        amps = _check_amps(spin, self.amps)
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOLERANCE:
            raise DomainError(f"state is not normalized (norm^2 = {norm2!r})")
        object.__setattr__(self, "spin", spin)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def normalized(cls, spin, amps) -> SpinState:
        """Build a state from arbitrary nonzero amplitudes by rescaling them."""
        amps = np.asarray(amps, dtype=complex)
        norm = np.linalg.norm(amps)
        if not np.isfinite(norm) or norm == 0.0:
            raise DegenerateState("cannot normalize a zero or non-finite vector")
        return cls(as_spin(spin), amps / norm)

    @property
    def two_s(self) -> int:
        return self.spin.twice

    @property
    def m_values(self) -> list[HalfInteger]:
        return [HalfInteger(2 * a - self.two_s) for a in range(self.two_s + 1)]

    def amplitude(self, m) -> complex:
        tm = HalfInteger.parse(m).twice
        if (tm + self.two_s) % 2 or abs(tm) > self.two_s:
            raise DomainError(f"m={m} is not a valid projection for spin {self.spin}")
        return complex(self.amps[(tm + self.two_s) // 2])

    def fidelity(self, other: SpinState) -> float:
        return float(abs(np.vdot(self.amps, other.amps)) ** 2)


@dataclass(frozen=True)
class UnnormalizedSymState:
    """Symmetric projection of a product of 2S qubits, not renormalized.

    ``amps`` equals P_sym (u_1 x ... x u_2S); its squared norm is
    perm(<u_i|u_j>) / (2S)!, at most 1.  For large S the norm is far below
    the float range, so the vector is stored as ``scaled_amps * exp(log_scale)``.
    """

    spin: HalfInteger
    scaled_amps: np.ndarray
    log_scale: float = 0.0

    def __post_init__(self):
        spin = as_spin(self.spin)
        object.__setattr__(self, "spin", spin)
        object.__setattr__(self, "scaled_amps", _check_amps(spin, self.scaled_amps))
        object.__setattr__(self, "log_scale", float(self.log_scale))

    @property
    def amps(self) -> np.ndarray:
        return self.scaled_amps * math.exp(self.log_scale)

    @property
    def log_norm(self) -> float:
        return math.log(float(np.linalg.norm(self.scaled_amps))) + self.log_scale

    @property
    def norm(self) -> float:
        return math.exp(self.log_norm)

    def normalized(self) -> SpinState:
        return SpinState.normalized(self.spin, self.scaled_amps)


# -- polynomial products ----------------------------------------------------


def _inverse_sqrt_binomials(n: int) -> np.ndarray:
    a = np.arange(n + 1)
    lf = np.array([log_factorial(k) for k in range(n + 1)])
    return np.exp(-0.5 * (lf[n] - lf[a] - lf[n - a]))


def product_coefficients(cx: np.ndarray, cy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Expand prod_i (cx_i x + cy_i y) for a batch of factor lists.

    ``cx`` and ``cy`` have shape (batch, n).  Returns (b, log_scale) where
    ``b[:, j] * exp(log_scale)`` is the coefficient of x^j y^(n-j).  Every
    RESCALE_EVERY factors the running vector is scaled to unit max-modulus.
    """
    cx = np.atleast_2d(np.asarray(cx, dtype=complex))
    cy = np.atleast_2d(np.asarray(cy, dtype=complex))
    batch, n = cx.shape
    b = np.zeros((batch, n + 1), dtype=complex)
    b[:, 0] = 1.0
    log_scale = np.zeros(batch)
    for i in range(n):
        # only the first i+2 entries can be nonzero after this factor
        hi = i + 2
        head = b[:, :hi].copy()
        b[:, :hi] = cy[:, i : i + 1] * head
        b[:, 1:hi] += cx[:, i : i + 1] * head[:, : hi - 1]
        if (i + 1) % RESCALE_EVERY == 0 or i == n - 1:
            peak = np.abs(b).max(axis=1)
            safe = np.where(peak > 0.0, peak, 1.0)
            b /= safe[:, None]
            log_scale += np.log(safe)
    return b, log_scale


def _half_angles(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.cos(theta / 2.0), np.sin(theta / 2.0), np.exp(1j * phi)


def constellation_amplitudes(theta, phi) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized amplitudes (batch, 2S+1) whose Husimi zeros are the given points.

    Each point contributes the factor (cos(t/2) x - sin(t/2) e^{-i phi} y).
    Returns (scaled_amps, log_scale) as in :func:`product_coefficients`.
    """
    c, s, e = _half_angles(np.atleast_2d(theta), np.atleast_2d(phi))
    b, log_scale = product_coefficients(c, -s * np.conj(e))
    n = b.shape[1] - 1
    return b[:, ::-1] * _inverse_sqrt_binomials(n), log_scale


def symmetric_amplitudes(theta, phi) -> tuple[np.ndarray, np.ndarray]:
    """Amplitudes of P_sym applied to qubits pointing along (theta_i, phi_i).

    The qubit (cos(t/2), sin(t/2) e^{i phi}) contributes the factor
    (sin(t/2) e^{i phi} x + cos(t/2) y), with x counting spin-down factors.
    The result carries its true scale (squared norm = perm / (2S)!).
    """
    c, s, e = _half_angles(np.atleast_2d(theta), np.atleast_2d(phi))
    b, log_scale = product_coefficients(s * e, c)
    n = b.shape[1] - 1
    return b[:, ::-1] * _inverse_sqrt_binomials(n), log_scale


def _normalize_rows(amps: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(amps, axis=1)
    bad = ~np.isfinite(norms) | (norms == 0.0)
    if np.any(bad):
        raise DegenerateState("constellation produced a zero or non-finite coefficient vector")
    return amps / norms[:, None]


def leja_order(c: Constellation) -> np.ndarray:
    """Greedy ordering that keeps successive points far apart on the sphere.

    Expanding a product of linear factors loses accuracy badly when nearby
    factors come in long runs (for example sorted by azimuth), so single
    constellations are multiplied in this order.
    """
    u = c.unit_vectors()
    n = u.shape[0]
    order = [int(np.argmax(u[:, 2]))]
    free = np.ones(n, dtype=bool)
    free[order[0]] = False
    score = np.zeros(n)
    for _ in range(n - 1):
        score += np.log(np.maximum(np.linalg.norm(u - u[order[-1]], axis=1), 1e-300))
        k = int(np.argmax(np.where(free, score, -np.inf)))
        order.append(k)
        free[k] = False
    return np.asarray(order)


def state_from_constellation(c: Constellation) -> SpinState:
    """Normalized state whose Husimi function vanishes at every point of ``c``."""
    order = leja_order(c)
    scaled, _ = constellation_amplitudes(c.theta[order], c.phi[order])
    return SpinState(c.spin, _normalize_rows(scaled)[0])


def convolution_norm_squared(c: Constellation) -> float:
    """(2S)! times the squared norm of the raw product coefficients of ``c``.

    This is the normalization constant N^2 that the symmetrised-permutation
    form of the state divides by.  It is the same for a constellation and
    for its antipodes, so it doubles as the symmetric-projection constant.
    """
    scaled, log_scale = constellation_amplitudes(c.theta, c.phi)
    log_n2 = log_factorial(c.two_s) + 2.0 * (math.log(np.linalg.norm(scaled[0])) + log_scale[0])
    return math.exp(log_n2)


def symmetric_projection(qubits: Constellation) -> tuple[UnnormalizedSymState, SpinState]:
    """Project the product of qubits along ``qubits`` onto the symmetric subspace."""
    scaled, log_scale = symmetric_amplitudes(qubits.theta, qubits.phi)
    raw = UnnormalizedSymState(qubits.spin, scaled[0], float(log_scale[0]))
    return raw, SpinState(qubits.spin, _normalize_rows(scaled)[0])


# -- coherent states --------------------------------------------------------


def _coherent_components(two_s: int, theta, phi) -> np.ndarray:
    """Coherent-state amplitude vectors, shape (..., 2S+1)."""
    c, s, e = _half_angles(theta, phi)
    a = np.arange(two_s + 1)
    sqrt_binom = 1.0 / _inverse_sqrt_binomials(two_s)
    with np.errstate(invalid="ignore"):
        up = np.power(c[..., None], a)
        down = np.power((s * e)[..., None], two_s - a)
    return sqrt_binom * up * down


def make_coherent_state(S, n) -> SpinState:
    """Coherent state |n> for n = (theta, phi)."""
    spin = as_spin(S)
    theta, phi = n
    amps = _coherent_components(spin.twice, float(theta), float(phi))
    return SpinState.normalized(spin, amps)


def coherent_amplitude(s: SpinState, n) -> complex:
    """<n|psi> for a single direction n = (theta, phi)."""
    theta, phi = n
    return complex(coherent_amplitudes(s, theta, phi))


def coherent_amplitudes(s: SpinState, theta, phi):
    """<n|psi> evaluated on broadcast arrays of directions."""
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    comps = _coherent_components(s.two_s, theta, phi)
    out = np.conj(comps) @ s.amps
    return out if out.ndim else out[()]


# -- roots ------------------------------------------------------------------


def _horner(coeffs: np.ndarray, z: np.ndarray):
    """p(z), p'(z) and sum |c_j| |z|^j; ``coeffs[j]`` multiplies z^j."""
    p = np.zeros_like(z)
    dp = np.zeros_like(z)
    scale = np.zeros(z.shape)
    az = np.abs(z)
    for cj in coeffs[::-1]:
        dp = dp * z + p
        p = p * z + cj
        scale = scale * az + abs(cj)
    return p, dp, scale


def _newton_ratio(coeffs: np.ndarray, z: np.ndarray):
    """p/p' and the relative residual, using the reversed polynomial for |z| > 1."""
    d = coeffs.size - 1
    ratio = np.empty_like(z)
    resid = np.empty(z.shape)
    inner = np.abs(z) <= 1.0
    if inner.any():
        p, dp, sc = _horner(coeffs, z[inner])
        with np.errstate(all="ignore"):
            ratio[inner] = p / dp
        resid[inner] = np.abs(p) / sc
    outer = ~inner
    if outer.any():
        w = 1.0 / z[outer]
        p, dp, sc = _horner(coeffs[::-1], w)
        with np.errstate(all="ignore"):
            ratio[outer] = z[outer] / (d - w * dp / p)
        resid[outer] = np.abs(p) / sc
    return ratio, resid


def _aberth(coeffs: np.ndarray, max_iter: int = 800) -> np.ndarray:
    d = coeffs.size - 1
    radius = (abs(coeffs[0]) / abs(coeffs[-1])) ** (1.0 / d) if coeffs[0] != 0 else 1.0
    angles = 2.0 * np.pi * (np.arange(d) + 0.25) / d + 0.4
    z = radius * np.exp(1j * angles)
    for _ in range(max_iter):
        ratio, _ = _newton_ratio(coeffs, z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        repulsion = (1.0 / diff).sum(axis=1) - 1.0
        with np.errstate(all="ignore"):
            step = ratio / (1.0 - ratio * repulsion)
        step = np.where(np.isfinite(step), step, 0.0)
        z = z - step
        if np.all(np.abs(step) <= 4e-16 * np.maximum(np.abs(z), 1e-300)):
            break
    return z


def _cluster(z: np.ndarray) -> np.ndarray:
    """Replace roots that agree within CLUSTER_RADIUS (relative) by their mean."""
    z = z.copy()
    n = z.size
    seen = np.zeros(n, dtype=bool)
    for i in range(n):
        if seen[i]:
            continue
        radius = CLUSTER_RADIUS * max(1.0, abs(z[i]))
        group = np.flatnonzero(~seen & (np.abs(z - z[i]) <= radius))
        seen[group] = True
        if group.size > 1:
            z[group] = z[group].mean()
    return z


def polynomial_roots(coeffs: np.ndarray) -> np.ndarray:
    """Roots of sum_j coeffs[j] z^j (nonzero leading coefficient assumed)."""
    d = coeffs.size - 1
    if d == 0:
        return np.zeros(0, dtype=complex)
    if d <= COMPANION_MAX_DEGREE:
        z = np.roots(coeffs[::-1]).astype(complex)
    else:
        z = _aberth(coeffs)
    # one Newton polish step in the better-conditioned orientation
    ratio, _ = _newton_ratio(coeffs, z)
    polished = z - np.where(np.isfinite(ratio), ratio, 0.0)
    _, r_old = _newton_ratio(coeffs, z)
    _, r_new = _newton_ratio(coeffs, polished)
    z = np.where(r_new <= r_old, polished, z)
    _, resid = _newton_ratio(coeffs, z)
    if not np.all(np.isfinite(z)) or np.any(resid > ROOT_RESIDUAL_LIMIT):
        raise RootFindingFailure(f"root residual {np.max(resid):.3g} exceeds {ROOT_RESIDUAL_LIMIT}")
    return z


def majorana_polynomial(s: SpinState) -> np.ndarray:
    """Coefficients (ascending powers of z) of the Majorana polynomial of ``s``."""
    n = s.two_s
    return s.amps[::-1] / _inverse_sqrt_binomials(n)


def constellation_from_state(s: SpinState, leading_tolerance: float = 1e-15) -> Constellation:
    """Majorana points of ``s`` (the zero set of its Husimi function)."""
    coeffs = majorana_polynomial(s)
    n = coeffs.size - 1
    # z^j multiplies psi_{S-j}; amplitudes (not weighted coefficients) decide
    # whether a leading term is numerically absent
    degree = n
    while degree > 0 and abs(s.amps[n - degree]) <= leading_tolerance:
        degree -= 1
    z = _cluster(polynomial_roots(coeffs[: degree + 1]))
    theta = np.concatenate([2.0 * np.arctan(np.abs(z)), np.full(n - degree, np.pi)])
    phi = np.concatenate([-np.angle(z), np.zeros(n - degree)])
    return Constellation(theta, phi)


# -- permanent --------------------------------------------------------------


def permanent(matrix: np.ndarray) -> complex:
    """Permanent via Ryser's inclusion-exclusion formula, O(2^n n)."""
    a = np.asarray(matrix, dtype=complex)
    n = a.shape[0]
    if a.shape != (n, n):
        raise DomainError("permanent needs a square matrix")
    if n == 0:
        return 1.0 + 0j
    masks = ((np.arange(1, 2**n)[:, None] >> np.arange(n)) & 1).astype(float)
    row_sums = masks @ a.T
    signs = np.where((n - masks.sum(axis=1)) % 2, -1.0, 1.0)
    return complex(np.sum(signs * np.prod(row_sums, axis=1)))


def normalization_permanent(c: Constellation, cap: int = PERMANENT_CAP) -> float:
    """N^2 = perm(M) with M_ij = cos cos + sin sin e^{i(phi_i - phi_j)} over half-angles."""
    if c.two_s > cap:
        raise SizeLimit(f"permanent of size {c.two_s} exceeds the cap {cap}")
    ch, sh, e = _half_angles(c.theta, c.phi)
    m = np.outer(ch, ch) + np.outer(sh * e, sh * np.conj(e))
    value = permanent(m)
    if abs(value.imag) > 1e-10 * max(abs(value.real), 1e-300):
        raise ArithmeticError(f"permanent has a non-negligible imaginary part {value.imag!r}")
    return float(value.real)


def rotate_constellation(c: Constellation, rotation: np.ndarray) -> Constellation:
    """Apply a 3x3 rotation matrix to every point."""
    v = c.unit_vectors() @ np.asarray(rotation, dtype=float).T
    theta = np.arccos(np.clip(v[:, 2], -1.0, 1.0))
    phi = np.arctan2(v[:, 1], v[:, 0])
    return Constellation(theta, phi)
