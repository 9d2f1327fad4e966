"""Husimi Q-function on the sphere and the transforms to and from multipoles.

Forward:  Q(n) = sqrt(4 pi/(2S+1)) sum_K C^{SS}_{SS,K0} sum_q rho_Kq Y_Kq(n)
Inverse:  rho_Kq = c_K  integral Q(n) Y*_Kq(n) d^2n,  c_K = sqrt((2S+1)/(4 pi)) / C^{SS}_{SS,K0}

The inverse prefactor grows like 10^11 at 2S = 40, so float64 Q values
cannot resolve the top multipoles to 1e-8.  On a product grid both
directions can therefore run in double-double arithmetic, with Q carried
as an unevaluated sum hi + lo.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _dd as dd
from .angular import HalfInteger, as_spin, log_cg_stretched, spherical_harmonics
from .errors import DomainError, IllConditioned, QuadratureDegreeTooLow
from .multipoles import MultipoleSpectrum
from .states import SpinState, coherent_amplitudes

__all__ = [
    "SphereGrid",
    "QValues",
    "q_function",
    "q_on_grid",
    "q_from_state",
    "multipoles_from_q",
    "integrate",
    "forward_prefactors",
    "inverse_prefactors",
]

_MP_DIGITS = 40
CONDITION_WARN_LOG10 = 12.0


@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre nodes in cos(theta) times a uniform trapezoid rule in phi."""

    n_theta: int
    n_phi: int

    def __post_init__(self):
        if self.n_theta < 1 or self.n_phi < 1:
            raise DomainError("grid sizes must be positive")

    @classmethod
    def for_spin(cls, S, k_max=None) -> SphereGrid:
        """Smallest grid that integrates Q * Y_Kq exactly for all K <= k_max (default 2S)."""
        n = as_spin(S).twice
        band = n + (n if k_max is None else int(k_max))
        return cls(max(n + 1, band // 2 + 1), max(2 * n + 1, band + 1))

    @property
    def degree(self) -> int:
        """Largest total band limit integrated exactly."""
        return min(2 * self.n_theta - 1, self.n_phi - 1)

    @property
    def x(self) -> np.ndarray:
        return _gauss_legendre(self.n_theta)[0]

    @property
    def theta(self) -> np.ndarray:
        return np.arccos(self.x)

    @property
    def phi(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi

    @property
    def theta_weights(self) -> np.ndarray:
        return _gauss_legendre(self.n_theta)[1]

    @property
    def phi_weight(self) -> float:
        return 2.0 * np.pi / self.n_phi

    @property
    def nodes(self) -> np.ndarray:
        """Rows (theta, phi, weight) over the full product grid."""
        th, ph = np.meshgrid(self.theta, self.phi, indexing="ij")
        w = np.outer(self.theta_weights, np.full(self.n_phi, self.phi_weight))
        return np.column_stack([th.ravel(), ph.ravel(), w.ravel()])

    def require_degree(self, band: int):
        if self.degree < band:
            raise QuadratureDegreeTooLow(
                f"grid ({self.n_theta} x {self.n_phi}) integrates band {self.degree} exactly, need {band}"
            )


@dataclass(frozen=True)
class QValues:
    """Q sampled on a grid as ``hi`` (+ optional ``lo`` correction), shape (n_theta, n_phi)."""

    grid: SphereGrid
    hi: np.ndarray
    lo: np.ndarray | None = None

    @property
    def values(self) -> np.ndarray:
        return self.hi if self.lo is None else self.hi + self.lo


@lru_cache(maxsize=64)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=32)
def _mp_gauss_legendre(n: int):
    """Nodes and weights to _MP_DIGITS digits, refined by Newton from the float rule."""
    import mpmath

    x0, _ = _gauss_legendre(n)
    nodes, weights = [], []
    with mpmath.workdps(_MP_DIGITS + 10):
        for guess in x0:
            x = mpmath.mpf(float(guess))
            for _ in range(6):
                p, dp = _mp_legendre_pn(n, x)
                x -= p / dp
            p, dp = _mp_legendre_pn(n, x)
            nodes.append(+x)
            weights.append(2 / ((1 - x * x) * dp * dp))
    return nodes, weights


def _mp_legendre_pn(n: int, x):
    p0, p1 = 1, x
    if n == 0:
        return p0 + 0 * x, 0 * x
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1)
    return p1, dp


def _mp_normalized_legendre(lmax: int, x):
    """P[l][m] for 0 <= m <= l <= lmax at one mpmath point (Condon-Shortley phase)."""
    import mpmath

    s = mpmath.sqrt(1 - x * x)
    table = [[mpmath.mpf(0)] * (lmax + 1) for _ in range(lmax + 1)]
    pmm = 1 / mpmath.sqrt(4 * mpmath.pi)
    for m in range(lmax + 1):
        if m:
            pmm = -pmm * s * mpmath.sqrt(mpmath.mpf(2 * m + 1) / (2 * m))
        table[m][m] = pmm
        prev, cur = mpmath.mpf(0), pmm
        for l in range(m + 1, lmax + 1):
            a = mpmath.sqrt(mpmath.mpf(4 * l * l - 1) / (l * l - m * m))
            b = mpmath.sqrt(mpmath.mpf((l - 1) ** 2 - m * m) / (4 * (l - 1) ** 2 - 1))
            prev, cur = cur, a * (x * cur - b * prev)
            table[l][m] = cur
    return table


@lru_cache(maxsize=16)
def _dd_constants(two_s: int, n_theta: int, n_phi: int):
    """Double-double grid constants for one (S, grid) pair."""
    import mpmath

    with mpmath.workdps(_MP_DIGITS):
        xs, ws = _mp_gauss_legendre(n_theta)
        legendre = np.empty((two_s + 1, two_s + 1, n_theta), dtype=object)
        for i, x in enumerate(xs):
            table = _mp_normalized_legendre(two_s, x)
            for K in range(two_s + 1):
                for q in range(two_s + 1):
                    legendre[K, q, i] = table[K][q] if q <= K else mpmath.mpf(0)
        weighted = np.empty_like(legendre)
        for i, w in enumerate(ws):
            weighted[:, :, i] = legendre[:, :, i] * w
        angles = [2 * mpmath.pi * k / n_phi for k in range(n_phi)]
        cos_t = [mpmath.cos(t) for t in angles]
        sin_t = [mpmath.sin(t) for t in angles]
        qs = np.arange(-two_s, two_s + 1)[:, None]
        ks = (qs * np.arange(n_phi)[None, :]) % n_phi
        cos_q = [[cos_t[k] for k in row] for row in ks]
        sin_q = [[sin_t[k] for k in row] for row in ks]
        fwd, inv = [], []
        for K in range(two_s + 1):
            cg = mpmath.mpf(math.factorial(two_s)) * mpmath.sqrt(two_s + 1) / mpmath.sqrt(
                mpmath.mpf(math.factorial(two_s - K)) * math.factorial(two_s + K + 1)
            )
            fwd.append(mpmath.sqrt(4 * mpmath.pi / (two_s + 1)) * cg)
            inv.append(mpmath.sqrt((two_s + 1) / (4 * mpmath.pi)) / cg)
        phi_w = 2 * mpmath.pi / n_phi
        return {
            "P": dd.from_mp(legendre),
            "wP": dd.from_mp(weighted),
            "cos": dd.from_mp(cos_q),
            "sin": dd.from_mp(sin_q),
            "fwd": dd.from_mp(fwd),
            "inv": dd.from_mp(inv),
            "phi_w": dd.from_mp([phi_w]),
            "w": dd.from_mp(ws),
        }


def forward_prefactors(S) -> np.ndarray:
    """sqrt(4 pi/(2S+1)) C^{SS}_{SS,K0} for K = 0..2S."""
    n = as_spin(S).twice
    return np.array([math.exp(0.5 * math.log(4 * math.pi / (n + 1)) + log_cg_stretched(n, K)) for K in range(n + 1)])


def inverse_prefactors(S) -> np.ndarray:
    """c_K = sqrt((2S+1)/(4 pi)) / C^{SS}_{SS,K0} for K = 0..2S, built in log space."""
    n = as_spin(S).twice
    return np.array([math.exp(0.5 * math.log((n + 1) / (4 * math.pi)) - log_cg_stretched(n, K)) for K in range(n + 1)])


def q_function(spec: MultipoleSpectrum, theta, phi, check: bool = True):
    """Q at arbitrary directions from the multipole expansion (float64)."""
    n = spec.two_s
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    Y = spherical_harmonics(n, theta, phi)  # [K, q + n, ...]
    coeff = spec.rho * forward_prefactors(spec.spin)[:, None]
    Q = np.tensordot(coeff, Y, axes=([0, 1], [0, 1]))
    if check:
        _check_real_nonnegative(Q)
    Q = Q.real
    return Q if Q.ndim else float(Q)


def _check_real_nonnegative(Q, imag_tol: float = 1e-10, neg_tol: float = 1e-10):
    Q = np.asarray(Q)
    if np.iscomplexobj(Q) and Q.size and np.max(np.abs(Q.imag)) > imag_tol:
        raise ArithmeticError(f"Q has an imaginary residual {np.max(np.abs(Q.imag)):.3g}")
    if Q.size and np.min(Q.real) < -neg_tol:
        raise ArithmeticError(f"Q is negative ({np.min(Q.real):.3g}); numerical error")


def _signed_legendre(P, two_s: int):
    """P_Kq for q = -2S..2S from the q >= 0 table, (-1)^q P_K|q| for q < 0."""
    hi, lo = P
    qs = np.arange(-two_s, two_s + 1)
    sign = np.where((qs < 0) & (qs % 2 == 1), -1.0, 1.0)
    idx = np.abs(qs)
    return hi[:, idx, :] * sign[None, :, None], lo[:, idx, :] * sign[None, :, None]


def q_on_grid(spec: MultipoleSpectrum, grid: SphereGrid | None = None, precision: str = "dd") -> QValues:
    """Evaluate Q from multipoles on a product grid (double-double by default)."""
    n = spec.two_s
    grid = grid or SphereGrid.for_spin(spec.spin)
    if precision not in ("dd", "double"):
        raise ValueError("precision must be 'dd' or 'double'")
    if precision == "double":
        theta, phi = np.meshgrid(grid.theta, grid.phi, indexing="ij")
        return QValues(grid, q_function(spec, theta, phi))
    c = _dd_constants(n, grid.n_theta, grid.n_phi)
    P = _signed_legendre(c["P"], n)  # [K, q, i]
    rho_re = spec.rho.real
    rho_im = spec.rho.imag
    shape = (2 * n + 1, grid.n_theta)
    g_re, g_im = dd.zeros(shape), dd.zeros(shape)
    for K in range(n + 1):
        fK = dd.index(c["fwd"], K)
        a_re = dd.mul_float(fK, rho_re[K])  # over q
        a_im = dd.mul_float(fK, rho_im[K])
        PK = dd.index(P, K)
        g_re = dd.fma(g_re, (a_re[0][:, None], a_re[1][:, None]), PK)
        g_im = dd.fma(g_im, (a_im[0][:, None], a_im[1][:, None]), PK)
    Q = dd.zeros((grid.n_theta, grid.n_phi))
    imag = np.zeros((grid.n_theta, grid.n_phi))
    for k in range(2 * n + 1):
        cos_k = dd.index(c["cos"], (slice(k, k + 1), slice(None)))
        sin_k = dd.index(c["sin"], (slice(k, k + 1), slice(None)))
        gr = (g_re[0][k][:, None], g_re[1][k][:, None])
        gi = (g_im[0][k][:, None], g_im[1][k][:, None])
        Q = dd.add(Q, dd.mul(gr, cos_k))
        Q = dd.add(Q, dd.neg(dd.mul(gi, sin_k)))
        imag += gr[0] * sin_k[0] + gi[0] * cos_k[0]
    _check_real_nonnegative(Q[0] + 1j * imag)
    return QValues(grid, Q[0], Q[1])


def q_from_state(s: SpinState, grid: SphereGrid | None = None) -> QValues:
    """|<n|psi>|^2 on a grid from the amplitudes (float64 only)."""
    grid = grid or SphereGrid.for_spin(s.spin)
    theta, phi = np.meshgrid(grid.theta, grid.phi, indexing="ij")
    return QValues(grid, np.abs(coherent_amplitudes(s, theta, phi)) ** 2)


def integrate(qv: QValues) -> float:
    """Quadrature of Q over the sphere."""
    w = qv.grid.theta_weights
    if qv.lo is None:
        return float(qv.grid.phi_weight * np.sum(w[:, None] * qv.hi))
    c = _dd_constants_light(qv.grid.n_theta, qv.grid.n_phi)
    rows = dd.zeros(qv.grid.n_theta)
    for j in range(qv.grid.n_phi):
        rows = dd.add(rows, (qv.hi[:, j], qv.lo[:, j]))
    rows = dd.mul(rows, c["w"])
    total = dd.zeros(())
    for i in range(qv.grid.n_theta):
        total = dd.add(total, dd.index(rows, i))
    total = dd.mul(total, dd.index(c["phi_w"], 0))
    return float(dd.to_float(total))


@lru_cache(maxsize=32)
def _dd_constants_light(n_theta: int, n_phi: int):
    import mpmath

    with mpmath.workdps(_MP_DIGITS):
        _, ws = _mp_gauss_legendre(n_theta)
        return {"w": dd.from_mp(ws), "phi_w": dd.from_mp([2 * mpmath.pi / n_phi])}


def multipoles_from_q(qv: QValues, S, k_max: int | None = None) -> MultipoleSpectrum:
    """Recover rho_Kq from Q on a product grid.

    Runs in double-double when ``qv`` carries a ``lo`` part, otherwise in
    float64 with an :class:`IllConditioned` warning once log10(c_K) > 12.
    Entries above ``k_max`` (default 2S) are left at zero.
    """
    spin = as_spin(S)
    n = spin.twice
    k_max = n if k_max is None else int(k_max)
    if not 0 <= k_max <= n:
        raise DomainError(f"k_max={k_max} outside 0..{n}")
    grid = qv.grid
    grid.require_degree(n + k_max)
    rho = np.zeros((n + 1, 2 * n + 1), dtype=complex)
    if qv.lo is None:
        inv = inverse_prefactors(spin)
        worst = math.log10(inv[: k_max + 1].max())
        if worst > CONDITION_WARN_LOG10:
            warnings.warn(
                f"inverse prefactor reaches 10^{worst:.1f}; float64 Q limits the accuracy of high K",
                IllConditioned,
                stacklevel=2,
            )
        qs = np.arange(-n, n + 1)
        # F[q, i] = sum_j Q_ij exp(-i q phi_j) dphi
        phase = np.exp(-1j * np.outer(qs, grid.phi))
        F = grid.phi_weight * (qv.hi @ phase.T).T
        Y = spherical_harmonics(n, grid.theta, np.zeros(grid.n_theta)).real  # [K, q, i]
        w = grid.theta_weights
        rho = inv[:, None] * np.einsum("kqi,qi->kq", Y * w[None, None, :], F)
    else:
        c = _dd_constants(n, grid.n_theta, grid.n_phi)
        shape = (2 * n + 1, grid.n_theta)
        f_re, f_im = dd.zeros(shape), dd.zeros(shape)
        for j in range(grid.n_phi):
            qj = (qv.hi[:, j][None, :], qv.lo[:, j][None, :])
            cos_j = (c["cos"][0][:, j : j + 1], c["cos"][1][:, j : j + 1])
            sin_j = (c["sin"][0][:, j : j + 1], c["sin"][1][:, j : j + 1])
            f_re = dd.fma(f_re, qj, cos_j)
            f_im = dd.add(f_im, dd.neg(dd.mul(qj, sin_j)))
        pw = dd.index(c["phi_w"], 0)
        f_re, f_im = dd.mul(f_re, pw), dd.mul(f_im, pw)
        wP = _signed_legendre(c["wP"], n)  # [K, q, i]
        r_re, r_im = dd.zeros((n + 1, 2 * n + 1)), dd.zeros((n + 1, 2 * n + 1))
        for i in range(grid.n_theta):
            wPi = dd.index(wP, (slice(None), slice(None), i))
            r_re = dd.fma(r_re, wPi, (f_re[0][None, :, i], f_re[1][None, :, i]))
            r_im = dd.fma(r_im, wPi, (f_im[0][None, :, i], f_im[1][None, :, i]))
        inv = (c["inv"][0][:, None], c["inv"][1][:, None])
        rho = dd.to_float(dd.mul(r_re, inv)) + 1j * dd.to_float(dd.mul(r_im, inv))
    K = np.arange(n + 1)[:, None]
    q = np.arange(-n, n + 1)[None, :]
    rho = np.where((np.abs(q) <= K) & (K <= k_max), rho, 0.0)
    return MultipoleSpectrum(spin, rho)
