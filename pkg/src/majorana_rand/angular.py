"""Half-integer spin labels, Clebsch-Gordan coefficients and spherical harmonics.

Every coefficient used by the multipole machinery has the form
C^{S, m+q}_{S m, K q}.  For a fixed (S, q) the vector over m of these
coefficients, scaled by sqrt((2K+1)/(2S+1)), is the q-th off-diagonal of the
irreducible tensor operator T_Kq, and these vectors for K = |q|..2S form an
orthonormal basis.  They are the eigenvectors of a symmetric tridiagonal
matrix (the rank-K Casimir restricted to that off-diagonal), which gives two
construction routes:

* ``exact``: an integer three-term recursion that yields every squared
  coefficient as an exact rational; the float is rounded at the very end.
* ``float``: a tridiagonal eigensolve whose exponentially small tails
  are rebuilt by the recursion in its stable (growing) direction, so every
  coefficient carries a small relative error and not merely an absolute one.

A direct big-integer Racah sum (:func:`clebsch_gordan`) serves as the
independent scalar reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import DomainError

__all__ = [
    "HalfInteger",
    "as_spin",
    "log_factorial",
    "clebsch_gordan",
    "clebsch_gordan_exact",
    "cg_row",
    "CGTable",
    "cg_table",
    "cg_stretched",
    "log_cg_stretched",
    "normalized_legendre",
    "spherical_harmonic",
    "spherical_harmonics",
]


@dataclass(frozen=True, order=True)
class HalfInteger:
    """A number j in {..., -1/2, 0, 1/2, 1, ...} stored as the integer 2j."""

    twice: int

    @classmethod
    def parse(cls, value) -> HalfInteger:
        if isinstance(value, HalfInteger):
            return value
        if isinstance(value, bool):
            raise TypeError("bool is not a spin label")
        if isinstance(value, (int, np.integer)):
            return cls(2 * int(value))
        if isinstance(value, Fraction):
            doubled = 2 * value
            if doubled.denominator != 1:
                raise DomainError(f"{value} is not a multiple of 1/2")
            return cls(int(doubled))
        if isinstance(value, (float, np.floating)):
            doubled = 2.0 * float(value)
            if not doubled.is_integer():
                raise DomainError(f"{value} is not a multiple of 1/2")
            return cls(int(doubled))
        if isinstance(value, str):
            text = value.strip()
            try:
                return cls.parse(Fraction(text))
            except (ValueError, ZeroDivisionError) as exc:
                raise DomainError(f"cannot parse spin label {value!r}") from exc
        raise TypeError(f"cannot interpret {value!r} as a half-integer")

    @property
    def value(self) -> Fraction:
        return Fraction(self.twice, 2)

    @property
    def is_integer(self) -> bool:
        return self.twice % 2 == 0

    def __float__(self) -> float:
        return self.twice / 2

    def __int__(self) -> int:
        if not self.is_integer:
            raise ValueError(f"{self} is not an integer")
        return self.twice // 2

    def __add__(self, other) -> HalfInteger:
        return HalfInteger(self.twice + HalfInteger.parse(other).twice)

    __radd__ = __add__

    def __sub__(self, other) -> HalfInteger:
        return HalfInteger(self.twice - HalfInteger.parse(other).twice)

    def __rsub__(self, other) -> HalfInteger:
        return HalfInteger(HalfInteger.parse(other).twice - self.twice)

    def __neg__(self) -> HalfInteger:
        return HalfInteger(-self.twice)

    def __abs__(self) -> HalfInteger:
        return HalfInteger(abs(self.twice))

    def __str__(self) -> str:
        if self.is_integer:
            return str(self.twice // 2)
        return f"{self.twice}/2"

    def __repr__(self) -> str:
        return f"HalfInteger({self})"


def as_spin(value) -> HalfInteger:
    """Parse a spin label and check that it is a valid spin (S >= 1/2)."""
    spin = HalfInteger.parse(value)
    if spin.twice < 1:
        raise DomainError(f"spin must be at least 1/2, got {spin}")
    return spin


_LOG_FACTORIAL_TABLE = np.array([math.lgamma(n + 1.0) for n in range(2048)])


def log_factorial(n: int) -> float:
    """ln(n!) from a cached table, falling back to lgamma for large n."""
    if n < 0:
        raise DomainError(f"log_factorial of negative integer {n}")
    if n < _LOG_FACTORIAL_TABLE.size:
        return float(_LOG_FACTORIAL_TABLE[n])
    return math.lgamma(n + 1.0)


@lru_cache(maxsize=4096)
def _factorial(n: int) -> int:
    return math.factorial(n)


def _twice(x) -> int:
    return HalfInteger.parse(x).twice


def clebsch_gordan_exact(j1, m1, j2, m2, J, M) -> tuple[int, Fraction]:
    """Return (sign, C**2) of C^{J M}_{j1 m1, j2 m2} exactly, via the Racah sum.

    Arguments are anything :meth:`HalfInteger.parse` accepts.  Selection-rule
    violations give (0, 0).
    """
    tj1, tm1, tj2, tm2, tJ, tM = map(_twice, (j1, m1, j2, m2, J, M))
    if tM != tm1 + tm2:
        return 0, Fraction(0)
    if abs(tm1) > tj1 or abs(tm2) > tj2 or abs(tM) > tJ:
        return 0, Fraction(0)
    if (tj1 - tm1) % 2 or (tj2 - tm2) % 2 or (tJ - tM) % 2:
        return 0, Fraction(0)
    if (tj1 + tj2 + tJ) % 2 or tJ < abs(tj1 - tj2) or tJ > tj1 + tj2:
        return 0, Fraction(0)

    f = _factorial
    a = (tj1 + tj2 - tJ) // 2
    b = (tj1 - tm1) // 2
    c = (tj2 + tm2) // 2
    d = (tJ - tj2 + tm1) // 2
    e = (tJ - tj1 - tm2) // 2
    pref = Fraction(
        (tJ + 1)
        * f((tJ + tj1 - tj2) // 2)
        * f((tJ - tj1 + tj2) // 2)
        * f(a),
        f((tj1 + tj2 + tJ) // 2 + 1),
    )
    pref *= (
        f((tJ + tM) // 2)
        * f((tJ - tM) // 2)
        * f(b)
        * f((tj1 + tm1) // 2)
        * f((tj2 - tm2) // 2)
        * f(c)
    )
    total = Fraction(0)
    for k in range(max(0, -d, -e), min(a, b, c) + 1):
        term = Fraction(1, f(k) * f(a - k) * f(b - k) * f(c - k) * f(d + k) * f(e + k))
        total += -term if k % 2 else term
    if total == 0:
        return 0, Fraction(0)
    return (1 if total > 0 else -1), pref * total * total


def _sqrt_fraction(frac: Fraction) -> float:
    """Correctly rounded sqrt of a non-negative rational, up to one final ulp."""
    num, den = frac.numerator, frac.denominator
    if num == 0:
        return 0.0
    # scale so the integer square root carries ~64 significant bits
    shift = max(0, 128 - (num.bit_length() - den.bit_length()))
    shift += shift % 2
    root = math.isqrt((num << shift) // den)
    return math.ldexp(float(root), -shift // 2)


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """Clebsch-Gordan coefficient C^{J M}_{j1 m1, j2 m2}, Condon-Shortley phase.

    >>> round(clebsch_gordan(1, 1, 1, 0, 1, 1), 12)
    0.707106781187
    """
    sign, square = clebsch_gordan_exact(j1, m1, j2, m2, J, M)
    return sign * _sqrt_fraction(square)


def log_cg_stretched(two_s: int, K: int) -> float:
    """ln C^{S S}_{S S, K 0} from the closed form (2S)! sqrt(2S+1) / sqrt((2S-K)! (2S+K+1)!)."""
    if not 0 <= K <= two_s:
        raise DomainError(f"K={K} outside 0..2S={two_s}")
    return (
        log_factorial(two_s)
        + 0.5 * math.log(two_s + 1)
        - 0.5 * (log_factorial(two_s - K) + log_factorial(two_s + K + 1))
    )


def cg_stretched(two_s: int, K: int) -> float:
    return math.exp(log_cg_stretched(two_s, K))


# -- per-(S, q) rows --------------------------------------------------------
#
# For fixed (S, q) write x_i = C^{S, m+q}_{S m, K q} at m = m_lo + i.  The Casimir
# eigen-equation reads
#     e_i x_{i+1} + e_{i-1} x_{i-1} + a_i x_i = lam_K x_i,
#     a_i = 2 m (m+q),  lam_K = 2 S (S+1) - K (K+1),
#     e_i**2 = (S-m-q)(S+m+q+1)(S-m)(S+m+1).


def _m_range(two_s: int, q: int) -> tuple[int, int]:
    """Doubled (m_lo, m_hi) for which both m and m+q lie in -S..S."""
    return -two_s + max(0, -2 * q), two_s - max(0, 2 * q)


def _row_operator(two_s: int, q: int):
    """Integer diagonal 2*a_i and squared couplings e_i**2 for the (S, q) row."""
    tm_lo, tm_hi = _m_range(two_s, q)
    tms = range(tm_lo, tm_hi + 1, 2)
    diag2 = [tm * (tm + 2 * q) for tm in tms]  # = 4 m (m+q) = 2 a_i
    couplings = []
    for tm in tms[:-1]:
        f1 = (two_s - tm - 2 * q) // 2
        f2 = (two_s + tm + 2 * q + 2) // 2
        f3 = (two_s - tm) // 2
        f4 = (two_s + tm + 2) // 2
        couplings.append(f1 * f2 * f3 * f4)
    return tm_lo, diag2, couplings


@lru_cache(maxsize=65536)
def _exact_row_nonpositive(two_s: int, K: int, q: int) -> tuple[tuple[int, Fraction], ...]:
    """Exact (sign, C**2) over m for q <= 0, from the integer recursion."""
    _, diag2, couplings = _row_operator(two_s, q)
    n = len(diag2)
    twice_lam = two_s * (two_s + 2) - 2 * K * (K + 1)  # 2*lam_K
    # x_i = r_i / prod_{j<i} e_j turns the recursion into
    # r_{i+1} = (lam - a_i) r_i - e_{i-1}**2 r_{i-1}
    r = [1]
    prev = 0
    for i in range(n - 1):
        shift2 = twice_lam - diag2[i]
        assert shift2 % 2 == 0
        nxt = (shift2 // 2) * r[i] - (couplings[i - 1] * prev if i > 0 else 0)
        prev = r[i]
        r.append(nxt)
    # x_i**2 = r_i**2 / P_i with P_i = prod_{j<i} e_j**2; bring to common denominator
    suffix = [1] * n
    for i in range(n - 2, -1, -1):
        suffix[i] = suffix[i + 1] * couplings[i]
    weights = [r[i] * r[i] * suffix[i] for i in range(n)]
    total = sum(weights)
    # Condon-Shortley: C^{S, S+q}_{S S, K q} > 0 for q <= 0 (top of the row)
    sigma = 1 if r[-1] > 0 else -1
    out = []
    for i in range(n):
        if r[i] == 0:
            out.append((0, Fraction(0)))
            continue
        sign = sigma * (1 if r[i] > 0 else -1)
        out.append((sign, Fraction((two_s + 1) * weights[i], (2 * K + 1) * total)))
    return tuple(out)


def _exact_row(two_s: int, K: int, q: int) -> list[tuple[int, Fraction]]:
    if q <= 0:
        return list(_exact_row_nonpositive(two_s, K, q))
    # C^{S,m+q}_{S m, K q} = (-1)^K C^{S,-m-q}_{S -m, K -q}
    mirrored = _exact_row_nonpositive(two_s, K, -q)
    parity = -1 if K % 2 else 1
    return [(parity * s, sq) for s, sq in reversed(mirrored)]


@lru_cache(maxsize=65536)
def cg_row(S, K: int, q: int) -> tuple[tuple[HalfInteger, float], ...]:
    """All (m, C^{S,m+q}_{S m, K q}) with a nonzero coefficient, ascending m.

    Values come from the exact recursion, so structural zeros are dropped
    exactly instead of surviving as rounding noise.
    """
    two_s = as_spin(S).twice
    if not (0 <= K <= two_s and abs(q) <= K):
        return ()
    tm_lo, _ = _m_range(two_s, q)
    entries = []
    for i, (sign, square) in enumerate(_exact_row(two_s, K, q)):
        if sign:
            entries.append((HalfInteger(tm_lo + 2 * i), sign * _sqrt_fraction(square)))
    return tuple(entries)


_SCALE_UP = 1e200
_LOG_SCALE_UP = math.log(_SCALE_UP)


def _edge_recursion(lam, diag, off, from_top: bool):
    """Run the row recursion from one end for every eigenvalue at once.

    Returns (y, logscale) with the true solution proportional to
    y * exp(logscale), normalised to 1 at the starting edge.  Values far past
    the region where the recursion grows are garbage and must be masked by
    the caller.
    """
    n = diag.size
    nk = lam.size
    y = np.zeros((nk, n))
    logscale = np.zeros((nk, n))
    cur = np.ones(nk)
    prev = np.zeros(nk)
    level = np.zeros(nk)
    order = range(n - 1, 0, -1) if from_top else range(0, n - 1)
    start = n - 1 if from_top else 0
    y[:, start] = 1.0
    with np.errstate(all="ignore"):
        for i in order:
            if from_top:
                nxt_index = i - 1
                outer = off[i] if i < n - 1 else 0.0
                new = ((lam - diag[i]) * cur - outer * prev) / off[i - 1]
            else:
                nxt_index = i + 1
                outer = off[i - 1] if i > 0 else 0.0
                new = ((lam - diag[i]) * cur - outer * prev) / off[i]
            scale = np.maximum(np.abs(new), np.abs(cur))
            scale = np.where((scale > 0) & np.isfinite(scale), scale, 1.0)
            new = new / scale
            prev = cur / scale
            cur = new
            level = level + np.log(scale)
            y[:, nxt_index] = new
            logscale[:, nxt_index] = level
    return y, logscale


def _stable_rows_nonpositive(two_s: int, q: int, anchor: float = 0.1) -> np.ndarray:
    """Float C^{S,m+q}_{S m,K q} for q <= 0, shape (2S+1-|q|, n_m), rows K=|q|..2S."""
    _, diag2, couplings = _row_operator(two_s, q)
    diag = np.asarray(diag2, dtype=float) / 2.0
    off = np.sqrt(np.asarray(couplings, dtype=float))
    n = diag.size
    ks = np.arange(-q, two_s + 1)
    lam = two_s * (two_s + 2) / 2.0 - ks * (ks + 1.0)
    if n == 1:
        return np.ones((1, 1)) * math.sqrt((two_s + 1) / (2 * ks[0] + 1))
    evals, evecs = eigh_tridiagonal(diag, off)
    # ascending eigenvalues <-> descending K
    vecs = evecs[:, ::-1].T.copy()
    evals = evals[::-1]
    if not np.allclose(evals, lam, rtol=1e-10, atol=1e-8 * max(1.0, abs(lam).max())):
        raise ArithmeticError("tridiagonal eigenvalues do not match K(K+1) spectrum")

    mags = np.abs(vecs)
    big = mags >= anchor * mags.max(axis=1, keepdims=True)
    top_anchor = n - 1 - np.argmax(big[:, ::-1], axis=1)
    bottom_anchor = np.argmax(big, axis=1)
    rows = np.arange(vecs.shape[0])

    y_top, l_top = _edge_recursion(lam, diag, off, from_top=True)
    y_bot, l_bot = _edge_recursion(lam, diag, off, from_top=False)
    idx = np.arange(n)[None, :]

    with np.errstate(all="ignore"):
        ref = vecs[rows, top_anchor] / y_top[rows, top_anchor]
        tail = ref[:, None] * y_top * np.exp(l_top - l_top[rows, top_anchor][:, None])
        mask = idx > top_anchor[:, None]
        vecs = np.where(mask, tail, vecs)
        # sign: top edge coefficient C^{S,S+q}_{SS,Kq} is positive
        flip = np.where(ref < 0, -1.0, 1.0)

        ref_b = vecs[rows, bottom_anchor] / y_bot[rows, bottom_anchor]
        tail_b = ref_b[:, None] * y_bot * np.exp(l_bot - l_bot[rows, bottom_anchor][:, None])
        mask_b = idx < bottom_anchor[:, None]
        vecs = np.where(mask_b, tail_b, vecs)
    vecs = np.nan_to_num(vecs, nan=0.0, posinf=0.0, neginf=0.0)
    vecs *= flip[:, None]
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    return vecs * np.sqrt((two_s + 1) / (2.0 * ks + 1.0))[:, None]


class CGTable:
    """All coefficients C^{S,m+q}_{S m,K q} for one spin, grouped in (S, q) rows.

    ``rows[q]`` has shape (2S+1-|q|, n_m): row index K-|q|, column index
    (m - m_lo(q)) with m_lo(q) = max(-S, -S-q).  ``tensor(q)`` returns the
    same rows scaled by sqrt((2K+1)/(2S+1)), i.e. the orthonormal
    matrix-element vectors of T_Kq.
    """

    MODES = ("exact", "float")

    def __init__(self, S, mode: str = "float"):
        if mode not in self.MODES:
            raise ValueError(f"mode must be one of {self.MODES}, got {mode!r}")
        self.spin = as_spin(S)
        self.mode = mode
        two_s = self.spin.twice
        rows = {}
        for q in range(-two_s, 1):
            if mode == "float":
                block = _stable_rows_nonpositive(two_s, q)
            else:
                block = np.array(
                    [
                        [s * _sqrt_fraction(sq) for s, sq in _exact_row_nonpositive(two_s, K, q)]
                        for K in range(-q, two_s + 1)
                    ]
                )
            rows[q] = block
        for q in range(1, two_s + 1):
            parity = np.where(np.arange(q, two_s + 1) % 2, -1.0, 1.0)
            rows[q] = rows[-q][:, ::-1] * parity[:, None]
        self.rows = rows
        self._tensor = {}
        for q, block in rows.items():
            ks = np.arange(abs(q), two_s + 1)
            self._tensor[q] = block * np.sqrt((2.0 * ks + 1.0) / (two_s + 1))[:, None]

    @property
    def two_s(self) -> int:
        return self.spin.twice

    def m_offset(self, q: int) -> int:
        """Index into the amplitude array (m + S) of the first m in row q."""
        return max(0, -q)

    def tensor(self, q: int) -> np.ndarray:
        return self._tensor[q]

    def coefficient(self, K: int, q: int, m) -> float:
        tm = HalfInteger.parse(m).twice
        two_s = self.two_s
        if not (0 <= K <= two_s and abs(q) <= K):
            return 0.0
        tm_lo, tm_hi = _m_range(two_s, q)
        if (tm - tm_lo) % 2 or not tm_lo <= tm <= tm_hi:
            return 0.0
        return float(self.rows[q][K - abs(q), (tm - tm_lo) // 2])

    @property
    def entries(self) -> dict:
        """Map (K, q, m) -> coefficient over every valid, nonzero entry."""
        out = {}
        two_s = self.two_s
        for q, block in self.rows.items():
            tm_lo, _ = _m_range(two_s, q)
            for r, K in enumerate(range(abs(q), two_s + 1)):
                for i, value in enumerate(block[r]):
                    if value != 0.0:
                        out[(K, q, HalfInteger(tm_lo + 2 * i))] = float(value)
        return out


@lru_cache(maxsize=16)
def cg_table(S, mode: str = "float") -> CGTable:
    """Memoized :class:`CGTable`; tables are read-only after construction."""
    return CGTable(as_spin(S), mode)


# -- spherical harmonics ----------------------------------------------------


def _legendre_column(lmax: int, m: int, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Normalised P_l^m(x) for l = m..lmax (Condon-Shortley phase, 1/sqrt(4pi) included).

    The seed sin^m(theta) is carried in log form, and the upward recursion is
    rescaled whenever it grows past 1e200, so large m at small sin(theta)
    neither underflows the seed nor overflows the recursion.
    """
    out = np.zeros((lmax - m + 1,) + x.shape)
    with np.errstate(divide="ignore"):
        log_s = np.log(s)
    ks = np.arange(1, m + 1)
    log_seed = 0.5 * math.log((2 * m + 1) / (4 * math.pi)) + 0.5 * float(
        np.sum(np.log((2.0 * ks - 1.0) / (2.0 * ks)))
    )
    level = log_seed + (m * log_s if m else np.zeros_like(x))
    sign = -1.0 if m % 2 else 1.0
    cur = np.ones_like(x)
    prev = np.zeros_like(x)
    out[0] = sign * np.exp(level)
    for l in range(m + 1, lmax + 1):
        a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
        b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
        nxt = a * (x * cur - b * prev)
        prev, cur = cur, nxt
        big = np.abs(cur) > _SCALE_UP
        if big.any():
            cur = np.where(big, cur / _SCALE_UP, cur)
            prev = np.where(big, prev / _SCALE_UP, prev)
            level = level + np.where(big, _LOG_SCALE_UP, 0.0)
        out[l - m] = sign * cur * np.exp(level)
    return out


def normalized_legendre(lmax: int, theta) -> np.ndarray:
    """Array P[l, m, ...] with Y_lm(theta, phi) = P[l, m] exp(i m phi), for 0 <= m <= l <= lmax."""
    theta = np.asarray(theta, dtype=float)
    x, s = np.cos(theta), np.sin(theta)
    out = np.zeros((lmax + 1, lmax + 1) + theta.shape)
    for m in range(lmax + 1):
        out[m:, m] = _legendre_column(lmax, m, x, np.abs(s))
    return out


def spherical_harmonic(K: int, q: int, theta, phi):
    """Orthonormal Y_Kq(theta, phi) with the Condon-Shortley phase."""
    K = int(HalfInteger.parse(K))
    if abs(q) > K:
        raise DomainError(f"|q|={abs(q)} exceeds K={K}")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    m = abs(q)
    p = _legendre_column(K, m, np.cos(theta), np.abs(np.sin(theta)))[K - m]
    value = p * np.exp(1j * m * phi)
    if q < 0:
        value = (-1.0) ** m * np.conj(value)
    if value.ndim == 0:
        return complex(value)
    return value


def spherical_harmonics(lmax: int, theta, phi) -> np.ndarray:
    """Y[K, q + lmax, ...] for all K <= lmax, |q| <= K (zero elsewhere)."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    p = normalized_legendre(lmax, theta)
    out = np.zeros((lmax + 1, 2 * lmax + 1) + np.broadcast(theta, phi).shape, dtype=complex)
    for m in range(lmax + 1):
        phase = np.exp(1j * m * phi)
        pos = p[:, m] * phase
        out[:, lmax + m] = pos
        if m:
            out[:, lmax - m] = (-1.0) ** m * np.conj(pos)
    return out
