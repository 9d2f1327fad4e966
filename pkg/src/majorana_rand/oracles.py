"""Closed-form reference values for coherent states and the random ensembles."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

from .angular import HalfInteger, as_spin, cg_table, log_cg_stretched
from .errors import DomainError, IllConditioned

__all__ = [
    "OracleReport",
    "OBSERVABLES",
    "FAMILIES",
    "cs_cumulative",
    "cs_multipole_lengths",
    "cs_quantumness",
    "cue_cumulative",
    "cue_pair_integral",
    "cue_mean_quantumness",
    "cue_mean_lengths",
    "symproj_mean_sq_multipole",
    "symproj_mean_sq_multipole_quartic",
    "symproj_mean_sq_table",
    "oracle_report",
]

OBSERVABLES = ("A_M", "L_K", "E_mean", "meansq_rho_Kq")
FAMILIES = ("coherent", "cue", "symproj")
# exact CG rows are cheap up to this 2S; above it the float table is used
_EXACT_TABLE_MAX_TWO_S = 80


def cs_cumulative(S, M: int) -> float:
    """A_M of a coherent state: 2S/(2S+1) - Gamma(2S+1)^2 / [Gamma(2S-M) Gamma(2S+M+2)]."""
    n = as_spin(S).twice
    if not 1 <= M <= n:
        raise DomainError(f"M={M} outside 1..{n}")
    purity = n / (n + 1)
    if M == n:
        # 1/Gamma(0) = 0: the correction term vanishes identically
        return purity
    log_term = 2.0 * math.lgamma(n + 1) - math.lgamma(n - M) - math.lgamma(n + M + 2)
    return purity - math.exp(log_term)


def cs_multipole_lengths(S) -> np.ndarray:
    """L_K of any coherent state, (2K+1)/(2S+1) (C^{SS}_{SS,K0})^2 for K = 0..2S."""
    n = as_spin(S).twice
    K = np.arange(n + 1)
    logs = np.array([2.0 * log_cg_stretched(n, k) for k in K])
    return (2.0 * K + 1.0) / (n + 1.0) * np.exp(logs)


def cs_quantumness(S) -> float:
    L = cs_multipole_lengths(S)
    K = np.arange(L.size)
    return 1.0 - math.fsum(L / (2.0 * K + 1.0))


def cue_cumulative(S, M: int) -> float:
    """Haar-average A_M = M(M+2) / [(2S+1)(2S+2)]."""
    n = as_spin(S).twice
    if not 0 <= M <= n:
        raise DomainError(f"M={M} outside 0..{n}")
    return M * (M + 2) / ((n + 1) * (n + 2))


def cue_mean_lengths(S) -> np.ndarray:
    """Haar-average L_K: 1/(2S+1) for K = 0, (2K+1)/[(2S+1)(2S+2)] above."""
    n = as_spin(S).twice
    K = np.arange(n + 1)
    out = (2.0 * K + 1.0) / ((n + 1.0) * (n + 2.0))
    out[0] = 1.0 / (n + 1.0)
    return out


def cue_pair_integral(S, m, mprime, q: int) -> float:
    """Haar average of psi_{m+q} psi*_m psi*_{m'+q} psi_{m'}: (d_q0 + d_mm') / [(2S+1)(2S+2)]."""
    n = as_spin(S).twice
    tm, tmp = HalfInteger.parse(m).twice, HalfInteger.parse(mprime).twice
    for t in (tm, tmp, tm + 2 * q, tmp + 2 * q):
        if abs(t) > n or (t + n) % 2:
            raise DomainError("projection outside -S..S")
    return ((q == 0) + (tm == tmp)) / ((n + 1) * (n + 2))


def cue_mean_quantumness(S) -> float:
    n = as_spin(S).twice
    return n / (n + 2)


# -- symmetric projections of random qubits ----------------------------------


def _log_binom(n, k):
    """ln C(n, k) elementwise, -inf outside 0 <= k <= n."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    valid = (k >= 0) & (k <= n) & (n >= 0)
    with np.errstate(invalid="ignore"):
        value = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    return np.where(valid, value, -np.inf)


# below this 2S the weights are formed from exact binomials held in floats;
# above it products of binomials would overflow and log space takes over
_DIRECT_WEIGHTS_MAX_TWO_S = 100


@lru_cache(maxsize=64)
def _binomial_table(n: int) -> np.ndarray:
    """B[i, j] = C(i, j) as floats for 0 <= j <= i <= n (zero elsewhere)."""
    out = np.zeros((n + 1, n + 1))
    for i in range(n + 1):
        for j in range(i + 1):
            out[i, j] = float(math.comb(i, j))
    return out


def _binom(table: np.ndarray, top, bottom):
    top = np.asarray(top)
    bottom = np.asarray(bottom)
    size = table.shape[0]
    valid = (top >= 0) & (bottom >= 0) & (bottom <= top) & (top < size)
    return np.where(valid, table[np.clip(top, 0, size - 1), np.clip(bottom, 0, size - 1)], 0.0)


def _pair_grid(n: int, q: int):
    lo = max(0, -q)
    width = n + 1 - abs(q)
    a = np.arange(lo, lo + width)
    return a[:, None], a[None, :]


@lru_cache(maxsize=256)
def _cubic_weights(n: int, q: int) -> np.ndarray:
    """W[a, b] of the two-index form, a = m+S and b = m'+S over the valid row.

    mean |rho_Kq|^2 = (2K+1)/(2S+1) sum_{a,b} C_K(a) C_K(b) W[a, b], with
    W = 2^(m+m'+q) / 6^(2S) C(2S, S+m+q) I(m, m') / sqrt(C C C C) and
    I(m, m') = sum_M C(S-m-q, M) C(S+m+q, S-m'-M) C(2S-m-m'-q-2M, S-m-M) 4^M.
    """
    a, b = _pair_grid(n, q)
    M = np.arange(n + 1)[None, None, :]
    a3, b3 = a[:, :, None], b[:, :, None]
    if n <= _DIRECT_WEIGHTS_MAX_TWO_S:
        B = _binomial_table(2 * n)
        inner = np.sum(
            _binom(B, n - a3 - q, M)
            * _binom(B, a3 + q, n - b3 - M)
            * _binom(B, 2 * n - a3 - b3 - q - 2 * M, n - a3 - M)
            * 4.0**M,
            axis=2,
        )
        denom = np.sqrt(_binom(B, n, a + q) * _binom(B, n, a) * _binom(B, n, b + q) * _binom(B, n, b))
        return np.ldexp(_binom(B, n, a + q) * inner / denom, a + b - n + q) / 6.0**n
    log_inner = logsumexp(
        _log_binom(n - a3 - q, M)
        + _log_binom(a3 + q, n - b3 - M)
        + _log_binom(2 * n - a3 - b3 - q - 2 * M, n - a3 - M)
        + M * math.log(4.0),
        axis=2,
    )
    pref = -0.5 * (_log_binom(n, a + q) + _log_binom(n, a) + _log_binom(n, b + q) + _log_binom(n, b))
    log_w = pref + (a + b - n + q) * math.log(2.0) - n * math.log(6.0) + _log_binom(n, a + q) + log_inner
    return np.where(np.isfinite(log_w), np.exp(np.where(np.isfinite(log_w), log_w, 0.0)), 0.0)


@lru_cache(maxsize=256)
def _quartic_weights(n: int, q: int) -> np.ndarray:
    """Same weights from the four-index counting form (independent derivation).

    With i = S-m and k = S-m', the inner double sum runs over a multinomial
    of six counts, each the number of qubits contributing one pattern.
    """
    if n > _DIRECT_WEIGHTS_MAX_TWO_S:
        raise DomainError(f"the four-index form is only provided for 2S <= {_DIRECT_WEIGHTS_MAX_TWO_S}")
    a, b = _pair_grid(n, q)
    i = (n - a)[:, :, None, None]
    k = (n - b)[:, :, None, None]
    n2 = np.arange(n + 1)[None, None, :, None]
    n5 = np.arange(n + 1)[None, None, None, :]
    parts = [n - i - n2 - n5, n2, n2 + i - k, k - q - n2 - n5, n5, n5 + q]
    B = _binomial_table(n)
    shape = np.broadcast(*parts).shape
    valid = np.ones(shape, dtype=bool)
    for p in parts:
        valid &= np.broadcast_to(p, shape) >= 0
    # multinomial as a product of binomials over the remaining count
    multi = np.ones(shape)
    remaining = np.full(shape, n)
    for p in parts[:-1]:
        multi = multi * _binom(B, remaining, p)
        remaining = remaining - p
    multi = np.where(valid & (remaining == parts[-1]), multi, 0.0)
    inner = np.sum(np.ldexp(multi, np.where(valid, n - i + k - q - 2 * n2 - 2 * n5, 0)), axis=(2, 3))
    i2, k2 = i[:, :, 0, 0], k[:, :, 0, 0]
    denom = np.sqrt(_binom(B, n, i2 - q) * _binom(B, n, i2) * _binom(B, n, k2 - q) * _binom(B, n, k2))
    return inner / denom / 6.0**n


def _cg_row_vector(n: int, K: int, q: int) -> np.ndarray:
    mode = "exact" if n <= _EXACT_TABLE_MAX_TWO_S else "float"
    return cg_table(HalfInteger(n), mode).rows[q][K - abs(q)]


_EPS = np.finfo(float).eps
# relative error estimate above which a symmetric-projection value is flagged
_CONDITION_WARN = 1e-6


def _quadratic_fsum(weights: np.ndarray, row: np.ndarray) -> tuple[float, float]:
    """x^T W x with compensated summation, plus a cancellation-based error estimate."""
    terms = (weights * np.outer(row, row)).ravel()
    value = math.fsum(terms)
    magnitude = math.fsum(np.abs(terms))
    if magnitude == 0.0:
        return 0.0, 0.0
    # each term carries a few ulps from the weights and the CG row
    err = 8.0 * _EPS * magnitude
    return value, err / abs(value) if value else math.inf


def _check_kq(n: int, K: int, q: int):
    if not (0 <= K <= n and abs(q) <= K):
        raise DomainError(f"(K, q) = ({K}, {q}) violates 0 <= K <= 2S, |q| <= K")


def _symproj(n: int, K: int, q: int, quartic: bool) -> tuple[float, float]:
    _check_kq(n, K, q)
    weights = _quartic_weights(n, q) if quartic else _cubic_weights(n, q)
    value, rel_err = _quadratic_fsum(weights, _cg_row_vector(n, K, q))
    return (2 * K + 1) / (n + 1) * value, rel_err


@lru_cache(maxsize=64)
def _exact_inner_q0(n: int) -> tuple[tuple[int, ...], ...]:
    """Integer inner sums I(m, m') of the two-index form at q = 0."""
    comb = math.comb
    rows = []
    for a in range(n + 1):
        row = []
        for b in range(n + 1):
            total = 0
            for M in range(0, min(n - a, n - b) + 1):
                total += comb(n - a, M) * comb(a, n - b - M) * comb(2 * n - a - b - 2 * M, n - a - M) * 4**M
            row.append(total)
        rows.append(tuple(row))
    return tuple(rows)


def _symproj_precise_q0(n: int, K: int, rel_err: float) -> float:
    """High-precision mean |rho_K0|^2 for entries where float cancellation is too severe.

    Every factor except the square roots is an exact rational, so extending
    the working precision by the digits lost to cancellation recovers a
    fully accurate value.
    """
    import mpmath  # noqa: PLC0415  (only needed for badly conditioned entries)

    from .angular import _exact_row_nonpositive

    digits = 25 + max(0, int(math.log10(max(rel_err, 1.0) / _EPS)) + 1) + 16
    row = _exact_row_nonpositive(n, K, 0)
    inner = _exact_inner_q0(n)
    with mpmath.workdps(digits):
        x = [sign * mpmath.sqrt(mpmath.mpf(sq.numerator) / sq.denominator) for sign, sq in row]
        total = mpmath.mpf(0)
        for a in range(n + 1):
            if not x[a]:
                continue
            acc = mpmath.mpf(0)
            for b in range(n + 1):
                if x[b] and inner[a][b]:
                    acc += x[b] * mpmath.mpf(inner[a][b] * 2**b) / math.comb(n, b)
            total += x[a] * 2**a * acc
        total = total / (mpmath.mpf(2) ** n * mpmath.mpf(6) ** n)
        return float((2 * K + 1) * total / (n + 1))


def _warn_conditioning(n: int, worst: float, count: int):
    if worst > _CONDITION_WARN:
        warnings.warn(
            f"symmetric-projection average at 2S={n}: {count} value(s) with estimated "
            f"relative error up to {worst:.1e} from cancellation",
            IllConditioned,
            stacklevel=3,
        )


def symproj_mean_sq_multipole(S, K: int, q: int) -> float:
    """Average |rho_Kq|^2 of P_sym(u_1 x ... x u_2S) over Haar-random qubits u_i.

    Uses the two-index double sum with a binomial inner sum.  The sum over
    (m, m') alternates in sign through the CG coefficients, and for large S
    and high K it cancels heavily; an :class:`IllConditioned` warning is
    issued when the estimated relative error exceeds 1e-6.
    """
    n = as_spin(S).twice
    value, rel_err = _symproj(n, K, q, quartic=False)
    _warn_conditioning(n, rel_err, 1)
    return value


def symproj_mean_sq_multipole_quartic(S, K: int, q: int) -> float:
    """Verification variant of :func:`symproj_mean_sq_multipole` (four-index counting)."""
    n = as_spin(S).twice
    value, rel_err = _symproj(n, K, q, quartic=True)
    _warn_conditioning(n, rel_err, 1)
    return value


def symproj_mean_sq_table(S, quartic: bool = False, return_error: bool = False, precise: bool = True):
    """Table [K, q + 2S] of symmetric-projection averages (zero where |q| > K).

    Rows whose float evaluation is flagged as badly conditioned are recomputed
    in extended precision when ``precise`` is set.  With ``return_error`` the
    estimated relative error table is returned too.
    """
    n = as_spin(S).twice
    out = np.zeros((n + 1, 2 * n + 1))
    err = np.zeros_like(out)
    for K in range(n + 1):
        for q in range(-K, K + 1):
            out[K, q + n], err[K, q + n] = _symproj(n, K, q, quartic)
    if precise:
        # the average is q-independent, so one accurate q = 0 value fixes a row
        for K in range(n + 1):
            row_err = float(err[K, n - K : n + K + 1].max())
            if row_err > _CONDITION_WARN:
                value = _symproj_precise_q0(n, K, row_err)
                out[K, n - K : n + K + 1] = value
                err[K, n - K : n + K + 1] = _EPS
    flagged = err > _CONDITION_WARN
    _warn_conditioning(n, float(err.max()), int(flagged.sum()))
    return (out, err) if return_error else out


# -- reports ----------------------------------------------------------------


@dataclass
class OracleReport:
    spin: HalfInteger
    family: str
    values: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"spin": str(self.spin), "family": self.family, "values": {}}
        for name, value in self.values.items():
            arr = np.asarray(value, dtype=float)
            out["values"][name] = arr.tolist() if arr.ndim else float(arr)
        return out


def _family_meansq(n: int, family: str) -> np.ndarray:
    spin = HalfInteger(n)
    if family == "symproj":
        return symproj_mean_sq_table(spin)
    # both families are rotation invariant once the coherent direction is
    # averaged over; each q then carries L_K / (2K+1)
    L = cs_multipole_lengths(spin) if family == "coherent" else cue_mean_lengths(spin)
    out = np.zeros((n + 1, 2 * n + 1))
    for K in range(n + 1):
        out[K, n - K : n + K + 1] = L[K] / (2 * K + 1)
    return out


def oracle_report(family: str, S, observables=OBSERVABLES, renormalize: str = "none") -> OracleReport:
    """Closed-form values of the requested observables for one family.

    ``renormalize="total-purity"`` rescales the symmetric-projection means
    so that sum_{K>=1} L_K = 2S/(2S+1), the value every pure state has.  It
    is a no-op for the other families, which already satisfy it.
    """
    if family not in FAMILIES:
        raise DomainError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if renormalize not in ("none", "total-purity"):
        raise DomainError(f"unknown renormalization {renormalize!r}")
    unknown = [o for o in observables if o not in OBSERVABLES]
    if unknown:
        raise DomainError(f"unknown observable(s) {unknown}; expected names from {OBSERVABLES}")
    spin = as_spin(S)
    n = spin.twice
    if family == "coherent":
        L = cs_multipole_lengths(spin)
        A = np.array([0.0] + [cs_cumulative(spin, M) for M in range(1, n + 1)])
    elif family == "cue":
        L = cue_mean_lengths(spin)
        A = np.array([cue_cumulative(spin, M) for M in range(n + 1)])
    else:
        meansq = _family_meansq(n, family)
        L = np.array([math.fsum(row) for row in meansq])
        if renormalize == "total-purity":
            scale = (n / (n + 1)) / math.fsum(L[1:])
            L = L * scale
            meansq = meansq * scale
        A = np.array([math.fsum(L[1 : M + 1]) for M in range(n + 1)])
    K = np.arange(n + 1)
    values = {}
    for name in observables:
        if name == "A_M":
            values[name] = A
        elif name == "L_K":
            values[name] = L
        elif name == "E_mean":
            values[name] = (
                cue_mean_quantumness(spin) if family == "cue" else 1.0 - math.fsum(L / (2.0 * K + 1.0))
            )
        else:
            values[name] = meansq if family == "symproj" else _family_meansq(n, family)
    return OracleReport(spin, family, values)
