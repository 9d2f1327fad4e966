import math
from fractions import Fraction

import numpy as np
import pytest
from scipy.special import sph_harm_y

from majorana_rand.angular import (
    HalfInteger,
    cg_row,
    cg_table,
    clebsch_gordan,
    clebsch_gordan_exact,
    log_cg_stretched,
    spherical_harmonic,
    spherical_harmonics,
)
from majorana_rand.errors import DomainError

half = Fraction(1, 2)


class TestHalfInteger:
    def test_parse_forms(self):
        assert HalfInteger.parse("3/2").twice == 3
        assert HalfInteger.parse(2).twice == 4
        assert HalfInteger.parse(0.5).twice == 1
        assert HalfInteger.parse(Fraction(-1, 2)).twice == -1

    def test_text_roundtrip(self):
        for t in range(-7, 8):
            h = HalfInteger(t)
            assert HalfInteger.parse(str(h)) == h

    def test_rejects_quarter(self):
        with pytest.raises(DomainError):
            HalfInteger.parse("1/4")


@pytest.mark.parametrize(
    "args, expected",
    [
        ((half, half, 0, 0, half, half), 1.0),
        ((half, half, half, half, 1, 1), 1.0),
        ((1, 1, 1, 0, 1, 1), 1 / math.sqrt(2)),
        ((1, 1, 2, 0, 1, 1), 1 / math.sqrt(10)),
    ],
)
def test_cg_examples(args, expected):
    assert abs(abs(clebsch_gordan(*args)) - expected) < 1e-15


def test_cg_triangle_violation_is_zero():
    assert clebsch_gordan(half, half, half, half, 2, 1) == 0.0
    assert clebsch_gordan(1, 1, 1, 1, 1, 1) == 0.0  # M != m1 + m2


def test_cg_exact_is_rational_square():
    sign, sq = clebsch_gordan_exact(1, 1, 2, 0, 1, 1)
    assert sq == Fraction(1, 10)


def test_cg_known_sign_condon_shortley():
    # <1 1; 1 -1 | 0 0> = 1/sqrt(3), <1 0; 1 0 | 0 0> = -1/sqrt(3)
    assert clebsch_gordan(1, 1, 1, -1, 0, 0) == pytest.approx(1 / math.sqrt(3), abs=1e-15)
    assert clebsch_gordan(1, 0, 1, 0, 0, 0) == pytest.approx(-1 / math.sqrt(3), abs=1e-15)


def test_cg_row_examples():
    row = cg_row(half, 0, 0)
    assert [str(m) for m, _ in row] == ["-1/2", "1/2"]
    # coupling with K = 0 is the identity, so every entry is exactly 1
    assert all(c == 1.0 for _, c in row)
    row = cg_row(half, 1, 1)
    assert len(row) == 1 and str(row[0][0]) == "-1/2"
    assert cg_row(1, 3, 0) == ()


def test_cg_row_is_memoized():
    assert cg_row(5, 3, 1) is cg_row(5, 3, 1)


@pytest.mark.parametrize("S", [half, 1, 3, Fraction(7, 2), 10])
def test_column_normalization(S):
    # sum_m (C^{S,m+q}_{S m, K q})^2 = (2S+1)/(2K+1) by the orthogonality of the
    # coupled basis (sum over m and M of C^2 for fixed K, q)
    table = cg_table(S)
    n = table.two_s
    for q in range(-n, n + 1):
        rows = table.rows[q]
        for i, K in enumerate(range(abs(q), n + 1)):
            assert math.fsum(rows[i] ** 2) == pytest.approx((n + 1) / (2 * K + 1), rel=1e-12)


def test_float_table_matches_exact():
    S = 20
    exact = cg_table(S, "exact")
    fl = cg_table(S, "float")
    for q in range(-40, 41):
        e, f = exact.rows[q], fl.rows[q]
        assert np.max(np.abs(e - f)) < 1e-14
        big = np.abs(e) > 1e-3
        assert np.max(np.abs(f[big] / e[big] - 1)) < 1e-11


def test_float_table_against_racah_entries(rng):
    S = 7
    table = cg_table(S)
    n = table.two_s
    for _ in range(50):
        K = int(rng.integers(0, n + 1))
        q = int(rng.integers(-K, K + 1))
        lo = max(-n, -n - 2 * q)
        hi = min(n, n - 2 * q)
        m2 = int(rng.integers(lo // 2, hi // 2 + 1)) * 2 + (n % 2)
        m2 = min(max(m2, lo), hi)
        m = Fraction(m2, 2)
        ref = clebsch_gordan(S, m, K, q, S, m + q)
        assert table.coefficient(K, q, m) == pytest.approx(ref, abs=1e-14)


def test_stretched_closed_form():
    for n in (1, 4, 9):
        S = Fraction(n, 2)
        for K in range(n + 1):
            ref = clebsch_gordan(S, S, K, 0, S, S)
            assert math.exp(log_cg_stretched(n, K)) == pytest.approx(abs(ref), rel=1e-12)


def test_spherical_harmonics_match_scipy(rng):
    theta = rng.uniform(0, np.pi, 20)
    phi = rng.uniform(0, 2 * np.pi, 20)
    Y = spherical_harmonics(30, theta, phi)
    for K in range(31):
        for q in range(-K, K + 1):
            ref = sph_harm_y(K, q, theta, phi)
            assert np.max(np.abs(Y[K, q + 30] - ref)) < 1e-13


def test_spherical_harmonic_high_degree_is_finite():
    theta = np.linspace(0, np.pi, 33)
    Y = spherical_harmonic(512, 300, theta, 0.3)
    assert np.all(np.isfinite(Y))
    single = spherical_harmonic(40, -7, 1.1, 2.0)
    assert single == pytest.approx(sph_harm_y(40, -7, 1.1, 2.0), abs=1e-14)


def test_spherical_harmonic_orthonormal_by_quadrature():
    x, w = np.polynomial.legendre.leggauss(40)
    phi = np.arange(81) * 2 * np.pi / 81
    T, P = np.meshgrid(np.arccos(x), phi, indexing="ij")
    Wt = np.repeat(w[:, None], 81, axis=1) * 2 * np.pi / 81
    Y = spherical_harmonics(12, T, P)
    a = Y[7, 12 + 3]
    b = Y[9, 12 + 3]
    assert np.sum(Wt * a * np.conj(a)).real == pytest.approx(1.0, abs=1e-13)
    assert abs(np.sum(Wt * a * np.conj(b))) < 1e-13
