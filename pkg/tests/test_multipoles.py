import math

import numpy as np
import pytest

from majorana_rand.angular import cg_table
from majorana_rand.multipoles import (
    MultipoleSpectrum,
    batch_squared_multipoles,
    cumulative,
    cumulative_curve,
    k_max,
    k_max_from_lengths,
    lengths_from_squares,
    multipoles,
    quantumness,
)
from majorana_rand.oracles import cs_cumulative, cs_multipole_lengths
from majorana_rand.states import SpinState, make_coherent_state


def random_state(rng, n):
    z = rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)
    return SpinState.normalized(n / 2, z)


def dicke_10():
    return SpinState(1, np.array([0, 1, 0], dtype=complex))


def test_spin_half(rng):
    spec = multipoles(random_state(rng, 1))
    assert spec.get(0, 0) == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert spec.lengths[1] == pytest.approx(0.5, abs=1e-15)
    assert quantumness(spec) == pytest.approx(1 / 3, abs=1e-15)
    assert k_max(spec) == 1


def test_dicke_state():
    spec = multipoles(dicke_10())
    assert np.allclose([spec.get(1, q) for q in (-1, 0, 1)], 0, atol=1e-15)
    exact = multipoles(dicke_10(), mode="exact")
    assert [exact.get(1, q) for q in (-1, 0, 1)] == [0, 0, 0]
    assert spec.lengths[2] == pytest.approx(2 / 3, abs=1e-15)
    assert quantumness(spec) == pytest.approx(8 / 15, abs=1e-15)
    assert k_max(spec) == 2


@pytest.mark.parametrize("S", [0.5, 2, 6.5])
def test_coherent_state_along_z(S):
    n = int(2 * S)
    spec = multipoles(make_coherent_state(S, (0.0, 0.0)))
    L = cs_multipole_lengths(S)
    for K in range(n + 1):
        assert abs(spec.get(K, 0)) ** 2 == pytest.approx(L[K], abs=1e-14)
        for q in range(1, K + 1):
            assert abs(spec.get(K, q)) < 1e-15


def test_cumulative_examples(rng):
    cs1 = multipoles(make_coherent_state(1, (0.0, 0.0)))
    assert cumulative(cs1, 1) == pytest.approx(0.5, abs=1e-15)
    s = multipoles(random_state(rng, 9))
    assert cumulative(s, 0) == 0.0
    assert cumulative(s, 9) == pytest.approx(9 / 10, abs=1e-12)
    curve = cumulative_curve(s)
    assert np.all(np.diff(curve) >= 0)


@pytest.mark.parametrize("n", [1, 4, 13, 40])
def test_spectrum_invariants(rng, n):
    spec = multipoles(random_state(rng, n))
    rho = spec.rho
    for K in range(n + 1):
        for q in range(1, K + 1):
            assert spec.get(K, -q) == pytest.approx((-1) ** q * np.conj(spec.get(K, q)), abs=1e-12)
    assert spec.lengths[0] == pytest.approx(1 / (n + 1), abs=1e-12)
    assert math.fsum(spec.lengths) == pytest.approx(1.0, abs=1e-10)
    E = quantumness(spec)
    assert 0 <= E <= n / (n + 1) + 1e-12
    assert rho.shape == (n + 1, 2 * n + 1)


def test_exact_table_agrees_with_float_table(rng):
    s = random_state(rng, 12)
    a = multipoles(s, mode="float").rho
    b = multipoles(s, mode="exact").rho
    assert np.max(np.abs(a - b)) < 1e-14


def test_batch_matches_single(rng):
    n = 7
    states = [random_state(rng, n) for _ in range(5)]
    sq = batch_squared_multipoles(np.array([s.amps for s in states]), cg_table(n / 2))
    L = lengths_from_squares(sq)
    for i, s in enumerate(states):
        assert np.allclose(L[i], multipoles(s).lengths, atol=1e-15)


@pytest.mark.parametrize("S", [1, 2, 5, 10])
def test_coherent_cumulative_is_maximal(rng, S):
    n = 2 * S
    cs = [cs_cumulative(S, M) for M in range(1, n + 1)]
    for _ in range(200):
        curve = cumulative_curve(multipoles(random_state(rng, n)))
        assert np.all(curve[1:] <= np.array(cs) + 1e-10)


def test_kmax_tie_breaks_to_smallest():
    assert k_max_from_lengths(np.array([0.2, 0.3, 0.3, 0.2])) == 1
    assert k_max_from_lengths(np.array([0.5, 0.0, 0.25, 0.25])) == 2


def test_kmax_coherent_s25():
    assert abs(k_max(multipoles(make_coherent_state(25, (0.4, 0.1)))) - 5) <= 1


def test_spectrum_shape_validation():
    with pytest.raises(ValueError):
        MultipoleSpectrum(1, np.zeros((2, 2)))
