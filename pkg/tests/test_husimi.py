import math
import warnings

import numpy as np
import pytest

from majorana_rand.errors import IllConditioned, QuadratureDegreeTooLow
from majorana_rand.husimi import (
    SphereGrid,
    integrate,
    multipoles_from_q,
    q_from_state,
    q_function,
    q_on_grid,
)
from majorana_rand.multipoles import multipoles
from majorana_rand.oracles import cs_multipole_lengths
from majorana_rand.states import (
    Constellation,
    SpinState,
    coherent_amplitudes,
    make_coherent_state,
    state_from_constellation,
)


def random_constellation(rng, n):
    return Constellation(np.arccos(rng.uniform(-1, 1, n)), rng.uniform(0, 2 * np.pi, n))


def test_grid_weights_sum_to_sphere_area():
    for g in (SphereGrid(3, 5), SphereGrid.for_spin(7), SphereGrid(81, 160)):
        assert g.nodes[:, 2].sum() == pytest.approx(4 * np.pi, abs=1e-12)


def test_grid_degree_covers_roundtrip():
    for n in (1, 4, 11, 40):
        assert SphereGrid.for_spin(n / 2).degree >= 2 * n


def test_coherent_peak_and_profile():
    S = 6
    spec = multipoles(make_coherent_state(S, (0.0, 0.0)))
    assert q_function(spec, 0.0, 0.0) == pytest.approx(1.0, abs=1e-12)
    theta = np.linspace(0, np.pi, 30)
    assert np.allclose(q_function(spec, theta, 1.0), np.cos(theta / 2) ** (4 * S), atol=1e-9)


def test_q_function_vanishes_on_constellation(rng):
    c = random_constellation(rng, 12)
    spec = multipoles(state_from_constellation(c))
    assert np.max(np.abs(q_function(spec, c.theta, c.phi))) < 1e-12


def test_two_routes_to_q_agree(rng):
    for n in (1, 5, 20):
        s = state_from_constellation(random_constellation(rng, n))
        theta = rng.uniform(0, np.pi, 200)
        phi = rng.uniform(0, 2 * np.pi, 200)
        a = q_function(multipoles(s), theta, phi)
        b = np.abs(coherent_amplitudes(s, theta, phi)) ** 2
        assert np.max(np.abs(a - b)) < 1e-9


def test_spin_half_roundtrip():
    s = SpinState.normalized(0.5, np.array([1.0, 1.0j]))
    spec = multipoles(s)
    back = multipoles_from_q(q_on_grid(spec), 0.5)
    assert np.max(np.abs(back.rho - spec.rho)) < 1e-10


def test_coherent_recovery_matches_oracle():
    S = 10
    spec = multipoles(make_coherent_state(S, (0.0, 0.0)))
    back = multipoles_from_q(q_on_grid(spec), S)
    L = cs_multipole_lengths(S)
    assert np.max(np.abs(np.abs(back.rho[:, 20]) ** 2 - L)) < 1e-9


@pytest.mark.parametrize("n", [4, 17, 30, 60])
def test_roundtrip_and_normalization(rng, n):
    s = state_from_constellation(random_constellation(rng, n))
    spec = multipoles(s)
    qv = q_on_grid(spec)
    assert integrate(qv) == pytest.approx(4 * np.pi / (n + 1), abs=1e-10)
    back = multipoles_from_q(qv, n / 2)
    assert np.max(np.abs(back.rho - spec.rho)) < 1e-8


def test_amplitude_path_integral(rng):
    s = state_from_constellation(random_constellation(rng, 9))
    assert integrate(q_from_state(s)) == pytest.approx(4 * np.pi / 10, abs=1e-12)


def test_double_precision_path_loses_digits_at_high_k(rng):
    # float64 Q cannot resolve the small high-K coefficients: the inverse
    # prefactor amplifies rounding by up to 10^11 at 2S = 40
    s = state_from_constellation(random_constellation(rng, 40))
    spec = multipoles(s)
    back = multipoles_from_q(q_on_grid(spec, precision="double"), 20)
    err = np.abs(back.rho - spec.rho)
    assert err[:10].max() < 1e-10
    assert err.max() > 1e-8


def test_conditioning_warning():
    spec = multipoles(make_coherent_state(30, (0.3, 0.2)))
    with pytest.warns(IllConditioned):
        multipoles_from_q(q_on_grid(spec, precision="double"), 30)


def test_degree_too_low():
    spec = multipoles(make_coherent_state(3, (0.0, 0.0)))
    with pytest.raises(QuadratureDegreeTooLow):
        multipoles_from_q(q_on_grid(spec, SphereGrid(3, 7)), 3)
    # a band-9 grid still suffices for K <= 3
    low = multipoles_from_q(q_on_grid(spec, SphereGrid(5, 10)), 3, k_max=3)
    assert np.max(np.abs(low.rho[:4] - spec.rho[:4])) < 1e-12


def test_nonnegative_on_fine_grid(rng):
    grid = SphereGrid(81, 161)
    for n in (3, 10, 25):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            Q = q_on_grid(multipoles(state_from_constellation(random_constellation(rng, n))), grid, "double").values
        assert Q.min() >= -1e-9


def test_deepest_minima_sit_on_constellation(rng):
    from scipy.ndimage import minimum_filter
    from scipy.optimize import minimize

    n = 6
    c = random_constellation(rng, n)
    s = state_from_constellation(c)
    theta = np.linspace(0, np.pi, 181)
    phi = np.linspace(0, 2 * np.pi, 360, endpoint=False)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    Q = np.abs(coherent_amplitudes(s, T, P)) ** 2
    is_min = Q == minimum_filter(Q, size=3, mode="wrap")
    order = np.argsort(Q[is_min])[:n]

    def objective(x):
        return np.abs(coherent_amplitudes(s, x[0], x[1])) ** 2

    pts = c.unit_vectors()
    for t0, p0 in zip(T[is_min][order], P[is_min][order]):
        t, p = minimize(objective, [t0, p0], method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-30}).x
        v = np.array([np.sin(t) * np.cos(p), np.sin(t) * np.sin(p), np.cos(t)])
        assert np.min(np.arccos(np.clip(pts @ v, -1, 1))) < 1e-3
