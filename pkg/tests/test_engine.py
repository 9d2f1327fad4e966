import json
import math
import warnings

import numpy as np
import pytest

from majorana_rand.engine import (
    RunConfig,
    _Moments,
    compare_ensembles,
    default_workers,
    derive_seed,
    fit_kmax_scaling,
    run_ensemble,
)
from majorana_rand.errors import DomainError, InconclusiveOrdering, OutOfRange
from majorana_rand.multipoles import multipoles
from majorana_rand.oracles import cs_cumulative, cue_cumulative
from majorana_rand.states import SpinState


def test_config_roundtrip_and_validation():
    cfg = RunConfig("3/2", "cue", 10, 7, workers=2, histogram_scale="linear")
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    assert "workers" not in cfg.stats_key()
    for bad in ({"samples": 0}, {"workers": 0}, {"histogram_scale": "sqrt"}, {"seed": -1}):
        with pytest.raises(DomainError):
            RunConfig(**{"spin": 1, "ensemble": "cue", "samples": 5, "seed": 1, **bad})


def test_block_size_depends_only_on_spin():
    a = RunConfig(20, "cue", 100, 1, workers=1).block_size
    b = RunConfig(20, "majorana", 10**6, 9, workers=16).block_size
    assert a == b


def test_workers_env(monkeypatch):
    monkeypatch.setenv("MAJORANA_RAND_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("MAJORANA_RAND_WORKERS", "zero")
    with pytest.raises(DomainError):
        default_workers()


def test_single_sample():
    stats = run_ensemble(RunConfig(2.5, "majorana", 1, 4))
    assert np.all(stats.var_L == 0)
    from majorana_rand.ensembles import draw_block

    amps = draw_block("majorana", 2.5, 4, 0, 1).amps[0]
    L = multipoles(SpinState(2.5, amps)).lengths
    assert np.allclose(stats.mean_L, L, atol=1e-15)


def test_moment_merge_matches_one_pass(rng):
    x = rng.standard_normal((1000, 3))
    w = rng.uniform(0.1, 3.0, 1000)
    whole = _Moments(x, w)
    merged = _Moments(x[:317], w[:317])
    merged.merge(_Moments(x[317:], w[317:]))
    assert np.allclose(merged.mean, whole.mean, atol=1e-14)
    assert np.allclose(merged.M, whole.M, rtol=1e-12)
    assert np.allclose(merged.N, whole.N, rtol=1e-12)
    mean = (w @ x) / w.sum()
    assert np.allclose(whole.stderr, np.sqrt((w**2) @ (x - mean) ** 2) / w.sum(), rtol=1e-12)


@pytest.mark.parametrize("kind", ["majorana", "cue", "symproj"])
def test_bit_identical_across_workers(kind):
    base = run_ensemble(RunConfig(4, kind, 3000, 21, workers=1))
    for workers in (4, 16):
        other = run_ensemble(RunConfig(4, kind, 3000, 21, workers=workers))
        assert json.dumps(base.to_json()) == json.dumps(other.to_json())


def test_histogram_and_purity():
    stats = run_ensemble(RunConfig(6, "cue", 4000, 3))
    assert np.all(stats.hist.sum(axis=1) == 4000)
    assert np.all(stats.var_L >= 0)
    assert abs(stats.mean_L.sum() - 1) < 5 / math.sqrt(4000)
    lin = run_ensemble(RunConfig(6, "cue", 500, 3, histogram_scale="linear", histogram_bins=10))
    assert lin.hist.shape == (13, 10) and lin.hist_edges[-1] == 1.0


def test_cue_mean_cumulative():
    S = 5
    stats = run_ensemble(RunConfig(S, "cue", 50000, 1))
    for M in range(1, 11):
        assert abs(stats.mean_A[M] - cue_cumulative(S, M)) < 3 * stats.stderr_A[M] + 1e-12


def test_coherent_baseline_bounds_every_ensemble():
    S = 3
    for kind in ("majorana", "cue", "symproj"):
        stats = run_ensemble(RunConfig(S, kind, 5000, 2))
        for M in range(1, 7):
            assert stats.mean_A[M] <= cs_cumulative(S, M) + 3 * stats.stderr_A[M] + 1e-12


def test_cue_quantumness_variance_shrinks():
    v = [run_ensemble(RunConfig(S, "cue", 4000, 5)).var_E for S in (2, 5, 10, 20)]
    assert all(a > b for a, b in zip(v, v[1:]))


def test_out_of_range():
    with pytest.raises(OutOfRange):
        run_ensemble(RunConfig(151, "cue", 1, 1))
    with pytest.raises(OutOfRange):
        run_ensemble(RunConfig(11, "cue", 1, 1), max_spin=10)


def test_kmax_at_s60():
    stats = run_ensemble(RunConfig(60, "majorana", 4000, 7))
    assert abs(stats.k_max - 0.8 * math.sqrt(60)) <= 1


def test_fit_coherent_and_cue():
    spins = [9, 16, 25, 36]
    cs = fit_kmax_scaling(spins, RunConfig(9, "coherent", 1, 0))
    for S, k in zip(spins, cs.kmax):
        assert abs(k - (math.sqrt(S) - 0.5)) <= 1
    cue = fit_kmax_scaling(spins, RunConfig(9, "cue", 200, 0))
    assert cue.kmax == [2 * S for S in spins]
    assert cue.rejected


def test_fit_preconditions():
    tmpl = RunConfig(9, "majorana", 10, 0)
    with pytest.raises(DomainError):
        fit_kmax_scaling([9, 16, 25], tmpl)
    with pytest.raises(DomainError):
        fit_kmax_scaling([3, 9, 16, 25], tmpl)


def test_compare_spin_half_is_inconclusive():
    with pytest.warns(InconclusiveOrdering):
        report = compare_ensembles(0.5, 4000, 3)
    assert report["ordering"] == "inconclusive"
    E = report["mean_E"]
    assert E["majorana"] == pytest.approx(1 / 3, abs=1e-12)
    assert E["cue"] == pytest.approx(1 / 3, abs=1e-12)


def test_compare_ordering_s5():
    with warnings.catch_warnings():
        warnings.simplefilter("error", InconclusiveOrdering)
        report = compare_ensembles(5, 20000, 8)
    assert report["ordering"] == "holds"
    assert report["mean_E"]["cue"] == pytest.approx(5 / 6, rel=0.01)


def test_derived_seeds_differ():
    assert len({derive_seed(1, k) for k in ("majorana", "cue", "symproj")}) == 3
    assert derive_seed(1, "cue") == derive_seed(1, "cue")
