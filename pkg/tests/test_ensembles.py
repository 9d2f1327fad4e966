import math

import numpy as np
import pytest
from scipy import stats

from majorana_rand.ensembles import (
    EnsembleKind,
    RngStream,
    draw_block,
    sample_cue,
    sample_majorana,
    sample_symmetric_projection,
    symproj_weight_log_scale,
)
from majorana_rand.errors import DomainError
from majorana_rand.states import state_from_constellation


def test_kind_parsing():
    assert EnsembleKind.parse("Majorana") is EnsembleKind.MAJORANA
    assert EnsembleKind.parse(EnsembleKind.CUE) is EnsembleKind.CUE
    assert [k.value for k in EnsembleKind][:3] == ["majorana", "cue", "symproj"]
    with pytest.raises(DomainError):
        EnsembleKind.parse("ginibre")


def test_stream_reproducible_and_distinct():
    a = RngStream(5, 3).generator().random(4)
    b = RngStream(5, 3).generator().random(4)
    c = RngStream(5, 4).generator().random(4)
    d = RngStream(6, 3).generator().random(4)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c) and not np.allclose(a, d)
    with pytest.raises(DomainError):
        RngStream(-1)


def test_block_independent_of_partition():
    for kind in ("majorana", "cue", "symproj"):
        whole = draw_block(kind, 3, 11, 0, 10)
        parts = [draw_block(kind, 3, 11, s, 5) for s in (0, 5)]
        assert np.array_equal(whole.amps, np.concatenate([p.amps for p in parts]))
        assert np.array_equal(whole.log_weight, np.concatenate([p.log_weight for p in parts]))


def test_block_matches_single_samplers():
    c, s = sample_majorana(4, RngStream(9, 2))
    assert np.allclose(draw_block("majorana", 4, 9, 2, 1).amps[0], s.amps, atol=1e-15)
    assert s.fidelity(state_from_constellation(c)) == pytest.approx(1.0, abs=1e-13)
    cue = sample_cue(4, RngStream(9, 2))
    assert np.allclose(draw_block("cue", 4, 9, 2, 1).amps[0], cue.amps, atol=1e-15)
    raw, normed = sample_symmetric_projection(4, RngStream(9, 2))
    blk = draw_block("symproj", 4, 9, 2, 1)
    assert np.allclose(blk.amps[0], normed.amps, atol=1e-15)
    assert blk.log_weight[0] == pytest.approx(4 * raw.log_norm - symproj_weight_log_scale(8), abs=1e-12)


def test_majorana_directions_uniform():
    theta = np.concatenate([sample_majorana(5, RngStream(42, i))[0].theta for i in range(10000)])
    cos = np.cos(theta)
    assert abs(cos.mean()) < 0.01
    assert stats.kstest(cos, stats.uniform(loc=-1, scale=2).cdf).pvalue > 0.001


def test_cue_fourth_moments():
    n = 3
    amps = draw_block("cue", n / 2, 1, 0, 100000).amps
    p = np.abs(amps) ** 2
    target_same = 2 / ((n + 1) * (n + 2))
    target_diff = 1 / ((n + 1) * (n + 2))
    same = p[:, 0] ** 2
    diff = p[:, 0] * p[:, 2]
    assert abs(same.mean() - target_same) < 3 * same.std() / math.sqrt(same.size)
    assert abs(diff.mean() - target_diff) < 3 * diff.std() / math.sqrt(diff.size)


def test_spin_half_ensembles_coincide():
    # all three ensembles are Haar on CP^1: compare <|psi_up|^2> and <|psi_up|^4>
    moments = {}
    for kind in ("majorana", "cue", "symproj"):
        blk = draw_block(kind, 0.5, 3, 0, 40000)
        p = np.abs(blk.amps[:, 1]) ** 2
        moments[kind] = (p.mean(), (p**2).mean())
        assert np.allclose(blk.log_weight, blk.log_weight[0])
    for kind, (m1, m2) in moments.items():
        assert m1 == pytest.approx(0.5, abs=0.006)
        assert m2 == pytest.approx(1 / 3, abs=0.006)


def test_identical_qubits_project_trivially():
    raw, normed = sample_symmetric_projection(3, RngStream(1), identical=True)
    assert raw.norm == pytest.approx(1.0, abs=1e-13)


def test_symproj_weights_average_to_one():
    # E|P u|^4 = ((2S+1)/4^S)^2 * E[w]; the scale makes E[w] of order one
    blk = draw_block("symproj", 2, 4, 0, 50000)
    w = np.exp(blk.log_weight)
    assert 0.5 < w.mean() < 2.0


def test_majorana_differs_from_cue_at_dipole():
    # Majorana states carry more dipole weight (they sit closer to coherent
    # states, which maximize every A_M); CUE gives A_1 = 3 / ((2S+1)(2S+2))
    from majorana_rand.angular import cg_table
    from majorana_rand.multipoles import batch_squared_multipoles, lengths_from_squares

    table = cg_table(2)
    A1 = {}
    for kind in ("majorana", "cue"):
        L = lengths_from_squares(batch_squared_multipoles(draw_block(kind, 2, 8, 0, 20000).amps, table))
        A1[kind] = (L[:, 1].mean(), L[:, 1].std() / math.sqrt(L.shape[0]))
    assert A1["cue"][0] == pytest.approx(3 / 30, abs=4 * A1["cue"][1])
    gap = A1["majorana"][0] - A1["cue"][0]
    assert gap > 3 * math.hypot(A1["cue"][1], A1["majorana"][1])
