import json
from pathlib import Path

import numpy as np
import pytest

from majorana_rand.cli import main
from majorana_rand.io import (
    ParseError,
    RunManifest,
    read_constellation_csv,
    read_state_csv,
    write_state_csv,
)
from majorana_rand.plots import render_figure
from majorana_rand.states import SpinState, make_coherent_state


def run(*args):
    return main([str(a) for a in args])


def digests(path: Path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir()) if p.name != "manifest.json"}


def test_sample_outputs_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("sample", "--spin", 5, "--ensemble", "majorana", "--count", 3, "--seed", 1, "--out", a) == 0
    assert run("sample", "--spin", 5, "--ensemble", "majorana", "--count", 3, "--seed", 1, "--out", b) == 0
    files = sorted(p.name for p in a.iterdir())
    expected = [f"constellation_{i:03d}.csv" for i in range(3)] + ["manifest.json"]
    assert files == expected + [f"state_{i:03d}.csv" for i in range(3)]
    assert digests(a) == digests(b)
    manifest = RunManifest.read(a / "manifest.json")
    assert manifest.schema == "v1" and manifest.verify(a) == []


def test_sample_spin_half_cue(tmp_path):
    assert run("sample", "--spin", "1/2", "--ensemble", "cue", "--count", 1, "--seed", 0, "--out", tmp_path) == 0
    s = read_state_csv(tmp_path / "state_000.csv")
    assert s.amps.size == 2


def test_unseeded_run_records_seed(tmp_path):
    assert run("sample", "--spin", 1, "--ensemble", "cue", "--out", tmp_path) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert isinstance(manifest["config"]["seed"], int)


def test_usage_errors_exit_2(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run("sample", "--spin", 1, "--ensemble", "ginibre", "--seed", 1)
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        run("oracle", "--family", "cue", "--spin", 2, "--observable", "nope")
    assert exc.value.code == 2
    assert run("multipoles", "--out", tmp_path) == 2


def test_io_error_exit_4(tmp_path):
    assert run("multipoles", "--state", tmp_path / "missing.csv", "--out", tmp_path) == 4


def test_parse_error_has_line_number(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("m,re,im\n-1,0,0\n0,oops,0\n1,1,0\n")
    assert run("multipoles", "--state", bad, "--out", tmp_path / "o") == 2
    assert "bad.csv:3" in capsys.readouterr().err
    with pytest.raises(ParseError) as exc:
        read_state_csv(bad)
    assert exc.value.line == 3


def test_norm_deviation_needs_flag(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("m,re,im\n-1/2,1,0\n1/2,1,0\n")
    assert run("multipoles", "--state", path, "--out", tmp_path / "o") == 2
    with pytest.warns(UserWarning):
        assert run("multipoles", "--state", path, "--renormalize", "--out", tmp_path / "o") == 0


def test_state_csv_roundtrip(tmp_path, rng):
    z = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    s = SpinState.normalized(2.5, z)
    write_state_csv(tmp_path / "s.csv", s)
    assert (tmp_path / "s.csv").read_text().splitlines()[1].startswith("-5/2,")
    assert np.array_equal(read_state_csv(tmp_path / "s.csv").amps, s.amps)


def test_constellation_csv_validation(tmp_path):
    p = tmp_path / "c.csv"
    p.write_text("theta,phi\n0.5,0.1\n4.0,0\n")
    with pytest.raises(ParseError) as exc:
        read_constellation_csv(p)
    assert exc.value.line == 3
    p.write_text("phi,theta\n0.5,0.1\n")
    with pytest.raises(ParseError):
        read_constellation_csv(p)


def test_multipoles_coherent_summary(tmp_path):
    write_state_csv(tmp_path / "cs.csv", make_coherent_state(1, (0.3, 0.2)))
    assert run("multipoles", "--state", tmp_path / "cs.csv", "--out", tmp_path / "o") == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["A_M"][1] == pytest.approx(0.5, abs=1e-12)
    header = (tmp_path / "o" / "multipoles.csv").read_text().splitlines()[0]
    assert header == "K,q,re,im"
    assert (tmp_path / "o" / "lengths.csv").read_text().startswith("K,length\n")


def test_constellation_and_state_inputs_agree(tmp_path):
    run("sample", "--spin", 3, "--ensemble", "majorana", "--count", 1, "--seed", 5, "--out", tmp_path / "s")
    run("multipoles", "--state", tmp_path / "s" / "state_000.csv", "--out", tmp_path / "a")
    run("multipoles", "--constellation", tmp_path / "s" / "constellation_000.csv", "--out", tmp_path / "b")
    a = np.loadtxt(tmp_path / "a" / "multipoles.csv", delimiter=",", skiprows=1)
    b = np.loadtxt(tmp_path / "b" / "multipoles.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(a - b)) < 1e-12


def test_oracle_outputs(tmp_path, capsys):
    assert run("oracle", "--family", "cue", "--spin", 5, "--observable", "A_M") == 0
    data = json.loads(capsys.readouterr().out)
    M = np.arange(11)
    assert np.allclose(data["values"]["A_M"], M * (M + 2) / 132)
    assert run("oracle", "--family", "symproj", "--spin", 3, "--observable", "meansq_rho_Kq", "--out", tmp_path) == 0
    rows = (tmp_path / "meansq_rho_Kq.csv").read_text().splitlines()
    assert rows[0] == "K,q,value" and len(rows) == 1 + 49
    assert run("oracle", "--family", "coherent", "--spin", 106, "--observable", "A_M", "--out", tmp_path / "c") == 0


def test_husimi_command(tmp_path):
    write_state_csv(tmp_path / "cs.csv", make_coherent_state(2, (0.0, 0.0)))
    assert run("husimi", "--state", tmp_path / "cs.csv", "--n-theta", 19, "--n-phi", 12, "--svg", "--out", tmp_path / "h") == 0
    data = np.loadtxt(tmp_path / "h" / "husimi.csv", delimiter=",", skiprows=1)
    assert data.shape == (19 * 12, 3)
    assert np.allclose(data[:, 2], np.cos(data[:, 0] / 2) ** 8, atol=1e-12)
    assert (tmp_path / "h" / "husimi.svg").exists()


def test_ensemble_command_workers_identical(tmp_path):
    for w in (1, 3):
        assert run("ensemble", "--spin", 3, "--ensemble", "symproj", "--samples", 2000, "--seed", 4, "--workers", w, "--out", tmp_path / str(w)) == 0
    for name in ("stats.json", "lengths.csv", "hist.csv"):
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "3" / name).read_bytes()


@pytest.mark.parametrize("fig, extra", [(1, ["--spins", "4,9"]), (2, ["--spin", 6]), (4, ["--spin", 5]), (6, ["--spins", "1,2"])])
def test_figure_svg_rerenders_from_csv(tmp_path, fig, extra):
    out = tmp_path / "f"
    assert run("figure", fig, *extra, "--samples", 300, "--seed", 2, "--out", out) == 0
    svg = (out / f"fig{fig}.svg").read_bytes()
    hist = out / f"fig{fig}_hist.csv"
    again = render_figure(fig, out / f"fig{fig}.csv", tmp_path / "again.svg", hist_csv=hist if hist.exists() else None)
    assert again.read_bytes() == svg


def test_figure_4_has_cs_on_top(tmp_path):
    run("figure", 4, "--spin", 4, "--samples", 400, "--seed", 1, "--out", tmp_path)
    data = np.loadtxt(tmp_path / "fig4.csv", delimiter=",", skiprows=1)
    assert np.all(data[:, 3] >= data[:, 1] - 1e-3) and np.all(data[:, 3] >= data[:, 2] - 1e-3)


def test_fit_command(tmp_path):
    assert run("fit", "--spins", "4,5,6,7", "--samples", 200, "--seed", 3, "--out", tmp_path) == 0
    fit = json.loads((tmp_path / "fit.json").read_text())
    assert fit["a"] > 0 and len(fit["kmax"]) == 4
