"""Command-line interface: ``python -m majorana_rand <command> ...``.

Exit codes: 0 success, 2 usage or parse error, 3 numerical-contract
violation, 4 file-system error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .angular import HalfInteger, as_spin
from .engine import (
    RunConfig,
    compare_ensembles,
    default_workers,
    derive_seed,
    fit_kmax_scaling,
    run_ensemble,
)
from .ensembles import EnsembleKind, RngStream, sample_cue, sample_majorana, sample_symmetric_projection
from .errors import (
    DegenerateState,
    DomainError,
    IllConditioned,
    MajoranaError,
    QuadratureDegreeTooLow,
    RootFindingFailure,
)
from .io import (
    FileError,
    ParseError,
    RunManifest,
    read_constellation_csv,
    read_state_csv,
    write_constellation_csv,
    write_husimi_csv,
    write_json,
    write_lengths_csv,
    write_spectrum_csv,
    write_state_csv,
    write_table_csv,
)
from .multipoles import cumulative_curve, k_max, multipoles, quantumness
from .oracles import FAMILIES, OBSERVABLES, cs_cumulative, cs_multipole_lengths, cs_quantumness, oracle_report
from .states import coherent_amplitudes, constellation_from_state, state_from_constellation

log = logging.getLogger("majorana_rand")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
PAPER_SAMPLES = 1_500_000
DESK_SAMPLES = 10_000
LONG_RUN_SECONDS = 600.0
# rough single-core cost of one sample, per squared Hilbert-space dimension
_SECONDS_PER_DIM2 = 1e-7

FIGURE_DEFAULT_SPINS = {1: [60], 2: [60], 3: [106], 4: [106], 5: [30], 6: [1, 2, 5, 10, 20, 30]}


class UsageError(MajoranaError, ValueError):
    pass


def _spin_arg(text: str) -> HalfInteger:
    try:
        return as_spin(text)
    except (MajoranaError, TypeError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _spin_list(text: str) -> list[HalfInteger]:
    return [_spin_arg(part) for part in text.split(",") if part.strip()]


def _seed_arg(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _ensemble_arg(text: str) -> EnsembleKind:
    try:
        return EnsembleKind.parse(text)
    except DomainError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _resolve_seed(args) -> int:
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
        log.warning("no --seed given; using %d (recorded in the manifest)", args.seed)
    return args.seed


def _estimate_seconds(spins, samples: int, runs: int = 1) -> float:
    return sum(runs * samples * _SECONDS_PER_DIM2 * (s.twice + 1) ** 2 for s in spins)


def _warn_long(spins, samples, runs=1):
    est = _estimate_seconds(spins, samples, runs)
    if est > LONG_RUN_SECONDS:
        log.warning("estimated run time %.0f min; this run is long", est / 60.0)


def _manifest(args, config: dict) -> RunManifest:
    return RunManifest(command=args.command, config=config, tool_version=__version__)


def _load_state(args):
    if bool(args.state) == bool(args.constellation):
        raise UsageError("give exactly one of --state or --constellation")
    if args.state:
        return read_state_csv(args.state, renormalize=args.renormalize)
    return state_from_constellation(read_constellation_csv(args.constellation))


# ---------------------------------------------------------------- commands


def cmd_sample(args) -> int:
    seed = _resolve_seed(args)
    out = Path(args.out)
    manifest = _manifest(args, {"spin": str(args.spin), "ensemble": args.ensemble.value, "count": args.count, "seed": seed})
    width = max(3, len(str(args.count - 1)))
    for i in range(args.count):
        stream = RngStream(seed, i)
        if args.ensemble is EnsembleKind.MAJORANA:
            constellation, state = sample_majorana(args.spin, stream)
        elif args.ensemble is EnsembleKind.CUE:
            state = sample_cue(args.spin, stream)
            constellation = constellation_from_state(state)
        elif args.ensemble is EnsembleKind.SYMPROJ:
            _, state = sample_symmetric_projection(args.spin, stream)
            constellation = constellation_from_state(state)
        else:
            raise UsageError("the coherent baseline is not a random ensemble; use `multipoles` on a state file")
        tag = f"{i:0{width}d}"
        manifest.add(write_state_csv(out / f"state_{tag}.csv", state))
        manifest.add(write_constellation_csv(out / f"constellation_{tag}.csv", constellation))
    manifest.write(out)
    return EXIT_OK


def _summary(spec) -> dict:
    return {
        "spin": str(spec.spin),
        "A_M": cumulative_curve(spec).tolist(),
        "E": quantumness(spec),
        "K_max": k_max(spec),
    }


def cmd_multipoles(args) -> int:
    state = _load_state(args)
    spec = multipoles(state)
    out = Path(args.out)
    manifest = _manifest(args, {"state": args.state, "constellation": args.constellation})
    manifest.add(write_spectrum_csv(out / "multipoles.csv", spec))
    manifest.add(write_lengths_csv(out / "lengths.csv", spec.lengths))
    manifest.add(write_json(out / "summary.json", _summary(spec)))
    manifest.write(out)
    return EXIT_OK


def cmd_husimi(args) -> int:
    state = _load_state(args)
    theta = np.linspace(0.0, math.pi, args.n_theta)
    phi = np.linspace(0.0, 2.0 * math.pi, args.n_phi, endpoint=False)
    T, P = np.meshgrid(theta, phi, indexing="ij")
    Q = np.abs(coherent_amplitudes(state, T, P)) ** 2
    out = Path(args.out)
    manifest = _manifest(args, {"state": args.state, "constellation": args.constellation, "n_theta": args.n_theta, "n_phi": args.n_phi})
    csv_path = write_husimi_csv(out / "husimi.csv", theta, phi, Q)
    manifest.add(csv_path)
    if args.svg:
        from .plots import render_husimi

        manifest.add(render_husimi(csv_path, out / "husimi.svg"))
    manifest.write(out)
    return EXIT_OK


def cmd_oracle(args) -> int:
    observables = args.observable or list(OBSERVABLES)
    report = oracle_report(args.family, args.spin, observables, renormalize=args.renormalize)
    data = report.to_json()
    if args.out is None:
        json.dump(data, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return EXIT_OK
    out = Path(args.out)
    manifest = _manifest(args, {"family": args.family, "spin": str(args.spin), "observables": observables, "renormalize": args.renormalize})
    manifest.add(write_json(out / "oracle.json", data))
    n = args.spin.twice
    for name, value in report.values.items():
        arr = np.asarray(value, dtype=float)
        if name == "meansq_rho_Kq":
            rows = [(K, q, float(arr[K, q + n])) for K in range(n + 1) for q in range(-K, K + 1)]
            manifest.add(write_table_csv(out / f"{name}.csv", ("K", "q", "value"), rows))
        elif arr.ndim == 1:
            label = "M" if name == "A_M" else "K"
            manifest.add(write_table_csv(out / f"{name}.csv", (label, name), list(enumerate(arr.tolist()))))
        else:
            manifest.add(write_table_csv(out / f"{name}.csv", ("name", "value"), [(name, float(arr))]))
    manifest.write(out)
    return EXIT_OK


def _workers(args) -> int:
    return args.workers if args.workers is not None else default_workers()


def _stats_files(out: Path, prefix: str, stats, manifest):
    manifest.add(write_json(out / f"{prefix}stats.json", stats.to_json()))
    rows = [
        (K, float(stats.mean_L[K]), float(stats.var_L[K]), float(stats.stderr_L[K]), float(stats.mean_A[K]), float(stats.stderr_A[K]))
        for K in range(stats.mean_L.size)
    ]
    manifest.add(write_table_csv(out / f"{prefix}lengths.csv", ("K", "mean_L", "var_L", "stderr_L", "mean_A", "stderr_A"), rows))
    manifest.add(_hist_csv(out / f"{prefix}hist.csv", stats))


def _hist_csv(path, stats):
    e = stats.hist_edges
    rows = [(K, float(e[b]), float(e[b + 1]), int(stats.hist[K, b])) for K in range(stats.hist.shape[0]) for b in range(e.size - 1)]
    return write_table_csv(path, ("K", "bin_lo", "bin_hi", "count"), rows)


def _samples(args) -> int:
    if getattr(args, "paper_scale", False):
        return PAPER_SAMPLES
    return args.samples if args.samples is not None else DESK_SAMPLES


def cmd_ensemble(args) -> int:
    seed = _resolve_seed(args)
    samples = 1 if args.ensemble is EnsembleKind.COHERENT else _samples(args)
    cfg = RunConfig(args.spin, args.ensemble, samples, seed, _workers(args), args.bins, args.scale)
    _warn_long([cfg.spin], samples)
    stats = run_ensemble(cfg)
    out = Path(args.out)
    manifest = _manifest(args, cfg.to_dict())
    _stats_files(out, "", stats, manifest)
    manifest.write(out)
    return EXIT_OK


def cmd_fit(args) -> int:
    seed = _resolve_seed(args)
    samples = _samples(args)
    template = RunConfig(args.spins[0], args.ensemble, samples, seed, _workers(args))
    _warn_long(args.spins, samples)
    fit = fit_kmax_scaling(args.spins, template)
    out = Path(args.out)
    manifest = _manifest(args, {**template.to_dict(), "spins": [str(s) for s in args.spins]})
    manifest.add(write_json(out / "fit.json", fit.to_json()))
    rows = [(str(s), float(s), math.sqrt(float(s)), k, fit.a * math.sqrt(float(s))) for s, k in zip(fit.spins, fit.kmax)]
    manifest.add(write_table_csv(out / "fit.csv", ("S", "S_value", "sqrt_S", "K_max", "fit"), rows))
    manifest.write(out)
    if fit.rejected:
        log.warning("fit rejected: relative rms residual %.3f", fit.relative_residual)
    return EXIT_OK


def _run(spin, kind, samples, seed, args, label):
    cfg = RunConfig(spin, kind, 1 if kind == "coherent" else samples, derive_seed(seed, label), _workers(args))
    return run_ensemble(cfg)


def _pad(values, length):
    out = [""] * length
    for i, v in enumerate(values):
        out[i] = float(v)
    return out


def _figure_data(fig: int, spins, samples, seed, args):
    """Header and rows of figure ``fig``'s CSV; figure 2 also returns the stats for its histogram."""
    if fig == 1:
        stats = [_run(s, "majorana", samples, seed, args, f"fig1-{s}") for s in spins]
        top = max(s.twice for s in spins) + 1
        cols = [_pad(st.mean_L, top) for st in stats]
        header = ["K"] + [f"S={s}" for s in spins]
        return header, [[K] + [c[K] for c in cols] for K in range(top)], None
    if fig == 2:
        st = _run(spins[0], "majorana", samples, seed, args, "fig2")
        sd = np.sqrt(st.var_L)
        rows = [[K, float(st.mean_L[K]), float(st.mean_L[K] + sd[K]), float(st.mean_L[K] - sd[K])] for K in range(st.mean_L.size)]
        return ["K", "mean_L", "upper", "lower"], rows, st
    if fig == 3:
        s = spins[0]
        st = _run(s, "majorana", samples, seed, args, "fig3")
        cs = cs_multipole_lengths(s)
        return ["K", "majorana", "cs"], [[K, float(st.mean_L[K]), float(cs[K])] for K in range(cs.size)], None
    if fig == 4:
        s = spins[0]
        ma = _run(s, "majorana", samples, seed, args, "fig4-majorana")
        cu = _run(s, "cue", samples, seed, args, "fig4-cue")
        rows = [[M, float(ma.mean_A[M]), float(cu.mean_A[M]), cs_cumulative(s, M) if M else 0.0] for M in range(s.twice + 1)]
        return ["M", "majorana", "cue", "cs"], rows, None
    if fig == 5:
        s = spins[0]
        runs = {k: _run(s, k, samples, seed, args, f"fig5-{k}") for k in ("majorana", "cue", "symproj")}
        cs = cs_multipole_lengths(s)
        rows = [[K] + [float(runs[k].mean_L[K]) for k in runs] + [float(cs[K])] for K in range(cs.size)]
        return ["K", "majorana", "cue", "symproj", "cs"], rows, None
    rows = []
    for s in spins:
        report = compare_ensembles(s, samples, derive_seed(seed, f"fig6-{s}"), workers=_workers(args))
        E = report["mean_E"]
        n = s.twice
        rows.append([float(s), E["majorana"], E["cue"], E["symproj"], cs_quantumness(s), n / (n + 1)])
    return ["S", "majorana", "cue", "symproj", "cs", "bound_max"], rows, None


def cmd_figure(args) -> int:
    from .plots import render_figure

    seed = _resolve_seed(args)
    samples = _samples(args)
    if args.spins is not None:
        spins = args.spins
    elif args.spin is not None:
        spins = [args.spin]
    else:
        spins = FIGURE_DEFAULT_SPINS[args.fig]
    runs = {1: 1, 2: 1, 3: 1, 4: 2, 5: 3, 6: 3}[args.fig]
    _warn_long(spins, samples, runs)
    header, rows, stats = _figure_data(args.fig, spins, samples, seed, args)
    out = Path(args.out)
    manifest = _manifest(args, {"figure": args.fig, "spins": [str(s) for s in spins], "samples": samples, "seed": seed})
    csv_path = write_table_csv(out / f"fig{args.fig}.csv", header, rows)
    manifest.add(csv_path)
    hist_path = None
    if stats is not None:
        hist_path = _hist_csv(out / f"fig{args.fig}_hist.csv", stats)
        manifest.add(hist_path)
    manifest.add(render_figure(args.fig, csv_path, out / f"fig{args.fig}.svg", hist_csv=hist_path))
    manifest.write(out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="majorana-rand", description="Random Majorana constellations and SU(2) multipoles.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def seeded(sp):
        sp.add_argument("--seed", type=_seed_arg, default=None, help="64-bit seed (auto-chosen and recorded if omitted)")

    def parallel(sp):
        sp.add_argument("--workers", type=_positive, default=None, help="worker threads (default: MAJORANA_RAND_WORKERS or 1)")

    def sized(sp):
        sp.add_argument("--samples", type=_positive, default=None, help=f"samples per run (default {DESK_SAMPLES})")
        sp.add_argument("--paper-scale", action="store_true", help=f"use {PAPER_SAMPLES} samples per run")

    def state_input(sp):
        sp.add_argument("--state", help="state CSV (m,re,im)")
        sp.add_argument("--constellation", help="constellation CSV (theta,phi)")
        sp.add_argument("--renormalize", action="store_true", help="accept and renormalize a state whose norm is off by more than 1e-6")

    sp = sub.add_parser("sample", help="draw random states and their constellations")
    sp.add_argument("--spin", type=_spin_arg, required=True)
    sp.add_argument("--ensemble", type=_ensemble_arg, required=True)
    sp.add_argument("--count", type=_positive, default=1)
    seeded(sp)
    sp.add_argument("--out", default="samples")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("multipoles", help="multipole spectrum of a state or constellation file")
    state_input(sp)
    sp.add_argument("--out", default="multipoles")
    sp.set_defaults(func=cmd_multipoles)

    sp = sub.add_parser("husimi", help="Husimi Q-function on a regular grid")
    state_input(sp)
    sp.add_argument("--n-theta", type=_positive, default=91)
    sp.add_argument("--n-phi", type=_positive, default=180)
    sp.add_argument("--svg", action="store_true", help="also render an equirectangular heatmap")
    sp.add_argument("--out", default="husimi")
    sp.set_defaults(func=cmd_husimi)

    sp = sub.add_parser("oracle", help="closed-form ensemble values")
    sp.add_argument("--family", choices=FAMILIES, required=True)
    sp.add_argument("--spin", type=_spin_arg, required=True)
    sp.add_argument("--observable", action="append", choices=OBSERVABLES, help="repeatable; default all")
    sp.add_argument("--renormalize", choices=("none", "total-purity"), default="none")
    sp.add_argument("--out", default=None, help="directory for JSON and CSV output (default: JSON on stdout)")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("ensemble", help="Monte Carlo statistics of one ensemble")
    sp.add_argument("--spin", type=_spin_arg, required=True)
    sp.add_argument("--ensemble", type=_ensemble_arg, required=True)
    sized(sp)
    seeded(sp)
    parallel(sp)
    sp.add_argument("--bins", type=_positive, default=120)
    sp.add_argument("--scale", choices=("log", "linear"), default="log")
    sp.add_argument("--out", default="ensemble")
    sp.set_defaults(func=cmd_ensemble)

    sp = sub.add_parser("figure", help="data and SVG for one of the six figures")
    sp.add_argument("fig", type=int, choices=range(1, 7))
    sp.add_argument("--spin", type=_spin_arg, default=None)
    sp.add_argument("--spins", type=_spin_list, default=None)
    sized(sp)
    seeded(sp)
    parallel(sp)
    sp.add_argument("--out", default="figures")
    sp.set_defaults(func=cmd_figure)

    sp = sub.add_parser("fit", help="K_max = a sqrt(S) fit")
    sp.add_argument("--spins", type=_spin_list, default=_spin_list("9,16,25,36,49,60"))
    sp.add_argument("--ensemble", type=_ensemble_arg, default=EnsembleKind.MAJORANA)
    sized(sp)
    seeded(sp)
    parallel(sp)
    sp.add_argument("--out", default="fit")
    sp.set_defaults(func=cmd_fit)
    return p


_NUMERIC = (DegenerateState, RootFindingFailure, QuadratureDegreeTooLow)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    warnings.simplefilter("always", IllConditioned)
    try:
        return args.func(args)
    except (FileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except _NUMERIC as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, UsageError, MajoranaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
