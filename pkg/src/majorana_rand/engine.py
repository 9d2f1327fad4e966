"""Monte Carlo ensemble runs and the K_max scaling fit.

Samples are processed in fixed blocks whose boundaries depend only on the
run configuration.  Each block reduces to a weighted-moment accumulator, and
accumulators are merged strictly in block order, so results are
bit-identical for any worker count.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .angular import HalfInteger, as_spin, cg_table
from .ensembles import EnsembleKind, draw_block, symproj_weight_log_scale
from .errors import DomainError, InconclusiveOrdering, OutOfRange
from .multipoles import batch_squared_multipoles, lengths_from_squares, quantumness_from_lengths
from .oracles import cs_multipole_lengths

__all__ = [
    "RunConfig",
    "EnsembleStats",
    "ScalingFit",
    "run_ensemble",
    "fit_kmax_scaling",
    "compare_ensembles",
    "default_workers",
    "derive_seed",
    "MAX_SPIN",
]

MAX_SPIN = HalfInteger(300)  # S = 150
WORKERS_ENV = "MAJORANA_RAND_WORKERS"
_BLOCK_FLOATS = 4_000_000


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    if value:
        try:
            workers = int(value)
        except ValueError:
            raise DomainError(f"{WORKERS_ENV} must be a positive integer, got {value!r}") from None
        if workers < 1:
            raise DomainError(f"{WORKERS_ENV} must be a positive integer, got {value!r}")
        return workers
    return 1


@dataclass(frozen=True)
class RunConfig:
    spin: HalfInteger
    ensemble: EnsembleKind
    samples: int
    seed: int
    workers: int = 1
    histogram_bins: int = 120
    histogram_scale: str = "log"

    def __post_init__(self):
        object.__setattr__(self, "spin", as_spin(self.spin))
        object.__setattr__(self, "ensemble", EnsembleKind.parse(self.ensemble))
        if int(self.samples) < 1:
            raise DomainError("samples must be at least 1")
        if int(self.workers) < 1:
            raise DomainError("workers must be at least 1")
        if int(self.histogram_bins) < 1:
            raise DomainError("histogram_bins must be at least 1")
        if self.histogram_scale not in ("log", "linear"):
            raise DomainError("histogram_scale must be 'log' or 'linear'")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        for name in ("samples", "seed", "workers", "histogram_bins"):
            object.__setattr__(self, name, int(getattr(self, name)))

    @property
    def block_size(self) -> int:
        """Samples per block; fixed by the spin so it never depends on workers."""
        n = self.spin.twice + 1
        return int(max(8, min(256, _BLOCK_FLOATS // (n * n))))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["spin"] = str(self.spin)
        out["ensemble"] = self.ensemble.value
        return out

    def stats_key(self) -> dict:
        """Config fields that determine the statistics (everything but workers)."""
        out = self.to_dict()
        del out["workers"]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        return cls(**data)


class _Moments:
    """Weighted moments of a feature vector, mergeable in a fixed order.

    W1 = sum w, W2 = sum w^2, mean, M = sum w (x-mean)^2,
    N = sum w^2 (x-mean)^2 and P = sum w^2 (x-mean).  The standard error of
    the weighted mean is sqrt(N) / W1.
    """

    __slots__ = ("count", "W1", "W2", "mean", "M", "N", "P")

    def __init__(self, x: np.ndarray, w: np.ndarray):
        self.count = x.shape[0]
        self.W1 = float(np.sum(w))
        self.W2 = float(np.sum(w * w))
        # a lone sample is its own mean; the weighted form can round away from it
        self.mean = x[0].copy() if self.count == 1 else (w @ x) / self.W1
        d = x - self.mean
        self.M = w @ (d * d)
        w2 = w * w
        self.N = w2 @ (d * d)
        self.P = w2 @ d

    def merge(self, other: _Moments) -> None:
        W1 = self.W1 + other.W1
        mean = (self.W1 * self.mean + other.W1 * other.mean) / W1
        da = self.mean - mean
        db = other.mean - mean
        self.M = self.M + self.W1 * da * da + other.M + other.W1 * db * db
        self.N = self.N + 2.0 * da * self.P + da * da * self.W2 + other.N + 2.0 * db * other.P + db * db * other.W2
        self.P = self.P + da * self.W2 + other.P + db * other.W2
        self.W1 = W1
        self.W2 = self.W2 + other.W2
        self.mean = mean
        self.count += other.count

    @property
    def variance(self) -> np.ndarray:
        return np.maximum(self.M / self.W1, 0.0)

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.N, 0.0)) / self.W1


@dataclass
class EnsembleStats:
    """Per-K statistics of an ensemble run.

    For the symmetric-projection ensemble every mean is weighted by
    |P psi_raw|^4, which is the unnormalized ensemble average divided by the
    mean total purity; ``raw_mean_sq`` undoes that normalization.
    """

    spin: HalfInteger
    ensemble: str
    n_samples: int
    mean_L: np.ndarray
    var_L: np.ndarray
    stderr_L: np.ndarray
    mean_A: np.ndarray
    stderr_A: np.ndarray
    mean_E: float
    var_E: float
    stderr_E: float
    mean_sq: np.ndarray  # [K, q >= 0]
    stderr_sq: np.ndarray
    hist: np.ndarray  # [K, bin]
    hist_edges: np.ndarray
    mean_weight: float = 1.0
    weight_log_scale: float = 0.0
    config: dict = field(default_factory=dict)

    @property
    def k_max(self) -> int:
        return int(np.argmax(self.mean_L[1:])) + 1

    @property
    def raw_mean_sq(self) -> np.ndarray:
        """Unweighted mean of |rho_Kq|^2 of the unnormalized projected states."""
        return self.mean_sq * self.mean_weight * math.exp(self.weight_log_scale)

    @property
    def raw_stderr_sq(self) -> np.ndarray:
        return self.stderr_sq * self.mean_weight * math.exp(self.weight_log_scale)

    def to_json(self) -> dict:
        out = {}
        for key, value in self.__dict__.items():
            if isinstance(value, np.ndarray):
                out[key] = value.tolist()
            elif isinstance(value, HalfInteger):
                out[key] = str(value)
            else:
                out[key] = value
        return out


def _histogram_edges(bins: int, scale: str) -> np.ndarray:
    if scale == "log":
        return np.logspace(-16.0, 0.0, bins + 1)
    return np.linspace(0.0, 1.0, bins + 1)


def _histogram(values: np.ndarray, bins: int, scale: str) -> np.ndarray:
    """Counts per (K, bin) for per-sample lengths of shape (count, K)."""
    if scale == "log":
        pos = (np.log10(np.clip(values, 1e-16, 1.0)) + 16.0) / 16.0
    else:
        pos = np.clip(values, 0.0, 1.0)
    idx = np.minimum((pos * bins).astype(int), bins - 1)
    nk = values.shape[1]
    flat = idx + bins * np.arange(nk)[None, :]
    return np.bincount(flat.ravel(), minlength=nk * bins).reshape(nk, bins)


def _block_stats(cfg: RunConfig, start: int, count: int):
    n = cfg.spin.twice
    block = draw_block(cfg.ensemble, cfg.spin, cfg.seed, start, count)
    table = cg_table(cfg.spin)
    sq = batch_squared_multipoles(block.amps, table)
    L = lengths_from_squares(sq)
    A = np.cumsum(L[:, 1:], axis=1)
    A = np.concatenate([np.zeros((count, 1)), A], axis=1)
    E = quantumness_from_lengths(L)
    features = np.concatenate([L, A, E[:, None], sq.reshape(count, -1)], axis=1)
    w = np.exp(block.log_weight)
    moments = _Moments(features, w)
    hist = _histogram(L, cfg.histogram_bins, cfg.histogram_scale)
    return moments, hist, float(np.sum(w)), n


def _check_spin(spin: HalfInteger, max_spin: HalfInteger):
    if spin > max_spin:
        raise OutOfRange(f"spin {spin} exceeds the configured maximum {max_spin}")


def run_ensemble(cfg: RunConfig, max_spin=MAX_SPIN) -> EnsembleStats:
    """Draw ``cfg.samples`` states and accumulate their multipole statistics."""
    _check_spin(cfg.spin, HalfInteger.parse(max_spin))
    n = cfg.spin.twice
    cg_table(cfg.spin)  # build the shared table before any worker starts
    size = cfg.block_size
    starts = list(range(0, cfg.samples, size))
    jobs = [(s, min(size, cfg.samples - s)) for s in starts]
    if cfg.workers == 1 or len(jobs) == 1:
        results = [_block_stats(cfg, s, c) for s, c in jobs]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(lambda job: _block_stats(cfg, *job), jobs))
    total, hist, weight_sum, _ = results[0]
    hist = hist.copy()
    for moments, h, wsum, _ in results[1:]:
        total.merge(moments)
        hist += h
        weight_sum += wsum
    k = n + 1
    mean, var, se = total.mean, total.variance, total.stderr
    sl = {
        "L": slice(0, k),
        "A": slice(k, 2 * k),
        "E": 2 * k,
        "sq": slice(2 * k + 1, 2 * k + 1 + k * k),
    }
    is_symproj = cfg.ensemble is EnsembleKind.SYMPROJ
    return EnsembleStats(
        spin=cfg.spin,
        ensemble=cfg.ensemble.value,
        n_samples=cfg.samples,
        mean_L=mean[sl["L"]],
        var_L=var[sl["L"]],
        stderr_L=se[sl["L"]],
        mean_A=mean[sl["A"]],
        stderr_A=se[sl["A"]],
        mean_E=float(mean[sl["E"]]),
        var_E=float(var[sl["E"]]),
        stderr_E=float(se[sl["E"]]),
        mean_sq=mean[sl["sq"]].reshape(k, k),
        stderr_sq=se[sl["sq"]].reshape(k, k),
        hist=hist,
        hist_edges=_histogram_edges(cfg.histogram_bins, cfg.histogram_scale),
        mean_weight=weight_sum / cfg.samples,
        weight_log_scale=symproj_weight_log_scale(n) if is_symproj else 0.0,
        config=cfg.stats_key(),
    )


@dataclass
class ScalingFit:
    spins: list
    kmax: list
    a: float
    residual: float
    relative_residual: float
    rejected: bool
    ensemble: str = "majorana"

    def to_json(self) -> dict:
        out = asdict(self)
        out["spins"] = [str(s) for s in self.spins]
        return out


# a fit whose rms residual exceeds this fraction of the mean K_max is flagged
FIT_REJECT_RELATIVE = 0.2


def fit_kmax_scaling(spins, template: RunConfig, max_spin=MAX_SPIN) -> ScalingFit:
    """Fit K_max = a sqrt(S) through the origin over a list of spins (each S >= 4)."""
    spins = [as_spin(s) for s in spins]
    if len(spins) < 4:
        raise DomainError("the scaling fit needs at least four spins")
    if any(s < HalfInteger(8) for s in spins):
        raise DomainError("the scaling fit only uses spins S >= 4")
    kmax = []
    for spin in spins:
        samples = 1 if template.ensemble is EnsembleKind.COHERENT else template.samples
        stats = run_ensemble(replace(template, spin=spin, samples=samples), max_spin=max_spin)
        kmax.append(stats.k_max)
    root = np.sqrt([float(s) for s in spins])
    k = np.asarray(kmax, dtype=float)
    a = float(np.dot(root, k) / np.dot(root, root))
    residual = float(np.sqrt(np.mean((k - a * root) ** 2)))
    relative = residual / float(np.mean(k))
    return ScalingFit(
        spins=spins,
        kmax=[int(x) for x in kmax],
        a=a,
        residual=residual,
        relative_residual=relative,
        rejected=relative > FIT_REJECT_RELATIVE,
        ensemble=template.ensemble.value,
    )


ORDER = ("symproj", "majorana", "cue")


def derive_seed(seed: int, label: str) -> int:
    """Independent 64-bit seed for one labelled run within a multi-ensemble command."""
    key = tuple(label.encode())
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1, np.uint64)[0])


def compare_ensembles(S, samples: int, seed: int, workers: int = 1, max_spin=MAX_SPIN) -> dict:
    """Run all ensembles and the coherent baseline at one spin and order their mean E.

    ``ordering`` is ``holds`` when each gap in symproj < majorana < cue exceeds
    three combined standard errors, ``violated`` when some gap is that far
    in the wrong direction, and ``inconclusive`` otherwise (with an
    :class:`InconclusiveOrdering` warning).
    """
    spin = as_spin(S)
    stats = {}
    for kind in ORDER + ("coherent",):
        n = 1 if kind == "coherent" else samples
        cfg = RunConfig(spin, kind, n, derive_seed(seed, kind), workers=workers)
        stats[kind] = run_ensemble(cfg, max_spin=max_spin)
    gaps = []
    verdict = "holds"
    for lo, hi in zip(ORDER, ORDER[1:]):
        gap = stats[hi].mean_E - stats[lo].mean_E
        se = math.hypot(stats[hi].stderr_E, stats[lo].stderr_E)
        gaps.append({"lower": lo, "upper": hi, "gap": gap, "stderr": se})
        if gap < -3.0 * se:
            verdict = "violated"
        elif gap <= 3.0 * se and verdict == "holds":
            verdict = "inconclusive"
    if verdict == "inconclusive":
        warnings.warn(
            f"mean E ordering at S={spin} is not resolved by {samples} samples",
            InconclusiveOrdering,
            stacklevel=2,
        )
    return {
        "spin": str(spin),
        "samples": samples,
        "seed": seed,
        "mean_L": {k: v.mean_L.tolist() for k, v in stats.items()},
        "mean_E": {k: v.mean_E for k, v in stats.items()},
        "stderr_E": {k: v.stderr_E for k, v in stats.items()},
        "cs_lengths": cs_multipole_lengths(spin).tolist(),
        "gaps": gaps,
        "ordering": verdict,
        "stats": stats,
    }
