"""Fidelity metrics between real and synthetic beats and features.

Everything here is deterministic. Histogram-based divergences use 50 bins
over the pooled range with additive smoothing of 1e-10 and natural logs;
MMD is the biased squared estimator with a Gaussian kernel whose bandwidth
is the median pairwise distance of the pooled sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .errors import EmptyInput, LengthMismatch, ZeroReference

BINS = 50
SMOOTHING = 1e-10
MAX_MMD_SAMPLES = 500


def _seq(a):
    a = np.asarray(a, dtype=float).ravel()
    if a.size == 0:
        raise EmptyInput("sequence is empty")
    return a


def dtw(a, b) -> float:
    """Dynamic time warping distance with absolute-difference local cost."""
    a, b = _seq(a), _seq(b)
    n, m = a.size, b.size
    prev = np.full(m + 1, np.inf)
    prev[0] = 0.0
    for i in range(n):
        cost = np.abs(a[i] - b)
        cur = np.empty(m + 1)
        cur[0] = np.inf
        # diagonal and vertical moves vectorised; horizontal needs a scan
        best_up = np.minimum(prev[1:], prev[:-1])
        for j in range(m):
            cur[j + 1] = cost[j] + min(best_up[j], cur[j])
        prev = cur
    return float(prev[m])


def frechet(a, b) -> float:
    """Discrete Fréchet distance between two 1-D curves indexed by position."""
    a, b = _seq(a), _seq(b)
    n, m = a.size, b.size
    prev = np.full(m + 1, np.inf)
    prev[0] = -np.inf
    for i in range(n):
        cost = np.abs(a[i] - b)
        cur = np.empty(m + 1)
        cur[0] = np.inf
        best_up = np.minimum(prev[1:], prev[:-1])
        for j in range(m):
            cur[j + 1] = max(cost[j], min(best_up[j], cur[j]))
        prev = cur
    return float(prev[m])


def pointwise_errors(a, b) -> dict:
    """Euclidean, RMSE, MAE, MSE and PRD (percent) of ``b`` against reference ``a``."""
    a, b = _seq(a), _seq(b)
    if a.size != b.size:
        raise LengthMismatch(f"lengths differ: {a.size} vs {b.size}")
    d = a - b
    sq = float(np.sum(d * d))
    ref = float(np.sum(a * a))
    if ref == 0.0:
        raise ZeroReference("PRD undefined for an all-zero reference")
    return {
        "euclidean": float(np.sqrt(sq)),
        "rmse": float(np.sqrt(sq / d.size)),
        "mae": float(np.mean(np.abs(d))),
        "mse": sq / d.size,
        "prd": 100.0 * float(np.sqrt(sq / ref)),
    }


def _edges(x, y, bins):
    lo = min(x.min(), y.min())
    hi = max(x.max(), y.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, bins + 1)


def _probs(v, edges, smoothing):
    h = np.histogram(v, bins=edges)[0].astype(float)
    h += smoothing
    return h / h.sum()


def kl_divergence(p, q) -> float:
    return float(np.sum(p * np.log(p / q)))


def js_divergence(p, q) -> float:
    m = 0.5 * (p + q)
    return 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m)


def ks_statistic(x, y) -> float:
    """Largest gap between the two empirical CDFs."""
    x, y = np.sort(_seq(x)), np.sort(_seq(y))
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / x.size
    fy = np.searchsorted(y, grid, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))


def wasserstein1(x, y) -> float:
    """Wasserstein-1 distance between empirical distributions, as ∫|F - G|."""
    x, y = np.sort(_seq(x)), np.sort(_seq(y))
    grid = np.sort(np.concatenate([x, y]))
    widths = np.diff(grid)
    fx = np.searchsorted(x, grid[:-1], side="right") / x.size
    fy = np.searchsorted(y, grid[:-1], side="right") / y.size
    return float(np.sum(np.abs(fx - fy) * widths))


def _thin(v, k):
    if v.size <= k:
        return v
    return v[np.linspace(0, v.size - 1, k).round().astype(np.int64)]


def mmd_rbf(x, y, bandwidth=None, max_samples: int = MAX_MMD_SAMPLES) -> float:
    """Biased squared MMD with a Gaussian kernel.

    Samples longer than ``max_samples`` are thinned to evenly spaced
    positions. The bandwidth defaults to the median pairwise distance of the
    pooled sample, or 1 if that is zero.
    """
    x, y = _thin(_seq(x), max_samples), _thin(_seq(y), max_samples)
    if bandwidth is None:
        bandwidth = float(np.median(pdist(np.concatenate([x, y])[:, None])))
        if bandwidth == 0.0:
            bandwidth = 1.0

    def k(a, b):
        return np.exp(-((a[:, None] - b[None, :]) ** 2) / (2.0 * bandwidth ** 2))

    val = k(x, x).mean() + k(y, y).mean() - 2.0 * k(x, y).mean()
    return float(max(val, 0.0))


def skewness(v) -> float:
    v = _seq(v)
    c = v - v.mean()
    denom = np.mean(c * c) ** 1.5
    # a tiny spread underflows the denominator; treat it as constant
    if denom == 0.0:
        return 0.0
    return float(np.mean(c ** 3) / denom)


def divergences(x, y, bins: int = BINS, smoothing: float = SMOOTHING, bin_edges=None,
                max_mmd_samples: int = MAX_MMD_SAMPLES) -> dict:
    """Distributional comparison of sample ``x`` (reference) against ``y``.

    ``kl`` is KL(x || y). Moment differences are ``moment(x) - moment(y)``.
    """
    x, y = _seq(x), _seq(y)
    edges = _edges(x, y, bins) if bin_edges is None else np.asarray(bin_edges, float)
    p, q = _probs(x, edges, smoothing), _probs(y, edges, smoothing)
    return {
        "kl": kl_divergence(p, q),
        "js": js_divergence(p, q),
        "mmd": mmd_rbf(x, y, max_samples=max_mmd_samples),
        "wasserstein": wasserstein1(x, y),
        "ks": ks_statistic(x, y),
        "mean_diff": float(x.mean() - y.mean()),
        "var_diff": float(x.var() - y.var()),
        "skew_diff": skewness(x) - skewness(y),
    }


def _beats(beats):
    if not isinstance(beats, np.ndarray):
        beats = list(beats)
        if beats and len({len(b) for b in beats}) > 1:
            raise LengthMismatch("beats have different lengths")
    b = np.asarray(beats, dtype=float)
    if b.ndim != 2 or b.shape[0] == 0:
        raise EmptyInput("need a non-empty (n, L) array of beats")
    return b


def beat_population_summary(beats):
    """Pointwise mean and population standard deviation of a beat population."""
    b = _beats(beats)
    return b.mean(axis=0), b.std(axis=0)


@dataclass(frozen=True)
class DensityHeatmap:
    bin_edges: np.ndarray
    real_density: np.ndarray  # (L, bins)
    synth_density: np.ndarray
    difference: np.ndarray  # synthetic minus real
    n_real: int
    n_synth: int

    @property
    def bin_width(self):
        return np.diff(self.bin_edges)


def density_heatmap(real_beats, synth_beats, bins: int = BINS) -> DensityHeatmap:
    """Per-timestep amplitude densities on a shared grid, and their difference."""
    r, s = _beats(real_beats), _beats(synth_beats)
    if r.shape[1] != s.shape[1]:
        raise LengthMismatch(f"beat lengths differ: {r.shape[1]} vs {s.shape[1]}")
    edges = _edges(r.ravel(), s.ravel(), bins)

    def dens(pop):
        return np.stack([np.histogram(pop[:, t], bins=edges, density=True)[0]
                         for t in range(pop.shape[1])])

    rd, sd = dens(r), dens(s)
    return DensityHeatmap(edges, rd, sd, sd - rd, r.shape[0], s.shape[0])


def heatmap_average_kl(hm: DensityHeatmap, smoothing: float = SMOOTHING) -> float:
    """Average KL(real || synth) over timesteps, read off the heatmap densities.

    Counts are recovered from the densities, so this agrees with
    :func:`divergences` run per timestep on the heatmap's grid.
    """
    w = hm.bin_width
    vals = []
    for rd, sd in zip(hm.real_density, hm.synth_density):
        p = np.round(rd * w * hm.n_real) + smoothing
        q = np.round(sd * w * hm.n_synth) + smoothing
        vals.append(kl_divergence(p / p.sum(), q / q.sum()))
    return float(np.mean(vals))


# Keys in report order, with the row names used in the printed table.
REPORT_FIELDS = (
    ("dtw", "DTW distance between average ECG beats"),
    ("frechet", "Fréchet distance between average ECG beats"),
    ("euclidean", "Euclidean distance between average ECG beats"),
    ("rmse", "RMSE between average ECG beats"),
    ("mae", "MAE between average ECG beats"),
    ("mse", "MSE between average ECG beats"),
    ("prd", "PRD between average ECG beats"),
    ("avg_kl", "Average KL Divergence"),
    ("avg_js", "Average JS Divergence"),
    ("avg_mmd", "Average MMD"),
    ("avg_wasserstein", "Average Wasserstein Distance"),
    ("avg_ks", "Average KS Statistic"),
    ("avg_mean_diff", "Average Mean Difference"),
    ("avg_var_diff", "Average Variance Difference"),
    ("avg_skew_diff", "Average Skewness Difference"),
)


@dataclass(frozen=True)
class MetricReport:
    values: dict

    def rows(self):
        return [(key, name, self.values[key]) for key, name in REPORT_FIELDS]


def metric_report(real_beats, synth_beats, bins: int = BINS, smoothing: float = SMOOTHING,
                  max_mmd_samples: int = MAX_MMD_SAMPLES) -> MetricReport:
    """Shape distances between average beats plus per-timestep averages.

    Moment differences are averaged in absolute value, so the average mean
    difference equals the MAE between the average beats.
    """
    r, s = _beats(real_beats), _beats(synth_beats)
    if r.shape[1] != s.shape[1]:
        raise LengthMismatch(f"beat lengths differ: {r.shape[1]} vs {s.shape[1]}")
    mr, ms = r.mean(axis=0), s.mean(axis=0)
    vals = {"dtw": dtw(mr, ms), "frechet": frechet(mr, ms)}
    vals.update(pointwise_errors(mr, ms))
    per = [divergences(r[:, t], s[:, t], bins, smoothing, max_mmd_samples=max_mmd_samples)
           for t in range(r.shape[1])]

    def avg(key, absolute=False):
        v = np.array([d[key] for d in per])
        return float(np.mean(np.abs(v) if absolute else v))

    vals.update({
        "avg_kl": avg("kl"), "avg_js": avg("js"), "avg_mmd": avg("mmd"),
        "avg_wasserstein": avg("wasserstein"), "avg_ks": avg("ks"),
        "avg_mean_diff": avg("mean_diff", True), "avg_var_diff": avg("var_diff", True),
        "avg_skew_diff": avg("skew_diff", True),
    })
    return MetricReport({k: vals[k] for k, _ in REPORT_FIELDS})


def average_kl(real_beats, synth_beats, bins: int = BINS, smoothing: float = SMOOTHING) -> float:
    """Mean over timesteps of KL(real || synth); the cheap part of the report."""
    r, s = _beats(real_beats), _beats(synth_beats)
    vals = []
    for t in range(r.shape[1]):
        edges = _edges(r[:, t], s[:, t], bins)
        vals.append(kl_divergence(_probs(r[:, t], edges, smoothing), _probs(s[:, t], edges, smoothing)))
    return float(np.mean(vals))


FEATURE_METRICS = ("kl", "mmd", "wasserstein", "ks", "mean_diff")


def feature_metric_table(real, synth, fs: int = 128) -> dict:
    """Per-feature divergences between two trajectories with a shared schema.

    Interval features also get ``mean_diff_samples`` (the ms difference
    converted to samples at ``fs``).
    """
    if tuple(real.schema) != tuple(synth.schema):
        raise LengthMismatch("trajectories have different schemas")
    out = {}
    for j, name in enumerate(real.schema):
        d = divergences(real.values[:, j], synth.values[:, j])
        row = {k: d[k] for k in FEATURE_METRICS}
        row["mean_diff"] = abs(row["mean_diff"])
        if name.endswith("_Int"):
            row["mean_diff_samples"] = row["mean_diff"] * fs / 1000.0
        out[name] = row
    return out
