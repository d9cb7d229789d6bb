"""Generative models over feature trajectories.

:class:`CopulaVarModel` maps each feature through its empirical marginal to
a latent standard-normal coordinate, models the latent rows as a stationary
VAR(1) process, and runs a two-state Markov chain over beat labels.
Marginals are kept per label when a label has enough rows, so abnormal
beats keep their own interval and amplitude distributions.

:class:`BlockBootstrapModel` is the distribution-free baseline: it splices
contiguous blocks of the training trajectory.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import ndtr, ndtri
from scipy.stats import rankdata

from .core import BeatLabel, RandomSource, as_random_source
from .delineation import FeatureTrajectory
from .errors import DegenerateFeatureWarning, InsufficientData

MIN_LABEL_ROWS = 20
PSD_FLOOR = 1e-10
MAX_SPECTRAL_RADIUS = 0.99
BLOCK_LENGTH = 8


@dataclass(frozen=True)
class MarginalModel:
    """Empirical marginal with a piecewise-linear inverse CDF.

    ``support`` holds the distinct sorted training values and ``probs`` their
    mid-rank cumulative probabilities. The inverse CDF interpolates between
    them and is clamped to ``[min, max]`` of the training data.
    """

    feature_name: str
    support: np.ndarray
    probs: np.ndarray

    @classmethod
    def from_samples(cls, name, values) -> "MarginalModel":
        v = np.sort(np.asarray(values, dtype=float))
        if v.size == 0:
            raise InsufficientData(f"no values for {name}")
        uniq, counts = np.unique(v, return_counts=True)
        upper = np.cumsum(counts)
        probs = (upper - counts / 2.0) / v.size
        return cls(name, uniq, probs)

    @property
    def degenerate(self) -> bool:
        return self.support.size == 1

    def cdf(self, x):
        if self.degenerate:
            return np.full(np.shape(x), 0.5)
        return np.interp(x, self.support, self.probs)

    def inverse_cdf(self, u):
        if self.degenerate:
            return np.full(np.shape(u), self.support[0])
        return np.interp(u, self.probs, self.support)

    def to_dict(self):
        return {"feature": self.feature_name, "support": self.support.tolist(),
                "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["feature"], np.array(d["support"], float), np.array(d["probs"], float))


def nearest_psd(m: np.ndarray, floor: float = PSD_FLOOR, unit_diagonal: bool = False) -> np.ndarray:
    """Symmetrise, clip eigenvalues at ``floor`` and optionally rescale to unit diagonal."""
    m = 0.5 * (m + m.T)
    w, v = np.linalg.eigh(m)
    out = (v * np.maximum(w, floor)) @ v.T
    out = 0.5 * (out + out.T)
    if unit_diagonal:
        s = np.sqrt(np.diag(out))
        out = out / np.outer(s, s)
        np.fill_diagonal(out, 1.0)
    return out


def _psd_sqrt(m):
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    return v * np.sqrt(np.maximum(w, 0.0))


def spectral_radius(a: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(a)))) if a.size else 0.0


def _latent_scores(values: np.ndarray) -> np.ndarray:
    n = values.shape[0]
    u = (rankdata(values, axis=0) - 0.5) / n
    return ndtri(u)


def _label_transition(labels) -> np.ndarray:
    counts = np.ones((2, 2))
    for a, b in zip(labels[:-1], labels[1:]):
        counts[a, b] += 1
    return counts / counts.sum(axis=1, keepdims=True)


def _stationary(p: np.ndarray) -> np.ndarray:
    a, b = p[0, 1], p[1, 0]
    if a + b == 0:
        return np.array([1.0, 0.0])
    return np.array([b, a]) / (a + b)


@dataclass(frozen=True)
class CopulaVarModel:
    schema: tuple
    marginals: tuple
    latent_corr: np.ndarray
    lag1_coeff: np.ndarray
    noise_cov: np.ndarray
    label_transition: np.ndarray
    label_marginals: dict = field(default_factory=dict)
    degenerate: tuple = ()

    kind = "copula_var"

    def marginal(self, label: int, j: int) -> MarginalModel:
        per = self.label_marginals.get(int(label))
        return per[j] if per is not None else self.marginals[j]

    def stationary_cov(self) -> np.ndarray:
        return linalg.solve_discrete_lyapunov(self.lag1_coeff, self.noise_cov)

    def sample(self, n_beats: int, rng) -> FeatureTrajectory:
        """Draw a trajectory of ``n_beats`` rows; deterministic given ``rng``."""
        if n_beats < 1:
            raise ValueError("n_beats must be >= 1")
        gen = as_random_source(rng).generator
        d = len(self.schema)

        label_u = gen.random(n_beats)
        labels = np.empty(n_beats, dtype=np.int64)
        p0 = _stationary(self.label_transition)
        labels[0] = int(label_u[0] >= p0[0])
        for i in range(1, n_beats):
            labels[i] = int(label_u[i] >= self.label_transition[labels[i - 1], 0])

        g = gen.standard_normal((n_beats, d))
        stat = self.stationary_cov()
        z = np.empty((n_beats, d))
        z[0] = _psd_sqrt(stat) @ g[0]
        noise = g[1:] @ _psd_sqrt(self.noise_cov).T
        a = self.lag1_coeff
        for i in range(1, n_beats):
            z[i] = a @ z[i - 1] + noise[i - 1]
        sd = np.sqrt(np.maximum(np.diag(stat), PSD_FLOOR))
        u = ndtr(z / sd)

        out = np.empty((n_beats, d))
        for j in range(d):
            for lab in (0, 1):
                m = labels == lab
                if m.any():
                    out[m, j] = self.marginal(lab, j).inverse_cdf(u[m, j])
        return FeatureTrajectory(out, labels, self.schema)

    def to_dict(self):
        return {
            "kind": self.kind,
            "schema": list(self.schema),
            "marginals": [m.to_dict() for m in self.marginals],
            "label_marginals": {
                BeatLabel(k).text: [m.to_dict() for m in v]
                for k, v in sorted(self.label_marginals.items())
            },
            "latent_corr": self.latent_corr.tolist(),
            "lag1_coeff": self.lag1_coeff.tolist(),
            "noise_cov": self.noise_cov.tolist(),
            "label_transition": self.label_transition.tolist(),
            "degenerate": list(self.degenerate),
        }

    @classmethod
    def from_dict(cls, d):
        schema = tuple(d["schema"])
        d_ = len(schema)

        def mat(key, shape):
            m = np.array(d[key], dtype=float)
            if m.shape != shape:
                raise ValueError(f"{key} has shape {m.shape}, expected {shape}")
            return m

        marg = tuple(MarginalModel.from_dict(m) for m in d["marginals"])
        if len(marg) != d_:
            raise ValueError("one marginal per feature required")
        lm = {int(BeatLabel.parse(k)): tuple(MarginalModel.from_dict(m) for m in v)
              for k, v in d.get("label_marginals", {}).items()}
        return cls(
            schema=schema,
            marginals=marg,
            latent_corr=mat("latent_corr", (d_, d_)),
            lag1_coeff=mat("lag1_coeff", (d_, d_)),
            noise_cov=mat("noise_cov", (d_, d_)),
            label_transition=mat("label_transition", (2, 2)),
            label_marginals=lm,
            degenerate=tuple(d.get("degenerate", ())),
        )


def fit(trajectory: FeatureTrajectory, min_rows_per_feature: int = 10) -> CopulaVarModel:
    """Fit a :class:`CopulaVarModel` to a trajectory of at least ``10 * d`` rows.

    Constant features are kept as point masses with a zeroed latent column
    and reported through :class:`DegenerateFeatureWarning`.
    """
    x = trajectory.values
    n, d = x.shape
    if n < min_rows_per_feature * d:
        raise InsufficientData(f"need at least {min_rows_per_feature * d} rows, got {n}")
    labels = trajectory.labels
    schema = trajectory.schema

    marginals = tuple(MarginalModel.from_samples(k, x[:, j]) for j, k in enumerate(schema))
    degenerate = tuple(k for k, m in zip(schema, marginals) if m.degenerate)
    if degenerate:
        warnings.warn(f"constant features modelled as point masses: {degenerate}",
                      DegenerateFeatureWarning, stacklevel=2)

    label_marginals = {}
    z = _latent_scores(x)
    counts = np.bincount(labels, minlength=2)
    if counts.min() > 0:
        rest = np.ones(n, dtype=bool)
        for lab in (0, 1):
            m = labels == lab
            if counts[lab] >= MIN_LABEL_ROWS:
                label_marginals[lab] = tuple(
                    MarginalModel.from_samples(k, x[m, j]) for j, k in enumerate(schema))
                z[m] = _latent_scores(x[m])
                rest &= ~m
        if label_marginals and rest.any():
            u = np.column_stack([marg.cdf(x[rest, j]) for j, marg in enumerate(marginals)])
            z[rest] = ndtri(u)
    deg_idx = [schema.index(k) for k in degenerate]
    z[:, deg_idx] = 0.0

    live = [j for j in range(d) if j not in deg_idx]
    corr = np.eye(d)
    if len(live) > 1:
        corr[np.ix_(live, live)] = np.corrcoef(z[:, live], rowvar=False)
    corr = nearest_psd(corr, unit_diagonal=True)

    z0, z1 = z[:-1], z[1:]
    a = np.linalg.lstsq(z0, z1, rcond=None)[0].T
    rho = spectral_radius(a)
    if rho >= 1.0:
        a = a * (MAX_SPECTRAL_RADIUS / rho)
    resid = z1 - z0 @ a.T
    q = resid.T @ resid / max(1, resid.shape[0] - 1)
    q[deg_idx, :] = 0.0
    q[:, deg_idx] = 0.0
    q = nearest_psd(q)

    return CopulaVarModel(
        schema=tuple(schema),
        marginals=marginals,
        latent_corr=corr,
        lag1_coeff=a,
        noise_cov=q,
        label_transition=_label_transition(labels),
        label_marginals=label_marginals,
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class BlockBootstrapModel:
    """Resamples contiguous blocks of the training trajectory."""

    trajectory: FeatureTrajectory
    block_length: int = BLOCK_LENGTH

    kind = "block_bootstrap"

    @property
    def schema(self):
        return self.trajectory.schema

    def sample(self, n_beats: int, rng) -> FeatureTrajectory:
        if n_beats < 1:
            raise ValueError("n_beats must be >= 1")
        gen = as_random_source(rng).generator
        n = len(self.trajectory)
        b = min(self.block_length, n)
        n_blocks = -(-n_beats // b)
        starts = gen.integers(0, n - b + 1, size=n_blocks)
        idx = (starts[:, None] + np.arange(b)[None, :]).ravel()[:n_beats]
        return self.trajectory.subset(idx)

    def to_dict(self):
        t = self.trajectory
        return {"kind": self.kind, "schema": list(t.schema), "block_length": self.block_length,
                "values": t.values.tolist(),
                "labels": [BeatLabel(int(l)).text for l in t.labels]}

    @classmethod
    def from_dict(cls, d):
        t = FeatureTrajectory(np.array(d["values"], float), d["labels"], tuple(d["schema"]))
        return cls(t, int(d["block_length"]))


def fit_block_bootstrap(trajectory: FeatureTrajectory, block_length: int = BLOCK_LENGTH):
    if len(trajectory) < 1:
        raise InsufficientData("empty trajectory")
    return BlockBootstrapModel(trajectory, block_length)


def sample(model, n_beats: int, rng: RandomSource) -> FeatureTrajectory:
    return model.sample(n_beats, rng)


def model_from_dict(d):
    kind = d.get("kind")
    if kind == CopulaVarModel.kind:
        return CopulaVarModel.from_dict(d)
    if kind == BlockBootstrapModel.kind:
        return BlockBootstrapModel.from_dict(d)
    raise ValueError(f"unknown model kind {kind!r}")


@dataclass(frozen=True)
class FeatureCorrelation:
    matrix: np.ndarray
    schema: tuple
    degenerate: tuple = ()


def feature_correlations(trajectory: FeatureTrajectory) -> FeatureCorrelation:
    """Pearson correlations between feature columns.

    Constant columns get zero off-diagonal entries and are listed in
    ``degenerate``.
    """
    x = trajectory.values
    if x.shape[0] < 3:
        raise InsufficientData("need at least 3 rows")
    sd = x.std(axis=0)
    live = sd > 0
    d = x.shape[1]
    c = np.eye(d)
    if live.sum() > 1:
        xs = (x[:, live] - x[:, live].mean(axis=0)) / sd[live]
        sub = xs.T @ xs / x.shape[0]
        sub = np.clip(sub, -1.0, 1.0)
        np.fill_diagonal(sub, 1.0)
        c[np.ix_(live, live)] = sub
    deg = tuple(k for k, ok in zip(trajectory.schema, live) if not ok)
    return FeatureCorrelation(c, trajectory.schema, deg)


def correlation_gap(a: FeatureTrajectory, b: FeatureTrajectory) -> float:
    """Frobenius norm of the correlation difference divided by ``d``."""
    ca = feature_correlations(a).matrix
    cb = feature_correlations(b).matrix
    return float(np.linalg.norm(ca - cb) / ca.shape[0])
