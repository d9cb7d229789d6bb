"""Pipeline configuration and recording manifest.

Both load from JSON. Every config field has a default and unknown keys
are rejected, so a typo never silently falls back to a default.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from .assembler import MatchWeights, SmoothingConfig
from .core import BeatWindow, DEFAULT_FS, RandomSource
from .delineation import DEFAULT_SCHEMA
from .errors import FormatError
from .store import Exhaustive, Sampled


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise FormatError(f"{where} must be a JSON object")
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise FormatError(f"unknown {where} keys: {', '.join(extra)}")


@dataclass(frozen=True)
class Manifest:
    fs: int = DEFAULT_FS
    channel_name: str = "ECG"
    units: str = "mV"
    source: str = ""
    pre_r: int = 60
    post_r: int = 120

    def __post_init__(self):
        if not isinstance(self.fs, int) or isinstance(self.fs, bool) or self.fs <= 0:
            raise FormatError(f"manifest fs must be a positive integer, got {self.fs!r}")
        if self.units != "mV":
            raise FormatError(f'manifest units must be "mV", got {self.units!r}')
        BeatWindow(self.pre_r, self.post_r)

    @property
    def window(self) -> BeatWindow:
        return BeatWindow(self.pre_r, self.post_r)

    def to_dict(self) -> dict:
        return {"fs": self.fs, "channel_name": self.channel_name, "units": self.units,
                "source": self.source, "window": {"pre_r": self.pre_r, "post_r": self.post_r}}

    @classmethod
    def from_dict(cls, d) -> "Manifest":
        _check_keys(d, ("fs", "channel_name", "units", "source", "window"), "manifest")
        if "units" not in d:
            raise FormatError('manifest must state units "mV"')
        w = d.get("window", {})
        _check_keys(w, ("pre_r", "post_r"), "manifest window")
        try:
            return cls(d.get("fs", DEFAULT_FS), str(d.get("channel_name", "ECG")), d["units"],
                       str(d.get("source", "")), int(w.get("pre_r", 60)), int(w.get("post_r", 120)))
        except (TypeError, ValueError) as e:
            raise FormatError(f"invalid manifest: {e}") from None


@dataclass(frozen=True)
class MatcherConfig:
    mode: str = "sampled"  # or "exhaustive"
    batch: int = 16
    max: int = 64
    weights: Optional[dict] = None  # None means unit weights on shared features
    standardize: bool = True

    def match_mode(self, rng: RandomSource):
        if self.mode == "exhaustive":
            return Exhaustive()
        if self.mode == "sampled":
            return Sampled(self.batch, self.max, rng)
        raise FormatError(f"unknown matcher mode {self.mode!r}")

    def match_weights(self, features) -> MatchWeights:
        if self.weights is None:
            return MatchWeights.uniform(features, self.standardize)
        return MatchWeights(dict(self.weights), self.standardize)


@dataclass(frozen=True)
class MetricConfig:
    bins: int = 50
    smoothing: float = 1e-10
    kernel: str = "rbf"
    max_mmd_samples: int = 500


@dataclass(frozen=True)
class PipelineConfig:
    """All knobs of the end-to-end pipeline.

    ``store_size`` is the number of generated beats per label.
    """

    seed: int = 0
    pre_r: int = 60
    post_r: int = 120
    fs: int = DEFAULT_FS
    schema: tuple = DEFAULT_SCHEMA
    matcher: MatcherConfig = field(default_factory=MatcherConfig)
    crossfade_max: int = 8
    feature_model: str = "copula_var"  # or "block_bootstrap"
    store_size: int = 10000
    template_components: int = 5
    window_beats: int = 5
    split: float = 0.7
    metrics: MetricConfig = field(default_factory=MetricConfig)

    def __post_init__(self):
        object.__setattr__(self, "schema", tuple(self.schema))
        if self.feature_model not in ("copula_var", "block_bootstrap"):
            raise FormatError(f"unknown feature model {self.feature_model!r}")
        if self.matcher.mode not in ("sampled", "exhaustive"):
            raise FormatError(f"unknown matcher mode {self.matcher.mode!r}")
        if self.metrics.kernel != "rbf":
            raise FormatError("only the rbf kernel is supported")
        if self.store_size < 1 or self.window_beats < 1 or not 0.0 < self.split < 1.0:
            raise FormatError("store_size and window_beats must be >= 1 and split in (0, 1)")
        BeatWindow(self.pre_r, self.post_r)

    @property
    def window(self) -> BeatWindow:
        return BeatWindow(self.pre_r, self.post_r)

    @property
    def smoothing(self) -> SmoothingConfig:
        return SmoothingConfig(self.crossfade_max)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema"] = list(self.schema)
        return d

    @classmethod
    def from_dict(cls, d) -> "PipelineConfig":
        _check_keys(d, [f.name for f in fields(cls)], "config")
        d = dict(d)
        try:
            if "matcher" in d:
                _check_keys(d["matcher"], [f.name for f in fields(MatcherConfig)], "matcher")
                d["matcher"] = MatcherConfig(**d["matcher"])
            if "metrics" in d:
                _check_keys(d["metrics"], [f.name for f in fields(MetricConfig)], "metrics")
                d["metrics"] = MetricConfig(**d["metrics"])
            return cls(**d)
        except (TypeError, ValueError) as e:
            raise FormatError(f"invalid config: {e}") from None


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise FormatError(e.msg, e.lineno) from None


def load_config(path=None) -> PipelineConfig:
    return PipelineConfig() if path is None else PipelineConfig.from_dict(load_json(path))


def load_manifest(path) -> Manifest:
    return Manifest.from_dict(load_json(path))
