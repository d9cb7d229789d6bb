"""In-memory pool of candidate beats queried by the matcher."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .core import BeatLabel, BeatRecord, BeatWindow, RandomSource, as_random_source
from .errors import DuplicateId, EmptyInput, LabelEmpty, LengthMismatch, MissingDescriptor


@dataclass(frozen=True)
class Exhaustive:
    kind = "exhaustive"


@dataclass
class Sampled:
    """Random candidates without replacement, ``batch`` at a time, at most ``max``."""

    batch: int = 16
    max: int = 64
    rng: Optional[RandomSource] = None

    kind = "sampled"

    def __post_init__(self):
        if self.batch < 1 or self.max < 1:
            raise ValueError("batch and max must be >= 1")
        self.rng = as_random_source(self.rng)


MatchMode = Union[Exhaustive, Sampled]


@dataclass(frozen=True)
class BeatStore:
    beats: tuple
    schema: tuple
    window: BeatWindow
    fs: int
    descriptor_mean: np.ndarray
    descriptor_std: np.ndarray
    # row-aligned with ``beats``
    descriptors: np.ndarray = field(repr=False)
    ids: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.beats)

    def positions(self, label) -> np.ndarray:
        return np.flatnonzero(self.labels == int(BeatLabel.parse(label)))

    def count(self, label) -> int:
        return int(np.sum(self.labels == int(BeatLabel.parse(label))))

    @property
    def descriptor_stats(self) -> dict:
        return {k: (float(m), float(s))
                for k, m, s in zip(self.schema, self.descriptor_mean, self.descriptor_std)}

    def waveforms(self, positions=None) -> np.ndarray:
        idx = range(len(self.beats)) if positions is None else positions
        return np.stack([self.beats[i].waveform for i in idx])


def build_store(beats: Sequence[BeatRecord], schema: Sequence[str],
                window: Optional[BeatWindow] = None, fs: int = 128) -> BeatStore:
    """Index ``beats`` and compute per-feature mean and population std.

    Raises
    ------
    EmptyInput, MissingDescriptor, DuplicateId, LengthMismatch
    """
    beats = tuple(beats)
    if not beats:
        raise EmptyInput("a store needs at least one beat")
    schema = tuple(schema)
    length = window.length if window is not None else len(beats[0].waveform)
    if window is None:
        window = BeatWindow(length // 3, length - length // 3 - 1)
    ids = np.array([b.id for b in beats], dtype=np.int64)
    if np.unique(ids).size != ids.size:
        raise DuplicateId("beat ids must be unique")
    desc = np.empty((len(beats), len(schema)))
    for i, b in enumerate(beats):
        if len(b.waveform) != length:
            raise LengthMismatch(f"beat {b.id} has length {len(b.waveform)}, expected {length}")
        try:
            desc[i] = [b.descriptors[k] for k in schema]
        except KeyError as e:
            raise MissingDescriptor(f"beat {b.id} lacks descriptor {e.args[0]}") from None
    desc.setflags(write=False)
    labels = np.array([int(b.label) for b in beats], dtype=np.int64)
    return BeatStore(
        beats=beats,
        schema=schema,
        window=window,
        fs=int(fs),
        descriptor_mean=desc.mean(axis=0),
        descriptor_std=desc.std(axis=0),
        descriptors=desc,
        ids=ids,
        labels=labels,
    )


def candidate_positions(store: BeatStore, label, mode: MatchMode = Exhaustive()) -> list:
    """Batches of row positions into ``store`` for ``label``."""
    pos = store.positions(label)
    if pos.size == 0:
        raise LabelEmpty(f"store has no {BeatLabel.parse(label).text} beats")
    if isinstance(mode, Exhaustive):
        return [pos]
    take = min(mode.max, pos.size)
    chosen = pos[mode.rng.generator.choice(pos.size, size=take, replace=False)]
    return [chosen[start : start + mode.batch] for start in range(0, take, mode.batch)]


def candidates(store: BeatStore, label, mode: MatchMode = Exhaustive()) -> Iterator[BeatRecord]:
    """Iterate candidate beats of ``label`` under ``mode``."""
    batches = candidate_positions(store, label, mode)
    return (store.beats[i] for batch in batches for i in batch)
