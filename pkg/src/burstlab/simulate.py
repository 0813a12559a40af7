"""Ground-truth generation: thinning simulation and the missingness protocol.

A synthetic grid draws each student's cluster uniformly, the per-pair
excitement from that cluster's Gamma source, and the base rate uniformly,
then simulates every pair by Ogata thinning. The split step removes a
random fraction of students' last two assignments entirely (the unseen
set) and truncates every remaining pair to its earliest fraction of events
(train), holding the rest out (seen test).

All randomness is keyed off one integer seed through independent
per-purpose streams, so outputs are pure functions of (spec, seed) and
per-pair simulations can run in any order or concurrently without changing
the result.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import EventDataset, EventSequence

__all__ = [
    "SyntheticSpec",
    "GroundTruth",
    "SplitResult",
    "thinning_sample",
    "generate_dataset",
    "split_dataset",
    "seeded_stream",
]

#: Simulation aborts once a single pair accumulates this many events.
MAX_EVENTS_PER_PAIR = 10**6

_DEFAULT_CLUSTER_GAMMAS = ((4.0, 0.025), (4.0, 0.1), (4.0, 0.2))


@dataclass(frozen=True)
class SyntheticSpec:
    """Generator parameters for a cluster-structured synthetic grid.

    Cluster Gamma means (shape * scale) must stay below 1 so pairs are
    subcritical on average; individual draws are additionally redrawn until
    they fall below ``max_excitement``, since a single supercritical pair
    would blow past the event cap on long horizons.
    """

    n_assignments: int = 10
    n_students: int = 60
    n_clusters: int = 3
    cluster_gammas: tuple[tuple[float, float], ...] = _DEFAULT_CLUSTER_GAMMAS
    base_rate_range: tuple[float, float] = (0.5, 2.0)
    decay: float = 1.0
    horizon: float = 200.0
    unseen_ratio: float = 0.1
    train_fraction: float = 0.7
    seed: int = 0
    max_excitement: float = 0.95

    def __post_init__(self):
        if self.n_assignments <= 0 or self.n_students <= 0:
            raise ValueError("grid dimensions must be positive")
        if not 1 <= self.n_clusters <= self.n_students:
            raise ValueError("n_clusters must lie in [1, n_students]")
        gammas = tuple((float(s), float(t)) for s, t in self.cluster_gammas)
        if len(gammas) != self.n_clusters:
            raise ValueError("one (shape, scale) pair per cluster required")
        for s, t in gammas:
            if s <= 0.0 or t <= 0.0:
                raise ValueError("cluster gamma parameters must be positive")
            if s * t >= 1.0:
                raise ValueError(
                    f"cluster gamma mean {s * t} >= 1 gives supercritical pairs"
                )
        object.__setattr__(self, "cluster_gammas", gammas)
        lo, hi = self.base_rate_range
        if lo < 0.0 or hi < lo:
            raise ValueError("base_rate_range must satisfy 0 <= lo <= hi")
        if self.decay <= 0.0:
            raise ValueError("decay must be positive")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if not 0.0 <= self.unseen_ratio < 1.0:
            raise ValueError("unseen_ratio must lie in [0, 1)")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if not 0.0 < self.max_excitement < 1.0:
            raise ValueError("max_excitement must lie in (0, 1)")


@dataclass(frozen=True)
class GroundTruth:
    """True generator parameters behind a synthetic dataset."""

    excitement: np.ndarray
    base_rate: np.ndarray
    labels: np.ndarray
    decay: float

    def __post_init__(self):
        exc = np.asarray(self.excitement, dtype=np.float64)
        base = np.asarray(self.base_rate, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.intp)
        if exc.min(initial=0.0) < 0.0 or base.min(initial=0.0) < 0.0:
            raise ValueError("true parameter matrices must be nonnegative")
        if labels.min(initial=0) < 0:
            raise ValueError("labels must be nonnegative")
        object.__setattr__(self, "excitement", exc)
        object.__setattr__(self, "base_rate", base)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "decay", float(self.decay))


@dataclass(frozen=True)
class SplitResult:
    """Outcome of the missingness protocol."""

    train: EventDataset
    seen_test: dict[tuple[int, int], np.ndarray]
    unseen_pairs: list[tuple[int, int]]


def thinning_sample(
    base_rate: float,
    excitement: float,
    decay: float,
    horizon: float,
    rng: np.random.Generator,
    pair: tuple[int, int] = (0, 0),
) -> EventSequence:
    """Simulate one pair on [0, horizon] by Ogata thinning.

    The dominating rate is the intensity just after the latest event, valid
    because the exponential-kernel intensity only decays between events; it
    is tightened again after every accepted or rejected candidate.
    """
    base_rate = float(base_rate)
    excitement = float(excitement)
    decay = float(decay)
    horizon = float(horizon)
    if base_rate < 0.0 or excitement < 0.0:
        raise ValueError("rates must be nonnegative")
    if decay <= 0.0 or horizon <= 0.0:
        raise ValueError("decay and horizon must be positive")
    if excitement >= 1.0:
        warnings.warn(
            f"excitement {excitement} >= 1 gives a supercritical cascade; "
            f"simulation aborts at {MAX_EVENTS_PER_PAIR} events",
            RuntimeWarning,
            stacklevel=2,
        )

    times: list[float] = []
    jump = excitement * decay
    bound = base_rate  # intensity at 0+, no history yet
    anchor = 0.0  # time at which `bound` is the post-update intensity
    t = 0.0
    while bound > 0.0:
        t += rng.exponential() / bound
        if t > horizon:
            break
        rate = base_rate + (bound - base_rate) * math.exp(-decay * (t - anchor))
        anchor = t
        # the decayed rate is the new valid bound whether or not we accept
        if rng.uniform() * bound <= rate:
            if times and t <= times[-1]:  # guard against rounding collisions
                bound = rate
                continue
            times.append(t)
            if len(times) >= MAX_EVENTS_PER_PAIR:
                raise RuntimeError(
                    f"pair {pair} exceeded {MAX_EVENTS_PER_PAIR} events "
                    f"(excitement {excitement}, horizon {horizon})"
                )
            bound = rate + jump
        else:
            bound = rate
    return EventSequence(pair=pair, times=np.asarray(times), horizon=horizon)


def seeded_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator derived from one root seed and an integer key."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _truncated_gamma(
    rng: np.random.Generator, shape: float, scale: float, upper: float, size: int
) -> np.ndarray:
    out = rng.gamma(shape, scale, size=size)
    bad = out >= upper
    while bad.any():
        out[bad] = rng.gamma(shape, scale, size=int(bad.sum()))
        bad = out >= upper
    return out


def generate_dataset(
    spec: SyntheticSpec, seed: int | None = None
) -> tuple[EventDataset, GroundTruth]:
    """Draw true parameters and simulate every pair of the grid.

    ``seed`` overrides ``spec.seed``. Parameter draws and each pair's
    simulation use separate derived streams keyed on the pair index.
    """
    root = spec.seed if seed is None else int(seed)
    n, m, k = spec.n_assignments, spec.n_students, spec.n_clusters

    rng = seeded_stream(root, 0)
    labels = rng.integers(0, k, size=m)
    excitement = np.empty((n, m))
    for j in range(m):
        shape, scale = spec.cluster_gammas[labels[j]]
        excitement[:, j] = _truncated_gamma(
            rng, shape, scale, spec.max_excitement, n
        )
    lo, hi = spec.base_rate_range
    base_rate = rng.uniform(lo, hi, size=(n, m))

    sequences = {}
    for i in range(n):
        for j in range(m):
            pair_rng = seeded_stream(root, 1, i * m + j)
            sequences[(i, j)] = thinning_sample(
                base_rate[i, j],
                excitement[i, j],
                spec.decay,
                spec.horizon,
                pair_rng,
                pair=(i, j),
            )
    dataset = EventDataset(n_assignments=n, n_students=m, sequences=sequences)
    truth = GroundTruth(
        excitement=excitement, base_rate=base_rate, labels=labels, decay=spec.decay
    )
    return dataset, truth


def split_dataset(
    dataset: EventDataset,
    unseen_ratio: float,
    train_fraction: float,
    rng: np.random.Generator,
) -> SplitResult:
    """Apply the missingness protocol to a fully simulated grid.

    A ``ceil(unseen_ratio * n_students)``-sized random subset of students
    loses its last two assignments entirely; every other observed pair keeps
    its earliest ``ceil(train_fraction * n)`` events for training (train
    horizon = last kept event) and holds the remainder out. Together the
    train events, held-out events and unseen pairs partition the input
    exactly.
    """
    if not 0.0 <= unseen_ratio < 1.0:
        raise ValueError("unseen_ratio must lie in [0, 1)")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n, m = dataset.n_assignments, dataset.n_students

    n_selected = math.ceil(unseen_ratio * m)
    selected = (
        sorted(int(j) for j in rng.choice(m, size=n_selected, replace=False))
        if n_selected
        else []
    )
    last_two = sorted({max(n - 2, 0), n - 1})
    unseen = [
        (i, j) for j in selected for i in last_two if (i, j) in dataset.sequences
    ]
    unseen_set = set(unseen)

    train_sequences = {}
    seen_test: dict[tuple[int, int], np.ndarray] = {}
    for pair in dataset.observed_pairs():
        if pair in unseen_set:
            continue
        seq = dataset.sequences[pair]
        n_train = math.ceil(train_fraction * seq.n_events)
        head = seq.times[:n_train]
        train_horizon = float(head[-1]) if n_train else 0.0
        train_sequences[pair] = EventSequence(
            pair=pair, times=head, horizon=train_horizon
        )
        seen_test[pair] = np.array(seq.times[n_train:], copy=True)
    if not train_sequences:
        raise ValueError("split leaves no observed pairs to train on")
    train = EventDataset(n_assignments=n, n_students=m, sequences=train_sequences)
    return SplitResult(train=train, seen_test=seen_test, unseen_pairs=unseen)
