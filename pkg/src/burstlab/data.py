"""Event-grid data model and events-CSV ingest.

Activity sequences live on an assignment x student grid. Only a subset of
pairs is observed; each observed pair carries a strictly increasing list of
timestamps (hours) and an observation horizon.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "EventSequence",
    "EventDataset",
    "HawkesParams",
    "load_events_csv",
    "write_events_csv",
    "TIE_JITTER_HOURS",
]

#: Bump applied to tied timestamps at ingest when jittering is enabled (hours).
TIE_JITTER_HOURS = 1e-6

EVENTS_CSV_HEADER = ["assignment_id", "student_id", "timestamp_hours"]


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EventSequence:
    """Timestamps of one (assignment, student) pair, observed on [0, horizon].

    Parameters
    ----------
    pair : (int, int)
        Assignment index and student index.
    times : array_like
        Strictly increasing event times in hours, all >= 0.
    horizon : float
        End of the observation window; must be >= the last event time.
    """

    pair: tuple[int, int]
    times: np.ndarray
    horizon: float

    def __post_init__(self):
        i, j = self.pair
        if i < 0 or j < 0:
            raise ValueError(f"pair indices must be nonnegative, got {self.pair}")
        object.__setattr__(self, "pair", (int(i), int(j)))

        times = np.atleast_1d(np.asarray(self.times, dtype=np.float64))
        if times.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if not np.all(np.isfinite(times)):
            raise ValueError("times must be finite")
        if times.size and times[0] < 0.0:
            raise ValueError("times must be nonnegative")
        if times.size > 1 and not np.all(np.diff(times) > 0.0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", _frozen_array(times))

        horizon = float(self.horizon)
        if not np.isfinite(horizon) or horizon < 0.0:
            raise ValueError("horizon must be finite and nonnegative")
        if times.size and horizon < times[-1]:
            raise ValueError(
                f"horizon {horizon} is before the last event at {times[-1]}"
            )
        object.__setattr__(self, "horizon", horizon)

    @property
    def n_events(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class EventDataset:
    """Sparse grid of event sequences with an observed-pair mask.

    ``observed[i, j]`` is True exactly when ``(i, j)`` is a key of
    ``sequences``; the mask is derived when not supplied. Instances are
    immutable after construction and safe to share across threads.
    """

    n_assignments: int
    n_students: int
    sequences: dict[tuple[int, int], EventSequence]
    observed: np.ndarray | None = None

    def __post_init__(self):
        n, m = int(self.n_assignments), int(self.n_students)
        if n <= 0 or m <= 0:
            raise ValueError("grid dimensions must be positive")
        object.__setattr__(self, "n_assignments", n)
        object.__setattr__(self, "n_students", m)

        sequences = dict(self.sequences)
        for pair, seq in sequences.items():
            i, j = pair
            if not (0 <= i < n and 0 <= j < m):
                raise ValueError(f"pair {pair} outside the {n}x{m} grid")
            if not isinstance(seq, EventSequence):
                raise TypeError("sequences values must be EventSequence")
            if seq.pair != pair:
                raise ValueError(f"sequence at key {pair} labelled {seq.pair}")
        object.__setattr__(self, "sequences", sequences)

        if self.observed is None:
            mask = np.zeros((n, m), dtype=bool)
            for i, j in sequences:
                mask[i, j] = True
        else:
            mask = np.asarray(self.observed, dtype=bool)
            if mask.shape != (n, m):
                raise ValueError("observed mask shape mismatch")
            keys = {pair for pair in sequences}
            masked = {(int(i), int(j)) for i, j in zip(*np.nonzero(mask))}
            if keys != masked:
                raise ValueError("observed mask disagrees with sequence keys")
            mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "observed", mask)

    @property
    def n_observed(self) -> int:
        return len(self.sequences)

    @property
    def total_events(self) -> int:
        return sum(seq.n_events for seq in self.sequences.values())

    def observed_pairs(self) -> list[tuple[int, int]]:
        return sorted(self.sequences)


@dataclass(frozen=True)
class HawkesParams:
    """Per-pair Hawkes parameters with one shared decay rate.

    ``excitement[i, j]`` is the expected number of offspring per event
    (dimensionless), ``base_rate[i, j]`` the externally driven rate in
    events/hour, and ``decay`` the kernel decay rate in 1/hours.
    """

    excitement: np.ndarray
    base_rate: np.ndarray
    decay: float

    def __post_init__(self):
        exc = np.asarray(self.excitement, dtype=np.float64)
        base = np.asarray(self.base_rate, dtype=np.float64)
        if exc.ndim != 2 or base.shape != exc.shape:
            raise ValueError("excitement and base_rate must be equal-shape matrices")
        if not np.all(np.isfinite(exc)) or not np.all(np.isfinite(base)):
            raise ValueError("parameter matrices must be finite")
        if exc.min(initial=0.0) < 0.0 or base.min(initial=0.0) < 0.0:
            raise ValueError("parameter matrices must be nonnegative")
        decay = float(self.decay)
        if not np.isfinite(decay) or decay <= 0.0:
            raise ValueError("decay must be positive")
        object.__setattr__(self, "excitement", _frozen_array(exc))
        object.__setattr__(self, "base_rate", _frozen_array(base))
        object.__setattr__(self, "decay", decay)

    @property
    def shape(self) -> tuple[int, int]:
        return self.excitement.shape


def _dedupe_times(times: list[float], jitter_ties: bool) -> np.ndarray:
    arr = np.sort(np.asarray(times, dtype=np.float64))
    if arr.size > 1 and np.any(np.diff(arr) <= 0.0):
        if not jitter_ties:
            raise ValueError(
                "tied timestamps in events file; re-run with jitter_ties=True "
                "to separate ties by 1e-6 h"
            )
        for idx in range(1, arr.size):
            if arr[idx] <= arr[idx - 1]:
                arr[idx] = arr[idx - 1] + TIE_JITTER_HOURS
    return arr


def load_events_csv(
    path,
    horizon: float | None = None,
    jitter_ties: bool = False,
    assignment_ids: list[str] | None = None,
    student_ids: list[str] | None = None,
) -> tuple[EventDataset, list[str], list[str]]:
    """Read an events CSV into an :class:`EventDataset`.

    The file must carry the header ``assignment_id,student_id,timestamp_hours``.
    String ids are mapped to dense indices in first-seen order unless explicit
    id lists are supplied (then unknown ids are an error). Each pair's horizon
    defaults to its last event time; ``horizon`` overrides it globally.

    Returns the dataset plus the assignment and student id lists defining the
    index mapping.
    """
    path = Path(path)
    fixed_ids = assignment_ids is not None or student_ids is not None
    if fixed_ids and (assignment_ids is None or student_ids is None):
        raise ValueError("supply both id lists or neither")
    aids = list(assignment_ids) if assignment_ids is not None else []
    sids = list(student_ids) if student_ids is not None else []
    a_index = {a: i for i, a in enumerate(aids)}
    s_index = {s: j for j, s in enumerate(sids)}

    raw: dict[tuple[int, int], list[float]] = {}
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != EVENTS_CSV_HEADER:
            raise ValueError(
                f"events file must start with header {','.join(EVENTS_CSV_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ValueError(f"line {lineno}: expected 3 fields, got {len(row)}")
            aid, sid, stamp = row[0].strip(), row[1].strip(), row[2]
            if aid not in a_index:
                if fixed_ids:
                    raise ValueError(f"line {lineno}: unknown assignment id {aid!r}")
                a_index[aid] = len(aids)
                aids.append(aid)
            if sid not in s_index:
                if fixed_ids:
                    raise ValueError(f"line {lineno}: unknown student id {sid!r}")
                s_index[sid] = len(sids)
                sids.append(sid)
            try:
                t = float(stamp)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad timestamp {stamp!r}") from exc
            raw.setdefault((a_index[aid], s_index[sid]), []).append(t)

    if not raw:
        raise ValueError(f"no events found in {path}")

    sequences = {}
    for pair, times in raw.items():
        arr = _dedupe_times(times, jitter_ties)
        pair_horizon = float(arr[-1]) if horizon is None else float(horizon)
        sequences[pair] = EventSequence(pair=pair, times=arr, horizon=pair_horizon)
    dataset = EventDataset(
        n_assignments=len(aids), n_students=len(sids), sequences=sequences
    )
    return dataset, aids, sids


def write_events_csv(path, dataset: EventDataset, assignment_ids, student_ids) -> None:
    """Write events in the canonical CSV format, ordered by (pair, time).

    Timestamps are serialized with 17 significant digits so a write/read
    round trip reproduces them exactly.
    """
    if len(assignment_ids) != dataset.n_assignments:
        raise ValueError("assignment id list length mismatch")
    if len(student_ids) != dataset.n_students:
        raise ValueError("student id list length mismatch")
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(EVENTS_CSV_HEADER)
        for (i, j) in dataset.observed_pairs():
            seq = dataset.sequences[(i, j)]
            for t in seq.times:
                writer.writerow(
                    [assignment_ids[i], student_ids[j], format(t, ".17g")]
                )
