"""Exponential-kernel Hawkes intensity and the smooth negative log-likelihood.

The per-pair intensity is ``base_rate + excitement * decay * sum_k
exp(-decay * (t - t_k))`` over past events. A per-sequence recursion makes
the log term linear in the number of events, and a precomputed weight
matrix makes the compensator a single elementwise product, so repeated
objective/gradient evaluations inside the optimizer touch each event once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import EventDataset, EventSequence, HawkesParams

__all__ = [
    "EPS_LOG",
    "LikelihoodCache",
    "compute_recursion",
    "compute_compensator_weights",
    "build_cache",
    "intensity",
    "smooth_nll",
    "smooth_nll_grad",
]

#: Floor inside log(intensity); keeps the objective finite when both
#: parameters of a pair are zero. The gradient uses the floored intensity.
EPS_LOG = 1e-12


def _recursion_from_times(times: np.ndarray, decay: float) -> np.ndarray:
    # r[k] = sum_{u<k} exp(-decay * (t_k - t_u)), computed in log space via
    # cumulative logaddexp so large time spans underflow to 0 instead of
    # overflowing the running sum.
    n = times.size
    out = np.zeros(n)
    if n > 1:
        scaled = decay * times
        acc = np.logaddexp.accumulate(scaled)
        out[1:] = np.exp(acc[:-1] - scaled[1:])
    return out


def compute_recursion(seq: EventSequence, decay: float) -> np.ndarray:
    """Per-event excitation state of one sequence.

    Entry ``k`` equals ``sum_{u<k} exp(-decay * (t_k - t_u))``; the first
    entry is 0. Length equals the event count.
    """
    if decay <= 0.0:
        raise ValueError("decay must be positive")
    return _recursion_from_times(seq.times, float(decay))


def compute_compensator_weights(dataset: EventDataset, decay: float) -> np.ndarray:
    """Integrated-kernel weights, one entry per pair; zero off the mask.

    For an observed pair the entry is ``sum_k (1 - exp(-decay * (horizon -
    t_k)))``, the factor multiplying the excitement in the integrated
    intensity. Entries are nonnegative: an event contributes nothing at the
    horizon and approaches 1 far from it, so each lies in [0, n_events].
    """
    if decay <= 0.0:
        raise ValueError("decay must be positive")
    weights = np.zeros((dataset.n_assignments, dataset.n_students))
    for (i, j), seq in dataset.sequences.items():
        if seq.n_events:
            weights[i, j] = np.sum(1.0 - np.exp(-decay * (seq.horizon - seq.times)))
    return weights


@dataclass(frozen=True)
class LikelihoodCache:
    """Decay-dependent per-event and per-pair precomputations.

    ``recursion`` maps each observed pair to its excitation-state vector and
    ``compensator_weights``/``horizons`` are dense matrices that are zero on
    unobserved pairs. The flat ``event_*`` arrays hold every observed event's
    pair indices and recursion value concatenated in pair order; they drive
    the vectorized likelihood below. Immutable after construction.
    """

    decay: float
    recursion: dict[tuple[int, int], np.ndarray]
    compensator_weights: np.ndarray
    horizons: np.ndarray
    event_rows: np.ndarray
    event_cols: np.ndarray
    event_recursion: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.compensator_weights.shape


def build_cache(dataset: EventDataset, decay: float) -> LikelihoodCache:
    """Precompute everything the likelihood needs for a fixed decay."""
    if decay <= 0.0:
        raise ValueError("decay must be positive")
    decay = float(decay)
    n, m = dataset.n_assignments, dataset.n_students
    horizons = np.zeros((n, m))
    weights = np.zeros((n, m))
    recursion: dict[tuple[int, int], np.ndarray] = {}
    rows, cols, flat = [], [], []
    for pair in dataset.observed_pairs():
        i, j = pair
        seq = dataset.sequences[pair]
        r = _recursion_from_times(seq.times, decay)
        r.setflags(write=False)
        recursion[pair] = r
        horizons[i, j] = seq.horizon
        if seq.n_events:
            weights[i, j] = np.sum(1.0 - np.exp(-decay * (seq.horizon - seq.times)))
            rows.append(np.full(seq.n_events, i, dtype=np.intp))
            cols.append(np.full(seq.n_events, j, dtype=np.intp))
            flat.append(r)
    event_rows = np.concatenate(rows) if rows else np.empty(0, dtype=np.intp)
    event_cols = np.concatenate(cols) if cols else np.empty(0, dtype=np.intp)
    event_recursion = np.concatenate(flat) if flat else np.empty(0)
    horizons.setflags(write=False)
    weights.setflags(write=False)
    event_rows.setflags(write=False)
    event_cols.setflags(write=False)
    event_recursion.setflags(write=False)
    return LikelihoodCache(
        decay=decay,
        recursion=recursion,
        compensator_weights=weights,
        horizons=horizons,
        event_rows=event_rows,
        event_cols=event_cols,
        event_recursion=event_recursion,
    )


def intensity(params: HawkesParams, seq: EventSequence, t: float) -> float:
    """Conditional intensity of one pair at time ``t`` (events/hour).

    Only events strictly before ``t`` contribute, so the value at an event
    time is the pre-jump limit.
    """
    t = float(t)
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    i, j = seq.pair
    past = seq.times[seq.times < t]
    excitation = float(np.sum(np.exp(-params.decay * (t - past)))) if past.size else 0.0
    return float(
        params.base_rate[i, j]
        + params.excitement[i, j] * params.decay * excitation
    )


def _check_compatible(params: HawkesParams, dataset: EventDataset, cache: LikelihoodCache):
    shape = (dataset.n_assignments, dataset.n_students)
    if params.shape != shape:
        raise ValueError(f"parameter shape {params.shape} != grid {shape}")
    if cache.shape != shape:
        raise ValueError(f"cache shape {cache.shape} != grid {shape}")
    if cache.decay != params.decay:
        raise ValueError(
            f"cache built for decay {cache.decay}, params carry {params.decay}"
        )


def _event_intensities(
    excitement: np.ndarray, base_rate: np.ndarray, cache: LikelihoodCache
) -> np.ndarray:
    lam = (
        base_rate[cache.event_rows, cache.event_cols]
        + excitement[cache.event_rows, cache.event_cols]
        * cache.decay
        * cache.event_recursion
    )
    return np.maximum(lam, EPS_LOG)


def _nll_value(excitement, base_rate, cache: LikelihoodCache) -> float:
    lam = _event_intensities(excitement, base_rate, cache)
    return float(
        -np.log(lam).sum()
        + (base_rate * cache.horizons).sum()
        + (excitement * cache.compensator_weights).sum()
    )


def _nll_grad(excitement, base_rate, cache: LikelihoodCache):
    n, m = cache.shape
    lam = _event_intensities(excitement, base_rate, cache)
    inv = 1.0 / lam
    idx = cache.event_rows * m + cache.event_cols
    d_base = -np.bincount(idx, weights=inv, minlength=n * m).astype(
        np.float64, copy=False
    ).reshape(n, m)
    d_base = d_base + cache.horizons
    d_exc = -cache.decay * np.bincount(
        idx, weights=inv * cache.event_recursion, minlength=n * m
    ).astype(np.float64, copy=False).reshape(n, m)
    d_exc = d_exc + cache.compensator_weights
    return d_exc, d_base


def smooth_nll(
    params: HawkesParams, dataset: EventDataset, cache: LikelihoodCache
) -> float:
    """Negative log-likelihood of all observed pairs (smooth part only).

    Per observed pair: ``-sum_k log lam(t_k) + base_rate * horizon +
    excitement * compensator_weight`` with ``lam`` floored at ``EPS_LOG``.
    """
    _check_compatible(params, dataset, cache)
    return _nll_value(params.excitement, params.base_rate, cache)


def smooth_nll_grad(
    params: HawkesParams, dataset: EventDataset, cache: LikelihoodCache
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of :func:`smooth_nll`.

    Returns ``(d_excitement, d_base_rate)``; both are zero on unobserved
    pairs. Where the intensity is floored the gradient uses the floored
    value.
    """
    _check_compatible(params, dataset, cache)
    return _nll_grad(params.excitement, params.base_rate, cache)
