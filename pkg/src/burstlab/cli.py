"""Operator surface: simulate, fit, predict, evaluate, diagnose.

Every subcommand is deterministic given its inputs and seed, writes a run
manifest listing its outputs, and exits 0 on success, 2 on input errors,
3 on I/O errors, and 4 on numerical failures. Configuration files are JSON
with strict unknown-key rejection; defaults are materialized into the
manifest so runs are self-describing. Set ``BURSTLAB_LOG`` to control log
verbosity.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from contextlib import nullcontext

from . import __version__
from .data import EventSequence, HawkesParams, load_events_csv, write_events_csv
from .evaluate import (
    EvaluationReport,
    adjusted_rand_index,
    count_mae,
    expected_count,
    extract_clusters,
    interarrival_stats,
    param_recovery_error,
)
from .optimizer import FitConfig, OptimizerError, fit
from .regularizers import GammaMixtureSpec
from .simulate import SyntheticSpec, generate_dataset, seeded_stream, split_dataset, thinning_sample

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

WINDOWS_CSV_HEADER = ["assignment_id", "student_id", "t0_hours", "t1_hours"]


class InputError(Exception):
    """Bad or missing input; mapped to exit code 2."""


# ---------------------------------------------------------------- helpers


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _load_json(path) -> dict:
    path = Path(path)
    try:
        with path.open() as handle:
            return json.load(handle)
    except FileNotFoundError as exc:
        raise InputError(f"missing file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def _reject_unknown(raw: dict, allowed, label: str) -> None:
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise InputError(f"{label}: unknown keys {unknown}")


def write_matrix_csv(path, matrix, row_ids, col_ids) -> None:
    matrix = np.asarray(matrix, dtype=np.float64)
    with Path(path).open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow([""] + list(col_ids))
        for rid, row in zip(row_ids, matrix):
            writer.writerow([rid] + [_fmt(v) for v in row])


def read_matrix_csv(path):
    path = Path(path)
    try:
        with path.open(newline="") as handle:
            rows = list(csv.reader(handle))
    except FileNotFoundError as exc:
        raise InputError(f"missing file: {path}") from exc
    if not rows:
        raise InputError(f"{path}: empty matrix file")
    col_ids = rows[0][1:]
    row_ids, data = [], []
    for row in rows[1:]:
        if not row:
            continue
        row_ids.append(row[0])
        try:
            data.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise InputError(f"{path}: bad value in row {row[0]!r}") from exc
    matrix = np.asarray(data, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape != (len(row_ids), len(col_ids)):
        raise InputError(f"{path}: ragged matrix")
    return matrix, row_ids, col_ids


def _write_manifest(path, command, config, inputs, outputs, seed, wall_times) -> None:
    manifest = {
        "tool": "burstlab",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {k: str(v) for k, v in outputs.items()},
        "seed": seed,
        "wall_times_seconds": {k: round(v, 6) for k, v in wall_times.items()},
    }
    with Path(path).open("w") as handle:
        json.dump(manifest, handle, indent=2)
        handle.write("\n")


def _thread_limits(n_threads):
    """Context manager capping BLAS threads; a no-op when not requested."""
    if n_threads is None:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        logger.warning("threadpoolctl unavailable; --threads ignored")
        return nullcontext()
    return threadpool_limits(limits=int(n_threads))


# ---------------------------------------------------------------- simulate

_SPEC_KEYS = {
    "n_assignments",
    "n_students",
    "n_clusters",
    "cluster_gammas",
    "base_rate_range",
    "decay",
    "horizon",
    "unseen_ratio",
    "train_fraction",
    "seed",
    "max_excitement",
}


def _parse_spec(raw: dict) -> SyntheticSpec:
    _reject_unknown(raw, _SPEC_KEYS, "synthetic spec")
    kwargs = dict(raw)
    if "cluster_gammas" in kwargs:
        kwargs["cluster_gammas"] = tuple(tuple(p) for p in kwargs["cluster_gammas"])
    if "base_rate_range" in kwargs:
        kwargs["base_rate_range"] = tuple(kwargs["base_rate_range"])
    try:
        return SyntheticSpec(**kwargs)
    except (TypeError, ValueError) as exc:
        raise InputError(f"synthetic spec: {exc}") from exc


def _spec_snapshot(spec: SyntheticSpec, seed: int) -> dict:
    return {
        "n_assignments": spec.n_assignments,
        "n_students": spec.n_students,
        "n_clusters": spec.n_clusters,
        "cluster_gammas": [list(p) for p in spec.cluster_gammas],
        "base_rate_range": list(spec.base_rate_range),
        "decay": spec.decay,
        "horizon": spec.horizon,
        "unseen_ratio": spec.unseen_ratio,
        "train_fraction": spec.train_fraction,
        "seed": seed,
        "max_excitement": spec.max_excitement,
    }


def _default_ids(n: int, m: int):
    return [f"a{i:03d}" for i in range(n)], [f"s{j:03d}" for j in range(m)]


def cmd_simulate(args) -> int:
    spec = _parse_spec(_load_json(args.spec))
    seed = spec.seed if args.seed is None else int(args.seed)
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        logger.error("cannot create %s: %s", out_dir, exc)
        return EXIT_IO

    wall = {}
    started = time.perf_counter()
    dataset, truth = generate_dataset(spec, seed=seed)
    wall["simulate"] = time.perf_counter() - started

    started = time.perf_counter()
    split = split_dataset(
        dataset, spec.unseen_ratio, spec.train_fraction, seeded_stream(seed, 2)
    )
    wall["split"] = time.perf_counter() - started

    aids, sids = _default_ids(spec.n_assignments, spec.n_students)
    outputs = {
        "events_csv": out_dir / "events.csv",
        "train_events_csv": out_dir / "train_events.csv",
        "ground_truth_json": out_dir / "ground_truth.json",
        "split_manifest_json": out_dir / "split_manifest.json",
        "run_manifest_json": out_dir / "run_manifest.json",
    }
    started = time.perf_counter()
    write_events_csv(outputs["events_csv"], dataset, aids, sids)
    write_events_csv(outputs["train_events_csv"], split.train, aids, sids)

    with outputs["ground_truth_json"].open("w") as handle:
        json.dump(
            {
                "assignment_ids": aids,
                "student_ids": sids,
                "excitement": truth.excitement.tolist(),
                "base_rate": truth.base_rate.tolist(),
                "cluster_labels": truth.labels.tolist(),
                "decay": truth.decay,
                "horizon": spec.horizon,
            },
            handle,
            indent=2,
        )
        handle.write("\n")

    seen_records = []
    for pair in sorted(split.train.sequences):
        i, j = pair
        train_seq = split.train.sequences[pair]
        full_seq = dataset.sequences[pair]
        held = split.seen_test[pair]
        seen_records.append(
            {
                "assignment_id": aids[i],
                "student_id": sids[j],
                "train_horizon_hours": train_seq.horizon,
                "train_count": train_seq.n_events,
                "test_count": int(held.size),
                "test_window_end_hours": float(full_seq.times[-1])
                if full_seq.n_events
                else train_seq.horizon,
            }
        )
    unseen_records = [
        {
            "assignment_id": aids[i],
            "student_id": sids[j],
            "actual_count": dataset.sequences[(i, j)].n_events,
        }
        for (i, j) in split.unseen_pairs
    ]
    with outputs["split_manifest_json"].open("w") as handle:
        json.dump(
            {
                "unseen_ratio": spec.unseen_ratio,
                "train_fraction": spec.train_fraction,
                "seed": seed,
                "simulation_horizon_hours": spec.horizon,
                "events_csv": outputs["events_csv"].name,
                "train_events_csv": outputs["train_events_csv"].name,
                "unseen_pairs": unseen_records,
                "seen_pairs": seen_records,
            },
            handle,
            indent=2,
        )
        handle.write("\n")
    wall["write"] = time.perf_counter() - started

    _write_manifest(
        outputs["run_manifest_json"],
        "simulate",
        _spec_snapshot(spec, seed),
        {"spec": args.spec},
        outputs,
        seed,
        wall,
    )
    logger.info(
        "simulated %d pairs, %d events", dataset.n_observed, dataset.total_events
    )
    return EXIT_OK


# ---------------------------------------------------------------- fit

_FIT_KEYS = {
    "rho1",
    "rho2",
    "rho3",
    "n_clusters",
    "decay",
    "mixture",
    "allow_shape_below_one",
    "gamma0",
    "eta",
    "max_iter",
    "tol",
    "enable_clustering",
    "enable_prior",
    "enable_lowrank",
    "freeze_similarity",
    "horizon",
    "jitter_ties",
}


def _parse_fit_config(raw: dict) -> tuple[FitConfig, float | None, bool]:
    _reject_unknown(raw, _FIT_KEYS, "fit config")
    raw = dict(raw)
    horizon = raw.pop("horizon", None)
    jitter = bool(raw.pop("jitter_ties", False))
    mixture_raw = raw.pop("mixture", None)
    allow_low = bool(raw.pop("allow_shape_below_one", False))
    mixture = None
    if mixture_raw is not None:
        try:
            mixture = GammaMixtureSpec(
                components=tuple(tuple(p) for p in mixture_raw),
                allow_shape_below_one=allow_low,
            )
        except (TypeError, ValueError) as exc:
            raise InputError(f"fit config mixture: {exc}") from exc
    raw.setdefault("enable_prior", mixture is not None)
    try:
        config = FitConfig(mixture=mixture, **raw)
    except (TypeError, ValueError) as exc:
        raise InputError(f"fit config: {exc}") from exc
    return config, horizon, jitter


def _config_snapshot(config: FitConfig, horizon, jitter) -> dict:
    return {
        "rho1": config.rho1,
        "rho2": config.rho2,
        "rho3": config.rho3,
        "n_clusters": config.n_clusters,
        "decay": config.decay,
        "mixture": [list(c) for c in config.mixture.components]
        if config.mixture
        else None,
        "allow_shape_below_one": bool(
            config.mixture.allow_shape_below_one if config.mixture else False
        ),
        "gamma0": config.gamma0,
        "eta": config.eta,
        "max_iter": config.max_iter,
        "tol": config.tol,
        "enable_clustering": config.enable_clustering,
        "enable_prior": config.enable_prior,
        "enable_lowrank": config.enable_lowrank,
        "freeze_similarity": config.freeze_similarity,
        "horizon": horizon,
        "jitter_ties": jitter,
    }


def _load_events(path, **kwargs):
    try:
        return load_events_csv(path, **kwargs)
    except FileNotFoundError as exc:
        raise InputError(f"missing file: {path}") from exc
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def cmd_fit(args) -> int:
    config, horizon, jitter = _parse_fit_config(_load_json(args.config))
    dataset, aids, sids = _load_events(args.events, horizon=horizon, jitter_ties=jitter)
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        logger.error("cannot create %s: %s", out_dir, exc)
        return EXIT_IO

    snapshot = _config_snapshot(config, horizon, jitter)
    started = time.perf_counter()
    try:
        with _thread_limits(args.threads):
            result = fit(dataset, config, trace_path=args.trace)
    except OptimizerError as exc:
        dump_path = out_dir / "state_dump.json"
        with dump_path.open("w") as handle:
            json.dump(exc.state, handle, indent=2)
        logger.error("numerical failure: %s (state dumped to %s)", exc, dump_path)
        print(f"fit failed: {exc}; state dump at {dump_path}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    wall_fit = time.perf_counter() - started

    outputs = {
        "A_csv": out_dir / "A.csv",
        "U_csv": out_dir / "U.csv",
        "Z_csv": out_dir / "Z.csv",
        "ids_json": out_dir / "ids.json",
        "fit_report_json": out_dir / "fit_report.json",
        "run_manifest_json": out_dir / "run_manifest.json",
    }
    if args.trace is not None:
        outputs["trace_jsonl"] = Path(args.trace)
    started = time.perf_counter()
    write_matrix_csv(outputs["A_csv"], result.params.excitement, aids, sids)
    write_matrix_csv(outputs["U_csv"], result.params.base_rate, aids, sids)
    write_matrix_csv(outputs["Z_csv"], result.similarity.matrix, sids, sids)
    with outputs["ids_json"].open("w") as handle:
        json.dump({"assignment_ids": aids, "student_ids": sids}, handle, indent=2)
        handle.write("\n")
    with outputs["fit_report_json"].open("w") as handle:
        json.dump(
            {
                "objective": result.objective_trace[-1],
                "objective_trace": result.objective_trace,
                "iterations": result.iterations,
                "converged": result.converged,
                "wall_time_seconds": result.wall_time,
                "n_observed_pairs": dataset.n_observed,
                "n_events": dataset.total_events,
                "config": snapshot,
            },
            handle,
            indent=2,
        )
        handle.write("\n")
    wall_write = time.perf_counter() - started

    _write_manifest(
        outputs["run_manifest_json"],
        "fit",
        snapshot,
        {"events": args.events, "config": args.config},
        outputs,
        None,
        {"fit": wall_fit, "write": wall_write},
    )
    logger.info(
        "fit: %d iterations, converged=%s, objective %.6g",
        result.iterations,
        result.converged,
        result.objective_trace[-1],
    )
    return EXIT_OK


# ---------------------------------------------------------------- predict


def _load_params_dir(params_dir):
    params_dir = Path(params_dir)
    a, aids, sids = read_matrix_csv(params_dir / "A.csv")
    u, aids_u, sids_u = read_matrix_csv(params_dir / "U.csv")
    if aids != aids_u or sids != sids_u:
        raise InputError("A.csv and U.csv carry different id sets")
    report = _load_json(params_dir / "fit_report.json")
    try:
        decay = float(report["config"]["decay"])
        n_clusters = int(report["config"]["n_clusters"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError("fit_report.json missing config.decay/n_clusters") from exc
    params = HawkesParams(excitement=a, base_rate=u, decay=decay)
    return params, n_clusters, aids, sids


def cmd_predict(args) -> int:
    params, _, aids, sids = _load_params_dir(args.params_dir)
    a_index = {a: i for i, a in enumerate(aids)}
    s_index = {s: j for j, s in enumerate(sids)}
    dataset, _, _ = _load_events(
        args.events, assignment_ids=aids, student_ids=sids
    )

    windows_path = Path(args.windows)
    try:
        with windows_path.open(newline="") as handle:
            rows = list(csv.reader(handle))
    except FileNotFoundError as exc:
        raise InputError(f"missing file: {windows_path}") from exc
    if not rows or [h.strip() for h in rows[0]] != WINDOWS_CSV_HEADER:
        raise InputError(
            f"windows file must start with header {','.join(WINDOWS_CSV_HEADER)}"
        )
    body = [row for row in rows[1:] if row and any(cell.strip() for cell in row)]
    if not body:
        raise InputError(f"{windows_path}: no prediction windows")

    results = []
    n_ok = 0
    for row in body:
        if len(row) != 4:
            cells = [c.strip() for c in row[:4]]
            cells += [""] * (4 - len(cells))
            results.append(cells + ["", "bad_row"])
            continue
        aid, sid, raw_t0, raw_t1 = (cell.strip() for cell in row)
        status, value = "ok", ""
        try:
            t0, t1 = float(raw_t0), float(raw_t1)
        except ValueError:
            results.append([aid, sid, raw_t0, raw_t1, "", "bad_window"])
            continue
        if aid not in a_index or sid not in s_index:
            results.append([aid, sid, raw_t0, raw_t1, "", "unknown_pair"])
            continue
        pair = (a_index[aid], s_index[sid])
        history = dataset.sequences.get(pair)
        if history is None:
            history = EventSequence(pair=pair, times=np.empty(0), horizon=0.0)
        try:
            value = _fmt(
                expected_count(params, pair, history, (t0, t1), mode=args.mode)
            )
            n_ok += 1
        except ValueError as exc:
            status = str(exc).replace(",", ";")
        results.append([aid, sid, raw_t0, raw_t1, value, status])

    out_path = Path(args.out)
    with out_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(WINDOWS_CSV_HEADER + ["mode", "predicted_count", "status"])
        for aid, sid, t0, t1, value, status in results:
            writer.writerow([aid, sid, t0, t1, args.mode, value, status])
    _write_manifest(
        Path(str(out_path) + ".manifest.json"),
        "predict",
        {"mode": args.mode},
        {"params_dir": args.params_dir, "events": args.events, "windows": args.windows},
        {"predictions_csv": out_path},
        None,
        {},
    )
    if n_ok == 0:
        logger.error("all %d prediction rows failed", len(results))
        return EXIT_INPUT
    return EXIT_OK


# ---------------------------------------------------------------- evaluate


def cmd_evaluate(args) -> int:
    params, n_clusters, aids, sids = _load_params_dir(args.params_dir)
    z, z_rows, z_cols = read_matrix_csv(Path(args.params_dir) / "Z.csv")
    if z_rows != sids or z_cols != sids:
        raise InputError("Z.csv ids disagree with A.csv ids")
    manifest = _load_json(args.split)

    truth = None
    truth_path = Path(args.truth)
    if truth_path.exists():
        truth = _load_json(truth_path)
    else:
        logger.warning("ground truth %s missing; skipping truth metrics", truth_path)

    ari = param_err_a = param_err_u = None
    if truth is not None:
        t_aids = list(truth.get("assignment_ids", []))
        t_sids = list(truth.get("student_ids", []))
        if not (set(aids) & set(t_aids)) or not (set(sids) & set(t_sids)):
            raise InputError("fitted ids and ground-truth ids are disjoint")
        if set(aids) - set(t_aids) or set(sids) - set(t_sids):
            raise InputError("fitted ids missing from the ground truth")
        row_sel = [t_aids.index(a) for a in aids]
        col_sel = [t_sids.index(s) for s in sids]
        true_exc = np.asarray(truth["excitement"], dtype=np.float64)[
            np.ix_(row_sel, col_sel)
        ]
        true_base = np.asarray(truth["base_rate"], dtype=np.float64)[
            np.ix_(row_sel, col_sel)
        ]
        labels_true = np.asarray(truth["cluster_labels"], dtype=np.intp)[col_sel]
        labels_fit = extract_clusters(z, n_clusters)
        ari = adjusted_rand_index(labels_fit, labels_true)
        full = np.ones_like(true_exc, dtype=bool)
        param_err_a = param_recovery_error(params.excitement, true_exc, full)
        param_err_u = param_recovery_error(params.base_rate, true_base, full)

    a_index = {a: i for i, a in enumerate(aids)}
    s_index = {s: j for j, s in enumerate(sids)}

    train_name = manifest.get("train_events_csv")
    train_dataset = None
    if train_name:
        train_path = Path(args.split).parent / train_name
        if train_path.exists():
            train_dataset, _, _ = _load_events(
                train_path, assignment_ids=aids, student_ids=sids
            )
        else:
            logger.warning("train events %s missing; skipping seen MAE", train_path)

    mae_seen = None
    diagnostics = None
    if train_dataset is not None:
        predicted, actual = {}, {}
        for record in manifest.get("seen_pairs", []):
            aid, sid = record["assignment_id"], record["student_id"]
            if aid not in a_index or sid not in s_index:
                raise InputError(f"seen pair ({aid}, {sid}) unknown to the fit")
            pair = (a_index[aid], s_index[sid])
            t0 = float(record["train_horizon_hours"])
            t1 = float(record["test_window_end_hours"])
            if t1 <= t0:
                continue  # nothing was held out for this pair
            history = train_dataset.sequences.get(
                pair, EventSequence(pair=pair, times=np.empty(0), horizon=0.0)
            )
            predicted[pair] = expected_count(
                params, pair, history, (t0, t1), mode=args.mode
            )
            actual[pair] = float(record["test_count"])
        if predicted:
            mae_seen = count_mae(predicted, actual)
        diagnostics = []
        for pair in train_dataset.observed_pairs():
            seq = train_dataset.sequences[pair]
            if seq.n_events < 2:
                continue
            stats = interarrival_stats(seq)
            diagnostics.append(
                {
                    "assignment_id": aids[pair[0]],
                    "student_id": sids[pair[1]],
                    "n_events": stats.n_events,
                    "mean_gap_hours": stats.mean,
                    "cv": stats.coefficient_of_variation,
                    "lag1_autocorrelation": stats.lag1_autocorrelation,
                }
            )

    mae_unseen = None
    unseen_records = manifest.get("unseen_pairs", [])
    horizon = manifest.get("simulation_horizon_hours")
    if unseen_records and horizon:
        predicted, actual = {}, {}
        for record in unseen_records:
            aid, sid = record["assignment_id"], record["student_id"]
            if aid not in a_index or sid not in s_index:
                raise InputError(f"unseen pair ({aid}, {sid}) unknown to the fit")
            pair = (a_index[aid], s_index[sid])
            empty = EventSequence(pair=pair, times=np.empty(0), horizon=0.0)
            predicted[pair] = expected_count(
                params, pair, empty, (0.0, float(horizon)), mode=args.mode
            )
            actual[pair] = float(record["actual_count"])
        mae_unseen = count_mae(predicted, actual)

    report = EvaluationReport(
        ari=ari,
        count_mae_seen=mae_seen,
        count_mae_unseen=mae_unseen,
        param_error_excitement=param_err_a,
        param_error_base_rate=param_err_u,
        diagnostics=diagnostics,
    )
    out_path = Path(args.out)
    with out_path.open("w") as handle:
        json.dump(report.to_dict(), handle, indent=2)
        handle.write("\n")
    _write_manifest(
        Path(str(out_path) + ".manifest.json"),
        "evaluate",
        {"mode": args.mode},
        {"params_dir": args.params_dir, "truth": args.truth, "split": args.split},
        {"report_json": out_path},
        None,
        {},
    )
    return EXIT_OK


# ---------------------------------------------------------------- diagnose


def cmd_diagnose(args) -> int:
    dataset, aids, sids = _load_events(args.events)
    seed = 0 if args.seed is None else int(args.seed)
    out_path = Path(args.out)
    rows = []
    for pair in dataset.observed_pairs():
        i, j = pair
        seq = dataset.sequences[pair]
        if seq.n_events < 3:
            rows.append(
                [aids[i], sids[j], seq.n_events, "", "", "", "", "", "too_few_events"]
            )
            continue
        stats = interarrival_stats(seq)
        # matched-rate Poisson control with a per-pair derived seed
        rate = seq.n_events / seq.horizon if seq.horizon > 0 else 0.0
        control = thinning_sample(
            rate, 0.0, 1.0, seq.horizon, seeded_stream(seed, 3, i, j), pair=pair
        )
        if control.n_events >= 3:
            control_stats = interarrival_stats(control)
            control_cv = _fmt(control_stats.coefficient_of_variation)
            control_lag1 = (
                _fmt(control_stats.lag1_autocorrelation)
                if control_stats.lag1_autocorrelation is not None
                else ""
            )
        else:
            control_cv = control_lag1 = ""
        flag = "ok" if stats.lag1_autocorrelation is not None else "lag1_undefined"
        rows.append(
            [
                aids[i],
                sids[j],
                seq.n_events,
                _fmt(stats.mean),
                _fmt(stats.coefficient_of_variation),
                _fmt(stats.lag1_autocorrelation)
                if stats.lag1_autocorrelation is not None
                else "",
                control_cv,
                control_lag1,
                flag,
            ]
        )

    with out_path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "assignment_id",
                "student_id",
                "n_events",
                "mean_gap_hours",
                "cv",
                "lag1_autocorrelation",
                "poisson_cv",
                "poisson_lag1_autocorrelation",
                "flag",
            ]
        )
        writer.writerows(rows)
    _write_manifest(
        Path(str(out_path) + ".manifest.json"),
        "diagnose",
        {"seed": seed},
        {"events": args.events},
        {"diagnostics_csv": out_path},
        seed,
        {},
    )
    return EXIT_OK


# ---------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="burstlab",
        description="Simulate, fit, and evaluate grids of self-exciting event sequences.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset and split")
    p.add_argument("spec", help="synthetic spec JSON")
    p.add_argument("out_dir", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit parameters to an events CSV")
    p.add_argument("events", help="events CSV")
    p.add_argument("config", help="fit config JSON")
    p.add_argument("out_dir", help="output directory")
    p.add_argument("--trace", default=None, help="per-iteration JSONL trace path")
    p.add_argument("--threads", type=int, default=None, help="BLAS thread cap")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="expected counts over future windows")
    p.add_argument("params_dir", help="directory holding A.csv/U.csv/fit_report.json")
    p.add_argument("events", help="history events CSV")
    p.add_argument("windows", help="windows CSV")
    p.add_argument("out", help="output CSV")
    p.add_argument(
        "--mode",
        choices=["history_only", "branching"],
        default="history_only",
        help="count model for the prediction window",
    )
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score a fit against ground truth and split")
    p.add_argument("params_dir")
    p.add_argument("truth", help="ground-truth JSON (missing file skips truth metrics)")
    p.add_argument("split", help="split manifest JSON")
    p.add_argument("out", help="report JSON")
    p.add_argument(
        "--mode",
        choices=["history_only", "branching"],
        default="history_only",
        help="count model for the MAE windows",
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", help="inter-arrival diagnostics vs matched Poisson")
    p.add_argument("events", help="events CSV")
    p.add_argument("out", help="output CSV")
    p.add_argument("--seed", type=int, default=None, help="seed for the Poisson control")
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("BURSTLAB_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
