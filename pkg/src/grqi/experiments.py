"""Reproducible convergence experiments and their persistence.

Two canned studies are provided: a batch of two-sided refinements on random
diagonalizable matrices with per-iterate error statistics, and a
success-rate study of the structure-exploiting one-sided step on random
Hamiltonian matrices.  Both are driven by per-trial RNG streams, so results
are bit-identical for a given configuration regardless of worker count.

Traces persist to CSV (one row per iterate) with floats in shortest
round-trip form; summaries persist to JSON with a fixed key set and no
timing fields, so repeated runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import GrqiError, MissingOracleError, ParseError
from .iterations import (
    FAILURE,
    MAX_ITERS,
    IterationRecord,
    IterationTrace,
    StepDiagnostics,
    SubspacePair,
    tsgrqi_step,
)
from .kernels import largest_principal_angle, orthonormalize, residual_angle
from .structured import (
    apply_j,
    full_eigenspace_targets,
    hamiltonian_step,
    j_matrix,
)
from .testgen import (
    nearby_subspace,
    random_diagonalizable,
    random_hamiltonian,
    trial_rng,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentSummary",
    "run_table1",
    "run_hamiltonian",
    "summarize",
    "hamiltonian_success",
    "write_traces",
    "read_traces",
    "summary_json",
    "write_summary",
    "format_table",
]

_EXPERIMENTS = ("table1", "hamiltonian", "refine", "custom")
_LOG_FLOOR = 1e-300
_HAMILTONIAN_ITERS = 10
_SUCCESS_TOL = 1e-12


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one experiment batch.

    ``start_distance`` bounds the angle between each starting subspace and
    its oracle; both sides are drawn independently, so the summed starting
    error is below twice this bound.
    """

    experiment: str = "table1"
    n: int = 20
    p: int = 5
    trials: int = 1000
    seed: int = 0
    start_distance: float = 0.1
    max_iters: int = 5
    structure: str | None = None
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in _EXPERIMENTS:
            raise ValueError(
                f"experiment must be one of {_EXPERIMENTS}, "
                f"got {self.experiment!r}"
            )
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not (0.0 < self.start_distance < math.pi / 2):
            raise ValueError(
                f"start_distance must lie in (0, pi/2), "
                f"got {self.start_distance}"
            )
        if not (self.n > self.p >= 1):
            raise ValueError(f"need n > p >= 1, got n={self.n}, p={self.p}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if not (0 <= self.seed < 2**64):
            raise ValueError(f"seed must fit in 64 bits, got {self.seed}")


@dataclass
class ExperimentSummary:
    """Per-iterate error statistics and success accounting for a batch.

    ``p`` is None when the block size varies per trial (the Hamiltonian
    study picks 2 or 4 depending on the target eigenvalue group);
    ``p_counts`` then holds the per-size trial counts.  ``wall_time`` is
    informational only and never serialized.
    """

    experiment: str
    n: int
    p: int | None
    trials: int
    seed: int
    per_iterate: list[dict] = field(default_factory=list)
    success_count: int = 0
    success_rate: float = 0.0
    failures: int = 0
    p_counts: dict[int, int] | None = None
    wall_time: float = 0.0


def _log10e(value: float) -> float:
    return math.log10(max(float(value), _LOG_FLOOR))


def summarize(
    traces: list[IterationTrace],
    *,
    experiment: str = "custom",
    n: int = 0,
    p: int | None = None,
    seed: int = 0,
    success=None,
    wall_time: float = 0.0,
) -> ExperimentSummary:
    """Aggregate traces into per-iterate mean/max log10 error statistics.

    ``success`` maps a trace to a bool; the default counts every trace that
    did not fail.  Every trace must carry oracle errors.
    """
    if not traces:
        raise ValueError("cannot summarize an empty trace set")
    for t, trace in enumerate(traces):
        errs = trace.errors()
        if trace.status != FAILURE and (
            errs.size == 0 or not np.any(np.isfinite(errs))
        ):
            raise MissingOracleError(
                f"trace {t} has no oracle errors to aggregate"
            )
    if success is None:
        def success(trace):
            return trace.status != FAILURE

    depth = max(trace.iterates for trace in traces)
    per_iterate = []
    for k in range(depth):
        logs = [
            _log10e(trace.records[k].err_sum)
            for trace in traces
            if trace.iterates > k and math.isfinite(trace.records[k].err_sum)
        ]
        if not logs:
            continue
        per_iterate.append(
            {
                "k": k,
                "mean_log10_e": float(np.mean(logs)),
                "max_log10_e": float(np.max(logs)),
            }
        )
    wins = sum(1 for trace in traces if success(trace))
    return ExperimentSummary(
        experiment=experiment,
        n=n,
        p=p,
        trials=len(traces),
        seed=seed,
        per_iterate=per_iterate,
        success_count=wins,
        success_rate=wins / len(traces),
        failures=sum(1 for trace in traces if trace.status == FAILURE),
        wall_time=wall_time,
    )


def _table1_trial(args) -> IterationTrace:
    seed, trial, n, p, delta, steps = args
    rng = trial_rng(seed, trial)
    prob = random_diagonalizable(n, p, rng)
    pair = SubspacePair(
        left=nearby_subspace(prob.oracle_left, delta, rng),
        right=nearby_subspace(prob.oracle_right, delta, rng),
    )
    trace = IterationTrace(status=MAX_ITERS)
    diag = StepDiagnostics()
    for k in range(steps + 1):
        left_err = largest_principal_angle(pair.left, prob.oracle_left)
        right_err = largest_principal_angle(pair.right, prob.oracle_right)
        trace.records.append(
            IterationRecord(
                index=k,
                right_err=right_err,
                left_err=left_err,
                err_sum=left_err + right_err,
                residual=residual_angle(prob.matrix, pair.right),
                perturbed=diag.perturbed,
                shift_cond=diag.shift_cond,
            )
        )
        if k == steps:
            break
        try:
            pair, diag = tsgrqi_step(prob.matrix, pair)
        except GrqiError as exc:
            trace.status = FAILURE
            trace.failure_reason = f"{type(exc).__name__}: {exc}"
            break
    return trace


def _hamiltonian_trial(args) -> tuple[IterationTrace, int]:
    seed, trial, n, delta, steps = args
    rng = trial_rng(seed, trial)
    c = random_hamiltonian(n, rng)
    trace = IterationTrace(status=MAX_ITERS)
    try:
        target = full_eigenspace_targets(
            c, j_matrix(n), conjugate_closed=True
        )[0]
    except GrqiError as exc:
        trace.status = FAILURE
        trace.failure_reason = f"{type(exc).__name__}: {exc}"
        return trace, 0
    yr = nearby_subspace(target.right, delta, rng)
    diag = StepDiagnostics()
    for k in range(steps + 1):
        yl = orthonormalize(apply_j(yr.basis))
        left_err = largest_principal_angle(yl, target.left)
        right_err = largest_principal_angle(yr, target.right)
        trace.records.append(
            IterationRecord(
                index=k,
                right_err=right_err,
                left_err=left_err,
                err_sum=left_err + right_err,
                residual=residual_angle(c, yr),
                perturbed=diag.perturbed,
                shift_cond=diag.shift_cond,
            )
        )
        if k == steps:
            break
        try:
            yr, diag = hamiltonian_step(c, yr, full_output=True)
        except GrqiError as exc:
            trace.status = FAILURE
            trace.failure_reason = f"{type(exc).__name__}: {exc}"
            break
    return trace, target.right.p


def _run_batch(worker, args_list, workers: int) -> list:
    if workers <= 1:
        return [worker(args) for args in args_list]
    chunk = max(1, len(args_list) // (8 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, args_list, chunksize=chunk))


def run_table1(
    cfg: ExperimentConfig,
) -> tuple[ExperimentSummary, list[IterationTrace]]:
    """Refine random left/right eigenspace pairs for a fixed step budget.

    Each trial draws a fresh diagonalizable matrix, perturbs both oracle
    subspaces by an angle below ``start_distance``, and runs exactly
    ``max_iters`` two-sided steps, recording the oracle error at every
    iterate.  Failed trials are tallied in the summary, never raised.
    """
    t0 = time.perf_counter()
    args = [
        (cfg.seed, t, cfg.n, cfg.p, cfg.start_distance, cfg.max_iters)
        for t in range(cfg.trials)
    ]
    traces = _run_batch(_table1_trial, args, cfg.workers)
    summary = summarize(
        traces,
        experiment="table1",
        n=cfg.n,
        p=cfg.p,
        seed=cfg.seed,
        wall_time=time.perf_counter() - t0,
    )
    return summary, traces


def hamiltonian_success(trace: IterationTrace) -> bool:
    """Success rule of the Hamiltonian study: summed oracle error below
    1e-12 at the tenth iterate."""
    if trace.status == FAILURE or trace.iterates <= _HAMILTONIAN_ITERS:
        return False
    return trace.records[_HAMILTONIAN_ITERS].err_sum < _SUCCESS_TOL


def run_hamiltonian(
    cfg: ExperimentConfig,
) -> tuple[ExperimentSummary, list[IterationTrace]]:
    """Success-rate study of the one-sided step on Hamiltonian matrices.

    Each trial targets the full eigenvalue group of largest absolute real
    part (a pair for real eigenvalues, a quadruple for complex ones), so
    the block size is 2 or 4 per trial; the left iterate is recovered from
    the right one through the structure map rather than iterated.
    """
    if cfg.n % 2:
        raise ValueError(f"Hamiltonian study needs even n, got {cfg.n}")
    t0 = time.perf_counter()
    args = [
        (cfg.seed, t, cfg.n, cfg.start_distance, _HAMILTONIAN_ITERS)
        for t in range(cfg.trials)
    ]
    results = _run_batch(_hamiltonian_trial, args, cfg.workers)
    traces = [trace for trace, _ in results]
    p_counts: dict[int, int] = {}
    for _, p in results:
        if p:
            p_counts[p] = p_counts.get(p, 0) + 1
    summary = summarize(
        traces,
        experiment="hamiltonian",
        n=cfg.n,
        p=None,
        seed=cfg.seed,
        success=hamiltonian_success,
        wall_time=time.perf_counter() - t0,
    )
    summary.p_counts = dict(sorted(p_counts.items()))
    return summary, traces


_CSV_COLUMNS = (
    "trial",
    "iterate",
    "right_err",
    "left_err",
    "e",
    "residual_angle",
    "perturbed",
    "shift_cond",
    "status",
)


def write_traces(path: str | os.PathLike, traces: list[IterationTrace]) -> None:
    """Write traces as CSV, one row per iterate, floats in exact
    round-trip form."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CSV_COLUMNS)
        for t, trace in enumerate(traces):
            for rec in trace.records:
                writer.writerow(
                    [
                        t,
                        rec.index,
                        repr(float(rec.right_err)),
                        repr(float(rec.left_err)),
                        repr(float(rec.err_sum)),
                        repr(float(rec.residual)),
                        int(rec.perturbed),
                        repr(float(rec.shift_cond)),
                        trace.status,
                    ]
                )


def read_traces(path: str | os.PathLike) -> list[IterationTrace]:
    """Read a CSV trace file back into traces, grouped by trial column."""
    path = os.fspath(path)
    traces: list[IterationTrace] = []
    current: int | None = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if tuple(row) != _CSV_COLUMNS:
                    raise ParseError(
                        f"unexpected header {row!r}", path=path, line=1
                    )
                continue
            if len(row) != len(_CSV_COLUMNS):
                raise ParseError(
                    f"expected {len(_CSV_COLUMNS)} fields, got {len(row)}",
                    path=path,
                    line=lineno,
                )
            try:
                trial = int(row[0])
                rec = IterationRecord(
                    index=int(row[1]),
                    right_err=float(row[2]),
                    left_err=float(row[3]),
                    err_sum=float(row[4]),
                    residual=float(row[5]),
                    perturbed=bool(int(row[6])),
                    shift_cond=float(row[7]),
                )
            except ValueError:
                raise ParseError(
                    f"malformed row {row!r}", path=path, line=lineno
                ) from None
            if trial != current:
                if trial != len(traces):
                    raise ParseError(
                        f"trial column jumped to {trial}",
                        path=path,
                        line=lineno,
                    )
                traces.append(IterationTrace(status=row[8]))
                current = trial
            traces[-1].records.append(rec)
            traces[-1].status = row[8]
    return traces


def summary_json(summary: ExperimentSummary) -> str:
    """Serialize the summary to JSON with a fixed key set.

    Timing is deliberately excluded so that identical seeds produce
    byte-identical documents.
    """
    doc = {
        "experiment": summary.experiment,
        "n": summary.n,
        "p": summary.p,
        "trials": summary.trials,
        "seed": summary.seed,
        "per_iterate": summary.per_iterate,
        "success_rate": summary.success_rate,
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def write_summary(path: str | os.PathLike, summary: ExperimentSummary) -> None:
    with open(path, "w") as fh:
        fh.write(summary_json(summary))


def format_table(summary: ExperimentSummary) -> str:
    """Render the per-iterate statistics as a three-column text table."""
    lines = [f"{'iterate':>7}  {'mean(log10 e)':>14}  {'max(log10 e)':>13}"]
    for row in summary.per_iterate:
        lines.append(
            f"{row['k']:>7}  {row['mean_log10_e']:>14.4f}  "
            f"{row['max_log10_e']:>13.4f}"
        )
    return "\n".join(lines)
