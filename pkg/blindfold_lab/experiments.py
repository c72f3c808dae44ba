"""Seeded reconstruction trials and the experiments built from them.

Usage::

    from blindfold_lab.experiments import Regime, run_trials, minimal_k

    regime = Regime()                          # f=0.02, g=0.12, Δ=0.02, δ=0.1
    records = run_trials(32, 4000, range(50), regime, workers=4)
    found = minimal_k(16, regime, trials=20)

A trial is a pure function of ``(n, k, seed, regime)``: the tree, the
characters and the tie bits all derive from the seed, so records compare
byte for byte across thread counts.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Sequence

import numpy as np

from blindfold.ancestral import MajorityConfig, TieStream, anc_estimate
from blindfold.bcp import BCPResult, MetricMode, RunOptions, bcp_run
from blindfold.distances import dist_hat
from blindfold.errors import InvalidRegimeError, NonConvergenceError
from blindfold.evolve import (
    CharacterMatrix,
    DeltaBMSpec,
    ModelSpec,
    jc_to_cfn_reduce,
    random_delta_bm_tree,
    simulate,
)
from blindfold.params import AlgoParams, CalibrationTable, derive_params
from blindfold.treekit import PhyloTree, as_length, rf_distance, scale_lengths
from blindfold_lab.errors import BudgetExceededError, UsageError
from blindfold_lab.scenarios import balanced_tree, single_edge_tree
from blindfold_lab.store import ResultStore, TrialRecord, success_rate

logger = logging.getLogger(__name__)

DEFAULT_TARGET = 0.9
DEFAULT_K_START = 256
DEFAULT_K_MAX = 1 << 20
DEFAULT_BUDGET = 40
_RESOLUTION = 0.05


@dataclass(frozen=True)
class Regime:
    """Tree and model regime shared by every trial of an experiment.

    Parameters
    ----------
    f, g, delta:
        Edge length bounds and grid of the generated trees.
    failure:
        Failure budget δ handed to :func:`derive_params`.
    model:
        Model the characters are simulated under.
    mode:
        Statistical runs read sequences; perfect runs read the true metric.
    record_timing:
        Store wall time in each record (makes records non-reproducible).
    """

    f: Decimal = Decimal("0.02")
    g: Decimal = Decimal("0.12")
    delta: Decimal = Decimal("0.02")
    failure: float = 0.1
    model: ModelSpec = ModelSpec.CFN
    mode: MetricMode = MetricMode.STATISTICAL
    record_timing: bool = False

    def __post_init__(self) -> None:
        for name in ("f", "g", "delta"):
            object.__setattr__(self, name, as_length(getattr(self, name)))

    def tree_spec(self, n: int) -> DeltaBMSpec:
        return DeltaBMSpec(n, self.f, self.g, self.delta)

    def to_dict(self) -> dict:
        return {
            "f": str(self.f),
            "g": str(self.g),
            "delta": str(self.delta),
            "failure": self.failure,
            "model": self.model.value,
            "mode": self.mode.value,
        }


# -- one reconstruction ------------------------------------------------------------

@dataclass(frozen=True)
class Reconstruction:
    """A finished run with lengths back on the input model's scale."""

    result: BCPResult
    params: AlgoParams
    tree: PhyloTree
    scale: int


def reconstruct(
    chars: CharacterMatrix | None,
    regime: Regime,
    options: RunOptions = RunOptions(),
    *,
    true_tree: PhyloTree | None = None,
    k: int | None = None,
    calibration: CalibrationTable | None = None,
) -> Reconstruction:
    """Run the reconstruction on CFN or JC characters.

    JC characters are reduced to purine/pyrimidine classes, which evolve
    as CFN at twice the length, so the run uses ``2f, 2g, 2Δ`` and the
    reported lengths are halved.

    *k* truncates the characters; without it a *calibration* entry for
    ``n`` does.  A calibrated k above the available sites uses every site
    (with a warning); an explicit *k* above them raises :class:`UsageError`.
    """
    model = chars.model if chars is not None else regime.model
    scale = 2 if model is ModelSpec.JC else 1
    if chars is not None:
        if k is not None and k > chars.k:
            raise UsageError(f"Asked for k={k} but the matrix has only {chars.k} sites.")
        if k is None and calibration is not None:
            k = calibration.k_for(chars.n)
            if k is not None and k > chars.k:
                logger.warning(
                    "calibrated k=%d for n=%d exceeds the %d sites; using all of them",
                    k, chars.n, chars.k,
                )
                k = None
        if k is not None and k < chars.k:
            chars = chars.truncate(k)
        if model is ModelSpec.JC:
            chars = jc_to_cfn_reduce(chars)
        n, run_k = chars.n, chars.k
    elif true_tree is not None:
        n, run_k = len(true_tree.leaves), k
    else:
        raise InvalidRegimeError("Need characters or, in perfect mode, the true tree.")

    params = derive_params(
        regime.f * scale,
        regime.g * scale,
        regime.delta * scale,
        n,
        regime.failure,
        k=run_k,
        calibration=calibration,
    )
    scaled_truth = true_tree
    if true_tree is not None and scale != 1:
        scaled_truth = scale_lengths(true_tree, scale)
    result = bcp_run(chars, params, options, true_tree=scaled_truth)
    tree = result.tree
    if scale != 1 and tree.lengths:
        tree = scale_lengths(tree, Decimal(1) / scale)
    return Reconstruction(result=result, params=params, tree=tree, scale=scale)


def run_trial(n: int, k: int, seed: int, regime: Regime = Regime()) -> TrialRecord:
    """Simulate, reconstruct and score one seeded instance."""
    started = time.perf_counter()
    tree = random_delta_bm_tree(regime.tree_spec(n), seed)
    chars = None
    if regime.mode is MetricMode.STATISTICAL:
        chars = simulate(tree, regime.model, k, seed)
    options = RunOptions(mode=regime.mode, tie_seed=seed)
    truth = tree if regime.mode is MetricMode.PERFECT else None
    try:
        done = reconstruct(chars, regime, options, true_tree=truth, k=k)
    except NonConvergenceError as exc:
        logger.info("trial n=%d k=%d seed=%d failed: %s", n, k, seed, exc.code)
        return TrialRecord(
            n=n, k=k, seed=seed, success=False, rf=None, iterations=0,
            wall_time=time.perf_counter() - started if regime.record_timing else None,
            error=exc.code,
        )
    rf = rf_distance(done.tree, tree)
    logger.info("trial n=%d k=%d seed=%d rf=%d", n, k, seed, rf)
    return TrialRecord(
        n=n, k=k, seed=seed, success=rf == 0, rf=rf, iterations=done.result.iterations,
        wall_time=time.perf_counter() - started if regime.record_timing else None,
    )


def run_trials(
    n: int,
    k: int,
    seeds: Iterable[int],
    regime: Regime = Regime(),
    *,
    workers: int = 1,
    store: ResultStore | None = None,
) -> list[TrialRecord]:
    """Run one trial per seed, concurrently when ``workers > 1``; sorted by seed."""
    seeds = list(seeds)

    def one(seed: int) -> TrialRecord:
        return run_trial(n, k, seed, regime)

    if workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(one, seeds))
    else:
        records = [one(seed) for seed in seeds]
    records.sort(key=lambda r: r.seed)
    if store is not None:
        store.extend(records)
    return records


def success_curve(
    n: int,
    ks: Sequence[int],
    regime: Regime = Regime(),
    *,
    trials: int = 20,
    workers: int = 1,
    store: ResultStore | None = None,
) -> list[tuple[int, float]]:
    """Success rate at each k, all on the same seeds."""
    return [
        (k, success_rate(run_trials(n, k, range(trials), regime, workers=workers, store=store)))
        for k in sorted(ks)
    ]


# -- minimal k -----------------------------------------------------------------------

@dataclass(frozen=True)
class MinimalK:
    """Smallest k found to reach the target success rate for one n."""

    n: int
    k: int | None
    rate: float
    evaluations: int
    complete: bool
    history: tuple[tuple[int, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "rate": self.rate,
            "evaluations": self.evaluations,
            "complete": self.complete,
            "history": [list(step) for step in self.history],
        }


def minimal_k(
    n: int,
    regime: Regime = Regime(),
    *,
    target: float = DEFAULT_TARGET,
    trials: int = 20,
    k_start: int = DEFAULT_K_START,
    k_max: int = DEFAULT_K_MAX,
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
    store: ResultStore | None = None,
) -> MinimalK:
    """Double k until the target is met, then bisect down to 5% resolution.

    Every k is scored on the same seeds ``0..trials-1``.  Raises
    :class:`BudgetExceededError`, carrying the partial result, when k would
    pass *k_max* or more than *budget* success rates would be needed.
    """
    history: list[tuple[int, float]] = []

    def rate_at(k: int) -> float:
        if len(history) >= budget:
            raise BudgetExceededError(
                f"n={n}: {budget} evaluations used without settling k.",
                partial=_partial(n, history),
            )
        rate = success_rate(run_trials(n, k, range(trials), regime, workers=workers, store=store))
        history.append((k, rate))
        logger.debug("n=%d k=%d success=%.3f", n, k, rate)
        return rate

    lo, hi = 0, k_start
    rate = rate_at(hi)
    while rate < target:
        lo, hi = hi, hi * 2
        if hi > k_max:
            raise BudgetExceededError(
                f"n={n}: success {rate:.2f} < {target} at k={lo}; k_max={k_max} reached.",
                partial=_partial(n, history),
            )
        rate = rate_at(hi)
    best_rate = rate
    while hi - lo > max(1, math.ceil(_RESOLUTION * hi)):
        mid = (lo + hi) // 2
        rate = rate_at(mid)
        if rate >= target:
            hi, best_rate = mid, rate
        else:
            lo = mid
    found = MinimalK(n, hi, best_rate, len(history), True, tuple(history))
    logger.info("minimal k for n=%d: %d (%d evaluations)", n, hi, len(history))
    return found


def _partial(n: int, history: list[tuple[int, float]]) -> MinimalK:
    best = max(history, key=lambda step: (step[1], -step[0]), default=(None, 0.0))
    return MinimalK(n, best[0], best[1], len(history), False, tuple(history))


# -- scaling and calibration ---------------------------------------------------------

@dataclass(frozen=True)
class ScalingResult:
    """Minimal k per n with a fit ``k ≈ slope · ln n + intercept``."""

    entries: tuple[MinimalK, ...]
    target: float
    trials: int
    slope: float | None = None
    intercept: float | None = None
    regime: dict = field(default_factory=dict)

    @property
    def partial(self) -> bool:
        return not all(e.complete for e in self.entries)

    def ratio(self) -> float | None:
        """``k*(largest n) / k*(smallest n)`` over the complete entries."""
        done = sorted((e for e in self.entries if e.complete), key=lambda e: e.n)
        if len(done) < 2:
            return None
        return done[-1].k / done[0].k  # type: ignore[operator]

    def log_ratio(self) -> float | None:
        done = sorted(e.n for e in self.entries if e.complete)
        if len(done) < 2:
            return None
        return math.log(done[-1]) / math.log(done[0])

    def monotone(self) -> bool:
        ks = [e.k for e in sorted(self.entries, key=lambda e: e.n) if e.complete]
        return all(b >= a for a, b in zip(ks, ks[1:]))  # type: ignore[operator]

    def to_dict(self) -> dict:
        return {
            "entries": [e.to_dict() for e in self.entries],
            "target": self.target,
            "trials": self.trials,
            "slope": self.slope,
            "intercept": self.intercept,
            "partial": self.partial,
            "ratio": self.ratio(),
            "log_ratio": self.log_ratio(),
            "monotone": self.monotone(),
            "regime": self.regime,
        }


def scaling_experiment(
    ns: Sequence[int],
    regime: Regime = Regime(),
    *,
    target: float = DEFAULT_TARGET,
    trials: int = 20,
    k_start: int = DEFAULT_K_START,
    k_max: int = DEFAULT_K_MAX,
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
    store: ResultStore | None = None,
) -> ScalingResult:
    """Minimal k for every n; an n that runs out of budget is kept as a partial entry."""
    entries: list[MinimalK] = []
    start = k_start
    for n in sorted(ns):
        try:
            found = minimal_k(
                n, regime, target=target, trials=trials, k_start=start, k_max=k_max,
                budget=budget, workers=workers, store=store,
            )
        except BudgetExceededError as exc:
            logger.warning("%s", exc.message)
            entries.append(exc.partial)  # type: ignore[arg-type]
            continue
        entries.append(found)
        # k* grows with n, so the previous answer is a safe lower start.
        start = max(1, found.k // 2)  # type: ignore[operator]

    slope = intercept = None
    done = [e for e in entries if e.complete]
    if len(done) >= 2:
        x = np.log([e.n for e in done])
        y = np.array([e.k for e in done], dtype=float)
        slope, intercept = (float(c) for c in np.polyfit(x, y, 1))
    result = ScalingResult(tuple(entries), target, trials, slope, intercept, regime.to_dict())
    if store is not None:
        store.set_summary("scaling", result.to_dict())
    return result


def fit_constant(entries: Iterable[MinimalK], regime: Regime) -> float:
    """Least-squares C in ``k = C (ln n + ln 1/δ) / min(Δ², f²)``."""
    done = [e for e in entries if e.complete]
    if not done:
        raise BudgetExceededError("No calibrated entry to fit the constant from.")
    step, f = float(regime.delta), float(regime.f)
    scale = min(step * step, f * f)
    x = np.array([(math.log(e.n) + math.log(1 / regime.failure)) / scale for e in done])
    y = np.array([e.k for e in done], dtype=float)
    coef, *_ = np.linalg.lstsq(x[:, None], y, rcond=None)
    return float(coef[0])


def calibrate(
    ns: Sequence[int],
    regime: Regime = Regime(),
    *,
    target: float = DEFAULT_TARGET,
    trials: int = 20,
    k_max: int = DEFAULT_K_MAX,
    budget: int = DEFAULT_BUDGET,
    workers: int = 1,
    store: ResultStore | None = None,
) -> CalibrationTable:
    """Calibration table of minimal k per n plus the fitted constant."""
    scaling = scaling_experiment(
        ns, regime, target=target, trials=trials, k_max=k_max, budget=budget,
        workers=workers, store=store,
    )
    table = CalibrationTable(
        entries={e.n: e.k for e in scaling.entries if e.complete},  # type: ignore[misc]
        constant=fit_constant(scaling.entries, regime),
    )
    logger.info("calibrated %d leaf counts, C=%.4g", len(table.entries), table.constant)
    return table


# -- estimator checks ----------------------------------------------------------------

@dataclass(frozen=True)
class AccuracyRow:
    d: float
    trials: int
    within: int
    mean_abs_error: float

    @property
    def rate(self) -> float:
        return self.within / self.trials

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "trials": self.trials,
            "within": self.within,
            "rate": self.rate,
            "mean_abs_error": self.mean_abs_error,
        }


def estimator_accuracy(
    ds: Sequence[float | str],
    *,
    k: int = 100_000,
    trials: int = 1000,
    seed: int = 0,
    tolerance: float = 0.02,
    workers: int = 1,
) -> list[AccuracyRow]:
    """``|dist_hat - d| < tolerance`` rate on single simulated edges."""
    rows = []
    for i, d in enumerate(ds):
        tree = single_edge_tree(d)
        base = seed + i * trials

        def error(t: int) -> float:
            chars = simulate(tree, ModelSpec.CFN, k, base + t)
            return abs(dist_hat(chars.sequence(1), chars.sequence(2)) - float(d))

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                errors = np.array(list(pool.map(error, range(trials))))
        else:
            errors = np.array([error(t) for t in range(trials)])
        finite = errors[np.isfinite(errors)]
        rows.append(AccuracyRow(
            d=float(d),
            trials=trials,
            within=int((errors < tolerance).sum()),
            mean_abs_error=float(finite.mean()) if finite.size else math.inf,
        ))
    return rows


def root_agreement(
    levels: int,
    d: float | str,
    k: int,
    seed: int,
    config: MajorityConfig,
) -> float:
    """Fraction of sites where the recursive majority recovers the root state."""
    tree = balanced_tree(levels, d)
    chars = simulate(tree, ModelSpec.CFN, k, seed, record_internal=True)
    estimate = anc_estimate(tree, chars, config, TieStream(seed))
    truth = chars.internal[tree.root]  # type: ignore[index]
    return float(np.mean(estimate == truth))
