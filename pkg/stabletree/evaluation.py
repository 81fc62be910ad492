import asyncio
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Any, Callable, Literal, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm as sync_tqdm
from tqdm.asyncio import tqdm

from stabletree import __version__
from stabletree.datasets import Dataset, half_split, split_folds
from stabletree.errors import InputValidationError
from stabletree.grower import GrowConfig, fit, update
from stabletree.stable_loss import StableLossConfig, instability, mean_squared_error
from stabletree.tree import TreeModel
from stabletree.utils import (
    BASELINE,
    DEFAULT_EPSILON,
    DEFAULT_FOLDS,
    DESK_REPEATS,
    DESK_REPETITIONS,
    ITERATIVE_FOLDS,
    FULL_REPEATS,
    FULL_REPETITIONS,
    VARIED_N_VALUES,
    VARIED_TEST_SIZE,
    default_grid,
    derive_seed,
    fsum,
)

Setup = Literal["main", "varied_n", "iterative"]
AVERAGING = "pointwise mean within each run, then unweighted mean over runs"


@dataclass
class ExperimentConfig:
    setup: Setup = "main"
    dataset: str = ""
    grid: list[tuple[float, float]] = field(default_factory=default_grid)
    folds: int = DEFAULT_FOLDS
    repeats: int = FULL_REPEATS
    repetitions: int = FULL_REPETITIONS
    seed: int = 0
    epsilon: float = DEFAULT_EPSILON
    n_values: list[int] = field(default_factory=lambda: list(VARIED_N_VALUES))
    test_size: int = VARIED_TEST_SIZE
    grow: GrowConfig = field(default_factory=GrowConfig)

    def __post_init__(self):
        if self.setup not in ("main", "varied_n", "iterative"):
            raise InputValidationError(f"Unknown setup {self.setup!r}")
        if not self.grid:
            raise InputValidationError("Configuration grid is empty")
        if self.repeats < 1 or self.repetitions < 1:
            raise InputValidationError("repeats and repetitions must be >= 1")
        self.grid = [(float(a), float(b)) for a, b in self.grid]
        for alpha, beta in self.grid:
            StableLossConfig(alpha=alpha, beta=beta, epsilon=self.epsilon)

    @classmethod
    def desk(cls, **kwargs) -> "ExperimentConfig":
        """Reduced repeat counts for a laptop run."""
        kwargs.setdefault("repeats", DESK_REPEATS)
        kwargs.setdefault("repetitions", DESK_REPETITIONS)
        return cls(**kwargs)

    @property
    def configs(self) -> list[tuple[float, float]]:
        """The grid with the baseline first if it is not already included."""
        return self.grid if BASELINE in self.grid else [BASELINE, *self.grid]

    def loss_config(self, alpha: float, beta: float) -> StableLossConfig:
        return StableLossConfig(alpha=alpha, beta=beta, epsilon=self.epsilon)


@dataclass
class ReportRow:
    dataset: str
    alpha: float
    beta: float
    n: Optional[int]
    iteration: Optional[int]
    loss: float
    instability: float
    loss_rel: float = 1.0
    instability_rel: float = 1.0
    pareto: bool = False


COLUMNS = list(ReportRow.__dataclass_fields__)


@dataclass
class ParetoReport:
    setup: Setup
    dataset: str
    rows: list[ReportRow]
    runs: list[dict[str, Any]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([asdict(row) for row in self.rows], columns=COLUMNS)
        for column in ("n", "iteration"):
            frame[column] = frame[column].astype("Int64")
        return frame

    def to_csv(self, path: Path | str):
        self.to_frame().to_csv(path, index=False, float_format="%.17g", lineterminator="\n")

    def baseline(self, n: int | None = None, iteration: int | None = None) -> ReportRow:
        for row in self.rows:
            if (row.alpha, row.beta) == BASELINE and row.n == n and row.iteration == iteration:
                return row
        raise InputValidationError("Report has no baseline row")

    def pareto_rows(self) -> list[ReportRow]:
        return [row for row in self.rows if row.pareto]

    def trajectory(self, alpha: float, beta: float) -> list[ReportRow]:
        rows = [row for row in self.rows if (row.alpha, row.beta) == (alpha, beta)]
        return sorted(rows, key=lambda row: (row.iteration or 0, row.n or 0))


def pareto_front(points: list[tuple[float, float]]) -> list[bool]:
    """Flag the points no other point dominates in (loss, instability).

    Sort by loss, then sweep groups of equal loss keeping the best
    instability seen at strictly smaller loss. Exact ties share a flag.
    """
    if not points:
        return []
    values = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if not np.isfinite(values).all():
        raise InputValidationError("Pareto points must be finite")
    order = np.lexsort((values[:, 1], values[:, 0]))
    flags = np.zeros(len(values), dtype=bool)
    best = np.inf
    start = 0
    while start < len(order):
        stop = start
        loss = values[order[start], 0]
        while stop < len(order) and values[order[stop], 0] == loss:
            stop += 1
        group = order[start:stop]
        group_min = values[group, 1].min()
        if group_min < best:
            flags[group] = values[group, 1] == group_min
            best = group_min
        start = stop
    return flags.tolist()


def build_rows(
    dataset: str,
    configs: list[tuple[float, float]],
    losses: list[float],
    instabilities: list[float],
    n: int | None = None,
    iteration: int | None = None,
) -> list[ReportRow]:
    """Rows for one group, relative to its baseline, with Pareto flags."""
    base = configs.index(BASELINE)
    flags = pareto_front(list(zip(losses, instabilities)))
    rows = []
    for i, (alpha, beta) in enumerate(configs):
        with np.errstate(divide="ignore", invalid="ignore"):
            loss_rel = 1.0 if i == base else float(np.float64(losses[i]) / losses[base])
            instability_rel = (
                1.0 if i == base else float(np.float64(instabilities[i]) / instabilities[base])
            )
        rows.append(
            ReportRow(
                dataset=dataset,
                alpha=alpha,
                beta=beta,
                n=n,
                iteration=iteration,
                loss=losses[i],
                instability=instabilities[i],
                loss_rel=loss_rel,
                instability_rel=instability_rel,
                pareto=flags[i],
            )
        )
    return rows


def score(f0: TreeModel, f1: TreeModel, test: Dataset, pred0: np.ndarray | None = None):
    """(test loss of f1, squared instability between f0 and f1 on test)."""
    pred0 = np.asarray(f0.predict(test.X)) if pred0 is None else pred0
    pred1 = np.asarray(f1.predict(test.X))
    return mean_squared_error(test.y, pred1), instability(pred0, pred1, "squared_error")


def _update_and_score(
    data: Dataset,
    cfg: ExperimentConfig,
    d0_rows: np.ndarray,
    d1_rows: np.ndarray,
    test_rows: np.ndarray,
    configs: list[tuple[float, float]],
) -> list[tuple[float, float]]:
    f0 = fit(data.subset(d0_rows), cfg.grow, cfg.epsilon)
    test = data.subset(test_rows)
    d1 = data.subset(d1_rows)
    pred0 = np.asarray(f0.predict(test.X))
    scores = []
    for alpha, beta in configs:
        f1 = update(f0, d1, cfg.grow, cfg.loss_config(alpha, beta))
        scores.append(score(f0, f1, test, pred0))
    return scores


def main_task(data: Dataset, cfg: ExperimentConfig, repeat: int, fold: int, folds: list):
    test_rows = np.sort(folds[fold])
    d1_rows = np.sort(np.concatenate([f for i, f in enumerate(folds) if i != fold]))
    seed = derive_seed(cfg.seed, repeat, fold)
    d0_rows = half_split(d1_rows, seed)
    return _update_and_score(data, cfg, d0_rows, d1_rows, test_rows, cfg.configs)


def varied_n_task(data: Dataset, cfg: ExperimentConfig, repetition: int, n: int):
    rng = np.random.default_rng(derive_seed(cfg.seed, repetition))
    permutation = rng.permutation(len(data))
    test_rows = np.sort(permutation[: cfg.test_size])
    rest = permutation[cfg.test_size :]
    pick = np.random.default_rng(derive_seed(cfg.seed, repetition, n)).permutation(len(rest))
    d1_rows = np.sort(rest[pick[:n]])
    d0_rows = half_split(d1_rows, derive_seed(cfg.seed, repetition, n, 1))
    return _update_and_score(data, cfg, d0_rows, d1_rows, test_rows, cfg.configs)


def iterative_task(data: Dataset, cfg: ExperimentConfig, repetition: int):
    """Scores of a chain of updates f0 -> f1 -> ... over growing data."""
    (folds,) = split_folds(len(data), ITERATIVE_FOLDS, 1, derive_seed(cfg.seed, repetition))
    test = data.subset(np.sort(folds[-1]))
    f0 = fit(data.subset(np.sort(folds[0])), cfg.grow, cfg.epsilon)
    pred0 = np.asarray(f0.predict(test.X))
    scores = []
    for alpha, beta in cfg.configs:
        previous, previous_pred = f0, pred0
        rows = folds[0]
        trajectory = []
        for t in range(1, ITERATIVE_FOLDS - 1):
            rows = np.concatenate([rows, folds[t]])
            current = update(
                previous, data.subset(np.sort(rows)), cfg.grow, cfg.loss_config(alpha, beta)
            )
            trajectory.append(score(previous, current, test, previous_pred))
            previous, previous_pred = current, np.asarray(current.predict(test.X))
        scores.append(trajectory)
    return scores


async def _run_tasks(
    task: Callable, arguments: list[tuple], jobs: int, verbose: int, desc: str
) -> list:
    if jobs > 1:
        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [loop.run_in_executor(pool, partial(task, *args)) for args in arguments]
            if verbose > 1:
                return await tqdm.gather(*futures, desc=desc)
            return await asyncio.gather(*futures)
    results = []
    for args in sync_tqdm(arguments, desc=desc, disable=verbose < 2):
        results.append(task(*args))
        await asyncio.sleep(0)
    return results


def _mean(values: list[float]) -> float:
    return fsum(values) / len(values)


async def run_main(
    data: Dataset, cfg: ExperimentConfig, jobs: int = 1, verbose: int = 0
) -> ParetoReport:
    """Repeated k-fold protocol: every fold is test data once per repeat."""
    cfg = replace(cfg, setup="main")
    assignments = split_folds(len(data), cfg.folds, cfg.repeats, cfg.seed)
    arguments = [
        (data, cfg, repeat, fold, folds)
        for repeat, folds in enumerate(assignments)
        for fold in range(cfg.folds)
    ]
    results = await _run_tasks(main_task, arguments, jobs, verbose, f"{data.name} main")
    configs = cfg.configs
    losses = [_mean([run[i][0] for run in results]) for i in range(len(configs))]
    instabilities = [_mean([run[i][1] for run in results]) for i in range(len(configs))]
    runs = [
        {"repeat": repeat, "fold": fold, "seed": derive_seed(cfg.seed, repeat, fold)}
        for _, _, repeat, fold, _ in arguments
    ]
    report = ParetoReport(
        setup="main",
        dataset=data.name,
        rows=build_rows(data.name, configs, losses, instabilities),
        runs=runs,
    )
    if verbose > 1:
        print(f"{data.name}: {len(report.pareto_rows())} of {len(report)} configs on the frontier")
    return report


async def run_varied_n(
    data: Dataset, cfg: ExperimentConfig, jobs: int = 1, verbose: int = 0
) -> ParetoReport:
    """Fixed test hold-out, D1 sampled at each size in `cfg.n_values`."""
    cfg = replace(cfg, setup="varied_n")
    for n in cfg.n_values:
        if n < 2 or n + cfg.test_size > len(data):
            raise InputValidationError(
                f"n={n} plus {cfg.test_size} test rows exceeds {len(data)} rows"
            )
    arguments = [
        (data, cfg, repetition, n)
        for repetition in range(cfg.repetitions)
        for n in cfg.n_values
    ]
    results = await _run_tasks(varied_n_task, arguments, jobs, verbose, f"{data.name} varied n")
    configs = cfg.configs
    rows = []
    for n in cfg.n_values:
        group = [result for args, result in zip(arguments, results) if args[3] == n]
        losses = [_mean([run[i][0] for run in group]) for i in range(len(configs))]
        instabilities = [_mean([run[i][1] for run in group]) for i in range(len(configs))]
        rows.extend(build_rows(data.name, configs, losses, instabilities, n=n))
    runs = [
        {
            "repetition": repetition,
            "n": n,
            "holdout_seed": derive_seed(cfg.seed, repetition),
            "seed": derive_seed(cfg.seed, repetition, n),
            "half_seed": derive_seed(cfg.seed, repetition, n, 1),
        }
        for _, _, repetition, n in arguments
    ]
    return ParetoReport(setup="varied_n", dataset=data.name, rows=rows, runs=runs)


async def run_iterative(
    data: Dataset, cfg: ExperimentConfig, jobs: int = 1, verbose: int = 0
) -> ParetoReport:
    """Seven folds: one initial, five update batches, one test fold."""
    cfg = replace(cfg, setup="iterative")
    if len(data) < ITERATIVE_FOLDS:
        raise InputValidationError(f"Need at least {ITERATIVE_FOLDS} rows")
    arguments = [(data, cfg, repetition) for repetition in range(cfg.repetitions)]
    results = await _run_tasks(iterative_task, arguments, jobs, verbose, f"{data.name} iterative")
    configs = cfg.configs
    rows = []
    for t in range(ITERATIVE_FOLDS - 2):
        losses = [_mean([run[i][t][0] for run in results]) for i in range(len(configs))]
        instabilities = [_mean([run[i][t][1] for run in results]) for i in range(len(configs))]
        rows.extend(build_rows(data.name, configs, losses, instabilities, iteration=t + 1))
    runs = [
        {"repetition": repetition, "seed": derive_seed(cfg.seed, repetition)}
        for _, _, repetition in arguments
    ]
    return ParetoReport(setup="iterative", dataset=data.name, rows=rows, runs=runs)


protocols_map = {
    "main": run_main,
    "varied_n": run_varied_n,
    "iterative": run_iterative,
}


def write_manifest(path: Path | str, cfg: ExperimentConfig, report: ParetoReport):
    manifest = {
        "setup": report.setup,
        "dataset": report.dataset,
        "grid": [list(config) for config in cfg.configs],
        "folds": cfg.folds if report.setup == "main" else ITERATIVE_FOLDS,
        "repeats": cfg.repeats,
        "repetitions": cfg.repetitions,
        "seed": cfg.seed,
        "epsilon": cfg.epsilon,
        "n_values": cfg.n_values if report.setup == "varied_n" else None,
        "test_size": cfg.test_size if report.setup == "varied_n" else None,
        "grow": asdict(cfg.grow),
        "runs": report.runs,
        "averaging": AVERAGING,
        "version": __version__,
    }
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n")
