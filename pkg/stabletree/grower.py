import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from stabletree.datasets import Dataset
from stabletree.errors import InputValidationError
from stabletree.stable_loss import (
    GradHess,
    RowTargets,
    StableLossConfig,
    gamma_schedule,
    grad_hess,
    weight_from_sums,
)
from stabletree.tree import FitMeta, LeafNode, SplitNode, TreeModel, build_tree
from stabletree.uncertainty import (
    CirEstimator,
    cir_adjustment,
    get_estimator,
    leaf_prediction_variance,
    phi_weights,
    response_variance,
)
from stabletree.utils import fsum


@dataclass(frozen=True)
class GrowConfig:
    adaptive_stopping: bool = True
    stopping: Literal["optimism", "threshold"] = "optimism"
    min_reduction: float = 0.0  # used by stopping="threshold"
    max_depth: int | None = None
    min_samples_leaf: int = 2
    cir_paths: int = 1000
    cir_grid: int = 100
    seed: int = 0
    verbose: int = 0

    def __post_init__(self):
        if self.min_samples_leaf < 1:
            raise InputValidationError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise InputValidationError("max_depth must be >= 0")
        if self.stopping not in ("optimism", "threshold"):
            raise InputValidationError(f"Unknown stopping rule {self.stopping!r}")

    @property
    def estimator(self) -> CirEstimator:
        return get_estimator(self.cir_paths, self.cir_grid, self.seed)


@dataclass
class SplitCandidate:
    feature_index: int
    split_value: float
    reduction: float
    n_left: int
    n_right: int
    left_optimism: float = 0.0
    right_optimism: float = 0.0


@dataclass
class NodeSearch:
    """Everything the split search learned about one node."""

    candidate: SplitCandidate | None
    fractions: list[np.ndarray] = field(default_factory=list)
    grad_sum: float = 0.0
    hess_sum: float = 0.0
    optimism: float = 0.0


def optimism(g: np.ndarray, h: np.ndarray) -> float:
    """sum((g + h*w)^2) / sum(h) at the node's own weight w."""
    hess = fsum(h)
    weight = -fsum(g) / hess
    return fsum((g + h * weight) ** 2) / hess


def exact_reduction(g: np.ndarray, h: np.ndarray, left: np.ndarray) -> float:
    g_left, h_left = fsum(g[left]), fsum(h[left])
    g_right, h_right = fsum(g[~left]), fsum(h[~left])
    hess = h_left + h_right
    return 0.5 * h_left * h_right / hess * (g_left / h_left - g_right / h_right) ** 2


def sweep_feature(
    x: np.ndarray, g: np.ndarray, h: np.ndarray, min_samples_leaf: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(split values, reductions, left counts) of every admissible split of x.

    One pass over the rows sorted by x accumulates left gradient and Hessian
    sums; candidates sit at midpoints between consecutive distinct values.
    """
    order = np.lexsort((h, g, x))
    xs, gs, hs = x[order], g[order], h[order]
    n = len(xs)
    grad, hess = fsum(gs), fsum(hs)
    n_left = np.arange(1, n)
    valid = (xs[1:] > xs[:-1]) & (n_left >= min_samples_leaf) & (n - n_left >= min_samples_leaf)
    at = np.flatnonzero(valid)
    g_left = np.cumsum(gs)[:-1][at]
    h_left = np.cumsum(hs)[:-1][at]
    g_right, h_right = grad - g_left, hess - h_left
    with np.errstate(divide="ignore", invalid="ignore"):
        reduction = 0.5 * h_left * h_right / hess * (g_left / h_left - g_right / h_right) ** 2
    lo, hi = xs[at], xs[at + 1]
    value = (lo + hi) / 2
    value = np.where(np.isfinite(value), value, lo / 2 + hi / 2)
    value = np.where(value >= hi, lo, value)
    return value, reduction, n_left[at]


def search_node(
    X: np.ndarray, gh: GradHess, rows: np.ndarray, min_samples_leaf: int = 2
) -> NodeSearch:
    g, h = gh.g[rows], gh.h[rows]
    if not (np.isfinite(g).all() and np.isfinite(h).all()):
        raise InputValidationError("Gradients and Hessians must be finite")
    n = len(rows)
    grad, hess = fsum(g), fsum(h)
    search = NodeSearch(
        candidate=None,
        fractions=[np.empty(0) for _ in range(X.shape[1])],
        grad_sum=grad,
        hess_sum=hess,
        optimism=optimism(g, h) if n else 0.0,
    )
    if n < 2 * min_samples_leaf:
        return search
    # Reductions below this are rounding noise of an all-equal g/h ratio.
    noise = 4 * n * np.finfo(np.float64).eps * np.max(np.abs(g / h))
    tolerance = 0.5 * hess * noise**2

    best: SplitCandidate | None = None
    for feature in range(X.shape[1]):
        x = X[rows, feature]
        values, reductions, n_left = sweep_feature(x, g, h, min_samples_leaf)
        search.fractions[feature] = n_left / n
        if not len(reductions):
            continue
        k = int(np.argmax(reductions))
        if not reductions[k] > tolerance:
            continue
        left = x <= values[k]
        reduction = exact_reduction(g, h, left)
        if best is None or reduction > best.reduction:
            best = SplitCandidate(
                feature_index=feature,
                split_value=float(values[k]),
                reduction=reduction,
                n_left=int(n_left[k]),
                n_right=int(n - n_left[k]),
                left_optimism=optimism(g[left], h[left]),
                right_optimism=optimism(g[~left], h[~left]),
            )
    search.candidate = best
    return search


def best_split(
    X: np.ndarray, gh: GradHess, rows: np.ndarray | None = None, min_samples_leaf: int = 2
) -> SplitCandidate | None:
    """Split maximizing the second-order loss reduction, or None."""
    rows = np.arange(len(gh)) if rows is None else np.asarray(rows)
    return search_node(X, gh, rows, min_samples_leaf).candidate


def accept_split(
    candidate: SplitCandidate | None,
    search: NodeSearch,
    adjustment: float,
    cfg: GrowConfig = GrowConfig(),
) -> bool:
    """Keep a split only if its reduction beats the optimism it buys.

    The two children's optimism is scaled by the greedy-search adjustment
    from `cir_adjustment`; with a single candidate split this is AIC.
    """
    if candidate is None:
        return False
    if not (math.isfinite(candidate.reduction) and candidate.reduction > 0):
        return False
    if cfg.stopping == "threshold":
        return candidate.reduction > cfg.min_reduction
    threshold = adjustment * (candidate.left_optimism + candidate.right_optimism) - search.optimism
    if not math.isfinite(threshold):
        return False
    return candidate.reduction > threshold


def grow(
    X: np.ndarray,
    gh: GradHess,
    cfg: GrowConfig,
    y: np.ndarray | None = None,
    feature_names: list[str] | None = None,
    meta: FitMeta | None = None,
) -> TreeModel:
    """Greedy top-down growth; nodes and leaf ids come out in pre-order."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise InputValidationError("grow needs a non-empty feature matrix")
    if len(gh) != len(X):
        raise InputValidationError(f"{len(X)} rows but {len(gh)} gradient pairs")
    y = np.zeros(len(X)) if y is None else np.asarray(y, dtype=np.float64)
    feature_names = feature_names or [f"x{j}" for j in range(X.shape[1])]
    meta = meta or FitMeta(
        loss="squared_error", alpha=0.0, beta=0.0, epsilon=0.01, c=0.0, seed=cfg.seed
    )
    estimator = cfg.estimator

    nodes: list[SplitNode | LeafNode] = []
    n_leaves = 0
    stack: list[tuple[np.ndarray, int, float]] = [(np.arange(len(X)), 0, 1.0)]
    while stack:
        rows, depth, parent_adjustment = stack.pop()
        if cfg.max_depth is None or depth < cfg.max_depth:
            search = search_node(X, gh, rows, cfg.min_samples_leaf)
            candidate = search.candidate
            if candidate is not None:
                adjustment = cir_adjustment(search.fractions, estimator)
                if not cfg.adaptive_stopping or accept_split(candidate, search, adjustment, cfg):
                    nodes.append(
                        SplitNode(
                            type="split",
                            feature=candidate.feature_index,
                            value=candidate.split_value,
                        )
                    )
                    left = X[rows, candidate.feature_index] <= candidate.split_value
                    stack.append((rows[~left], depth + 1, adjustment))
                    stack.append((rows[left], depth + 1, adjustment))
                    continue
        leaf_gh = gh.subset(rows)
        n_leaves += 1
        weight = weight_from_sums(leaf_gh.g, leaf_gh.h)
        nodes.append(
            LeafNode(
                type="leaf",
                leaf_id=n_leaves,
                weight=weight,
                n_train=len(rows),
                response_variance=response_variance(y[rows]),
                prediction_variance=leaf_prediction_variance(leaf_gh, weight, parent_adjustment),
            )
        )
    tree = build_tree(nodes, feature_names, meta)
    if cfg.verbose > 1:
        print(f"Grew tree with {tree.n_leaves} leaves, depth {tree.depth()}")
    return tree


def fit(data: Dataset, cfg: GrowConfig = GrowConfig(), epsilon: float = 0.01) -> TreeModel:
    """Plain second-order tree, gamma = 0 for every row."""
    loss_cfg = StableLossConfig(epsilon=epsilon)
    gh = grad_hess(RowTargets(data.y), loss_cfg)
    meta = FitMeta(
        loss=loss_cfg.loss_kind, alpha=0.0, beta=0.0, epsilon=epsilon, c=0.0, seed=cfg.seed
    )
    return grow(data.X, gh, cfg, y=data.y, feature_names=data.feature_names, meta=meta)


def update_targets(f0: TreeModel, data1: Dataset, loss_cfg: StableLossConfig) -> tuple[RowTargets, float]:
    """Prior predictions, phi and gamma for every row of D1."""
    w0 = np.asarray(f0.predict(data1.X))
    weights = phi_weights(f0, data1.X, loss_cfg.epsilon)
    gamma = gamma_schedule(weights.values, loss_cfg)
    return RowTargets(y=data1.y, w0=w0, gamma=gamma, phi=weights.values), weights.c


def update(
    f0: TreeModel,
    data1: Dataset,
    cfg: GrowConfig = GrowConfig(),
    loss_cfg: StableLossConfig = StableLossConfig(),
) -> TreeModel:
    """Grow f1 on D1 under the stable loss anchored at f0's predictions."""
    data1 = data1.select(f0.feature_names)
    rows, c = update_targets(f0, data1, loss_cfg)
    gh = grad_hess(rows, loss_cfg)
    meta = FitMeta(
        loss=loss_cfg.loss_kind,
        alpha=loss_cfg.alpha,
        beta=loss_cfg.beta,
        epsilon=loss_cfg.epsilon,
        c=c,
        seed=cfg.seed,
    )
    return grow(data1.X, gh, cfg, y=data1.y, feature_names=data1.feature_names, meta=meta)
