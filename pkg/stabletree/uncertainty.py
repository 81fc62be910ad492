from dataclasses import dataclass, field
from functools import cache
from typing import Sequence

import numpy as np
from scipy.special import logit

from stabletree.errors import InputValidationError
from stabletree.stable_loss import GradHess
from stabletree.tree import TreeModel
from stabletree.utils import fsum

PI_FLOOR = 1e-5


@dataclass
class CirEstimator:
    """Monte-Carlo estimate of the greedy-split variance adjustment.

    Each feature gets its own stationary CIR path set, dS = bet(mu - S)dt +
    sig*sqrt(S)dW with chi-squared(1) marginal, on a fixed logit-time grid.
    The adjustment for a node is (1 + E[max_j max_pi S_j(pi)]) / 2 where
    pi runs over the data fractions of the node's candidate splits.
    """

    n_paths: int = 1000
    grid_size: int = 100
    seed: int = 0
    bet: float = 1.0
    mu: float = 1.0
    sig: float = 2.0
    _paths: dict[int, np.ndarray] = field(default_factory=dict, repr=False)
    _maxima: dict[tuple[int, tuple[int, ...]], np.ndarray] = field(
        default_factory=dict, repr=False
    )

    def __post_init__(self):
        if self.n_paths < 1:
            raise InputValidationError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.grid_size < 2:
            raise InputValidationError(f"grid_size must be >= 2, got {self.grid_size}")
        self.horizon = 2 * float(logit(1 - PI_FLOOR))
        self.dt = self.horizon / (self.grid_size - 1)

    def sample_paths(self, feature: int) -> np.ndarray:
        """(n_paths, grid_size) stationary paths for one feature slot."""
        if feature not in self._paths:
            rng = np.random.default_rng([self.seed, feature])
            df = 4 * self.bet * self.mu / self.sig**2
            c = 4 * self.bet / (self.sig**2 * (1 - np.exp(-self.bet * self.dt)))
            decay = np.exp(-self.bet * self.dt)
            paths = np.empty((self.n_paths, self.grid_size))
            paths[:, 0] = rng.gamma(
                2 * self.bet * self.mu / self.sig**2,
                self.sig**2 / (2 * self.bet),
                size=self.n_paths,
            )
            for i in range(1, self.grid_size):
                paths[:, i] = rng.noncentral_chisquare(df, c * decay * paths[:, i - 1]) / c
            self._paths[feature] = paths
        return self._paths[feature]

    def grid_index(self, fractions) -> np.ndarray:
        fractions = np.clip(np.asarray(fractions, dtype=np.float64), PI_FLOOR, 1 - PI_FLOOR)
        times = logit(fractions) - logit(PI_FLOOR)
        index = np.clip(np.rint(times / self.dt), 0, self.grid_size - 1).astype(np.int64)
        return np.unique(index)

    def feature_maxima(self, feature: int, fractions) -> np.ndarray:
        index = tuple(self.grid_index(fractions).tolist())
        key = (feature, index)
        if key not in self._maxima:
            self._maxima[key] = self.sample_paths(feature)[:, list(index)].max(axis=1)
        return self._maxima[key]

    def adjustment(self, fractions: Sequence[np.ndarray]) -> float:
        """fractions[j] holds the candidate split fractions seen for feature j."""
        maxima = [
            self.feature_maxima(j, f) for j, f in enumerate(fractions) if len(f) > 0
        ]
        if not maxima:
            return 1.0
        best = np.max(np.vstack(maxima), axis=0)
        return max(1.0, (1.0 + fsum(best) / self.n_paths) / 2.0)


@cache
def get_estimator(n_paths: int = 1000, grid_size: int = 100, seed: int = 0) -> CirEstimator:
    return CirEstimator(n_paths=n_paths, grid_size=grid_size, seed=seed)


def cir_adjustment(fractions: Sequence[np.ndarray], estimator: CirEstimator) -> float:
    return estimator.adjustment(fractions)


@dataclass
class LeafVariance:
    huber_term: float
    adjustment: float

    @property
    def variance(self) -> float:
        return self.huber_term * self.adjustment


@dataclass
class PhiWeights:
    c: float
    epsilon: float
    values: np.ndarray


def huber_variance(gh: GradHess, weight: float) -> float:
    """Sandwich estimate sum((g + h*w)^2) / sum(h)^2 for one leaf."""
    if len(gh) == 0:
        raise InputValidationError("A leaf must contain at least one row")
    hess = fsum(gh.h)
    if hess <= 0:
        raise InputValidationError("Hessian sum must be positive")
    return fsum((gh.g + gh.h * weight) ** 2) / hess**2


def leaf_variance(gh: GradHess, weight: float, adjustment: float) -> LeafVariance:
    if not adjustment >= 1:
        raise InputValidationError(f"Adjustment must be >= 1, got {adjustment}")
    return LeafVariance(huber_term=huber_variance(gh, weight), adjustment=adjustment)


def leaf_prediction_variance(gh: GradHess, weight: float, adjustment: float) -> float:
    return leaf_variance(gh, weight, adjustment).variance


def response_variance(y) -> float:
    """Within-leaf variance of y with divisor n; 0 for a single row."""
    y = np.asarray(y, dtype=np.float64)
    if len(y) < 2:
        return 0.0
    mean = fsum(y) / len(y)
    return fsum((y - mean) ** 2) / len(y)


def scaling_constant(f0: TreeModel, n0: int | None = None) -> float:
    """Average response variance of f0's leaves, weighted by training rows."""
    leaves = f0.leaves()
    if n0 is None:
        n0 = sum(leaf["n_train"] for leaf in leaves)
    if n0 <= 0:
        raise InputValidationError("n0 must be positive")
    return fsum([leaf["n_train"] * leaf["response_variance"] for leaf in leaves]) / n0


def phi(f0: TreeModel, x, c: float, epsilon: float) -> float | np.ndarray:
    """c / (n(x) * var(w0(x)) + epsilon), read from the leaf x routes to in f0."""
    if not (np.isfinite(c) and c >= 0):
        raise InputValidationError(f"c must be finite and >= 0, got {c}")
    if not (np.isfinite(epsilon) and epsilon > 0):
        raise InputValidationError(f"epsilon must be > 0, got {epsilon}")
    n_train, variance = f0.leaf_statistics(x)
    values = np.zeros(len(n_train)) if c == 0 else c / (n_train * variance + epsilon)
    return float(values[0]) if np.ndim(x) == 1 else values


def phi_weights(f0: TreeModel, x, epsilon: float, n0: int | None = None) -> PhiWeights:
    c = scaling_constant(f0, n0)
    return PhiWeights(c=c, epsilon=epsilon, values=np.atleast_1d(phi(f0, x, c, epsilon)))
