from dataclasses import dataclass, field

import numpy as np

from stabletree.errors import ArityError, InputValidationError, UnsupportedPenaltyError
from stabletree.losses import get_instability, get_loss
from stabletree.utils import DEFAULT_EPSILON, fsum


@dataclass(frozen=True)
class StableLossConfig:
    alpha: float = 0.0
    beta: float = 0.0
    epsilon: float = DEFAULT_EPSILON
    loss_kind: str = "squared_error"
    instability_kind: str = "squared_error"
    k: float | None = None  # neg_coverage threshold, no default

    def __post_init__(self):
        for name in ("alpha", "beta"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise InputValidationError(f"{name} must be finite and >= 0, got {value}")
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise InputValidationError(f"epsilon must be > 0, got {self.epsilon}")
        get_loss(self.loss_kind)
        get_instability(self.instability_kind, self.k)

    @property
    def is_baseline(self) -> bool:
        return self.alpha == 0 and self.beta == 0


@dataclass
class RowTargets:
    """Per-row response, prior prediction and regularization strength."""

    y: np.ndarray
    w0: np.ndarray = field(default=None)  # type: ignore
    gamma: np.ndarray = field(default=None)  # type: ignore
    phi: np.ndarray = field(default=None)  # type: ignore

    def __post_init__(self):
        self.y = np.atleast_1d(np.asarray(self.y, dtype=np.float64))
        n = len(self.y)
        for name in ("w0", "gamma", "phi"):
            value = getattr(self, name)
            value = np.zeros(n) if value is None else np.asarray(value, dtype=np.float64)
            value = np.broadcast_to(np.atleast_1d(value), (n,)).copy()
            setattr(self, name, value)

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, index) -> "RowTargets":
        return RowTargets(self.y[index], self.w0[index], self.gamma[index], self.phi[index])


@dataclass
class GradHess:
    g: np.ndarray
    h: np.ndarray

    def __len__(self) -> int:
        return len(self.g)

    def subset(self, index) -> "GradHess":
        return GradHess(self.g[index], self.h[index])


def gamma_schedule(phi, cfg: StableLossConfig) -> np.ndarray:
    """gamma_i = alpha + beta * phi_i."""
    phi = np.asarray(phi, dtype=np.float64)
    if not np.isfinite(phi).all() or (phi < 0).any():
        raise InputValidationError("phi must be finite and non-negative")
    return cfg.alpha + cfg.beta * phi


def grad_hess(rows: RowTargets, cfg: StableLossConfig) -> GradHess:
    """Derivatives of L(y, w) + gamma * S(w0, w) at w = 0."""
    penalty = get_instability(cfg.instability_kind, cfg.k)
    if not penalty.smooth:
        raise UnsupportedPenaltyError(
            f"Instability {cfg.instability_kind!r} is not smooth and cannot be trained on"
        )
    loss = get_loss(cfg.loss_kind)
    g = loss.gradient(rows.y, 0.0) + rows.gamma * penalty.gradient(rows.w0, 0.0)
    h = loss.hessian(rows.y, 0.0) + rows.gamma * penalty.hessian(rows.w0, 0.0)
    if not (np.isfinite(g).all() and np.isfinite(h).all()):
        raise InputValidationError("Gradients and Hessians must be finite")
    if (h <= 0).any():
        raise InputValidationError("Hessians must be positive")
    return GradHess(g=g, h=h)


def weight_from_sums(g, h) -> float:
    """-sum(g) / sum(h), exactly rounded and independent of row order."""
    if len(g) == 0:
        raise InputValidationError("A leaf must contain at least one row")
    return -fsum(g) / fsum(h)


def leaf_weight(rows: RowTargets, cfg: StableLossConfig) -> float:
    gh = grad_hess(rows, cfg)
    return weight_from_sums(gh.g, gh.h)


def stable_loss(rows: RowTargets, w, cfg: StableLossConfig) -> np.ndarray:
    """Per-row L(y, w) + gamma * S(w0, w)."""
    loss = get_loss(cfg.loss_kind)
    penalty = get_instability(cfg.instability_kind, cfg.k)
    return loss.value(rows.y, w) + rows.gamma * penalty.value(rows.w0, w)


def instability(pred0, pred1, kind: str = "squared_error", k: float | None = None) -> float:
    """Mean pointwise instability between two prediction vectors."""
    pred0 = np.atleast_1d(np.asarray(pred0, dtype=np.float64))
    pred1 = np.atleast_1d(np.asarray(pred1, dtype=np.float64))
    if pred0.shape != pred1.shape:
        raise ArityError(f"Prediction lengths differ: {len(pred0)} vs {len(pred1)}")
    if len(pred0) == 0:
        raise InputValidationError("Instability needs at least one prediction")
    return fsum(get_instability(kind, k).value(pred0, pred1)) / len(pred0)


def mean_squared_error(y, pred) -> float:
    y = np.asarray(y, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if y.shape != pred.shape:
        raise ArityError(f"Lengths differ: {len(y)} vs {len(pred)}")
    return fsum(get_loss("squared_error").value(y, pred)) / len(y)
