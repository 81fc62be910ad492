import numpy as np


class Loss:
    """Training loss L(y, w) with derivatives in the prediction w."""

    name: str = "base_loss"

    def value(self, y: np.ndarray, w: np.ndarray | float) -> np.ndarray:
        raise NotImplementedError()

    def gradient(self, y: np.ndarray, w: np.ndarray | float) -> np.ndarray:
        raise NotImplementedError()

    def hessian(self, y: np.ndarray, w: np.ndarray | float) -> np.ndarray:
        raise NotImplementedError()


class Instability:
    """Discrepancy S(a, b) between a prior prediction a and an update b.

    Subclasses that are not smooth in b leave `smooth` False and cannot be
    used as a training penalty.
    """

    name: str = "base_instability"
    smooth: bool = False

    def value(self, a: np.ndarray, b: np.ndarray | float) -> np.ndarray:
        raise NotImplementedError()

    def gradient(self, a: np.ndarray, b: np.ndarray | float) -> np.ndarray:
        raise NotImplementedError()

    def hessian(self, a: np.ndarray, b: np.ndarray | float) -> np.ndarray:
        raise NotImplementedError()
