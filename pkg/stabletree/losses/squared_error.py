import numpy as np

from stabletree.losses.base_loss import Instability, Loss


class SquaredError(Loss):
    name = "squared_error"

    def value(self, y, w):
        return (np.asarray(y, dtype=np.float64) - w) ** 2

    def gradient(self, y, w):
        return -2.0 * (np.asarray(y, dtype=np.float64) - w)

    def hessian(self, y, w):
        return np.full(np.shape(y), 2.0)


class SquaredInstability(Instability):
    name = "squared_error"
    smooth = True

    def value(self, a, b):
        return (np.asarray(a, dtype=np.float64) - b) ** 2

    def gradient(self, a, b):
        return -2.0 * (np.asarray(a, dtype=np.float64) - b)

    def hessian(self, a, b):
        return np.full(np.shape(a), 2.0)
