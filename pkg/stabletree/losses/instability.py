import numpy as np

from stabletree.errors import InputValidationError
from stabletree.losses.base_loss import Instability


class AbsoluteInstability(Instability):
    name = "absolute_error"

    def value(self, a, b):
        return np.abs(np.asarray(a, dtype=np.float64) - b)


class NegativeCoverage(Instability):
    """-1 when the update stays within k of the prior prediction, else 0."""

    name = "neg_coverage"

    def __init__(self, k: float):
        if not (np.isfinite(k) and k > 0):
            raise InputValidationError(f"neg_coverage needs k > 0, got {k}")
        self.k = float(k)

    def value(self, a, b):
        inside = np.abs(np.asarray(a, dtype=np.float64) - b) <= self.k
        return -inside.astype(np.float64)
