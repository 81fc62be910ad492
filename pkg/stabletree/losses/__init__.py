from stabletree.errors import InputValidationError
from stabletree.losses.base_loss import Instability, Loss  # noqa: F401
from stabletree.losses.instability import AbsoluteInstability, NegativeCoverage
from stabletree.losses.squared_error import SquaredError, SquaredInstability

losses_map: dict[str, type[Loss]] = {
    "squared_error": SquaredError,
}

instabilities_map: dict[str, type[Instability]] = {
    "squared_error": SquaredInstability,
    "absolute_error": AbsoluteInstability,
    "neg_coverage": NegativeCoverage,
}


def get_loss(name: str) -> Loss:
    if name not in losses_map:
        raise InputValidationError(
            f"Unknown loss {name!r}; choose from {sorted(losses_map)}"
        )
    return losses_map[name]()


def get_instability(name: str, k: float | None = None) -> Instability:
    if name not in instabilities_map:
        raise InputValidationError(
            f"Unknown instability {name!r}; choose from {sorted(instabilities_map)}"
        )
    if name == "neg_coverage":
        if k is None:
            raise InputValidationError("neg_coverage requires a threshold k")
        return NegativeCoverage(k)
    return instabilities_map[name]()
