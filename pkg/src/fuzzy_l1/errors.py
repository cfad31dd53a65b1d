from typing import Optional


class FuzzyL1Error(Exception):
    """Base class for every error raised by fuzzy_l1."""


class IntegrationFault(FuzzyL1Error, RuntimeError):
    """A state derivative evaluated to a non-finite value."""
    def __init__(self, t: float) -> None:
        super().__init__(f"Non-finite state derivative at t={t:.6g} s")
        self.t = t


class DivergenceError(FuzzyL1Error, RuntimeError):
    """The plant state left the divergence-detector envelope."""
    def __init__(self, t: float, norm: float) -> None:
        super().__init__(
            f"Plant state diverged at t={t:.6g} s (|x|_inf={norm:.6g})")
        self.t = t
        self.norm = norm


class ControllabilityError(FuzzyL1Error, ValueError):
    pass


class StabilityPreconditionError(FuzzyL1Error, ValueError):
    pass


class SingularFeedforwardError(FuzzyL1Error, ValueError):
    pass


class ProperTransferFunctionError(FuzzyL1Error, ValueError):
    pass


class NoRuleFiredError(FuzzyL1Error, ValueError):
    pass


class ConfigError(FuzzyL1Error, ValueError):
    """Invalid run configuration.

    Args:
        key (str): Dotted path of the offending configuration key.
        message (str): What is wrong with it.
        line (int, optional): Line of the key in the source file, if known.
    """
    def __init__(self,
                 key: str,
                 message: str,
                 line: Optional[int] = None) -> None:
        location = f" (line {line})" if line is not None else ""
        super().__init__(f"{key}{location}: {message}")
        self.key = key
        self.message = message
        self.line = line
