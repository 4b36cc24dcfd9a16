from __future__ import annotations


class ApfEmdError(RuntimeError):
    pass


class InputError(ApfEmdError):
    """Bad input data or configuration (CLI exit code 2)."""


class ComputationError(ApfEmdError):
    """A numerical step could not proceed (CLI exit code 3)."""


class ConfigError(InputError):
    def __init__(self, message: str, *, key: str = "") -> None:
        super().__init__(message)
        self.key = key


class AlignmentError(InputError):
    pass


class RangeError(InputError):
    pass


class WindowError(InputError):
    pass


class DegenerateInputError(InputError):
    pass


class FingerprintMismatchError(InputError):
    pass


class ResidueReached(ComputationError):
    """Signal has too few extrema to sift; the caller treats it as the residue."""


class UndefinedSdError(ComputationError):
    pass


class UndefinedPhaseError(ComputationError):
    pass


class UndefinedThdError(ComputationError):
    pass


class UndefinedPowerFactorError(ComputationError):
    pass


class VoltageCollapseError(ComputationError):
    def __init__(self, index: int, norm: float) -> None:
        super().__init__(f"Voltage norm {norm:.3e} below guard at sample {index}")
        self.index = index
        self.norm = norm
