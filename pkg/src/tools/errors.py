from typing import Optional


class NetidentError(Exception):
    """Base class for every error raised by the toolkit"""

    exit_code = 3

    def __init__(self, message: str, stage: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    def __str__(self) -> str:
        if self.stage:
            return f"[{self.stage}] {self.message}"
        return self.message


class InputError(NetidentError, ValueError):
    """
    Malformed or inconsistent input: bad documents, dimension mismatch,
    non-hollow G, non-monic H, inconsistent flags, absent target edge.
    """

    exit_code = 2

    def __init__(self, message: str, position: Optional[str] = None, stage: Optional[str] = None):
        super().__init__(message, stage=stage)
        self.position = position

    def __str__(self) -> str:
        text = super().__str__()
        if self.position:
            return f"{text} (at {self.position})"
        return text


class NumericalError(NetidentError, ArithmeticError):
    """Ill-posed inverse, failed factorization, unstable system, too-short data"""

    exit_code = 3


class InfeasibleSelectionError(NetidentError):
    """No selection satisfying the required graph conditions exists"""

    exit_code = 1
