"""Exception hierarchy shared by all qroute modules."""


class QrouteError(Exception):
    """Base class for every error raised by qroute."""


class ValidationError(QrouteError):
    """A circuit, placement or input failed a structural check."""


class MultiQubitPrimitivePresent(ValidationError):
    """CCX, CSWAP or SWAP must be decomposed before this operation."""


class InvalidPermutation(ValidationError):
    pass


class TooManyQubits(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class QubitCountMismatch(ValidationError):
    pass


class NonLinearGate(ValidationError):
    """Only CX gates have an F2-linear action on basis labels."""


class UnsupportedControlledW(ValidationError):
    pass


class TargetNotFound(ValidationError):
    pass


class RoleUnsupported(ValidationError):
    pass


class InvalidPlacement(ValidationError):
    pass


class IdentityString(ValidationError):
    """exp(-i theta I) is a global phase and needs no circuit."""


class InvalidCoupling(ValidationError):
    pass


class Unreachable(QrouteError):
    pass


class MissingPair(ValidationError):
    pass


class SingularConfusion(ValidationError):
    pass


class NotUnitary(ValidationError):
    pass


class EmptyFamily(ValidationError):
    pass


class IncompatibleSlot(ValidationError):
    pass


class AllShotsRejected(QrouteError):
    pass


class SolverDidNotConverge(QrouteError):
    def __init__(self, iterations: int, gap: float, context: str = ""):
        self.iterations = iterations
        self.gap = gap
        msg = f"SDP solver stopped after {iterations} iterations with gap {gap:.3e}"
        if context:
            msg = f"{msg} ({context})"
        super().__init__(msg)


class QasmError(QrouteError):
    """Parse error carrying a 1-based line and column."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}")


class QasmSyntaxError(QasmError):
    pass


class UnsupportedGate(QasmError):
    pass


class UndeclaredRegister(QasmError):
    pass
