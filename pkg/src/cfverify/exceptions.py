"""Exception types shared across the toolkit."""


class CfverifyError(Exception):
    """Root of every error the toolkit raises deliberately."""


class ContractError(CfverifyError, ValueError):
    """An argument violates a structural contract (shapes, generator counts)."""


class ParityError(ContractError):
    """An operation requiring even Grassmann parity received odd-degree terms."""


class SingularityError(CfverifyError, ArithmeticError):
    """The numeric part of a Grassmann quantity is not invertible."""


class DomainError(CfverifyError, ValueError):
    """A parameter lies outside the validity domain of a formula."""


class StableRangeError(DomainError):
    """The color count N lies below the stable range of the transformation."""


class DivergenceError(CfverifyError, ArithmeticError):
    """A quadrature failed to converge under refinement."""


class PoleError(CfverifyError, ArithmeticError):
    """Evaluation requested at (or too close to) a pole."""
