"""
Exception hierarchy shared by all subrq packages

Calculators raise these; orchestrators (normal_form pipeline, cli task runner)
catch SubrqError per task and turn it into a failed task record.

Usage:
    from shared.errors import PreconditionError

    if not np.allclose(G[-1], e_d):
        raise PreconditionError('G must fix e_d')
"""


class SubrqError(Exception):
    """Base class for every error raised by subrq"""


# Expression layer

class ExprError(SubrqError):
    """Problems parsing or evaluating an expression"""


class ExprSyntaxError(ExprError):
    """Malformed expression text; offset is the byte position of the problem"""

    def __init__(self, message, offset, source=''):
        self.offset = offset
        self.source = source
        super().__init__(f'{message} at offset {offset}')


class ExprNameError(ExprError):
    """Identifier that is neither a declared variable nor a known function"""


class ExprArityError(ExprError):
    """Function applied to the wrong number of arguments"""


class ExprDomainError(ExprError):
    """Division by zero, sqrt of a negative number, and similar"""


# Numerical core

class PreconditionError(SubrqError, ValueError):
    """Input violates a documented precondition"""


class IntegrationError(SubrqError):
    """ODE integration failed (step-size underflow, non-finite state)"""


class DomainExitError(IntegrationError):
    """Trajectory left the chart box"""


class EscapeError(IntegrationError):
    """Bilinear control system blew up before the final time"""


class NonConvergenceError(SubrqError):
    """Refinement loop hit its cap without stabilizing"""


class NewtonFailure(SubrqError):
    """Newton iteration did not converge"""


class RiccatiBlowUp(SubrqError):
    """Riccati solution left the admissible range before the final time"""


class CertificationError(SubrqError):
    """A normal-form invariant residual is above tolerance"""


class ClassificationMismatchError(SubrqError):
    """Two independent regularity criteria disagree on a curve"""


class PoleError(SubrqError):
    """Closed-form expression evaluated at a pole"""


class CrossCheckError(SubrqError):
    """Quadrature result disagrees with its finite-difference cross-check"""


class EnergyIdentityError(SubrqError):
    """Covector does not satisfy P.sum c_i f_i - phi(Q, c) = H(Q, P) at the fiberwise maximum"""


# Scenario layer

class ScenarioError(SubrqError):
    """Scenario file failed schema validation; pointer is a path like tasks[2].delta"""

    def __init__(self, message, pointer=''):
        self.pointer = pointer
        prefix = f'{pointer}: ' if pointer else ''
        super().__init__(f'{prefix}{message}')
