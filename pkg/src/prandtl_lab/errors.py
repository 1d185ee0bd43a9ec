"""Exception taxonomy.

``ValidationError`` means the caller asked for something malformed.
``NumericalGateError`` means the method left its regime of validity
(monotonicity lost, CFL violated, Picard stalled); the CLI maps the two
families to different exit codes.
"""


class PrandtlLabError(Exception):
    pass


class ValidationError(PrandtlLabError, ValueError):
    pass


class NumericalGateError(PrandtlLabError):
    pass


class MonotonicityError(NumericalGateError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class CFLError(NumericalGateError):
    pass


class PicardError(NumericalGateError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class QuadratureError(NumericalGateError):
    pass
