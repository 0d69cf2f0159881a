"""Exception hierarchy shared by the solver, path driver and config loader."""


class TorusMAError(Exception):
    """Base class for all package errors."""


class NonPositiveDeterminant(TorusMAError):
    def __init__(self, index, value):
        self.index = tuple(int(i) for i in index)
        self.value = float(value)
        super().__init__(f"determinant {self.value:.3e} <= 0 at grid index {self.index}")


class SingularMetric(TorusMAError):
    pass


class NonFiniteField(TorusMAError):
    pass


class PositivityLost(TorusMAError):
    def __init__(self, index=None, min_eig=None, message=None):
        self.index = None if index is None else tuple(int(i) for i in index)
        self.min_eig = None if min_eig is None else float(min_eig)
        if message is None:
            message = f"form not positive (min eigenvalue {self.min_eig}) at grid index {self.index}"
        super().__init__(message)


class NewtonDiverged(TorusMAError):
    pass


class IterationLimit(TorusMAError):
    pass


class InsufficientData(TorusMAError):
    pass


class ParseError(TorusMAError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class InvalidMetric(TorusMAError):
    def __init__(self, min_eig):
        self.min_eig = float(min_eig)
        super().__init__(f"declared metric is not positive: min eigenvalue {self.min_eig:.6g}")
