"""Exception types shared across the package.

The CLI maps these onto exit codes: config errors -> 2, data errors -> 3,
numerical failures -> 4.
"""


class IdcError(Exception):
    exit_code = 1


class ConfigError(IdcError, ValueError):
    exit_code = 2

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("invalid config: " + "; ".join(self.problems))


class DataError(IdcError, ValueError):
    exit_code = 3


class NumericalError(IdcError, ArithmeticError):
    exit_code = 4


class NotPositiveDefinite(NumericalError):
    def __init__(self, pivot):
        self.pivot = int(pivot)
        super().__init__(f"matrix is not positive definite (failing pivot {self.pivot})")
