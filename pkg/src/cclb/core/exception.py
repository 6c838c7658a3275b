# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT


class DimensionError(Exception):
    def __init__(self, message: str | BaseException | None = None):
        self.message = f"Dimension error: {message}"
        super().__init__(self.message)


class ConicError(Exception):
    """
    Exception raised when a conic program or cone is malformed.

    Attributes:
        message (str): Explanation of the error.
    """

    def __init__(self, message: str | BaseException | None = None):
        self.message = f"Conic error: {message}"
        super().__init__(self.message)


class SolverError(Exception):
    """
    Exception raised when the conic solver fails to converge (NumericalFailure).

    Attributes:
        message (str): Explanation of the error.
        detail (str | BaseException | None): The message without the prefix.
        round_index (int | None): Bandit round in which the failure happened, if known.
    """

    def __init__(self, message: str | BaseException | None = None, round_index: int | None = None):
        self.detail = message
        self.round_index = round_index
        where = f" (round {round_index})" if round_index is not None else ""
        self.message = f"Solver error{where}: {message}"
        super().__init__(self.message)


class InfeasibleError(Exception):
    def __init__(self, message: str | BaseException | None = None):
        self.message = f"Infeasible error: {message}"
        super().__init__(self.message)


class DecisionSetError(Exception):
    def __init__(self, message: str | BaseException | None = None):
        self.message = f"Decision set error: {message}"
        super().__init__(self.message)


class PurificationError(Exception):
    def __init__(self, message: str | BaseException | None = None):
        self.message = f"Purification error: {message}"
        super().__init__(self.message)


class PolicyError(Exception):
    def __init__(self, message: str | BaseException | None = None):
        self.message = f"Policy error: {message}"
        super().__init__(self.message)


class ConfigError(Exception):
    """
    Exception raised for invalid experiment configurations.

    Attributes:
        message (str): Explanation of the error.
    """

    def __init__(self, message: str | BaseException | None = None):
        self.message = f"Config error:\n      {message}"
        super().__init__(self.message)
