"""Error taxonomy shared by all modules.

Configuration problems and numerical failures map to distinct CLI exit
codes, so they are kept as distinct exception types.
"""

from __future__ import annotations


class ConfigError(Exception):
    """Invalid scenario configuration.

    Carries the full list of validation errors (each prefixed with the
    config path of the offending key), not just the first one found.
    """

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class NumericalError(RuntimeError):
    """Fatal numerical failure (singular solve, non-convergence, broken decay).

    Raised with diagnostics attached to the message; never silently
    swallowed by the orchestration layer.
    """
