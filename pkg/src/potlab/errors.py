"""Error taxonomy shared across the package.

Exit-code mapping used by the CLI: InputError -> 2, BudgetError -> 3,
certified-inequality failures are recorded in reports (exit 1), not raised.
"""


class PotlabError(Exception):
    """Base class for all package errors."""


class InputError(PotlabError):
    """Malformed or inconsistent input (dimensions, empty sets, bad budgets)."""


class BudgetError(PotlabError):
    """A mass/convergence budget could not be met; carries a stage tag."""

    def __init__(self, message: str, stage: str = "", detail: dict | None = None):
        super().__init__(message)
        self.stage = stage
        self.detail = detail or {}

    def __str__(self) -> str:
        base = super().__str__()
        return f"[{self.stage}] {base}" if self.stage else base
