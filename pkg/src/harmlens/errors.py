class ContractError(ValueError):
    """A domain contract was violated; the message names the failing contract."""


class LexiconError(ContractError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UsageError(Exception):
    """Command-line usage problem (exit status 2)."""
