class ContractViolation(ValueError):
    """A precondition of a tensor, transform or loss operation was broken."""


class ConfigError(ValueError):
    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"Invalid config field '{field}': {message}")


class DatasetError(ValueError):
    def __init__(self, message: str, path: str = None, line: int = None) -> None:
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f" [{path}" + (f", line {line}" if line is not None else "") + "]"
        super().__init__(f"{message}{where}")


class CheckpointError(ValueError):
    pass


def require(condition: bool, message: str) -> None:
    if not condition:
        raise ContractViolation(message)
