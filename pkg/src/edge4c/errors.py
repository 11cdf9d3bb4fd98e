"""Exception types shared across the toolkit."""


class ConfigError(ValueError):
    """A scenario configuration failed validation."""


class StationCsvError(ValueError):
    """A station CSV file could not be parsed."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class CoverageError(ValueError):
    """A station belongs to no collaboration space."""


class InfeasibleScenarioError(RuntimeError):
    """No feasible routing exists for some task."""

    def __init__(self, task_id, reason):
        super().__init__(f"task {task_id}: {reason}")
        self.task_id = task_id
        self.reason = reason


class SolverError(RuntimeError):
    """A block subproblem misbehaved."""


class CacheItemTooLarge(ValueError):
    """A content item exceeds the total capacity of a cache."""
