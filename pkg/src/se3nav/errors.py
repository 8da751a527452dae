"""Exception and warning types shared across the package."""


class BranchCutError(ValueError):
    """Rotation logarithm requested too close to the pi branch cut."""


class DegenerateConfigurationError(ValueError):
    """Potential is undefined: goal term and obstacle function vanish together."""


class DegenerateConfigurationWarning(UserWarning):
    """A relation and its complementary product vanished simultaneously (0/0 guard)."""


class CapacityError(ValueError):
    """Relation tree requested for more agents than the combinatorial cap allows."""


class IllConditionedGramError(ValueError):
    """Gram matrix could not be factorized even after jitter escalation."""

    def __init__(self, message: str, condition_estimate: float = float("inf")):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class InsufficientDataError(ValueError):
    """Operation needs more training pairs than the dataset holds."""


class IntegrationDivergedError(RuntimeError):
    """Integrator produced non-finite state; carries the failing tick index."""

    def __init__(self, message: str, tick: int = -1, agent: int = -1):
        super().__init__(message)
        self.tick = tick
        self.agent = agent


class ConfigError(ValueError):
    """Scenario configuration failed to parse or validate.

    ``violations`` lists every problem found, not just the first.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
