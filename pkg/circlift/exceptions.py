class ConfigError(Exception):
    """
    ConfigError: Exception to raise when a domain, shape or config file is invalid.
    """
    pass


class ParameterError(Exception):
    """
    ParameterError: Exception to raise when a parameter fails validation.
    """
    pass


class ResolutionError(ParameterError):
    """
    ResolutionError: Exception to raise when the grid is too coarse for the requested construction.
    """
    pass


class DomainViolationError(Exception):
    """
    DomainViolationError: Exception to raise when a phase field leaves [0, 1].
    """
    pass


class SolverError(Exception):
    """
    SolverError: Exception to raise when a linear solve doesn't converge, or an update breaks monotonicity.
    """
    def __init__(self, msg="", residual=None):
        super().__init__(msg)
        self.residual = residual


class InvalidLiftingError(Exception):
    """
    InvalidLiftingError: Exception to raise when e^{i phi} doesn't reproduce the angle field.
    """
    pass


class InconsistentCutsError(Exception):
    """
    InconsistentCutsError: Exception to raise when the cuts leave a charge uncancelled.
    """
    def __init__(self, msg="", edge=None):
        super().__init__(msg)
        self.edge = edge


class BudgetError(Exception):
    """
    BudgetError: Exception to raise when an exhaustive enumeration exceeds its budget.
    """
    pass
