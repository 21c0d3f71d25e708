"""Error types shared by every app of the simulator."""


class CohortDPError(Exception):
    """Base class for simulator errors; management commands report these."""


class DataError(CohortDPError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ''
        if path is not None:
            where = f'{path}'
            if line is not None:
                where += f':{line}'
            where += ': '
        super().__init__(f'{where}{message}')


class LayoutError(CohortDPError):
    """Parameter layouts or matrix widths do not agree."""


class AccountantError(CohortDPError):
    pass


class BudgetExhausted(CohortDPError):
    pass


class ContinualStateError(CohortDPError):
    pass


class MetricsError(CohortDPError):
    pass


class CheckpointError(CohortDPError):
    pass
