class GaugeflowError(Exception):
    pass


class ConfigError(GaugeflowError, ValueError):
    pass


class ConformabilityError(GaugeflowError, ValueError):
    pass


class DomainError(GaugeflowError, ValueError):
    pass


class NumericError(GaugeflowError, ArithmeticError):
    pass
