"""Exception hierarchy shared by all modules.

Configuration problems derive from :class:`ConfigError` (CLI exit code 2),
numerical failures from :class:`NumericalError` (CLI exit code 3).
"""


class PixvemError(Exception):
    pass


class ConfigError(PixvemError, ValueError):
    pass


class ParseError(ConfigError):
    pass


class NumericalError(PixvemError, ArithmeticError):
    pass


class ZeroGradient(NumericalError):
    pass


class NoIntersection(NumericalError):
    pass


class EmptyDomain(NumericalError):
    pass


class DegenerateMesh(NumericalError):
    pass


class SingularG(NumericalError):
    pass


class SingularMatrix(NumericalError):
    pass


class SingularReducedSystem(SingularMatrix):
    pass


class NonFiniteEntry(NumericalError):
    pass
