"""Virtual element solver for the Poisson problem on pixel-agglomerated meshes.

Dirichlet data are imposed weakly (Nitsche) on the staircase boundary of the
pixel domain and transferred from the true boundary by a Taylor expansion.
"""

from .exceptions import (ConfigError, DegenerateMesh, EmptyDomain, NoIntersection, NonFiniteEntry,
                         NumericalError, ParseError, PixvemError, SingularG, SingularMatrix,
                         SingularReducedSystem, ZeroGradient)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DegenerateMesh", "EmptyDomain", "NoIntersection", "NonFiniteEntry",
    "NumericalError", "ParseError", "PixvemError", "SingularG", "SingularMatrix",
    "SingularReducedSystem", "ZeroGradient", "__version__",
]
