"""Finite element immersed boundary solvers for 2D fluid-structure interaction.

Two time-stepping schemes share one set of operators:

* ``FEIBM``: semi-implicit; the elastic force at ``X^n`` is spread to the
  fluid and solid nodes follow the new velocity (conditionally stable).
* ``DLM``: monolithic with a distributed Lagrange multiplier enforcing the
  kinematic constraint weakly (unconditionally stable).

Modules: :mod:`geometry` (meshes, point location), :mod:`fem` (elements and
Stokes pairs), :mod:`fluid`, :mod:`solid`, :mod:`coupling`, :mod:`steppers`,
:mod:`diagnostics`, and the :mod:`experiments` CLI layer.
"""
from .errors import (
    ConfigurationError,
    DegenerateElementError,
    FactorizationError,
    IBFemError,
    InvalidArgumentError,
    OutOfDomainError,
    StructureEscapedError,
    UnsupportedError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DegenerateElementError",
    "FactorizationError",
    "IBFemError",
    "InvalidArgumentError",
    "OutOfDomainError",
    "StructureEscapedError",
    "UnsupportedError",
]
