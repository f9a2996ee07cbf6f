"""Discrete variational and differential embeddings of Poisson-type problems.

Four discretizations (finite differences, P1 finite elements, two-point flux
finite volumes, mimetic finite differences for the mixed form) together with
machinery that checks, at the identity level, that the gradient of each
discrete Lagrangian or Hamiltonian equals the scaled residual of the
corresponding discretized operator.
"""

from .functional import CoherenceReport, DiscreteFunctional, Space, coherence_check, find_extremal
from .mesh import CartesianGrid, CenteredMesh, MeshError, PolyMesh
from .problem import Diffusivity, ManufacturedCase, manufactured_case, poisson_lagrangian

__version__ = "0.1.0"

__all__ = [
    "CartesianGrid",
    "CenteredMesh",
    "CoherenceReport",
    "Diffusivity",
    "DiscreteFunctional",
    "ManufacturedCase",
    "MeshError",
    "PolyMesh",
    "Space",
    "coherence_check",
    "find_extremal",
    "manufactured_case",
    "poisson_lagrangian",
]
