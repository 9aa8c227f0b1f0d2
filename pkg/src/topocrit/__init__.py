"""Critical-point quantum metrology on topological lattice models."""

__version__ = "0.1.0"

from .models import Boundary, CIParams, Family, LatticeSpec, build, ci, essh, hoti  # noqa: E402,F401
