"""Nonlinear vector coherent states of deformed spin-orbit Hamiltonians.

Submodules
----------
deformed_algebra  deformation functions, basic numbers, (p,q) special functions
spectrum          closed-form spectrum and the truncated-matrix oracle
ladder            structure functions K and truncated ladder operators
nvcs_core         S^2 coherent states, norms, radii, evolution
measures          moment problems, densities and identity integration
matrix_nvcs       normal-matrix and quaternionic families, Haar integration
displacement      displacement operators, dual states and T-operators
s3_nvcs           the S^3 family
cli               batch runner
"""
from .errors import NVCSError

__version__ = "0.1.0"
__all__ = ["NVCSError", "__version__"]
