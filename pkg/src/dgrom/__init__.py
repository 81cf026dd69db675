"""Discontinuous Galerkin Stokes flow around a movable obstacle with an affine reduced basis model.

Modules are imported explicitly (``from dgrom.fom import ...``) so that the
online path can run from an archive without loading assembly code.
"""
__version__ = "0.1.0"
