"""Numerical toolkit for the bilinear Schrodinger equation on (0,1).

Spectral-Galerkin simulation of i dpsi/dt = (-Laplacian + u(t) x^2) psi with
Dirichlet ends, explicit error-bound evaluation for averaging-based mode
transfer, an Ingham-certified trigonometric moment solver, and a two-phase
steering pipeline (periodic approximate transfer + linearized exact corrector).
"""

from .spectral import (
    ModalState,
    CouplingOperator,
    NormEstimate,
    basis_state,
    coupling_decay_constant,
    coupling_x2,
    eigenvalue,
    free_evolve,
    operator_norm,
    sobolev_norm,
)

__version__ = "0.1.0"
