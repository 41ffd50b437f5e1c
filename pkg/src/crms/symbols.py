"""Principal symbols of the two first-order field operators.

Replacing each partial derivative by a covector component and dropping the
zero-order Hamiltonian terms turns the operators into matrices.  The
regularized (Bridges) operator is elliptic: its symbol is invertible with
|det| = |xi|^(4n).  The general (De Donder-Weyl) operator is not: its symbol
has an n-dimensional kernel for every nonzero covector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError

OPERATOR_TAGS = ("DDW", "Bridges")

_KERNEL_REL_TOL = 1e-10  # singular values below this fraction of the largest count as zero


@dataclass(frozen=True)
class SymbolReport:
    covector: np.ndarray
    operator_tag: str
    symbol_matrix: np.ndarray = field(repr=False)
    kernel_dim: int
    determinant: float

    def __post_init__(self):
        for attr in ("covector", "symbol_matrix"):
            a = np.array(getattr(self, attr), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, attr, a)


def _bridges_block(x1: float, x2: float) -> np.ndarray:
    # Rows (r_q1, r_q2, r_P1, r_P2), columns (q1, q2, P1, P2).
    return np.array(
        [
            [0.0, 0.0, x1, -x2],
            [0.0, 0.0, x2, x1],
            [-x1, -x2, 0.0, 0.0],
            [x2, -x1, 0.0, 0.0],
        ]
    )


def _ddw_block(x1: float, x2: float) -> np.ndarray:
    # Rows (r_q, r_p1, r_p2), columns (q, p1, p2).
    return np.array(
        [
            [0.0, x1, x2],
            [-x1, 0.0, 0.0],
            [-x2, 0.0, 0.0],
        ]
    )


def principal_symbol(operator_tag: str, xi: np.ndarray, n: int) -> SymbolReport:
    """Assemble the first-order symbol matrix and report its kernel.

    Parameters
    ----------
    operator_tag : {"DDW", "Bridges"}
    xi : nonzero 2-covector
    n : number of field components (fiber dimension 4n or 3n)
    """
    if operator_tag not in OPERATOR_TAGS:
        raise ValueError(f"operator_tag must be one of {OPERATOR_TAGS}, got '{operator_tag}'")
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (2,):
        raise DimensionMismatchError(f"xi must be a 2-vector, got shape {xi.shape}")
    if float(np.hypot(xi[0], xi[1])) == 0.0:
        raise ValueError("covector must be nonzero")
    if n < 1:
        raise ValueError("n must be positive")
    block = _bridges_block(*xi) if operator_tag == "Bridges" else _ddw_block(*xi)
    matrix = np.kron(np.eye(n), block)
    sv = np.linalg.svd(matrix, compute_uv=False)
    kernel_dim = int(np.sum(sv < _KERNEL_REL_TOL * sv[0])) if sv[0] > 0.0 else matrix.shape[0]
    return SymbolReport(
        covector=xi,
        operator_tag=operator_tag,
        symbol_matrix=matrix,
        kernel_dim=kernel_dim,
        determinant=float(np.linalg.det(matrix)),
    )


def symbol_kernel(report: SymbolReport) -> np.ndarray:
    """Orthonormal kernel basis (columns) of the symbol matrix."""
    _, sv, vh = np.linalg.svd(report.symbol_matrix)
    mask = sv < _KERNEL_REL_TOL * sv[0] if sv[0] > 0.0 else np.ones_like(sv, dtype=bool)
    return vh[mask].T
