"""Fiber metric and almost-complex structures from a CRPS pair.

Given the two contraction forms and a reference inner product compatible with
the fiber complex structure, the polar decomposition of the musical operator
of omega1 produces a metric g and a pair of anticommuting almost-complex
structures J1, J2 with omega1 = g(·, J1·), omega2 = g(·, J2·) and J2 = I J1.
Adjoints are taken with respect to the reference metric, implemented by
conjugating with its Cholesky factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError
from .linalg import TAU_ALG, SpdMatrix, require_invertible


@dataclass(frozen=True)
class CompatibleTriple:
    """Metric g, generators J1 and J2 = I J1, and the polar factor B.

    ``b`` is the polar factor expressed in orthonormal coordinates of the
    reference inner product (for reference = Id it is the factor itself);
    it is retained for diagnostics such as the direction-independence check.
    """

    g: SpdMatrix
    j1: np.ndarray = field(repr=False)
    j2: np.ndarray = field(repr=False)
    b: SpdMatrix
    i_fiber: np.ndarray = field(repr=False)
    reference: SpdMatrix

    def __post_init__(self):
        d = self.g.dim
        j1 = np.array(self.j1, dtype=float)
        j2 = np.array(self.j2, dtype=float)
        i_fib = np.array(self.i_fiber, dtype=float)
        for name, m in (("j1", j1), ("j2", j2), ("i_fiber", i_fib)):
            if m.shape != (d, d):
                raise DimensionMismatchError(f"{name} has shape {m.shape}, expected ({d}, {d})")
        eye = np.eye(d)
        if np.max(np.abs(j1 @ j1 + eye)) > TAU_ALG:
            raise ValueError("j1 does not square to -Id")
        if np.max(np.abs(j2 @ j2 + eye)) > TAU_ALG:
            raise ValueError("j2 does not square to -Id")
        if np.max(np.abs(j2 - i_fib @ j1)) > TAU_ALG:
            raise ValueError("j2 != I j1")
        if np.max(np.abs(j1 @ j2 + j2 @ j1)) > TAU_ALG:
            raise ValueError("j1 and j2 do not anticommute")
        for arr, attr in ((j1, "j1"), (j2, "j2"), (i_fib, "i_fiber")):
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def dim(self) -> int:
        return self.g.dim


def build_compatible(
    omega1: np.ndarray,
    omega2: np.ndarray,
    i_fiber: np.ndarray,
    reference: SpdMatrix | np.ndarray | None = None,
) -> CompatibleTriple:
    """Run the polar-decomposition construction on a CRPS pair.

    Parameters
    ----------
    omega1, omega2 : antisymmetric (4n, 4n) arrays
        The two contraction forms; omega2 must equal -omega1(·, I·).
    i_fiber : (4n, 4n) array
        Fiber complex structure.
    reference : SpdMatrix or array, optional
        Inner product compatible with i_fiber (default: identity).  Making
        it explicit keeps the construction deterministic and lets tests vary
        the starting point.

    Raises
    ------
    ValueError
        If the reference is not I-compatible or omega2 is inconsistent with
        omega1.
    DegenerateFormError
        If omega1 is singular.
    """
    w1 = np.asarray(omega1, dtype=float)
    w2 = np.asarray(omega2, dtype=float)
    i_fib = np.asarray(i_fiber, dtype=float)
    d = w1.shape[0]
    if w1.shape != (d, d) or w2.shape != (d, d) or i_fib.shape != (d, d):
        raise DimensionMismatchError("omega1, omega2 and i_fiber must be square of equal size")
    if reference is None:
        reference = SpdMatrix(np.eye(d))
    elif not isinstance(reference, SpdMatrix):
        reference = SpdMatrix(np.asarray(reference, dtype=float))
    if reference.dim != d:
        raise DimensionMismatchError("reference dimension does not match the forms")

    scale = max(1.0, float(np.max(np.abs(w1))))
    r = reference.matrix
    if np.max(np.abs(i_fib.T @ r @ i_fib - r)) > TAU_ALG * max(1.0, float(np.max(np.abs(r)))):
        raise ValueError("reference inner product is not compatible with i_fiber")
    if np.max(np.abs(w1 + w1.T)) > TAU_ALG * scale:
        raise ValueError("omega1 is not antisymmetric")
    if np.max(np.abs(w2 + w1 @ i_fib)) > TAU_ALG * scale:
        raise ValueError("omega2 is inconsistent with omega1 (expected -omega1(·, I·))")
    require_invertible(w1, "omega1")

    # Orthonormal coordinates of the reference metric: x_hat = L^T x, so an
    # operator M becomes L^T M L^{-T} and the reference pairing the dot product.
    chol = np.linalg.cholesky(r)
    a_hat = np.linalg.solve(chol, np.linalg.solve(chol, w1).T).T  # L^{-1} W1 L^{-T}
    i_hat = chol.T @ np.linalg.solve(chol, i_fib.T).T  # L^T I L^{-T}
    if np.max(np.abs(a_hat @ i_hat + i_hat @ a_hat)) > TAU_ALG * scale:
        raise ValueError("musical operator of omega1 does not anticommute with I")

    gram = -a_hat @ a_hat  # A A^T for antisymmetric A
    gram = 0.5 * (gram + gram.T)
    w, v = np.linalg.eigh(gram)
    if w[0] <= 0.0:
        raise ValueError(f"polar factor is not positive definite (min eigenvalue {w[0]:.3e})")
    sqrt_w = np.sqrt(w)
    b_hat = (v * sqrt_w) @ v.T
    b_hat = 0.5 * (b_hat + b_hat.T)
    b_inv = (v / sqrt_w) @ v.T  # same eigendecomposition as the square root
    j1_hat = b_inv @ a_hat

    lt_inv = np.linalg.inv(chol.T)
    j1 = lt_inv @ j1_hat @ chol.T
    j2 = i_fib @ j1
    g = SpdMatrix(chol @ b_hat @ chol.T)

    triple = CompatibleTriple(
        g=g, j1=j1, j2=j2, b=SpdMatrix(b_hat), i_fiber=i_fib, reference=reference
    )
    # The defining reconstruction identities, checked before returning.
    if np.max(np.abs(g.matrix @ j1 - w1)) > TAU_ALG * scale:
        raise ValueError("construction failed: omega1 != g(·, J1·)")
    if np.max(np.abs(g.matrix @ j2 - w2)) > TAU_ALG * scale:
        raise ValueError("construction failed: omega2 != g(·, J2·)")
    return triple


def j_of_direction(triple: CompatibleTriple, rho: np.ndarray) -> np.ndarray:
    """Almost-complex structure attached to a nonzero base direction.

    Linear in the direction: rho = (a, b) maps to a J1 + b J2, which squares
    to -|rho|^2 Id by the anticommutation of the generators.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (2,):
        raise DimensionMismatchError(f"rho must be a 2-vector, got shape {rho.shape}")
    if float(np.hypot(rho[0], rho[1])) == 0.0:
        raise ValueError("direction must be nonzero")
    return rho[0] * triple.j1 + rho[1] * triple.j2


def standard_triple(n: int) -> CompatibleTriple:
    """Compatible triple of the standard CRPS pair with identity reference."""
    from .darboux import standard_crps_pair

    pair = standard_crps_pair(n)
    return build_compatible(pair.omega1, pair.omega2, pair.i_fiber)
