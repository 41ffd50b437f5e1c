"""Seeded random constructors used by experiments and tests.

Everything takes an explicit numpy Generator so runs are reproducible from a
single integer seed.
"""

from __future__ import annotations

import numpy as np

from .darboux import CrpsPair
from .linalg import (
    AlternatingThreeForm,
    LinearComplexStructure,
    SpdMatrix,
    SplitSpace,
    BASE_ROTATION,
    pull_back,
    standard_complex_structure,
    standard_crms_form,
    standard_fiber_forms,
    fiber_complex_matrix,
    wedge3,
)

_COND_CAP = 200.0


def commuting_fiber_map(n: int, rng: np.random.Generator, spread: float = 0.4) -> np.ndarray:
    """Random invertible 4n x 4n matrix commuting with the standard fiber I.

    Averaging X with -I X I projects onto the commutant; the identity shift
    and condition cap keep the map well-conditioned.
    """
    d = 4 * n
    i_fib = fiber_complex_matrix(n)
    while True:
        x = rng.normal(size=(d, d)) * spread / np.sqrt(d)
        m = 0.5 * (x - i_fib @ x @ i_fib) + np.eye(d)
        if np.linalg.cond(m) < _COND_CAP:
            return m


def intertwining_coupling(n: int, rng: np.random.Generator, spread: float = 0.5) -> np.ndarray:
    """Random 4n x 2 coupling C with C j = I' C (complex-linear T -> V)."""
    i_fib = fiber_complex_matrix(n)
    x = rng.normal(size=(4 * n, 2)) * spread
    return 0.5 * (x - i_fib @ x @ BASE_ROTATION)


def structure_with_coupling(n: int, rng: np.random.Generator, spread: float = 0.5) -> LinearComplexStructure:
    """Standard complex structure with a random admissible coupling block.

    The square identity forces the coupling to satisfy A j = -I' A; the form
    conditions are insensitive to A, so the standard form stays CRMS for the
    returned structure.
    """
    i_fib = fiber_complex_matrix(n)
    x = rng.normal(size=(4 * n, 2)) * spread
    a = 0.5 * (x + i_fib @ x @ BASE_ROTATION)
    d = 2 + 4 * n
    m = np.zeros((d, d))
    m[:2, :2] = BASE_ROTATION
    m[2:, :2] = a
    m[2:, 2:] = i_fib
    return LinearComplexStructure(SplitSpace.for_pairs(n), m)


def base_commuting_map(rng: np.random.Generator) -> np.ndarray:
    """Random invertible 2 x 2 matrix commuting with j (a complex scalar)."""
    radius = rng.uniform(0.7, 1.4)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    return radius * (np.cos(angle) * np.eye(2) + np.sin(angle) * BASE_ROTATION)


def crms_conjugator(n: int, rng: np.random.Generator) -> np.ndarray:
    """Block-lower-triangular map on T ⊕ V commuting with the standard I."""
    d = 2 + 4 * n
    while True:
        m = np.zeros((d, d))
        m[:2, :2] = base_commuting_map(rng)
        m[2:, :2] = intertwining_coupling(n, rng)
        m[2:, 2:] = commuting_fiber_map(n, rng)
        if np.linalg.cond(m) < _COND_CAP:
            return m


def random_crms_form(
    n: int, rng: np.random.Generator, nu_scale: float = 0.5
) -> tuple[AlternatingThreeForm, LinearComplexStructure]:
    """Standard form with random nu, conjugated by a random I-commuting map.

    The conjugator commutes with the standard complex structure, so the
    result is CRMS for that same structure.
    """
    nu = rng.normal(size=4 * n) * nu_scale
    conj = crms_conjugator(n, rng)
    form = pull_back(standard_crms_form(n, nu=nu), conj)
    return form, standard_complex_structure(n)


def random_crps_pair(n: int, rng: np.random.Generator) -> CrpsPair:
    """Standard CRPS pair conjugated by a random I-commuting fiber map."""
    m = commuting_fiber_map(n, rng)
    w1, w2 = standard_fiber_forms(n)
    return CrpsPair(m.T @ w1 @ m, m.T @ w2 @ m, fiber_complex_matrix(n))


def compatible_reference(n: int, rng: np.random.Generator, spread: float = 0.3) -> SpdMatrix:
    """Random SPD inner product compatible with the standard fiber I."""
    d = 4 * n
    i_fib = fiber_complex_matrix(n)
    y = np.eye(d) + rng.normal(size=(d, d)) * spread / np.sqrt(d)
    r = y.T @ y
    return SpdMatrix(0.5 * (r + i_fib.T @ r @ i_fib))


def random_smooth_state(
    grid,
    n: int,
    amplitude: float,
    rng: np.random.Generator,
    max_mode: int = 2,
):
    """Truncated low-frequency random Fourier data, scaled to a sup-norm.

    Coefficients are drawn per mode, so refining the grid samples the same
    underlying smooth field (important for convergence-order studies).
    """
    from .fields import FieldState

    t1, t2 = grid.coordinates()
    dim = 4 * n
    values = np.zeros((grid.n1, grid.n2, dim))
    modes = [
        (k1, k2)
        for k1 in range(-max_mode, max_mode + 1)
        for k2 in range(-max_mode, max_mode + 1)
    ]
    for c in range(dim):
        for k1, k2 in modes:
            a, b = rng.normal(size=2)
            phase = k1 * (2.0 * np.pi / grid.l1) * t1 + k2 * (2.0 * np.pi / grid.l2) * t2
            values[..., c] += a * np.cos(phase) + b * np.sin(phase)
    peak = float(np.max(np.abs(values)))
    if peak > 0.0:
        values *= amplitude / peak
    return FieldState(grid, values)


def inject_vertical_triple(form: AlternatingThreeForm, value: float = 1.0) -> tuple[AlternatingThreeForm, tuple[int, int, int]]:
    """Break 1-horizontality by planting one vertical-triple coefficient."""
    c = form.coeffs.copy()
    triple = (2, 3, 4)
    i, j, k = triple
    for (p, q, r), sign in (
        ((i, j, k), 1.0), ((j, k, i), 1.0), ((k, i, j), 1.0),
        ((i, k, j), -1.0), ((j, i, k), -1.0), ((k, j, i), -1.0),
    ):
        c[p, q, r] += sign * value
    return AlternatingThreeForm(form.space, c), triple


def drop_quadruple_block(n: int) -> AlternatingThreeForm:
    """Standard form with the k=1 quadruple's pairings removed.

    Both contraction matrices become singular while horizontality and
    I-compatibility survive (the removed part is compatible on its own).
    """
    if n < 1:
        raise ValueError("n must be positive")
    full = standard_crms_form(n).coeffs.copy()
    # Zero every entry touching the first quadruple's vertical indices.
    sl = slice(2, 6)
    full[sl, :, :] = 0.0
    full[:, sl, :] = 0.0
    full[:, :, sl] = 0.0
    return AlternatingThreeForm(SplitSpace.for_pairs(n), full)


def break_i_compatibility(n: int, value: float = 0.5) -> AlternatingThreeForm:
    """Standard form plus a term that desynchronizes the two contractions."""
    space = SplitSpace.for_pairs(n)
    eye = np.eye(space.dim)
    coeffs = standard_crms_form(n).coeffs + value * wedge3(eye[4], eye[2], eye[0])
    return AlternatingThreeForm(space, coeffs)
