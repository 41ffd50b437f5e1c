"""Dense linear algebra on a split vector space T ⊕ V.

Everything here is pointwise (single fiber) material: alternating 3-tensors,
block complex structures, SPD square roots, and the four-condition validator
for complex-regularized multisymplectic forms.  All types are immutable after
construction and all operations are pure functions.

Basis convention: indices 0, 1 span the horizontal space T; indices
2 .. 2+4n-1 span the vertical space V, grouped in quadruples
(a1, a2, b1, b2) per complex fiber dimension k = 1..n.  In field-theory
coordinates a quadruple reads (q1, q2, P1, P2).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFormError, DimensionMismatchError

# Tolerance for algebraic identity checks (I^2 = -Id, symmetry, ...).  Double
# precision with dimensions <= ~50 keeps roundoff far below this.
TAU_ALG = 1e-9

# Non-degeneracy is decided by a condition-number threshold on the contraction
# matrix; scale-invariant, unlike a raw determinant cutoff.
COND_LIMIT = 1e12

_PERM_SIGNS = (
    ((0, 1, 2), 1.0),
    ((0, 2, 1), -1.0),
    ((1, 2, 0), 1.0),
    ((1, 0, 2), -1.0),
    ((2, 0, 1), 1.0),
    ((2, 1, 0), -1.0),
)


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# spaces and tensors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpace:
    """A split vector space T ⊕ V with dim T = 2 and dim V = 4n."""

    dim_fiber: int

    def __post_init__(self):
        if self.dim_fiber < 4 or self.dim_fiber % 4 != 0:
            raise ValueError(f"dim_fiber must be a positive multiple of 4, got {self.dim_fiber}")

    @property
    def dim_base(self) -> int:
        return 2

    @property
    def dim(self) -> int:
        return self.dim_base + self.dim_fiber

    @property
    def n(self) -> int:
        """Number of complex fiber dimensions (quadruples)."""
        return self.dim_fiber // 4

    @property
    def vertical(self) -> slice:
        return slice(2, self.dim)

    @classmethod
    def for_pairs(cls, n: int) -> "SplitSpace":
        return cls(dim_fiber=4 * n)


def antisymmetrize(coeffs: np.ndarray) -> np.ndarray:
    """Project a rank-3 tensor onto its totally antisymmetric part.

    Written so that an already (bitwise) antisymmetric tensor is an exact
    fixed point: the correction is a mean of signed-permutation differences,
    all exactly zero in that case.
    """
    t = np.asarray(coeffs, dtype=float)
    if t.ndim != 3 or len(set(t.shape)) != 1:
        raise DimensionMismatchError(f"expected a cubic rank-3 tensor, got shape {t.shape}")
    correction = np.zeros_like(t)
    for axes, sign in _PERM_SIGNS[1:]:
        correction += sign * np.transpose(t, axes) - t
    return t + correction / 6.0


def _alternation_from_canonical(raw: np.ndarray) -> np.ndarray:
    """Rebuild a tensor from its i<j<k entries so antisymmetry is bitwise."""
    d = raw.shape[0]
    out = np.zeros_like(raw)
    for i, j, k in itertools.combinations(range(d), 3):
        v = raw[i, j, k]
        out[i, j, k] = v
        out[j, k, i] = v
        out[k, i, j] = v
        out[i, k, j] = -v
        out[j, i, k] = -v
        out[k, j, i] = -v
    return out


def wedge3(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Coefficient tensor of the wedge a ∧ b ∧ c of three covectors."""
    a, b, c = (np.asarray(x, dtype=float) for x in (a, b, c))
    if not a.shape == b.shape == c.shape or a.ndim != 1:
        raise DimensionMismatchError("wedge3 expects three covectors of equal dimension")
    raw = np.zeros((a.size,) * 3)
    for (p, q, r), sign in _PERM_SIGNS:
        vecs = (a, b, c)
        raw += sign * np.einsum("i,j,k->ijk", vecs[p], vecs[q], vecs[r])
    return _alternation_from_canonical(raw)


@dataclass(frozen=True)
class AlternatingThreeForm:
    """A 3-form on T ⊕ V stored as a dense totally antisymmetric tensor."""

    space: SplitSpace
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = _readonly(self.coeffs)
        d = self.space.dim
        if c.shape != (d, d, d):
            raise DimensionMismatchError(f"coeffs shape {c.shape} does not match dimension {d}")
        scale = max(1.0, float(np.max(np.abs(c))))
        for axes in ((1, 0, 2), (0, 2, 1), (2, 1, 0)):
            if np.max(np.abs(c + np.transpose(c, axes))) > TAU_ALG * scale:
                raise ValueError("coefficient tensor is not totally antisymmetric")
        object.__setattr__(self, "coeffs", c)

    @property
    def dim(self) -> int:
        return self.space.dim


def evaluate_form(form: AlternatingThreeForm, u: np.ndarray, v: np.ndarray, w: np.ndarray) -> float:
    """Evaluate the trilinear form on three vectors."""
    d = form.dim
    u, v, w = (np.asarray(x, dtype=float) for x in (u, v, w))
    for name, vec in (("u", u), ("v", v), ("w", w)):
        if vec.shape != (d,):
            raise DimensionMismatchError(f"vector {name} has shape {vec.shape}, expected ({d},)")
    return float(np.einsum("ijk,i,j,k->", form.coeffs, u, v, w))


def pull_back(form: AlternatingThreeForm, basis: np.ndarray) -> AlternatingThreeForm:
    """Pull the form back through a change of basis (columns = new frame).

    Returns the tensor of (u, v, w) ↦ form(Bu, Bv, Bw) in the new frame.
    """
    b = np.asarray(basis, dtype=float)
    d = form.dim
    if b.shape != (d, d):
        raise DimensionMismatchError(f"basis shape {b.shape} does not match dimension {d}")
    raw = np.einsum("pqr,pa,qb,rc->abc", form.coeffs, b, b, b, optimize=True)
    return AlternatingThreeForm(form.space, _alternation_from_canonical(raw))


# ---------------------------------------------------------------------------
# complex structures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearComplexStructure:
    """A complex structure on T ⊕ V, block-lower-triangular for the split.

    The matrix squares to -Id and its top-right 2 x 4n block vanishes, so it
    covers the rotation j on T while possibly coupling T into V.  Together
    these force the coupling block A to intertwine as A j + I' A = 0.
    """

    space: SplitSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _readonly(self.matrix)
        d = self.space.dim
        if m.shape != (d, d):
            raise DimensionMismatchError(f"matrix shape {m.shape} does not match dimension {d}")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m[:2, 2:])) > TAU_ALG * scale:
            raise ValueError("top-right block must vanish (structure must cover the base)")
        if np.max(np.abs(m @ m + np.eye(d))) > TAU_ALG * scale * scale:
            raise ValueError("matrix does not square to -Id")
        object.__setattr__(self, "matrix", m)

    @property
    def base_part(self) -> np.ndarray:
        return self.matrix[:2, :2]

    @property
    def fiber_part(self) -> np.ndarray:
        return self.matrix[2:, 2:]

    @property
    def coupling(self) -> np.ndarray:
        return self.matrix[2:, :2]


@dataclass(frozen=True)
class SpdMatrix:
    """A symmetric positive-definite matrix (validated at construction)."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = _readonly(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"expected a square matrix, got shape {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.T)) > TAU_ALG * scale:
            raise ValueError("matrix is not symmetric")
        smallest = float(np.linalg.eigvalsh(m)[0])
        if smallest <= 0.0:
            raise ValueError(f"matrix is not positive definite (min eigenvalue {smallest:.3e})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def matrix_sqrt_spd(m: SpdMatrix | np.ndarray) -> SpdMatrix:
    """Principal square root of an SPD matrix via symmetric eigendecomposition.

    The returned s satisfies s @ s = m to TAU_ALG and is itself SPD.
    """
    if not isinstance(m, SpdMatrix):
        m = SpdMatrix(np.asarray(m, dtype=float))
    w, v = np.linalg.eigh(m.matrix)
    if w[0] <= 0.0:
        raise ValueError(f"eigenvalue {w[0]:.3e} <= 0; no SPD square root")
    root = (v * np.sqrt(w)) @ v.T
    return SpdMatrix((root + root.T) / 2.0)


# ---------------------------------------------------------------------------
# standard structures
# ---------------------------------------------------------------------------

# 2x2 rotation j with j e1 = e2.
BASE_ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])

# 4x4 fiber blocks in (q1, q2, P1, P2) order: I q1 = q2, I P1 = -P2,
# omega1 = dP1∧dq1 + dP2∧dq2, omega2 = dP1∧dq2 - dP2∧dq1.
_I_BLOCK = np.array(
    [
        [0.0, -1.0, 0.0, 0.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
    ]
)
_W1_BLOCK = np.array(
    [
        [0.0, 0.0, -1.0, 0.0],
        [0.0, 0.0, 0.0, -1.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
    ]
)
_W2_BLOCK = np.array(
    [
        [0.0, 0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
    ]
)


def fiber_complex_matrix(n: int) -> np.ndarray:
    """Standard complex structure on the 4n-dimensional fiber."""
    return np.kron(np.eye(n), _I_BLOCK)


def standard_fiber_forms(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gram matrices of the standard fiber 2-form pair (omega1, omega2)."""
    return np.kron(np.eye(n), _W1_BLOCK), np.kron(np.eye(n), _W2_BLOCK)


def standard_complex_structure(n: int) -> LinearComplexStructure:
    """Product complex structure diag(j, I_fiber) on T ⊕ V."""
    space = SplitSpace.for_pairs(n)
    m = np.zeros((space.dim, space.dim))
    m[:2, :2] = BASE_ROTATION
    m[2:, 2:] = fiber_complex_matrix(n)
    return LinearComplexStructure(space, m)


def standard_crms_form(n: int, nu: np.ndarray | None = None) -> AlternatingThreeForm:
    """The normal-form 3-form omega1∧eps2 - omega2∧eps1 (+ nu∧eps1∧eps2).

    Parameters
    ----------
    n : int
        Number of complex fiber dimensions.
    nu : array of shape (4n,), optional
        Coefficients of the residual vertical 1-form in the dual coframe.
    """
    space = SplitSpace.for_pairs(n)
    d = space.dim
    eye = np.eye(d)
    eps1, eps2 = eye[0], eye[1]
    coeffs = np.zeros((d, d, d))
    for k in range(n):
        a1, a2, b1, b2 = (eye[2 + 4 * k + i] for i in range(4))
        # omega1 ∧ eps2 with omega1 = beta1∧alpha1 + beta2∧alpha2
        coeffs += wedge3(b1, a1, eps2) + wedge3(b2, a2, eps2)
        # -omega2 ∧ eps1 with omega2 = beta1∧alpha2 - beta2∧alpha1
        coeffs -= wedge3(b1, a2, eps1) - wedge3(b2, a1, eps1)
    if nu is not None:
        nu = np.asarray(nu, dtype=float)
        if nu.shape != (space.dim_fiber,):
            raise DimensionMismatchError(f"nu must have shape ({space.dim_fiber},), got {nu.shape}")
        for j, c in enumerate(nu):
            coeffs += c * wedge3(eye[2 + j], eps1, eps2)
    return AlternatingThreeForm(space, coeffs)


# ---------------------------------------------------------------------------
# CRMS validation
# ---------------------------------------------------------------------------


def _json_safe(value):
    if isinstance(value, float) and not np.isfinite(value):
        return None  # strict JSON has no Infinity/NaN
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    return value


@dataclass(frozen=True)
class ConditionCheck:
    ok: bool
    max_defect: float
    witness: dict | None = None

    def as_dict(self) -> dict:
        return {
            "ok": self.ok,
            "max_defect": _json_safe(self.max_defect),
            "witness": _json_safe(self.witness) if self.witness is not None else None,
        }


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the four CRMS conditions at one point.

    Closedness has no linear-algebra content, so it is reported as not
    applicable rather than guessed.
    """

    horizontal: ConditionCheck
    nondegenerate: ConditionCheck
    i_compatible: ConditionCheck
    closedness: str = "not applicable at linear level"

    @property
    def passed(self) -> bool:
        return self.horizontal.ok and self.nondegenerate.ok and self.i_compatible.ok

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "one_horizontal": self.horizontal.as_dict(),
            "fiberwise_nondegenerate": self.nondegenerate.as_dict(),
            "i_compatible": self.i_compatible.as_dict(),
            "closedness": self.closedness,
        }


def contraction_matrix(form: AlternatingThreeForm, xi: np.ndarray) -> np.ndarray:
    """Gram matrix of form(xi, ·, ·) restricted to the vertical subspace."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (form.dim,):
        raise DimensionMismatchError(f"xi has shape {xi.shape}, expected ({form.dim},)")
    return np.einsum("i,iab->ab", xi, form.coeffs[:, 2:, 2:])


def validate_crms(form: AlternatingThreeForm, structure: LinearComplexStructure) -> ValidationReport:
    """Check 1-horizontality, fiberwise non-degeneracy and I-compatibility.

    Each failed condition carries a witness: the offending index triple for
    horizontality, the singular contraction for non-degeneracy, and the basis
    combination with both sides for compatibility.
    """
    if form.space != structure.space:
        raise DimensionMismatchError("form and complex structure live on different spaces")
    c = form.coeffs
    tol = TAU_ALG * max(1.0, float(np.max(np.abs(c))))

    vert = c[2:, 2:, 2:]
    h_defect = float(np.max(np.abs(vert)))
    h_witness = None
    if h_defect > tol:
        i, j, k = np.unravel_index(int(np.argmax(np.abs(vert))), vert.shape)
        h_witness = {"triple": [int(i) + 2, int(j) + 2, int(k) + 2], "value": float(vert[i, j, k])}
    horizontal = ConditionCheck(h_defect <= tol, h_defect, h_witness)

    # Horizontal lifts of the base basis: with (iv) in force, invertibility at
    # e1 and e2 extends to every nonzero direction, so two checks suffice.
    worst_cond = 0.0
    nd_ok = True
    nd_witness = None
    for label, idx in (("e1", 0), ("e2", 1)):
        mat = c[idx, 2:, 2:]
        sv = np.linalg.svd(mat, compute_uv=False)
        cond = np.inf if sv[-1] == 0.0 else float(sv[0] / sv[-1])
        worst_cond = max(worst_cond, cond)
        if cond >= COND_LIMIT:
            nd_ok = False
            if nd_witness is None:
                nd_witness = {
                    "lift": label,
                    "condition_number": cond,
                    "smallest_singular_value": float(sv[-1]),
                }
    nondegenerate = ConditionCheck(nd_ok, worst_cond, nd_witness)

    # form(I xi, v1, v2) + form(xi, v1, I v2) over all basis xi and vertical pairs.
    lhs = np.einsum("pab,px->xab", c[:, 2:, 2:], structure.matrix)
    rhs = np.einsum("xaq,qb->xab", c[:, 2:, 2:], structure.fiber_part)
    defect = lhs + rhs
    ic_defect = float(np.max(np.abs(defect)))
    ic_witness = None
    if ic_defect > tol:
        x, a, b = np.unravel_index(int(np.argmax(np.abs(defect))), defect.shape)
        ic_witness = {
            "xi_index": int(x),
            "v1_index": int(a) + 2,
            "v2_index": int(b) + 2,
            "lhs": float(lhs[x, a, b]),
            "rhs": float(-rhs[x, a, b]),
        }
    i_compatible = ConditionCheck(ic_defect <= tol, ic_defect, ic_witness)

    return ValidationReport(horizontal, nondegenerate, i_compatible)


def require_invertible(matrix: np.ndarray, what: str) -> None:
    """Raise DegenerateFormError unless the matrix is comfortably invertible."""
    sv = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] >= COND_LIMIT:
        raise DegenerateFormError(f"{what} is numerically singular")
