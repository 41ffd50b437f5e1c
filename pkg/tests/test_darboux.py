"""Darboux bases for fiber pairs and frames for split-space forms."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crms.darboux import (
    CrpsPair,
    DarbouxFrame,
    crms_darboux,
    crps_darboux,
    darboux_reconstruction_error,
    standard_crps_pair,
)
from crms.errors import CrmsValidationError, DegenerateFormError
from crms.linalg import (
    contraction_matrix,
    standard_complex_structure,
    standard_crms_form,
    standard_fiber_forms,
    fiber_complex_matrix,
)
from crms.sampling import (
    commuting_fiber_map,
    inject_vertical_triple,
    random_crms_form,
    structure_with_coupling,
)


def normal_form_defects(pair: CrpsPair, basis: np.ndarray) -> float:
    # Oracle: direct matrix congruence against the standard pair.
    w1s, w2s = standard_fiber_forms(pair.n)
    return max(
        float(np.max(np.abs(basis.T @ pair.omega1 @ basis - w1s))),
        float(np.max(np.abs(basis.T @ pair.omega2 @ basis - w2s))),
    )


# --- crps_darboux ------------------------------------------------------------


def test_standard_pair_yields_identity_basis():
    basis = crps_darboux(standard_crps_pair(1))
    assert np.max(np.abs(basis - np.eye(4))) < 1e-12


@pytest.mark.parametrize("n", [1, 2, 3])
def test_conjugated_pair_roundtrip(n):
    rng = np.random.default_rng(100 + n)
    m = commuting_fiber_map(n, rng)
    w1s, w2s = standard_fiber_forms(n)
    pair = CrpsPair(m.T @ w1s @ m, m.T @ w2s @ m, fiber_complex_matrix(n))
    basis = crps_darboux(pair)
    assert normal_form_defects(pair, basis) < 1e-9


def test_scaled_pair_recovers_standard_normal_form():
    p = standard_crps_pair(1)
    pair = CrpsPair(2.0 * p.omega1, 2.0 * p.omega2, p.i_fiber)
    basis = crps_darboux(pair)
    assert normal_form_defects(pair, basis) < 1e-9
    # The b-columns absorb the scaling.
    assert np.linalg.norm(basis[:, 2]) == pytest.approx(0.5, rel=1e-9)


def test_basis_respects_complex_structure():
    rng = np.random.default_rng(17)
    m = commuting_fiber_map(2, rng)
    w1s, w2s = standard_fiber_forms(2)
    pair = CrpsPair(m.T @ w1s @ m, m.T @ w2s @ m, fiber_complex_matrix(2))
    basis = crps_darboux(pair)
    for k in range(2):
        c = 4 * k
        assert np.max(np.abs(pair.i_fiber @ basis[:, c] - basis[:, c + 1])) < 1e-10
        assert np.max(np.abs(pair.i_fiber @ basis[:, c + 2] + basis[:, c + 3])) < 1e-10


def test_pairings_by_direct_assertion():
    # omega1(a_i, a_j) = 0, omega1(b_i, b_j) = 0, omega1(b_i, a_j) = delta.
    rng = np.random.default_rng(23)
    m = commuting_fiber_map(3, rng)
    w1s, w2s = standard_fiber_forms(3)
    pair = CrpsPair(m.T @ w1s @ m, m.T @ w2s @ m, fiber_complex_matrix(3))
    basis = crps_darboux(pair)
    a_cols = [basis[:, 4 * k + i] for k in range(3) for i in (0, 1)]
    b_cols = [basis[:, 4 * k + i] for k in range(3) for i in (2, 3)]
    for i, bi in enumerate(b_cols):
        for j, aj in enumerate(a_cols):
            expected = 1.0 if i == j else 0.0
            assert bi @ pair.omega1 @ aj == pytest.approx(expected, abs=1e-10)
    for i, x in enumerate(a_cols):
        for y in a_cols[i + 1 :]:
            assert x @ pair.omega1 @ y == pytest.approx(0.0, abs=1e-10)
    for i, x in enumerate(b_cols):
        for y in b_cols[i + 1 :]:
            assert x @ pair.omega1 @ y == pytest.approx(0.0, abs=1e-10)


def test_degenerate_omega_is_rejected():
    w1s, w2s = standard_fiber_forms(1)
    singular = w1s.copy()
    singular[:, 0] = 0.0
    singular[0, :] = 0.0
    with pytest.raises((DegenerateFormError, ValueError)):
        CrpsPair(singular, w2s, fiber_complex_matrix(1))


def test_pair_rejects_mismatched_partner():
    w1s, _ = standard_fiber_forms(1)
    with pytest.raises(ValueError):
        CrpsPair(w1s, 2.0 * w1s, fiber_complex_matrix(1))


# --- crms_darboux ------------------------------------------------------------


def test_standard_form_gives_identity_frame_and_zero_nu():
    frame = crms_darboux(standard_crms_form(2), standard_complex_structure(2))
    assert np.max(np.abs(frame.basis - np.eye(10))) < 1e-12
    assert np.max(np.abs(frame.nu)) < 1e-12


def test_nu_recovered_in_darboux_coframe():
    rng = np.random.default_rng(31)
    nu = rng.normal(size=4)
    form = standard_crms_form(1, nu=nu)
    frame = crms_darboux(form, standard_complex_structure(1))
    assert np.max(np.abs(frame.nu - nu)) < 1e-9
    assert darboux_reconstruction_error(form, frame) < 1e-9


@pytest.mark.parametrize("n", [1, 2, 3])
def test_conjugated_form_roundtrip(n):
    rng = np.random.default_rng(200 + n)
    form, structure = random_crms_form(n, rng)
    frame = crms_darboux(form, structure)
    assert darboux_reconstruction_error(form, frame) < 1e-9


def test_coupled_structure_gives_vertical_e2_component():
    # With a coupled complex structure, e2 = I e1 acquires a vertical part;
    # the frame must still reproduce the normal form.
    rng = np.random.default_rng(41)
    structure = structure_with_coupling(1, rng)
    form = standard_crms_form(1, nu=rng.normal(size=4))
    frame = crms_darboux(form, structure)
    assert np.max(np.abs(frame.basis[2:, 1])) > 1e-3
    assert darboux_reconstruction_error(form, frame) < 1e-9


def test_invalid_form_raises_with_report():
    form, _ = inject_vertical_triple(standard_crms_form(1))
    with pytest.raises(CrmsValidationError) as excinfo:
        crms_darboux(form, standard_complex_structure(1))
    assert excinfo.value.report is not None
    assert not excinfo.value.report.horizontal.ok


def test_splitting_contractions_form_a_crps_pair():
    # omega1 := form(e2, ., .)|_V and omega2 := -form(e1, ., .)|_V satisfy
    # omega2 = -omega1(., I.), mirroring the splitting computation.
    rng = np.random.default_rng(53)
    for n in (1, 2):
        form, structure = random_crms_form(n, rng)
        d = form.dim
        e1 = np.zeros(d)
        e1[0] = 1.0
        e2 = structure.matrix @ e1
        w1 = contraction_matrix(form, e2)
        w2 = -contraction_matrix(form, e1)
        assert np.max(np.abs(w2 + w1 @ structure.fiber_part)) < 1e-10


@settings(max_examples=15, deadline=None)
@given(n=st.integers(min_value=1, max_value=4), seed=st.integers(min_value=0, max_value=10_000))
def test_roundtrip_property(n, seed):
    # Round-trip for dim_fiber <= 16: reconstruction below 1e-8.
    rng = np.random.default_rng(seed)
    form, structure = random_crms_form(n, rng)
    frame = crms_darboux(form, structure)
    assert darboux_reconstruction_error(form, frame) < 1e-8


def test_frame_validation_rejects_garbage():
    with pytest.raises(ValueError):
        DarbouxFrame(np.zeros((6, 6)), np.zeros(4))
