import numpy as np
import pytest

from bandgap.defect import (RESIDUAL_GATE, ModeSearchError, decay_rates, defect_matrix_left,
                            defect_matrix_right, find_modes, helmholtz_residual,
                            mode_condition_bounded, mode_frequencies, piecewise_region,
                            reconstruct_mode, sign_changes_in_region)
from bandgap.medium import (BoundedDefect, Periodic, Segment, SegmentDefect, SmoothDefect,
                            local_defect_cell, preset_local_defect, preset_ssh,
                            preset_ssh_dislocated, preset_ssh_interface)
from bandgap.spectrum import common_gaps, dispersion_scan
from bandgap.transfer import BandEdgeError, cell_matrix

GAP = dispersion_scan(local_defect_cell(10), 1.0).gaps[0]


def test_rk4_oracle_matches_product_form():
    region = preset_local_defect(10, 9.9).region
    smooth = piecewise_region(region.segments)
    w = np.array([0.18, 0.25, 0.3])
    assert np.allclose(defect_matrix_left(smooth, w), defect_matrix_left(region, w), atol=1e-10)
    assert np.allclose(defect_matrix_right(smooth, w), defect_matrix_right(region, w), atol=1e-10)


def test_right_matrix_inverts_left():
    region = preset_ssh_dislocated(10, 0.25, 0.1, 3.3).region
    w = 0.7
    assert np.allclose(defect_matrix_right(region, w) @ defect_matrix_left(region, w),
                       np.eye(2), atol=1e-9)


def test_smooth_region_continuous_profile():
    # A cosine bump of the wave speed: no closed form, just consistency of L and R.
    region = SmoothDefect(lambda x: 1.0 + 0.2 * np.cos(np.pi * np.asarray(x)), 2.0)
    w = 0.4
    DL, DR = defect_matrix_left(region, w), defect_matrix_right(region, w)
    assert np.allclose(DR @ DL, np.eye(2), atol=1e-10)
    assert np.linalg.det(DL) == pytest.approx(1.0, abs=1e-10)


def test_unperturbed_medium_has_no_modes():
    m = preset_ssh_dislocated(10, 0.25, 0.1, 0.0)
    gap = dispersion_scan(m.cell, 1.0).gaps[0]
    assert mode_frequencies(m, gap) == []
    assert mode_frequencies(Periodic(m.cell), gap) == []


def test_condition_rejects_pass_band():
    m = preset_local_defect(10, 9.9)
    with pytest.raises(BandEdgeError):
        mode_condition_bounded(m.cell, m.region, 0.1)


@pytest.mark.parametrize("R,edge", [(9.9, 0), (10.1, 1), (9.0, 0), (11.0, 1)])
def test_single_point_defect_mode(R, edge):
    m = preset_local_defect(10, R)
    modes = find_modes(m, GAP)
    assert len(modes) == 1
    mode = modes[0]
    assert GAP[0] < mode.omega < GAP[1]
    nearest = 0 if mode.omega - GAP[0] < GAP[1] - mode.omega else 1
    assert nearest == edge
    # Decay read off the profile equals -ln|lambda1| of the background.
    assert mode.decay_left == pytest.approx(mode.predicted_left, rel=1e-6)
    assert mode.decay_right == pytest.approx(mode.predicted_right, rel=1e-6)
    assert decay_rates(m, mode.omega) == pytest.approx((mode.predicted_left, mode.predicted_right))


def test_mode_is_normalised_and_solves_the_equation():
    m = preset_local_defect(10, 9.9)
    mode = find_modes(m, GAP)[0]
    assert np.max(np.abs(mode.mesh_u)) == pytest.approx(1.0)
    assert abs(mode.residual) <= RESIDUAL_GATE
    assert helmholtz_residual(m, mode) < 1e-6


def test_profile_symmetric_for_symmetric_defect():
    m = preset_local_defect(10, 10.1)
    mode = find_modes(m, GAP)[0]
    u = mode.mesh_u
    # Mesh runs n = -N..N+1; reflection maps index i to the mirror index.
    assert np.allclose(np.abs(u), np.abs(u[::-1]), atol=1e-8)


def test_reconstruct_refuses_non_root():
    with pytest.raises(ModeSearchError):
        reconstruct_mode(preset_local_defect(10, 9.9), 0.25)


def test_interface_mode():
    m = preset_ssh_interface(10, 0.1, 0.05)
    gap = common_gaps(m.left, m.right, 1.0)[0]
    modes = find_modes(m, gap)
    assert len(modes) == 1
    mode = modes[0]
    assert mode.decay_left == pytest.approx(mode.decay_right, rel=1e-6)
    assert helmholtz_residual(m, mode) < 1e-6


def test_identical_interface_has_no_mode():
    from bandgap.medium import Interface
    cell = preset_ssh(10, 0.45, 0.1).cell
    m = Interface(cell, cell)
    gap = dispersion_scan(cell, 1.0).gaps[0]
    assert mode_frequencies(m, gap) == []


def test_sign_changes_count():
    m = preset_ssh_dislocated(10, 0.25, 0.1, 22.0)
    gap = dispersion_scan(m.cell, 1.0).gaps[0]
    modes = find_modes(m, gap)
    counts = [sign_changes_in_region(md, 0.0, m.region.width) for md in modes]
    # Higher modes oscillate more inside the defect.
    assert counts == sorted(counts)
    assert len(set(counts)) == len(counts)


def test_asymmetric_defect_mode_is_found():
    region = SegmentDefect((Segment(1, .5), Segment(9.9, .5), Segment(10, .5), Segment(1, .5)))
    m = BoundedDefect(local_defect_cell(10), region)
    modes = find_modes(m, GAP)
    assert len(modes) == 1
    assert helmholtz_residual(m, modes[0]) < 1e-6


def test_grid_independent_roots():
    m = preset_ssh_dislocated(10, 0.25, 0.1, 22.0)
    gap = dispersion_scan(m.cell, 1.0).gaps[0]
    a = mode_frequencies(m, gap, n_grid=2000)
    b = mode_frequencies(m, gap, n_grid=5000)
    assert np.allclose(a, b, atol=1e-9)


def test_mode_matches_eigen_closure():
    # At a root, D maps the decaying left state onto the decaying right one.
    m = preset_local_defect(10, 9.9)
    w = mode_frequencies(m, GAP)[0]
    T = cell_matrix(m.cell, w)
    lam, vecs = np.linalg.eig(T)
    v = np.real(vecs[:, np.argmin(np.abs(lam))])
    out = defect_matrix_left(m.region, w) @ np.array([v[0], -v[1]])
    cross = out[0] * v[1] - out[1] * v[0]
    assert abs(cross) < 1e-8 * np.linalg.norm(out)
