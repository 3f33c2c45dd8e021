import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandgap.medium import Segment, UnitCell, local_defect_cell
from bandgap.transfer import (S, BandEdgeError, cell_matrix, conjugate_S, det,
                              gap_eigen, half_trace, segments_matrix,
                              segments_matrix_reverse, tc)

from conftest import omega, segment_lists, symmetric_cells


def test_single_segment_closed_form():
    w, r, l = 0.7, 3.0, 0.4
    m = tc(r, l, w)
    k = r * w
    expected = [[np.cos(k * l), np.sin(k * l) / k], [-k * np.sin(k * l), np.cos(k * l)]]
    assert np.allclose(m, expected, atol=1e-15)


def test_tc_rejects_bad_input():
    with pytest.raises(ValueError):
        tc(1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        tc(-1.0, 1.0, 1.0)


def test_order_is_left_to_right():
    segs = [Segment(1.0, 0.3), Segment(4.0, 0.2)]
    w = 1.3
    expected = tc(4.0, 0.2, w) @ tc(1.0, 0.3, w)
    assert np.allclose(segments_matrix(segs, w), expected, atol=1e-15)


def test_vectorised_matches_scalar():
    cell = local_defect_cell(10)
    ws = np.linspace(0.05, 1.0, 17)
    batch = cell_matrix(cell, ws)
    for w, m in zip(ws, batch):
        assert np.array_equal(cell_matrix(cell, w), m)


def test_local_defect_half_trace_closed_form():
    # Two unit-slowness halves around a slowness-r inclusion of length 1.
    r = 10.0
    w = np.linspace(0.01, 1.0, 200)
    t = half_trace(cell_matrix(local_defect_cell(r), w))
    expected = np.cos(w) * np.cos(r * w) - 0.5 * (r + 1 / r) * np.sin(w) * np.sin(r * w)
    assert np.allclose(t, expected, atol=1e-13)


@given(segment_lists, omega)
def test_unimodular(segs, w):
    m = segments_matrix([Segment(*s) for s in segs], w)
    assert det(m) == pytest.approx(1.0, abs=1e-9 * max(1.0, np.abs(m).max() ** 2))


@given(segment_lists, omega)
def test_reverse_is_inverse(segs, w):
    segs = [Segment(*s) for s in segs]
    m = segments_matrix(segs, w)
    r = segments_matrix_reverse(segs, w)
    assert np.allclose(r @ m, np.eye(2), atol=1e-9 * max(1.0, np.abs(m).max() ** 2))


@settings(max_examples=50)
@given(symmetric_cells(), omega)
def test_symmetric_cell_s_identity(cell, w):
    m = cell_matrix(cell, w)
    scale = max(1.0, np.abs(m).max() ** 2)
    assert np.allclose(m @ S @ m @ S, np.eye(2), atol=1e-9 * scale)
    assert m[0, 0] == pytest.approx(m[1, 1], abs=1e-10 * scale)


def test_conjugate_S_flips_off_diagonal():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(conjugate_S(m), S @ m @ S)


def test_gap_eigen_against_numpy():
    cell = local_defect_cell(10)
    m = cell_matrix(cell, 0.25)
    e = gap_eigen(m)
    lam = np.sort(np.abs(np.linalg.eigvals(m)))
    assert abs(e.lambda1) == pytest.approx(lam[0], rel=1e-12)
    assert e.lambda1 * e.lambda2 == pytest.approx(1.0, abs=1e-13)
    assert np.allclose(m @ e.v1, e.lambda1 * e.v1, atol=1e-13)
    assert e.v1[0] >= 0
    assert e.decay_per_cell > 0


def test_gap_eigen_power_iteration_oracle():
    # Inverse power iteration converges on the contracting eigenvector.
    m = cell_matrix(local_defect_cell(10), 0.2)
    x = np.array([1.0, 0.3])
    inv = np.linalg.inv(m)
    for _ in range(200):
        x = inv @ x
        x /= np.linalg.norm(x)
    x *= np.sign(x[0])
    assert np.allclose(gap_eigen(m).v1, x, atol=1e-10)


def test_gap_eigen_raises_in_pass_band():
    m = cell_matrix(local_defect_cell(10), 0.1)
    assert abs(half_trace(m)) < 1
    with pytest.raises(BandEdgeError):
        gap_eigen(m)


@given(st.floats(1.0 + 1e-6, 1e6), st.sampled_from([-1.0, 1.0]))
def test_eigenvalues_reciprocal_deep_in_gap(t, sgn):
    # Diagonal-dominant unimodular matrix with half-trace sgn * t.
    q = sgn * (t + np.sqrt(t * t - 1))
    m = np.array([[q, 0.0], [0.0, 1 / q]])
    e = gap_eigen(m)
    assert e.lambda1 * e.lambda2 == pytest.approx(1.0, rel=1e-12)
    assert abs(e.lambda1) <= 1.0
