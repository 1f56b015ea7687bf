import math

import numpy as np
import pytest

from coeffs import checkerboard, layered_a, parse_preset, quarter_turn, rotated_a
from errors import InvalidParameterError
from homogenize import corrector, corrector_field, homogenize, solve_cell
from mesh import unit_cell_mesh


def test_divergence_free_tensor_homogenizes_to_its_mean():
    cell, medium = homogenize(parse_preset('sincos-A+sincos-n'), divisions=16)
    np.testing.assert_allclose(medium.a_h, 0.5 * np.eye(2), atol=1e-10)
    assert medium.n_h == pytest.approx(3.0, abs=1e-10)
    assert cell.mean_zero
    assert np.abs(cell.psi).max() < 1e-10


def test_identity_tensor():
    _, medium = homogenize(parse_preset('sincos-n'), divisions=8)
    np.testing.assert_allclose(medium.a_h, np.eye(2), atol=1e-12)


def test_layered_tensor_is_exact():
    cell, medium = homogenize(layered_a(1.0, 4.0), divisions=8)
    np.testing.assert_allclose(medium.a_h, np.diag([1.6, 2.5]), atol=1e-10)
    np.testing.assert_allclose(medium.reuss, np.diag([1.6, 1.6]), atol=1e-10)
    np.testing.assert_allclose(medium.voigt, np.diag([2.5, 2.5]), atol=1e-10)
    assert medium.check_bounds()
    np.testing.assert_allclose(cell.mean(), [0.0, 0.0], atol=1e-12)


def test_layered_corrector_profile():
    cell, _ = homogenize(layered_a(1.0, 4.0), divisions=8)
    # psi_1 is piecewise linear in y1 with slopes -0.6 and 0.6
    assert corrector(cell, (1.0, 0.0), (0.0, 0.3)) == pytest.approx(-0.15, abs=1e-10)
    assert corrector(cell, (1.0, 0.0), (0.5, 0.3)) == pytest.approx(0.15, abs=1e-10)
    assert corrector(cell, (1.0, 0.0), (0.25, 0.8)) == pytest.approx(0.0, abs=1e-10)
    points = np.array([[0.1, 0.1], [0.6, 0.9], [0.95, 0.4]])
    np.testing.assert_allclose(corrector_field(cell, (0.0, 1.0), points), 0.0, atol=1e-10)


def test_zero_gradient_gives_zero_corrector():
    cell, _ = homogenize(layered_a(1.0, 4.0), divisions=4)
    assert corrector(cell, (0.0, 0.0), (0.3, 0.3)) == 0.0


def test_checkerboard_geometric_mean():
    _, medium = homogenize(checkerboard(1.0, 2.0, 2.0, 5.0), divisions=64)
    np.testing.assert_allclose(np.diag(medium.a_h), [math.sqrt(2.0)] * 2, rtol=0.02)
    assert abs(medium.a_h[0, 1]) < 1e-8
    assert medium.n_h == pytest.approx(3.5, abs=1e-10)
    assert medium.check_bounds()


def test_quarter_turn_equivariance():
    field = parse_preset('rotated-A+layered-n')
    _, medium = homogenize(field, divisions=16)
    _, turned = homogenize(quarter_turn(field), divisions=16)
    r = np.array([[0.0, -1.0], [1.0, 0.0]])
    np.testing.assert_allclose(turned.a_h, r @ medium.a_h @ r.T, atol=1e-9)
    assert turned.n_h == pytest.approx(medium.n_h, abs=1e-9)


def test_rotated_tensor_is_symmetric_and_bounded():
    _, medium = homogenize(rotated_a(), divisions=16)
    assert medium.is_symmetric
    assert medium.check_bounds()
    assert medium.to_dict()['a12'] == pytest.approx(medium.a_h[0, 1])


def test_cell_problem_needs_a_periodic_mesh():
    with pytest.raises(InvalidParameterError):
        solve_cell(layered_a(), unit_cell_mesh(4, periodic=False))
