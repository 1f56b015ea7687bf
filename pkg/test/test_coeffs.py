import math

import numpy as np
import pytest

from coeffs import (ANALYTIC_MEANS, cell_mean, check_bounds, check_periodicity, checkerboard, constant,
                    layered_a, mean_tensor, parse_preset, quarter_turn, rescale, rotated_a, sincos_a,
                    sincos_n, voids, voids_anisotropic)
from errors import InvalidParameterError


@pytest.mark.parametrize('preset', sorted(ANALYTIC_MEANS))
def test_smooth_cell_means(preset):
    assert cell_mean(parse_preset(preset)) == pytest.approx(ANALYTIC_MEANS[preset], abs=1e-10)


def test_piecewise_cell_means():
    assert cell_mean(checkerboard(1.0, 1.0, 2.0, 5.0)) == pytest.approx(3.5, abs=1e-10)
    assert cell_mean(voids()) == pytest.approx(5.0 - math.pi / 4.0, abs=1e-6)


def test_layered_tensor_means():
    field = layered_a(1.0, 4.0)
    np.testing.assert_allclose(mean_tensor(field), np.diag([2.5, 2.5]), atol=1e-10)
    np.testing.assert_allclose(mean_tensor(field, inverse=True), np.diag([0.625, 0.625]), atol=1e-10)


def test_rescale_maps_physical_points_into_the_cell():
    base = sincos_n()
    scaled = rescale(base, 0.25)
    points = np.array([[0.1, 0.3], [0.9, 0.45]])
    np.testing.assert_allclose(scaled.index(points), base.index(points / 0.25), atol=1e-14)
    assert scaled.bounds == base.bounds
    assert rescale(constant(1.0, 3.0), 0.25).epsilon == 1.0


def test_rescale_rejects_nonpositive_epsilon():
    with pytest.raises(InvalidParameterError):
        rescale(sincos_n(), 0.0)


@pytest.mark.parametrize('field', [sincos_a(), rotated_a(), sincos_n(), layered_a()])
def test_presets_are_periodic_and_positive(field):
    assert check_periodicity(field)
    findings = check_bounds(field)
    assert findings['symmetric']
    assert findings['spd']
    assert findings['a_within']
    assert findings['n_within']


def test_rotation_keeps_the_spectrum():
    points = np.random.default_rng(3).random((50, 2))
    rotated = np.linalg.eigvalsh(rotated_a().tensor(points))
    plain = np.linalg.eigvalsh(sincos_a().tensor(points))
    np.testing.assert_allclose(rotated, plain, atol=1e-12)


def test_combined_preset_takes_a_from_the_left():
    field = parse_preset('sincos-A+sincos-n')
    assert field.bounds == pytest.approx((1.0 / 3.0, 2.0 / 3.0, 2.0, 4.0))
    assert field.kind == 'smooth'
    assert not field.a_is_identity


def test_quarter_turn_swaps_layering_direction():
    turned = quarter_turn(layered_a(1.0, 4.0))
    np.testing.assert_allclose(turned.tensor([[0.1, 0.7]])[0], 4.0 * np.eye(2))
    np.testing.assert_allclose(turned.tensor([[0.7, 0.1]])[0], np.eye(2))


def test_voids_phases():
    field = voids()
    assert field.index([[0.5, 0.5]])[0] == 1.0
    assert field.index([[0.05, 0.05]])[0] == 5.0
    assert field.a_is_identity
    anisotropic = voids_anisotropic()
    np.testing.assert_allclose(anisotropic.index([[0.05, 0.05]]), field.index([[0.05, 0.05]]))
    np.testing.assert_allclose(anisotropic.tensor([[0.05, 0.05]])[0], 0.5 * np.eye(2))


@pytest.mark.parametrize('text', ['marble', 'constant:1', 'constant:0,3', 'voids:0.7', 'layered-A:1,x'])
def test_bad_presets(text):
    with pytest.raises(InvalidParameterError):
        parse_preset(text)
