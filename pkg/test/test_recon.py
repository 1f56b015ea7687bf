import numpy as np
import pytest

from coeffs import constant
from errors import DomainError, InvalidParameterError, OutOfRangeError
from recon import invert_fem, invert_index, invert_ratio, invert_tensor_scalar
from te_solver import TEQuery, roots_disk, solve_te_4th


def first_root(a, n, radius=1.0):
    return roots_disk(radius, a, n, 0.5, 20.0).k1


def test_index_round_trip():
    report = invert_index(first_root(1.0, 2.5))
    assert report.recovered == pytest.approx(2.5, abs=1e-8)
    assert report.converged
    assert report.mode == 'index'
    assert report.domain == 'disk:1'


def test_index_from_a_tabulated_root():
    assert invert_index(5.0296323444).recovered == pytest.approx(2.5, abs=1e-6)


def test_index_on_a_larger_disk():
    report = invert_index(first_root(1.0, 3.0, radius=2.0), radius=2.0)
    assert report.recovered == pytest.approx(3.0, abs=1e-8)


def test_tensor_round_trip_below_one():
    report = invert_tensor_scalar(first_root(0.5, 1.0), branch='below')
    assert report.recovered == pytest.approx(0.5, abs=1e-8)
    assert report.branch == 'below'


def test_tensor_round_trip_above_one():
    report = invert_tensor_scalar(first_root(2.0, 1.0), branch='above')
    assert report.recovered == pytest.approx(2.0, abs=1e-8)


def test_ratio_derives_the_tensor():
    report = invert_ratio(first_root(1.0, 3.0), known_index=4.5)
    assert report.recovered == pytest.approx(3.0, abs=1e-8)
    assert report.derived['a_h'] == pytest.approx(1.5, abs=1e-8)
    row = report.to_dict()
    assert row['n_h'] == 4.5
    assert row['mode'] == 'ratio'


def first_roots(a_values, n_values):
    return [roots_disk(1.0, a, n, 0.5, 60.0).k1 for a, n in zip(a_values, n_values)]


def test_index_round_trip_over_random_values():
    rng = np.random.default_rng(7)
    indices = rng.uniform(2.0, 6.0, 20)
    for n, k1 in zip(indices, first_roots(np.ones(20), indices)):
        assert invert_index(k1).recovered == pytest.approx(n, abs=1e-7)


@pytest.mark.parametrize('branch, low, high', [('below', 0.3, 0.7), ('above', 1.5, 3.0)])
def test_tensor_round_trip_over_random_values(branch, low, high):
    rng = np.random.default_rng(11)
    tensors = rng.uniform(low, high, 20)
    for a, k1 in zip(tensors, first_roots(tensors, np.ones(20))):
        assert invert_tensor_scalar(k1, branch=branch).recovered == pytest.approx(a, abs=1e-7)


def test_ratio_round_trip_matches_the_index_inversion():
    rng = np.random.default_rng(13)
    ratios = rng.uniform(2.0, 6.0, 20)
    for alpha, k1 in zip(ratios, first_roots(np.ones(20), ratios)):
        recovered = invert_ratio(k1).recovered
        assert recovered == pytest.approx(alpha, abs=1e-7)
        assert abs(recovered - invert_index(k1).recovered) <= 1e-10


def test_unreachable_eigenvalue():
    with pytest.raises(OutOfRangeError):
        invert_index(1e-3)


def test_invalid_inputs():
    with pytest.raises(InvalidParameterError):
        invert_index(-1.0)
    with pytest.raises(InvalidParameterError):
        invert_tensor_scalar(5.0, branch='sideways')
    with pytest.raises(InvalidParameterError):
        invert_fem('volume', 2.0, 'square:0,2')


def test_analytic_inversion_needs_a_disk():
    with pytest.raises(DomainError):
        invert_index(5.0, 'square:-1,1')


@pytest.mark.slow
def test_fem_inversion_on_a_square():
    query = TEQuery(domain='square:0,2', field=constant(1.0, 3.0), k_min=1.0, k_max=6.0, count=1,
                    h_max=0.25, tau_steps=60)
    k1 = solve_te_4th(query).k1
    assert k1 is not None

    report = invert_fem('index', k1, 'square:0,2', h_max=0.25)
    assert report.mode == 'index'
    assert report.domain == 'square:0,2'
    assert report.recovered == pytest.approx(3.0, rel=1e-3)
    assert report.residual < 1e-3 * k1
