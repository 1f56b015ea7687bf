import math
import runpy

import numpy as np
import pytest
import scipy.sparse as sp

from coeffs import checkerboard, constant, parse_preset, rescale, sincos_a, sincos_n
from errors import DegenerateContrastError, DomainError, InvalidParameterError, RegimeError
from linalg import dense_real_spectrum, eig_shift_invert
from mesh import Domain, disk_mesh
from te_solver import (FourthOrderPencil, TEQuery, TEResult, assemble_pencil_X, bracket_check,
                       choose_method, det_disk, disk_orders, export_mode, fem_tolerance, fit_rate,
                       roots_disk, solve_te, solve_te_4th, solve_te_pencil, spectrum_disk)


def test_first_disk_roots():
    assert roots_disk(2.0, 1.0, 3.0, 0.5, 3.5).k1 == pytest.approx(2.079617909939, abs=1e-7)
    assert roots_disk(2.0, 0.5, 3.0, 0.5, 3.5).k1 == pytest.approx(1.057456682466, abs=1e-7)


def test_determinant_vanishes_at_its_roots():
    result = roots_disk(1.0, 1.0, 2.5, 0.5, 20.0, count=3)
    assert result.eigenvalues
    assert result.k1 == pytest.approx(5.0296323444, abs=1e-7)
    for k in result.eigenvalues:
        assert abs(det_disk(k, 1.0, 1.0, 2.5)) < 1e-10
    assert result.eigenvalues == sorted(result.eigenvalues)


def test_roots_scale_with_radius():
    small = roots_disk(1.0, 0.5, 3.0, 0.5, 5.0).k1
    large = roots_disk(2.0, 0.5, 3.0, 0.25, 2.5).k1
    assert large == pytest.approx(0.5 * small, rel=1e-10)


def test_orders_are_merged():
    result = roots_disk(1.0, 1.0, 4.0, 2.5, 3.6, count=3, orders=(0, 1, 2))
    np.testing.assert_allclose(result.eigenvalues, [2.90261, 3.38419, 3.41205], atol=1e-4)


def test_shortfall_is_flagged():
    result = roots_disk(1.0, 1.0, 3.0, 0.5, 1.0, count=2)
    assert result.shortfall
    assert result.is_empty


def test_degenerate_contrast():
    with pytest.raises(DegenerateContrastError):
        roots_disk(1.0, 2.0, 2.0, 0.5, 3.0)


def test_query_validation():
    with pytest.raises(InvalidParameterError):
        TEQuery(domain='disk:1', field=constant(1.0, 3.0), k_min=0.0, k_max=2.0)
    with pytest.raises(InvalidParameterError):
        TEQuery(domain='disk:1', field=constant(1.0, 3.0), k_min=2.0, k_max=1.0)
    with pytest.raises(InvalidParameterError):
        TEQuery(domain='disk:1', field=constant(1.0, 3.0), k_min=1.0, k_max=2.0, method='magic')


def test_mesh_size_follows_the_period():
    query = TEQuery(domain='disk:1', field=parse_preset('sincos-n'), k_min=1.0, k_max=2.0)
    assert query.target_h == pytest.approx(0.1)
    scaled = TEQuery(domain='disk:1', field=rescale(sincos_n(), 0.25), k_min=1.0, k_max=2.0)
    assert scaled.target_h == pytest.approx(0.25 / 8.0)


def test_method_choice():
    def query(domain, field):
        return TEQuery(domain=domain, field=field, k_min=1.0, k_max=2.0)

    assert choose_method(query('disk:1', constant(1.0, 3.0))) == 'analytic'
    assert choose_method(query('square:0,1', sincos_n())) == 'fourth'
    assert choose_method(query('disk:1', sincos_a())) == 'pencil'
    assert choose_method(query('square:0,1', constant(0.5, 1.0))) == 'pencil'


def test_analytic_method_needs_a_disk():
    query = TEQuery(domain='square:0,1', field=constant(1.0, 3.0), k_min=1.0, k_max=2.0,
                    method='analytic')
    with pytest.raises(DomainError):
        solve_te(query)


def test_pencil_regime_check():
    mesh = disk_mesh(1.0, rings=2)
    with pytest.raises(RegimeError):
        assemble_pencil_X(mesh, checkerboard(1.0, 0.2, 2.0, 5.0))
    k, m = assemble_pencil_X(mesh, checkerboard(1.0, 0.2, 2.0, 5.0), strict_regime=False)
    assert k.shape == m.shape == (mesh.n_vertices + len(mesh.interior),) * 2


def test_fourth_order_regime_check():
    mesh = disk_mesh(1.0, rings=2)
    with pytest.raises(RegimeError):
        FourthOrderPencil(mesh, sincos_a())
    with pytest.raises(RegimeError):
        FourthOrderPencil(mesh, checkerboard(1.0, 1.0, 0.5, 2.0))


def test_pencil_is_symmetric_and_indefinite():
    mesh = disk_mesh(1.0, rings=3)
    k, m = assemble_pencil_X(mesh, constant(0.5, 3.0))
    assert abs(k - k.T).max() < 1e-12
    assert abs(m - m.T).max() < 1e-12
    diagonal = m.diagonal()
    assert diagonal.max() > 0 > diagonal.min()


def test_shift_invert_recovers_the_dense_pencil_spectrum():
    mesh = disk_mesh(1.0, rings=3)
    k, m = assemble_pencil_X(mesh, constant(0.5, 3.0))
    values = dense_real_spectrum(k, m, 0.0, 100.0)
    assert len(values) > 0
    for value in values[:5]:
        nearest = eig_shift_invert(sp.csr_matrix(k), sp.csr_matrix(m), value + 1e-3, 1)[0]
        assert nearest.value.real == pytest.approx(value, rel=1e-8)


def test_pencil_matches_the_disk_determinant():
    field = constant(0.5, 3.0)
    query = TEQuery(domain='disk:1', field=field, k_min=1.0, k_max=3.0, count=1, method='pencil',
                    h_max=0.1)
    result = solve_te_pencil(query)
    exact = roots_disk(1.0, 0.5, 3.0, 1.0, 3.0, count=1, orders=tuple(range(9))).k1
    assert result.method == 'pencil-X'
    assert result.k1 == pytest.approx(exact, rel=0.03)
    w, v = result.modes[0]
    boundary = query.build_mesh().boundary
    np.testing.assert_allclose(w[boundary], v[boundary], atol=1e-10)


@pytest.mark.slow
def test_fourth_order_matches_the_disk_determinant():
    query = TEQuery(domain='disk:1', field=constant(1.0, 4.0), k_min=2.5, k_max=3.6, count=1,
                    method='fourth', h_max=0.1, tau_steps=100)
    result = solve_te_4th(query)
    assert result.method == 'fixed-point-4th'
    assert result.k1 == pytest.approx(2.90261, rel=0.02)
    assert result.mode_labels == ('u', 'sigma')

    report = bracket_check(result, constant(1.0, 4.0), 'disk:1')
    assert report.rule == 'index'
    assert report.lower[0] == pytest.approx(2.902608, abs=1e-5)
    assert report.all_satisfied


@pytest.mark.slow
def test_first_periodic_eigenvalue_on_the_disk_of_radius_two():
    field = rescale(sincos_n(), 1 / 3)
    query = TEQuery(domain='disk:2', field=field, k_min=0.7 * 2.0842, k_max=1.3 * 2.0842, count=1,
                    method='fourth', tau_steps=60)
    result = solve_te(query)
    assert result.k1 == pytest.approx(2.0842, rel=0.02)

    report = bracket_check(result, field, 'disk:2')
    assert report.rule == 'index'
    assert report.lower[0] == pytest.approx(1.451304, abs=1e-4)
    assert report.all_satisfied


def test_merged_orders_give_the_lowest_root():
    assert roots_disk(1.0, 1.0, 4.0, 0.5, 10.0).k1 == pytest.approx(3.384195, abs=1e-5)
    assert spectrum_disk(1.0, 1.0, 4.0, 0.5, 10.0).k1 == pytest.approx(2.902608, abs=1e-5)
    assert spectrum_disk(1.0, 0.5, 1.0, 0.5, 10.0).k1 == pytest.approx(7.384972, abs=1e-5)
    assert list(disk_orders(1.0, 1.0, 4.0, 3.0)) == list(range(9))


def test_fem_tolerance_grows_with_kh():
    assert fem_tolerance(3.0, None) == pytest.approx(0.02)
    assert fem_tolerance(3.0, 0.05) == pytest.approx(0.02)
    assert fem_tolerance(8.0, 0.1) == pytest.approx(0.064)


def test_bracket_check_for_an_index_contrast():
    domain = Domain.disk(1.0)
    lower = spectrum_disk(1.0, 1.0, 4.0, 0.5, 10.0).k1
    upper = spectrum_disk(1.0, 1.0, 2.0, 0.5, 10.0).k1
    assert lower == pytest.approx(2.902608, abs=1e-5)
    assert upper == pytest.approx(7.375126, abs=1e-5)
    inside = TEResult(eigenvalues=[0.5 * (lower + upper)], method='pencil-X', residuals=[0.0], mesh_h=0.1)
    report = bracket_check(inside, sincos_n(), domain)
    assert report.rule == 'index'
    assert report.all_satisfied
    assert report.lower[0] == pytest.approx(lower)
    assert report.upper[0] == pytest.approx(upper)

    outside = TEResult(eigenvalues=[0.5 * lower], method='pencil-X', residuals=[0.0], mesh_h=0.1)
    assert not bracket_check(outside, sincos_n(), domain).all_satisfied


@pytest.mark.slow
def test_halving_h_cuts_the_gap_by_four():
    query = TEQuery(domain='disk:1', field=constant(0.5, 3.0), k_min=1.9, k_max=2.25, count=1,
                    method='pencil')
    k1s = [solve_te_pencil(query, disk_mesh(1.0, refinement=r)).k1 for r in (2, 3, 4)]
    assert all(k == pytest.approx(2.114913, rel=0.06) for k in k1s)
    ratio = (k1s[0] - k1s[1]) / (k1s[1] - k1s[2])
    assert 3.0 <= ratio <= 5.0


@pytest.mark.slow
def test_eigenvalue_count_is_mesh_independent():
    query = TEQuery(domain='disk:1', field=constant(0.5, 3.0), k_min=1.8, k_max=2.9, count=10,
                    method='pencil')
    counts = [len(solve_te_pencil(query, disk_mesh(1.0, refinement=r)).eigenvalues) for r in (2, 3)]
    assert counts[0] == counts[1]
    assert counts[0] >= 3


def test_bracket_check_without_a_rule():
    result = TEResult(eigenvalues=[2.0], method='pencil-X', residuals=[0.0], mesh_h=0.1)
    report = bracket_check(result, checkerboard(1.0, 0.2, 2.0, 5.0), 'disk:1')
    assert not report.applicable


def test_rate_against_a_reference():
    epsilons = [0.5, 0.25, 0.125, 0.0625]
    k1s = [1.0 + 2.0 * e ** 1.5 for e in epsilons]
    fit = fit_rate(epsilons, k1s, k_ref=1.0)
    assert fit.p == pytest.approx(1.5, abs=1e-10)
    assert math.exp(fit.c) == pytest.approx(2.0, rel=1e-10)
    assert fit.reference == 'k_h'


def test_rate_from_successive_errors():
    epsilons = [1.0, 0.5, 0.25, 0.125]
    k1s = [2.0 + e ** 2 for e in epsilons]
    fit = fit_rate(epsilons, k1s)
    assert fit.reference == 'successive-relative'
    assert len(fit.errors) == 3
    assert fit.p == pytest.approx(2.0, abs=0.1)


def test_rate_input_checks():
    with pytest.raises(InvalidParameterError):
        fit_rate([1.0, 0.5], [2.0, 2.1])
    with pytest.raises(InvalidParameterError):
        fit_rate([1.0, 0.4, 0.2], [2.0, 2.1, 2.2])
    with pytest.raises(InvalidParameterError):
        fit_rate([1.0, 0.5, 0.25], [2.0, 2.0, 2.0], k_ref=2.0)


def test_export_needs_a_mode(tmp_path):
    result = roots_disk(1.0, 1.0, 3.0, 0.5, 5.0)
    with pytest.raises(InvalidParameterError):
        export_mode(result, str(tmp_path / 'mode.txt'))


def test_module_demo_prints_each_disk(capsys):
    runpy.run_module('te_solver', run_name='__main__')
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3
    assert 'order-0 k1 = 2.0796179' in lines[0]
    assert 'all orders k1 = 4.2881' in lines[2]
