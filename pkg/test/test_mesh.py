import math

import numpy as np
import pytest

from coeffs import constant
from errors import InvalidParameterError
from mesh import (Domain, assemble_mass, assemble_stiffness, check_conformity, disk_mesh, dump,
                  interpolate, load, locate, lumped_mass, square_mesh, triangle_tensors, unit_cell_mesh)


def test_unit_cell_mesh_identifies_opposite_faces():
    mesh = unit_cell_mesh(8)
    assert mesh.n_vertices == 81
    assert mesh.n_dofs == 64
    assert mesh.total_area == pytest.approx(1.0)
    assert check_conformity(mesh)
    assert mesh.classes[8] == mesh.classes[0]
    assert mesh.classes[80] == mesh.classes[0]


def test_nonperiodic_cell_mesh():
    mesh = unit_cell_mesh(4, periodic=False)
    assert mesh.n_dofs == 25
    assert not mesh.is_periodic
    assert len(mesh.boundary) == 16


@pytest.mark.parametrize('rings', [1, 3, 6])
def test_disk_mesh_counts_and_area(rings):
    mesh = disk_mesh(1.5, rings=rings)
    sides = 6 * rings
    assert mesh.n_vertices == 1 + 3 * rings * (rings + 1)
    assert mesh.n_triangles == 6 * rings ** 2
    assert mesh.total_area == pytest.approx(0.5 * sides * 1.5 ** 2 * math.sin(2.0 * math.pi / sides))
    assert len(mesh.boundary) == sides
    assert check_conformity(mesh)
    np.testing.assert_allclose(np.hypot(*mesh.vertices[mesh.boundary].T), 1.5)


def test_square_mesh():
    mesh = square_mesh(-1.0, 1.0, 4)
    assert mesh.h == pytest.approx(math.sqrt(2.0) * 0.5)
    assert mesh.total_area == pytest.approx(4.0)
    assert check_conformity(mesh)


def test_domain_parsing():
    square = Domain.parse('square:0,2')
    assert not square.is_disk
    assert square.equivalent_radius == pytest.approx(2.0 / math.sqrt(math.pi))
    assert square.to_text() == 'square:0,2'
    disk = Domain.parse('disk:2')
    assert disk.area == pytest.approx(4.0 * math.pi)
    assert disk.contains([[1.9, 0.0]])[0]
    assert not disk.contains([[1.9, 0.0]], shrink=0.8)[0]


@pytest.mark.parametrize('text', ['circle:1', 'disk:-1', 'square:2,0', 'disk:1,2', 'square:a,b'])
def test_bad_domains(text):
    with pytest.raises(InvalidParameterError):
        Domain.parse(text)


@pytest.mark.parametrize('text', ['disk:1', 'square:0,2'])
def test_build_mesh_respects_h_max(text):
    mesh = Domain.parse(text).build_mesh(0.15)
    assert mesh.h <= 0.15
    assert check_conformity(mesh)


def test_build_mesh_rounds_divisions_to_a_multiple():
    mesh = Domain.parse('square:-3,3').build_mesh(0.5, multiple=12)
    assert (math.isqrt(mesh.n_vertices) - 1) % 12 == 0


def test_stiffness_kills_constants_and_mass_integrates_one():
    mesh = disk_mesh(1.0, rings=4)
    stiffness = assemble_stiffness(mesh, triangle_tensors(mesh, constant(0.5, 2.0)))
    np.testing.assert_allclose(stiffness @ np.ones(mesh.n_dofs), 0.0, atol=1e-12)
    ones = np.ones(mesh.n_dofs)
    assert ones @ assemble_mass(mesh) @ ones == pytest.approx(mesh.total_area)
    assert ones @ assemble_mass(mesh, constant(0.5, 2.0)) @ ones == pytest.approx(2.0 * mesh.total_area)
    assert lumped_mass(mesh).sum() == pytest.approx(mesh.total_area)


def test_periodic_stiffness_is_singular_on_constants():
    mesh = unit_cell_mesh(6)
    stiffness = assemble_stiffness(mesh)
    np.testing.assert_allclose(stiffness @ np.ones(mesh.n_dofs), 0.0, atol=1e-12)


def test_interpolation_reproduces_linear_functions():
    mesh = square_mesh(0.0, 2.0, 6)
    values = 2.0 * mesh.vertices[:, 0] - 3.0 * mesh.vertices[:, 1] + 1.0
    points = np.random.default_rng(1).uniform(0.05, 1.95, (40, 2))
    expected = 2.0 * points[:, 0] - 3.0 * points[:, 1] + 1.0
    np.testing.assert_allclose(interpolate(mesh, values, points), expected, atol=1e-12)


def test_locate_wraps_periodic_points():
    mesh = unit_cell_mesh(4)
    t_inside, bary_inside = locate(mesh, [[0.3, 0.6]])
    t_shifted, bary_shifted = locate(mesh, [[1.3, -0.4]])
    assert t_inside[0] == t_shifted[0]
    np.testing.assert_allclose(bary_inside, bary_shifted, atol=1e-12)


def test_dump_and_load(tmp_path):
    mesh = square_mesh(0.0, 1.0, 3)
    stem = str(tmp_path / 'square')
    dump(mesh, stem)
    loaded = load(stem)
    np.testing.assert_allclose(loaded.vertices, mesh.vertices)
    np.testing.assert_array_equal(loaded.triangles, mesh.triangles)
    np.testing.assert_array_equal(loaded.boundary, mesh.boundary)
