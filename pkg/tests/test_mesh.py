import numpy as np
import pytest

from bulksurf import build_mesh, bulk_face_list, surface_face_list


def test_unit_single_cell():
    mesh = build_mesh(1, 1, 1.0, 1.0, {"bottom"})
    assert mesh.n_bulk == 1
    assert mesh.n_surface == 1
    assert mesh.cell_volume == 1.0
    assert mesh.surf_length[0] == 1.0
    assert mesh.total_bulk_measure == 1.0
    assert mesh.total_surface_measure == 1.0
    assert len(bulk_face_list(mesh)) == 0
    assert len(surface_face_list(mesh)) == 0


def test_uniform_grid_arithmetic():
    mesh = build_mesh(4, 2, 2.0, 1.0, {"bottom"})
    assert mesh.n_bulk == 8
    assert mesh.cell_volume == pytest.approx(0.25)
    assert mesh.n_surface == 4
    np.testing.assert_allclose(mesh.surf_length, 0.5)
    assert mesh.total_surface_measure == pytest.approx(2.0)


def test_two_edge_surface_count():
    # 3x3 grid with bottom+left: 3 + 3 boundary faces, |Gamma| = 1 + 1
    mesh = build_mesh(3, 3, 1.0, 1.0, {"bottom", "left"})
    assert mesh.n_bulk == 9
    assert mesh.n_surface == 6
    assert mesh.total_surface_measure == pytest.approx(2.0)


def test_interior_face_count():
    assert len(bulk_face_list(build_mesh(2, 1, 1.0, 1.0, {"top"}))) == 1
    mesh = build_mesh(3, 3, 1.0, 1.0, {"bottom"})
    faces = bulk_face_list(mesh)
    assert len(faces) == 12  # 3*2 + 3*2
    # every unordered pair appears exactly once
    pairs = {tuple(sorted(p)) for p in zip(faces.cell_a, faces.cell_b)}
    assert len(pairs) == 12


@pytest.mark.parametrize("nx,ny", [(1, 1), (4, 2), (5, 7)])
def test_face_count_formula(nx, ny):
    mesh = build_mesh(nx, ny, 1.5, 0.7, {"bottom"})
    assert len(bulk_face_list(mesh)) == ny * (nx - 1) + nx * (ny - 1)


def test_trace_map_on_active_edges():
    mesh = build_mesh(4, 3, 1.0, 1.0, {"bottom", "right", "top", "left"})
    # injective per edge, and the bulk cell of every surface cell touches its edge
    for edge in ("bottom", "right", "top", "left"):
        cells = [b for b, e in zip(mesh.surf_to_bulk, mesh.surf_edge) if e == edge]
        assert len(cells) == len(set(cells))
    for j, cell in enumerate(mesh.surf_to_bulk):
        ix, iy = cell % mesh.nx, cell // mesh.nx
        edge = mesh.surf_edge[j]
        assert {"bottom": iy == 0, "top": iy == mesh.ny - 1, "left": ix == 0, "right": ix == mesh.nx - 1}[edge]


def test_single_edge_chain_is_connected_path():
    mesh = build_mesh(6, 2, 3.0, 1.0, {"bottom"})
    faces = surface_face_list(mesh)
    assert len(faces) == mesh.n_surface - 1
    np.testing.assert_array_equal(faces.cell_a, np.arange(5))
    np.testing.assert_array_equal(faces.cell_b, np.arange(1, 6))
    np.testing.assert_allclose(faces.distance, 0.5)


def test_corner_adjacent_edges_join_into_one_chain():
    mesh = build_mesh(3, 2, 1.0, 1.0, {"bottom", "left"})
    faces = surface_face_list(mesh)
    # 5 surface cells, one connected chain => 4 faces, including the corner join
    assert mesh.n_surface == 5
    assert len(faces) == 4
    degree = np.bincount(np.concatenate([faces.cell_a, faces.cell_b]), minlength=5)
    assert sorted(degree) == [1, 1, 2, 2, 2]
    # corner face distance is the mean of the two different face lengths
    corner = [d for a, b, d in zip(faces.cell_a, faces.cell_b, faces.distance)
              if mesh.surf_edge[a] != mesh.surf_edge[b]]
    assert len(corner) == 1
    assert corner[0] == pytest.approx(0.5 * (1.0 / 3.0 + 0.5))


def test_opposite_edges_stay_disconnected():
    mesh = build_mesh(4, 3, 1.0, 1.0, {"bottom", "top"})
    faces = surface_face_list(mesh)
    assert len(faces) == 2 * 3  # two open chains of 4 cells
    for a, b in zip(faces.cell_a, faces.cell_b):
        assert mesh.surf_edge[a] == mesh.surf_edge[b]


def test_full_boundary_closes_into_loop():
    mesh = build_mesh(3, 3, 1.0, 1.0, {"bottom", "right", "top", "left"})
    faces = surface_face_list(mesh)
    assert mesh.n_surface == 12
    assert len(faces) == 12  # closed loop: one face per cell
    degree = np.bincount(np.concatenate([faces.cell_a, faces.cell_b]), minlength=12)
    assert set(degree) == {2}


def test_surface_measure_additivity():
    mesh = build_mesh(7, 5, 2.5, 1.25, {"bottom", "left", "top"})
    assert mesh.total_surface_measure == pytest.approx(2.5 + 1.25 + 2.5, rel=1e-15)
    assert mesh.total_surface_measure == pytest.approx(np.sum(mesh.surf_length), rel=0, abs=0)


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        build_mesh(0, 1, 1.0, 1.0, {"bottom"})
    with pytest.raises(ValueError):
        build_mesh(1, 0, 1.0, 1.0, {"bottom"})
    with pytest.raises(ValueError):
        build_mesh(1, 1, 0.0, 1.0, {"bottom"})
    with pytest.raises(ValueError):
        build_mesh(1, 1, 1.0, 1.0, set())
    with pytest.raises(ValueError):
        build_mesh(1, 1, 1.0, 1.0, {"bottom", "diagonal"})
