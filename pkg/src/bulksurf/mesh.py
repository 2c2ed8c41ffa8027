"""Finite-volume grid for a rectangle coupled to a surface mesh on part of its boundary.

The bulk domain is an axis-aligned rectangle split into ``nx * ny`` uniform
control volumes.  The active surface is a union of whole rectangle edges; each
boundary face of a bulk cell lying on an active edge becomes one surface
control volume.  Surface cells are ordered along the counterclockwise boundary
cycle (bottom, right, top, left), so that cells on adjacent active edges form
a single connected 1D chain joined at the shared corner.  Chain endpoints have
no neighbor, which realizes the zero-flux condition there; with all four edges
active the chain closes into a loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EDGE_NAMES = ("bottom", "right", "top", "left")


@dataclass(frozen=True, eq=False)
class CoupledMesh:
    """Immutable bulk grid plus surface chain and the trace map between them.

    Bulk cells are indexed row-major: cell ``(ix, iy)`` has index
    ``iy * nx + ix`` and center ``((ix + 0.5) * dx, (iy + 0.5) * dy)``.
    ``surf_to_bulk[j]`` is the bulk cell whose boundary face hosts surface
    cell ``j``; a corner bulk cell may host two surface cells when both of
    its boundary edges are active.
    """

    nx: int
    ny: int
    lx: float
    ly: float
    active_edges: tuple[str, ...]
    dx: float
    dy: float
    cell_volume: float
    total_bulk_measure: float
    total_surface_measure: float
    n_bulk: int
    n_surface: int
    # surface chain
    surf_length: np.ndarray = field(repr=False)
    surf_to_bulk: np.ndarray = field(repr=False)
    surf_center_x: np.ndarray = field(repr=False)
    surf_center_y: np.ndarray = field(repr=False)
    surf_edge: tuple[str, ...] = field(repr=False)
    surf_face_a: np.ndarray = field(repr=False)
    surf_face_b: np.ndarray = field(repr=False)
    surf_face_dist: np.ndarray = field(repr=False)
    # interior bulk faces
    bulk_face_a: np.ndarray = field(repr=False)
    bulk_face_b: np.ndarray = field(repr=False)
    bulk_face_length: np.ndarray = field(repr=False)
    bulk_face_dist: np.ndarray = field(repr=False)
    cell_center_x: np.ndarray = field(repr=False)
    cell_center_y: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class FaceSet:
    """Interior faces as parallel arrays: cell pair, face measure, center distance."""

    cell_a: np.ndarray
    cell_b: np.ndarray
    length: np.ndarray
    distance: np.ndarray

    def __len__(self) -> int:
        return int(self.cell_a.size)


def _boundary_cycle(nx: int, ny: int) -> list[tuple[str, int]]:
    """All boundary faces in counterclockwise cycle order as (edge, along-index)."""
    cycle: list[tuple[str, int]] = []
    cycle += [("bottom", ix) for ix in range(nx)]
    cycle += [("right", iy) for iy in range(ny)]
    cycle += [("top", t) for t in range(nx)]   # traversed right-to-left
    cycle += [("left", t) for t in range(ny)]  # traversed top-to-bottom
    return cycle


def _face_geometry(edge: str, t: int, nx: int, ny: int, dx: float, dy: float):
    """Bulk cell index, face length and face-center coordinates of one boundary face."""
    if edge == "bottom":
        ix, iy = t, 0
        length, cx, cy = dx, (ix + 0.5) * dx, 0.0
    elif edge == "right":
        ix, iy = nx - 1, t
        length, cx, cy = dy, nx * dx, (iy + 0.5) * dy
    elif edge == "top":
        ix, iy = nx - 1 - t, ny - 1
        length, cx, cy = dx, (ix + 0.5) * dx, ny * dy
    elif edge == "left":
        ix, iy = 0, ny - 1 - t
        length, cx, cy = dy, 0.0, (iy + 0.5) * dy
    else:  # pragma: no cover - guarded by build_mesh validation
        raise ValueError(f"unknown edge {edge!r}")
    return iy * nx + ix, length, cx, cy


def build_mesh(
    nx: int,
    ny: int,
    lx: float,
    ly: float,
    active_edges,
) -> CoupledMesh:
    """Build the coupled bulk/surface mesh.

    Parameters
    ----------
    nx, ny : int
        Cell counts per axis, both >= 1.
    lx, ly : float
        Rectangle side lengths, both > 0.
    active_edges : iterable of str
        Nonempty subset of {"bottom", "right", "top", "left"} forming the
        active surface.
    """
    if nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be >= 1, got nx={nx}, ny={ny}")
    if lx <= 0 or ly <= 0:
        raise ValueError(f"side lengths must be positive, got lx={lx}, ly={ly}")
    edges = set(active_edges)
    if not edges:
        raise ValueError("active_edges must contain at least one edge")
    unknown = edges - set(EDGE_NAMES)
    if unknown:
        raise ValueError(f"unknown edge names: {sorted(unknown)}")

    dx = lx / nx
    dy = ly / ny
    n_bulk = nx * ny

    # Surface cells in boundary-cycle order; chain faces join cycle-adjacent
    # active positions, wrapping only when the whole boundary is active.
    cycle = _boundary_cycle(nx, ny)
    active_mask = [edge in edges for edge, _ in cycle]
    positions = [p for p, on in enumerate(active_mask) if on]
    surf_index = {p: j for j, p in enumerate(positions)}

    surf_to_bulk = np.empty(len(positions), dtype=np.int64)
    surf_length = np.empty(len(positions))
    surf_cx = np.empty(len(positions))
    surf_cy = np.empty(len(positions))
    surf_edge = []
    for j, p in enumerate(positions):
        edge, t = cycle[p]
        cell, length, cx, cy = _face_geometry(edge, t, nx, ny, dx, dy)
        surf_to_bulk[j] = cell
        surf_length[j] = length
        surf_cx[j] = cx
        surf_cy[j] = cy
        surf_edge.append(edge)

    # Cyclic adjacency: position p borders (p + 1) mod n_cycle, so edges that
    # meet at a corner (including across the cycle seam at the origin) chain up.
    n_cycle = len(cycle)
    face_a, face_b, face_dist = [], [], []
    for p in positions:
        q = (p + 1) % n_cycle
        if q != p and active_mask[q]:
            a, b = surf_index[p], surf_index[q]
            face_a.append(a)
            face_b.append(b)
            face_dist.append(0.5 * (surf_length[a] + surf_length[b]))

    # Interior bulk faces: vertical-neighbor pairs share a face of length dx,
    # horizontal-neighbor pairs a face of length dy.
    ii = np.arange(n_bulk).reshape(ny, nx)
    h_a = ii[:, :-1].ravel()
    h_b = ii[:, 1:].ravel()
    v_a = ii[:-1, :].ravel()
    v_b = ii[1:, :].ravel()
    bulk_face_a = np.concatenate([h_a, v_a])
    bulk_face_b = np.concatenate([h_b, v_b])
    bulk_face_length = np.concatenate([np.full(h_a.size, dy), np.full(v_a.size, dx)])
    bulk_face_dist = np.concatenate([np.full(h_a.size, dx), np.full(v_a.size, dy)])

    xs = (np.arange(nx) + 0.5) * dx
    ys = (np.arange(ny) + 0.5) * dy
    cgx, cgy = np.meshgrid(xs, ys)

    return CoupledMesh(
        nx=nx,
        ny=ny,
        lx=float(lx),
        ly=float(ly),
        active_edges=tuple(e for e in EDGE_NAMES if e in edges),
        dx=dx,
        dy=dy,
        cell_volume=dx * dy,
        total_bulk_measure=float(lx) * float(ly),
        total_surface_measure=float(np.sum(surf_length)),
        n_bulk=n_bulk,
        n_surface=len(positions),
        surf_length=surf_length,
        surf_to_bulk=surf_to_bulk,
        surf_center_x=surf_cx,
        surf_center_y=surf_cy,
        surf_edge=tuple(surf_edge),
        surf_face_a=np.asarray(face_a, dtype=np.int64),
        surf_face_b=np.asarray(face_b, dtype=np.int64),
        surf_face_dist=np.asarray(face_dist, dtype=float),
        bulk_face_a=bulk_face_a,
        bulk_face_b=bulk_face_b,
        bulk_face_length=bulk_face_length,
        bulk_face_dist=bulk_face_dist,
        cell_center_x=cgx.ravel(),
        cell_center_y=cgy.ravel(),
    )


def bulk_face_list(mesh: CoupledMesh) -> FaceSet:
    """Interior bulk faces, each exactly once; count is ny*(nx-1) + nx*(ny-1)."""
    return FaceSet(
        cell_a=mesh.bulk_face_a,
        cell_b=mesh.bulk_face_b,
        length=mesh.bulk_face_length,
        distance=mesh.bulk_face_dist,
    )


def surface_face_list(mesh: CoupledMesh) -> FaceSet:
    """Faces between chain-adjacent surface cells (unit face measure in 1D)."""
    return FaceSet(
        cell_a=mesh.surf_face_a,
        cell_b=mesh.surf_face_b,
        length=np.ones(mesh.surf_face_a.size),
        distance=mesh.surf_face_dist,
    )
