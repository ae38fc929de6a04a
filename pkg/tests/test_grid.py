import math

import numpy as np
import pytest

from corrdyn.grid import SphereGrid
from corrdyn.sphere import SpherePoint, sph_dist


@pytest.fixture(scope="module")
def grid():
    return SphereGrid(400)


def test_cell_budget_is_exact(grid):
    assert grid.band_counts.sum() == grid.n_cells
    assert grid.band_z[0] == 1.0
    assert grid.band_z[-1] == -1.0
    # Band z-extents are exact multiples of 2/N, so all cells share one area.
    extents = grid.band_z[:-1] - grid.band_z[1:]
    np.testing.assert_allclose(extents, 2.0 * grid.band_counts / grid.n_cells, atol=1e-12)


def test_lookup_inverts_center(grid):
    for idx in range(grid.n_cells):
        assert grid.cell_index(grid.cell_center(idx)) == idx


def test_poles_land_in_caps(grid):
    assert grid.cell_index(SpherePoint.infinity()) == 0
    south = grid.cell_index(SpherePoint.from_complex(0.0))
    band, _ = grid.cell_band_sector(south)
    assert band == grid.n_bands - 1


def test_random_points_near_their_centers(grid):
    rng = np.random.default_rng(21)
    diam = 4.0 * math.sqrt(4.0 * math.pi / grid.n_cells)
    for _ in range(500):
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        p = SpherePoint.from_unit_vector(v)
        c = grid.cell_center(grid.cell_index(p))
        assert sph_dist(p, c) < diam


def test_neighbors_symmetric_and_local(grid):
    rng = np.random.default_rng(22)
    for idx in rng.integers(0, grid.n_cells, size=60):
        idx = int(idx)
        for nb in grid.neighbors(idx):
            assert idx in grid.neighbors(nb)
            d = sph_dist(grid.cell_center(idx), grid.cell_center(nb))
            assert d < 5.0 * math.sqrt(4.0 * math.pi / grid.n_cells)


def test_dilate_adds_a_ring(grid):
    cell = grid.cell_index(SpherePoint.from_complex(1.0))
    dil = grid.dilate({cell})
    assert cell in dil
    assert len(dil) > 1


def test_tiny_grid():
    g = SphereGrid(2)
    assert g.n_cells == 2
    assert g.cell_index(SpherePoint.infinity()) == 0
