"""Equal-area partition of the Riemann sphere into grid cells.

The sphere is sliced into latitude bands whose z-extent is an exact
multiple of 2/N, and each band is split into equal-longitude sectors, so
every one of the N cells has spherical area exactly 4*pi/N.  Band sector
counts follow the local circumference, keeping cells roughly square.
Cells are indexed row-major: north cap first, sectors by increasing
longitude within each band.  A boundary point belongs to the
lower-indexed adjacent cell.
"""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from .sphere import SpherePoint, as_sphere_point

_TWO_PI = 2.0 * math.pi


class SphereGrid:
    """Fixed equal-area cell partition used by all measure machinery."""

    def __init__(self, n_cells: int):
        if n_cells < 1:
            raise ValueError("n_cells must be positive")
        side = math.sqrt(4.0 * math.pi / n_cells)
        bands = []
        z_top = 1.0
        remaining = n_cells
        while remaining > 0:
            theta_top = math.acos(max(-1.0, min(1.0, z_top)))
            theta_probe = min(math.pi, theta_top + 0.5 * side)
            m = int(round(math.sqrt(math.pi * n_cells) * math.sin(theta_probe)))
            m = max(1, min(m, remaining))
            z_bot = z_top - 2.0 * m / n_cells
            bands.append((z_top, z_bot, m))
            z_top = z_bot
            remaining -= m
        # The exact-area budget guarantees the last boundary is -1 up to
        # accumulated rounding; pin it.
        z_top_last, _, m_last = bands[-1]
        bands[-1] = (z_top_last, -1.0, m_last)

        self.n_cells = n_cells
        self.band_counts = np.array([m for _, _, m in bands], dtype=int)
        self.band_z = np.array([bands[0][0]] + [b[1] for b in bands])
        self.band_start = np.concatenate(([0], np.cumsum(self.band_counts)))[:-1]
        self.n_bands = len(bands)

    # -- lookup ------------------------------------------------------------

    def band_of_z(self, z: float) -> int:
        """Band index of height z; boundaries go to the northern band."""
        if z >= self.band_z[1]:
            return 0
        if z <= self.band_z[-2]:
            return self.n_bands - 1
        # band_z is strictly decreasing; find i with band_z[i] >= z > band_z[i+1]
        lo, hi = 0, self.n_bands - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if z >= self.band_z[mid + 1]:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def cell_index(self, point) -> int:
        point = as_sphere_point(point)
        x, y, z = point.unit_vector()
        band = self.band_of_z(z)
        m = int(self.band_counts[band])
        phi = math.atan2(y, x) % _TWO_PI
        sector = min(int(phi / (_TWO_PI / m)), m - 1)
        return int(self.band_start[band]) + sector

    def cell_band_sector(self, idx: int) -> tuple[int, int]:
        band = int(np.searchsorted(self.band_start, idx, side="right")) - 1
        return band, idx - int(self.band_start[band])

    def cell_center(self, idx: int) -> SpherePoint:
        band, sector = self.cell_band_sector(idx)
        zc = 0.5 * (self.band_z[band] + self.band_z[band + 1])
        m = int(self.band_counts[band])
        phi = (sector + 0.5) * _TWO_PI / m
        s = math.sqrt(max(0.0, 1.0 - zc * zc))
        return SpherePoint.from_unit_vector((s * math.cos(phi), s * math.sin(phi), zc))

    def cell_center_angles(self, idx: int) -> tuple[float, float]:
        """(theta, phi) of the cell center, theta the polar angle."""
        band, sector = self.cell_band_sector(idx)
        zc = 0.5 * (self.band_z[band] + self.band_z[band + 1])
        m = int(self.band_counts[band])
        phi = (sector + 0.5) * _TWO_PI / m
        return math.acos(max(-1.0, min(1.0, zc))), phi

    @cached_property
    def centers(self) -> list[SpherePoint]:
        return [self.cell_center(i) for i in range(self.n_cells)]

    @cached_property
    def center_vectors(self) -> np.ndarray:
        return np.array([p.unit_vector() for p in self.centers])

    @property
    def cell_area(self) -> float:
        return 4.0 * math.pi / self.n_cells

    # -- adjacency ---------------------------------------------------------

    def _phi_interval(self, band: int, sector: int) -> tuple[float, float]:
        m = int(self.band_counts[band])
        width = _TWO_PI / m
        return sector * width, (sector + 1) * width

    def neighbors(self, idx: int) -> list[int]:
        """Cells sharing an edge or corner with idx (one grid ring)."""
        band, sector = self.cell_band_sector(idx)
        m = int(self.band_counts[band])
        out = set()
        if m > 1:
            out.add(int(self.band_start[band]) + (sector - 1) % m)
            out.add(int(self.band_start[band]) + (sector + 1) % m)
        lo, hi = self._phi_interval(band, sector)
        pad = 1e-12
        for other in (band - 1, band + 1):
            if other < 0 or other >= self.n_bands:
                continue
            mo = int(self.band_counts[other])
            width = _TWO_PI / mo
            first = int(math.floor((lo - pad) / width))
            last = int(math.floor((hi + pad) / width))
            for k in range(first, last + 1):
                out.add(int(self.band_start[other]) + k % mo)
        out.discard(idx)
        return sorted(out)

    def dilate(self, cells) -> frozenset[int]:
        """One-ring dilation of a cell set."""
        out = set(cells)
        for c in cells:
            out.update(self.neighbors(c))
        return frozenset(out)

    def __repr__(self):
        return f"SphereGrid(n_cells={self.n_cells}, n_bands={self.n_bands})"
