"""Lambert conformal conic projection between geographic and planar km coordinates.

Spherical earth, single standard parallel at the projection center latitude.
All planar coordinates are in km, geographic coordinates in degrees.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6371.0088


def _wrap_degrees(dlon):
    """Wrap a longitude difference into [-180, 180)."""
    return (np.asarray(dlon) + 180.0) % 360.0 - 180.0


@dataclass(frozen=True)
class PlanarFrame:
    """Projection frame: the center maps to (0, 0) with true scale at its latitude."""

    center_lat: float = 38.0
    center_lon: float = -98.0

    def __post_init__(self):
        if not -89.0 < self.center_lat < 89.0 or self.center_lat == 0.0:
            raise ValueError(f"projection center latitude {self.center_lat} unusable")

    @property
    def _constants(self):
        lat0 = math.radians(self.center_lat)
        n = math.sin(lat0)
        f = math.cos(lat0) * math.tan(math.pi / 4 + lat0 / 2) ** n / n
        rho0 = EARTH_RADIUS_KM * f / math.tan(math.pi / 4 + lat0 / 2) ** n
        return n, f, rho0

    def project(self, lon, lat):
        """Geographic degrees -> planar (x, y) km. Raises on points outside the cone."""
        lon = np.asarray(lon, dtype=float)
        lat = np.asarray(lat, dtype=float)
        n, f, rho0 = self._constants
        if np.any(np.abs(lat) > 89.5):
            raise ValueError("latitude outside projection domain (|lat| > 89.5)")
        theta = n * np.radians(_wrap_degrees(lon - self.center_lon))
        if np.any(np.abs(theta) >= math.pi):
            raise ValueError("longitude outside projection domain")
        rho = EARTH_RADIUS_KM * f / np.tan(np.pi / 4 + np.radians(lat) / 2) ** n
        x = rho * np.sin(theta)
        y = rho0 - rho * np.cos(theta)
        if x.ndim == 0:
            return float(x), float(y)
        return x, y

    def unproject(self, x, y):
        """Planar (x, y) km -> geographic (lon, lat) degrees."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        n, f, rho0 = self._constants
        sign = 1.0 if n >= 0 else -1.0
        rho = sign * np.hypot(x, rho0 - y)
        if np.any(rho == 0.0):
            raise ValueError("point maps to the projection pole")
        theta = np.arctan2(sign * x, sign * (rho0 - y))
        lat = np.degrees(2.0 * np.arctan((EARTH_RADIUS_KM * f / rho) ** (1.0 / n)) - np.pi / 2)
        lon = self.center_lon + np.degrees(theta / n)
        lon = _wrap_degrees(lon)
        if lat.ndim == 0:
            return float(lon), float(lat)
        return lon, lat


# Frame used by the bundled western-Mediterranean scenarios: centered so the
# area spanned by (-5deg, 41deg) and (4deg, 35deg) lands inside
# [-650, 100] x [-550, 200] km.
IBERIA_FRAME = PlanarFrame(center_lat=40.0, center_lon=2.5)
