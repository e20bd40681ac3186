# core/models/geo.py
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

EARTH_RADIUS_M = 6371008.8


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def to_list(self) -> list:
        return [self.lat, self.lon]

    @classmethod
    def from_list(cls, values) -> "GeoPoint":
        return cls(float(values[0]), float(values[1]))


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def haversine_many_m(point: GeoPoint, lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Vectorised haversine from one point to arrays of coordinates."""
    phi1 = np.radians(point.lat)
    phi2 = np.radians(lats)
    dphi = phi2 - phi1
    dlmb = np.radians(lons - point.lon)
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def destination_point(origin: GeoPoint, bearing_rad: float, distance_m: float) -> GeoPoint:
    """Point reached from origin after distance_m along an initial bearing."""
    delta = distance_m / EARTH_RADIUS_M
    phi1 = math.radians(origin.lat)
    lmb1 = math.radians(origin.lon)
    phi2 = math.asin(math.sin(phi1) * math.cos(delta) + math.cos(phi1) * math.sin(delta) * math.cos(bearing_rad))
    lmb2 = lmb1 + math.atan2(math.sin(bearing_rad) * math.sin(delta) * math.cos(phi1),
                             math.cos(delta) - math.sin(phi1) * math.sin(phi2))
    lon = (math.degrees(lmb2) + 540.0) % 360.0 - 180.0
    return GeoPoint(math.degrees(phi2), lon)


@dataclass(frozen=True)
class GridProjection:
    """Equirectangular projection onto square cells around an origin."""
    origin: GeoPoint
    cell_m: float = 1000.0

    def offset_m(self, point: GeoPoint) -> Tuple[float, float]:
        x = EARTH_RADIUS_M * math.radians(point.lon - self.origin.lon) * math.cos(math.radians(self.origin.lat))
        y = EARTH_RADIUS_M * math.radians(point.lat - self.origin.lat)
        return x, y

    def cell(self, point: GeoPoint) -> Tuple[int, int]:
        x, y = self.offset_m(point)
        return math.floor(x / self.cell_m), math.floor(y / self.cell_m)

    def from_offset(self, x_m: float, y_m: float) -> GeoPoint:
        lat = self.origin.lat + math.degrees(y_m / EARTH_RADIUS_M)
        lon = self.origin.lon + math.degrees(x_m / (EARTH_RADIUS_M * math.cos(math.radians(self.origin.lat))))
        return GeoPoint(lat, lon)


def format_cell(cell: Tuple[int, int]) -> str:
    return f"{cell[0]}:{cell[1]}"
