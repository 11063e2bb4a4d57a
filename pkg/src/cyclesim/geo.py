"""Geographic helpers: haversine distances and a local tangent-plane frame.

All distances are meters on a WGS84 sphere of radius 6 371 000 m, which is
accurate to well under 0.5 % at city scale.
"""

import math

import numpy as np

EARTH_RADIUS_M = 6_371_000.0


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters between two WGS84 points."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


def haversine_consecutive_m(lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    """Distances between consecutive points of a track, length ``n - 1``."""
    lat = np.radians(np.asarray(lats, dtype=float))
    lon = np.radians(np.asarray(lons, dtype=float))
    dlat = np.diff(lat)
    dlon = np.diff(lon)
    a = np.sin(dlat / 2) ** 2 + np.cos(lat[:-1]) * np.cos(lat[1:]) * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def enu_to_geo(x_m: np.ndarray, y_m: np.ndarray, lat0: float, lon0: float) -> tuple[np.ndarray, np.ndarray]:
    """Map local east/north meters around (lat0, lon0) to latitude/longitude.

    Small-angle tangent-plane approximation; adequate for tracks of a few km.
    """
    lat = lat0 + np.degrees(np.asarray(y_m, dtype=float) / EARTH_RADIUS_M)
    lon = lon0 + np.degrees(np.asarray(x_m, dtype=float) / (EARTH_RADIUS_M * math.cos(math.radians(lat0))))
    return lat, lon
