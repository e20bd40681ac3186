# core/models/__init__.py
from .geo import GeoPoint, GridProjection, haversine_m
from .profile import IndividualProfile
from .diary import TrajectoryPoint, TravelDiary, format_clock, parse_clock
from .dataset import Dataset

__all__ = [
    "GeoPoint",
    "GridProjection",
    "haversine_m",
    "IndividualProfile",
    "TrajectoryPoint",
    "TravelDiary",
    "format_clock",
    "parse_clock",
    "Dataset",
]
