# core/validation.py
"""
Validity rules for profiles and diaries. Violations are returned as data;
nothing here raises on invalid input.
"""
from dataclasses import dataclass, field
from typing import Any, List, Mapping, Optional, Tuple

from core.models.diary import MINUTES_PER_DAY, TravelDiary
from core.models.geo import GeoPoint
from core.models.profile import IndividualProfile
from core.vocabulary import DEFAULT_SPEED_CAPS_KMH, MODES, PROFILE_DIMENSIONS, PURPOSES, is_member

SPEED_EPSILON_KMH = 1e-9


@dataclass(frozen=True)
class Violation:
    field: str
    value: Any
    message: str

    def __str__(self) -> str:
        return f"{self.field}={self.value!r}: {self.message}"


@dataclass(frozen=True)
class ValidationResult:
    violations: Tuple[Violation, ...] = field(default_factory=tuple)

    @property
    def ok(self) -> bool:
        return not self.violations

    def messages(self) -> List[str]:
        return [str(v) for v in self.violations]


def _check_coordinate(name: str, point: Optional[GeoPoint], out: List[Violation]):
    if point is None:
        return
    if not -90.0 <= point.lat <= 90.0:
        out.append(Violation(name, point.lat, "latitude outside [-90, 90]"))
    if not -180.0 <= point.lon <= 180.0:
        out.append(Violation(name, point.lon, "longitude outside [-180, 180]"))


def validate_profile(profile: IndividualProfile) -> ValidationResult:
    violations: List[Violation] = []
    if not isinstance(profile.person_id, str) or not profile.person_id.strip():
        violations.append(Violation("person_id", profile.person_id, "person_id must be a nonempty string"))
    for dimension, allowed in PROFILE_DIMENSIONS.items():
        value = getattr(profile, dimension)
        if not is_member(dimension, value):
            violations.append(Violation(dimension, value, f"not in vocabulary {list(allowed)}"))
    if profile.home is None:
        violations.append(Violation("home", None, "home coordinate is required"))
    _check_coordinate("home", profile.home, violations)
    _check_coordinate("work", profile.work, violations)
    return ValidationResult(tuple(violations))


def validate_diary(diary: TravelDiary, speed_caps: Mapping[str, float] = DEFAULT_SPEED_CAPS_KMH) -> ValidationResult:
    missing = [mode for mode in MODES if mode not in speed_caps]
    if missing:
        raise ValueError(f"speed caps missing for modes: {missing}")

    violations: List[Violation] = []
    if not diary.points:
        violations.append(Violation("points", 0, "diary has no points"))
        return ValidationResult(tuple(violations))

    previous_arrive: Optional[int] = None
    for index, point in enumerate(diary.points):
        where = f"points[{index}]"
        if not isinstance(point.arrive_time, int) or not 0 <= point.arrive_time < MINUTES_PER_DAY:
            violations.append(Violation(f"{where}.arrive_time", point.arrive_time, "arrive_time outside [0, 1440)"))
        if point.purpose not in PURPOSES:
            violations.append(Violation(f"{where}.purpose", point.purpose, "purpose not in vocabulary"))
        if point.mode not in MODES:
            violations.append(Violation(f"{where}.mode", point.mode, "mode not in vocabulary"))
        if point.distance_m < 0:
            violations.append(Violation(f"{where}.distance_m", point.distance_m, "negative distance"))
        if point.duration_min <= 0:
            violations.append(Violation(f"{where}.duration_min", point.duration_min, "duration must be positive"))
        elif point.mode in speed_caps and point.distance_m >= 0:
            speed_kmh = (point.distance_m / 1000.0) / (point.duration_min / 60.0)
            cap = speed_caps[point.mode]
            if speed_kmh > cap + SPEED_EPSILON_KMH:
                violations.append(Violation(f"{where}.distance_m", point.distance_m,
                                            f"speed cap exceeded ({speed_kmh:.1f} km/h > {cap:g} km/h)"))
        if point.duration_min > 0 and point.depart_time < 0:
            violations.append(Violation(f"{where}.duration_min", point.duration_min, "leg starts before midnight"))

        if previous_arrive is not None:
            if point.arrive_time <= previous_arrive:
                violations.append(Violation(f"{where}.arrive_time", point.arrive_time, "non-monotone arrive_time"))
            elif point.duration_min > 0 and point.depart_time < previous_arrive:
                violations.append(Violation(f"{where}.duration_min", point.duration_min,
                                            "leg overlaps the previous leg"))
        previous_arrive = point.arrive_time

    return ValidationResult(tuple(violations))
