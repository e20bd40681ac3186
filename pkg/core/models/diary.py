# core/models/diary.py
import datetime as dt
import re
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from core.models.geo import GeoPoint

MINUTES_PER_DAY = 1440
_CLOCK = re.compile(r"^\s*(\d{1,2}):(\d{2})\s*$")


def format_clock(minutes: int) -> str:
    return f"{minutes // 60:02d}:{minutes % 60:02d}"


def parse_clock(text: str) -> int:
    """HH:MM to minutes since midnight. Raises ValueError on anything else."""
    match = _CLOCK.match(str(text))
    if not match:
        raise ValueError(f"expected HH:MM, got '{text}'")
    hours, minutes = int(match.group(1)), int(match.group(2))
    if hours > 23 or minutes > 59:
        raise ValueError(f"clock value out of range: '{text}'")
    return hours * 60 + minutes


def day_type_of(date: dt.date) -> str:
    return "weekend" if date.weekday() >= 5 else "weekday"


@dataclass(frozen=True)
class TrajectoryPoint:
    arrive_time: int
    location: GeoPoint
    purpose: str
    distance_m: float
    mode: str
    duration_min: int
    # Set on generated points only.
    poi_id: Optional[int] = None
    category: Optional[str] = None

    @property
    def depart_time(self) -> int:
        return self.arrive_time - self.duration_min

    def to_dict(self) -> Dict[str, Any]:
        return {
            "arrive_time": self.arrive_time,
            "location": self.location.to_list(),
            "purpose": self.purpose,
            "distance_m": self.distance_m,
            "mode": self.mode,
            "duration_min": self.duration_min,
            "poi_id": self.poi_id,
            "category": self.category,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrajectoryPoint":
        return cls(
            arrive_time=int(data["arrive_time"]),
            location=GeoPoint.from_list(data["location"]),
            purpose=data["purpose"],
            distance_m=float(data["distance_m"]),
            mode=data["mode"],
            duration_min=int(data["duration_min"]),
            poi_id=data.get("poi_id"),
            category=data.get("category"),
        )


@dataclass(frozen=True)
class TravelDiary:
    """One person-day. `origin` is where the first leg starts, when known."""
    person_id: str
    date: dt.date
    points: Tuple[TrajectoryPoint, ...]
    origin: Optional[GeoPoint] = None
    provenance: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def key(self) -> Tuple[str, dt.date]:
        return self.person_id, self.date

    @property
    def day_type(self) -> str:
        return day_type_of(self.date)

    def leg_origins(self) -> Tuple[Optional[GeoPoint], ...]:
        """Origin of every leg; the first is `origin` (may be None)."""
        previous = [self.origin] + [p.location for p in self.points[:-1]]
        return tuple(previous)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "person_id": self.person_id,
            "date": self.date.isoformat(),
            "origin": self.origin.to_list() if self.origin else None,
            "points": [p.to_dict() for p in self.points],
            "provenance": list(self.provenance),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TravelDiary":
        origin = data.get("origin")
        return cls(
            person_id=data["person_id"],
            date=dt.date.fromisoformat(data["date"]),
            points=tuple(TrajectoryPoint.from_dict(p) for p in data["points"]),
            origin=GeoPoint.from_list(origin) if origin else None,
            provenance=tuple(data.get("provenance") or ()),
        )

    def anonymized_text(self) -> str:
        """Diary rendering without the person id, one leg per line."""
        lines = [f"Date: {self.date.isoformat()} ({self.day_type})"]
        for index, point in enumerate(self.points, start=1):
            lines.append(
                f"{index}. depart {format_clock(point.depart_time)}, arrive {format_clock(point.arrive_time)}, "
                f"purpose {point.purpose}, mode {point.mode}, distance {point.distance_m:.0f} m"
            )
        return "\n".join(lines)
