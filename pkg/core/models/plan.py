# core/models/plan.py
import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

from core.models.diary import format_clock


def cruise_minutes(distance_m: float, cruise_kmh: float) -> int:
    """Synthesized leg duration: at least one minute."""
    return max(1, math.ceil((distance_m / 1000.0) / cruise_kmh * 60.0))


@dataclass(frozen=True)
class PlanEntry:
    window_start: int
    window_end: int
    purpose: str
    category: str
    d_lo: int
    d_hi: int
    mode: str

    @property
    def target_m(self) -> float:
        return (self.d_lo + self.d_hi) / 2.0

    def planned_arrival(self, cruise_speeds_kmh: Mapping[str, float]) -> int:
        """Arrival if the leg leaves at the end of its window and covers the target distance."""
        return self.window_end + cruise_minutes(self.target_m, cruise_speeds_kmh[self.mode])

    def to_block(self) -> str:
        return "\n".join([
            f"WINDOW: {format_clock(self.window_start)}-{format_clock(self.window_end)}",
            f"PURPOSE: {self.purpose}",
            f"CATEGORY: {self.category}",
            f"DISTANCE_M: {self.d_lo}-{self.d_hi}",
            f"MODE: {self.mode}",
        ])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "window_start": self.window_start,
            "window_end": self.window_end,
            "purpose": self.purpose,
            "category": self.category,
            "distance_range": [self.d_lo, self.d_hi],
            "mode": self.mode,
        }


@dataclass(frozen=True)
class DailyPlan:
    person_id: str
    date: dt.date
    day_type: str
    entries: Tuple[PlanEntry, ...] = field(default_factory=tuple)

    def render(self) -> str:
        if not self.entries:
            return "No trips planned."
        return "\n".join(
            f"{i}. {format_clock(e.window_start)}-{format_clock(e.window_end)} {e.purpose} "
            f"({e.category}, {e.d_lo}-{e.d_hi} m, {e.mode})"
            for i, e in enumerate(self.entries, start=1)
        )

    def to_block(self) -> str:
        if not self.entries:
            return "TRIPS: 0"
        return "\n\n".join(e.to_block() for e in self.entries)


@dataclass(frozen=True)
class ActivityDecision:
    depart_time: int
    purpose: str
    category: str
    d_lo: int
    d_hi: int
    mode: str
    rationale: str = ""

    @property
    def target_m(self) -> float:
        return (self.d_lo + self.d_hi) / 2.0

    def to_block(self) -> str:
        return "\n".join([
            f"PURPOSE: {self.purpose}",
            f"CATEGORY: {self.category}",
            f"DEPART: {format_clock(self.depart_time)}",
            f"DISTANCE_M: {self.d_lo}-{self.d_hi}",
            f"MODE: {self.mode}",
        ])


@dataclass
class CommittedStep:
    decision: ActivityDecision
    arrive_time: int
    distance_m: float
    poi_id: Optional[int]
    source: str  # "model" or "fallback"

    def render(self) -> str:
        d = self.decision
        return (f"{format_clock(d.depart_time)}-{format_clock(self.arrive_time)} {d.purpose} "
                f"({d.category}, {self.distance_m:.0f} m, {d.mode})")


def render_schedule(steps: List[CommittedStep]) -> str:
    if not steps:
        return "Nothing yet; the person is at home."
    return "\n".join(f"{i}. {s.render()}" for i, s in enumerate(steps, start=1))
