# services/survey_ingest_service.py
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Type

import pandas as pd
from pydantic import BaseModel, ValidationError

from core.errors import DuplicateProfile, EmptySource, MalformedRow, MobForgeError, OverlappingTrips, UnknownPersonId
from core.models.dataset import Dataset
from core.models.diary import TrajectoryPoint, TravelDiary
from core.models.survey import (PROFILE_COLUMNS, TRIP_COLUMNS, ProfileRow, TripRecord, TripRow,
                                describe_validation_error)
from core.validation import validate_diary
from core.vocabulary import DEFAULT_SPEED_CAPS_KMH
from event_bus import EventBus

logger = logging.getLogger(__name__)

# Header is line 1, so data row i sits on line i + 2.
HEADER_LINES = 1


@dataclass
class IngestReport:
    profiles_loaded: int = 0
    trips_loaded: int = 0
    skipped: List[Dict[str, Any]] = field(default_factory=list)

    def skip(self, error: MobForgeError, source: str):
        record = error.to_record()
        record["source"] = source
        self.skipped.append(record)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "profiles_loaded": self.profiles_loaded,
            "trips_loaded": self.trips_loaded,
            "skipped_count": len(self.skipped),
            "skipped": self.skipped,
        }


def read_rows(path: Path, required: Sequence[str]) -> List[Tuple[int, Dict[str, str]]]:
    """Reads a CSV as strings. Returns (line number, row) pairs."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise EmptySource(str(path))
    if frame.empty:
        raise EmptySource(str(path))
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise MalformedRow(1, f"missing columns {missing}", source=str(path))
    return [(index + HEADER_LINES + 1, row) for index, row in enumerate(frame.to_dict(orient="records"))]


def _parse(model: Type[BaseModel], row: Dict[str, str], line: int, source: str) -> BaseModel:
    try:
        return model.model_validate(row)
    except ValidationError as e:
        raise MalformedRow(line, describe_validation_error(e), source=source)


def build_diaries(trips: Iterable[TripRecord], speed_caps: Mapping[str, float] = DEFAULT_SPEED_CAPS_KMH,
                  strict: bool = True, report: Optional[IngestReport] = None,
                  source: str = "trips") -> List[TravelDiary]:
    """
    Groups trips by (person_id, travel_date), sorts by start time and turns
    each trip into one point arriving at its end time. Sorted trips that
    overlap raise OverlappingTrips; in lenient mode the later trip is dropped.
    """
    grouped: Dict[Tuple[str, Any], List[TripRecord]] = defaultdict(list)
    for trip in trips:
        grouped[(trip.person_id, trip.travel_date)].append(trip)

    diaries: List[TravelDiary] = []
    for (person_id, date), day_trips in sorted(grouped.items(), key=lambda item: (item[0][0], item[0][1])):
        day_trips.sort(key=lambda t: (t.start_time, t.end_time, t.line))
        kept: List[TripRecord] = []
        for trip in day_trips:
            if kept and trip.start_time < kept[-1].end_time:
                error = OverlappingTrips(person_id, date.isoformat())
                if strict:
                    raise error
                if report is not None:
                    error.context["line"] = trip.line
                    report.skip(error, source)
                continue
            kept.append(trip)

        diary = _diary_from(person_id, date, kept)
        result = validate_diary(diary, speed_caps)
        while not result.ok and kept:
            # Point-level violations are named "points[i].<field>".
            first = result.violations[0]
            index = int(first.field.split("]")[0].split("[")[1]) if first.field.startswith("points[") else 0
            bad = kept[index]
            error = MalformedRow(bad.line, first.message, source=source)
            if strict:
                raise error
            if report is not None:
                report.skip(error, source)
            kept.pop(index)
            diary = _diary_from(person_id, date, kept)
            result = validate_diary(diary, speed_caps) if kept else result
        if kept:
            diaries.append(diary)
    return diaries


def _diary_from(person_id: str, date, trips: List[TripRecord]) -> TravelDiary:
    points = tuple(
        TrajectoryPoint(
            arrive_time=t.end_time,
            location=t.destination,
            purpose=t.purpose,
            distance_m=t.distance_m,
            mode=t.mode,
            duration_min=t.end_time - t.start_time,
        )
        for t in trips
    )
    origin = trips[0].origin if trips else None
    return TravelDiary(person_id=person_id, date=date, points=points, origin=origin)


class SurveyIngestService:
    """
    Loads the profiles and trips CSVs into a validated Dataset. Strict mode
    aborts on the first bad row; lenient mode skips and reports it.
    """

    def __init__(self, event_bus: EventBus, speed_caps: Mapping[str, float] = DEFAULT_SPEED_CAPS_KMH):
        self.event_bus = event_bus
        self.speed_caps = dict(speed_caps)
        self.last_report: Optional[IngestReport] = None
        logger.info("SurveyIngestService initialized.")

    def load_survey(self, profiles_source: Path, trips_source: Path, strict: bool = True) -> Dataset:
        report = IngestReport()
        profiles_name, trips_name = str(profiles_source), str(trips_source)

        profiles = {}
        for line, row in read_rows(Path(profiles_source), PROFILE_COLUMNS):
            try:
                profile = _parse(ProfileRow, row, line, profiles_name).to_profile()
                if profile.person_id in profiles:
                    raise DuplicateProfile(profile.person_id, line)
            except MobForgeError as e:
                if strict:
                    raise
                report.skip(e, profiles_name)
                continue
            profiles[profile.person_id] = profile
        report.profiles_loaded = len(profiles)

        trips: List[TripRecord] = []
        for line, row in read_rows(Path(trips_source), TRIP_COLUMNS):
            try:
                trip = _parse(TripRow, row, line, trips_name).to_record(line)
                if trip.person_id not in profiles:
                    raise UnknownPersonId(line, trip.person_id)
            except MobForgeError as e:
                if strict:
                    raise
                report.skip(e, trips_name)
                continue
            trips.append(trip)

        diaries = build_diaries(trips, self.speed_caps, strict=strict, report=report, source=trips_name)
        report.trips_loaded = sum(len(d.points) for d in diaries)
        self.last_report = report

        dataset = Dataset.build(profiles.values(), diaries)
        level = "warning" if report.skipped else "info"
        self.log(level, f"Loaded {report.profiles_loaded} profiles and {report.trips_loaded} trips "
                        f"into {len(diaries)} diaries; skipped {len(report.skipped)} rows.")
        return dataset

    def log(self, level: str, message: str):
        getattr(logger, level, logger.info)(f"[SurveyIngestService] {message}")
        self.event_bus.emit("log_message_received", "SurveyIngestService", level, message)
