# core/models/survey.py
"""
Row schemas for the two survey CSV files. Column names are the snake_cased
survey field names; validation errors become MalformedRow reasons upstream.
"""
import datetime as dt
from dataclasses import dataclass
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.models.diary import format_clock, parse_clock
from core.models.geo import GeoPoint
from core.models.profile import IndividualProfile
from core.vocabulary import AgeBand, Education, Gender, Housing, Income, Occupation, TravelMode, TripPurpose

PROFILE_COLUMNS = (
    "person_id", "age", "gender", "occupation", "income", "education", "own_a_car", "living_situation",
    "primary_mode_of_transportation", "residential_lat", "residential_lon", "company_lat", "company_lon",
)

TRIP_COLUMNS = (
    "person_id", "travel_date", "origin_lat", "origin_lon", "destination_lat", "destination_lon",
    "travel_start_time", "travel_end_time", "travel_duration", "travel_distance", "travel_mode", "travel_purpose",
)

DURATION_TOLERANCE_MIN = 1
_YES = {"yes", "true", "1", "y"}
_NO = {"no", "false", "0", "n"}


def _blank_to_none(value: Any) -> Any:
    if isinstance(value, str) and not value.strip():
        return None
    return value


def describe_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        where = ".".join(str(p) for p in item["loc"]) or "row"
        parts.append(f"{where}: {item['msg']}")
    return "; ".join(parts)


class _Row(BaseModel):
    model_config = ConfigDict(extra="ignore", str_strip_whitespace=True)


class ProfileRow(_Row):
    person_id: str = Field(min_length=1)
    age: AgeBand
    gender: Gender
    occupation: Occupation
    income: Income
    education: Education
    own_a_car: bool
    living_situation: Housing
    primary_mode_of_transportation: TravelMode
    residential_lat: float = Field(ge=-90.0, le=90.0)
    residential_lon: float = Field(ge=-180.0, le=180.0)
    company_lat: Optional[float] = Field(None, ge=-90.0, le=90.0)
    company_lon: Optional[float] = Field(None, ge=-180.0, le=180.0)

    @field_validator("own_a_car", mode="before")
    @classmethod
    def _yes_no(cls, value: Any) -> Any:
        if isinstance(value, str):
            lowered = value.strip().lower()
            if lowered in _YES:
                return True
            if lowered in _NO:
                return False
            raise ValueError(f"expected Yes or No, got '{value}'")
        return value

    @field_validator("company_lat", "company_lon", mode="before")
    @classmethod
    def _optional(cls, value: Any) -> Any:
        return _blank_to_none(value)

    @model_validator(mode="after")
    def _work_pair(self) -> "ProfileRow":
        if (self.company_lat is None) != (self.company_lon is None):
            raise ValueError("company_lat and company_lon must both be given or both be empty")
        return self

    def to_profile(self) -> IndividualProfile:
        work = GeoPoint(self.company_lat, self.company_lon) if self.company_lat is not None else None
        return IndividualProfile(
            person_id=self.person_id,
            age_band=self.age.value,
            gender=self.gender.value,
            occupation=self.occupation.value,
            income=self.income.value,
            education=self.education.value,
            owns_car=self.own_a_car,
            housing=self.living_situation.value,
            primary_mode=self.primary_mode_of_transportation.value,
            home=GeoPoint(self.residential_lat, self.residential_lon),
            work=work,
        )


def profile_to_row(profile: IndividualProfile) -> Dict[str, Any]:
    return {
        "person_id": profile.person_id,
        "age": profile.age_band,
        "gender": profile.gender,
        "occupation": profile.occupation,
        "income": profile.income,
        "education": profile.education,
        "own_a_car": "Yes" if profile.owns_car else "No",
        "living_situation": profile.housing,
        "primary_mode_of_transportation": profile.primary_mode,
        "residential_lat": repr(profile.home.lat),
        "residential_lon": repr(profile.home.lon),
        "company_lat": repr(profile.work.lat) if profile.work else "",
        "company_lon": repr(profile.work.lon) if profile.work else "",
    }


@dataclass(frozen=True)
class TripRecord:
    person_id: str
    travel_date: dt.date
    origin: GeoPoint
    destination: GeoPoint
    start_time: int
    end_time: int
    duration_min: int
    distance_m: float
    mode: str
    purpose: str
    line: int = 0


class TripRow(_Row):
    person_id: str = Field(min_length=1)
    travel_date: dt.date
    origin_lat: float = Field(ge=-90.0, le=90.0)
    origin_lon: float = Field(ge=-180.0, le=180.0)
    destination_lat: float = Field(ge=-90.0, le=90.0)
    destination_lon: float = Field(ge=-180.0, le=180.0)
    travel_start_time: int
    travel_end_time: int
    travel_duration: int = Field(gt=0)
    travel_distance: float = Field(ge=0.0)
    travel_mode: TravelMode
    travel_purpose: TripPurpose

    @field_validator("travel_start_time", "travel_end_time", mode="before")
    @classmethod
    def _clock(cls, value: Any) -> Any:
        if isinstance(value, str):
            return parse_clock(value)
        return value

    @field_validator("travel_duration", mode="before")
    @classmethod
    def _minutes(cls, value: Any) -> Any:
        if isinstance(value, str) and value.strip():
            number = float(value)
            if not number.is_integer():
                raise ValueError(f"duration must be whole minutes, got '{value}'")
            return int(number)
        return value

    @model_validator(mode="after")
    def _same_day(self) -> "TripRow":
        if self.travel_end_time <= self.travel_start_time:
            raise ValueError("trip must end after it starts on the same day (overnight trips are rejected)")
        elapsed = self.travel_end_time - self.travel_start_time
        if abs(self.travel_duration - elapsed) > DURATION_TOLERANCE_MIN:
            raise ValueError(f"travel_duration {self.travel_duration} differs from end - start = {elapsed} "
                             f"by more than {DURATION_TOLERANCE_MIN} min")
        return self

    def to_record(self, line: int) -> TripRecord:
        return TripRecord(
            person_id=self.person_id,
            travel_date=self.travel_date,
            origin=GeoPoint(self.origin_lat, self.origin_lon),
            destination=GeoPoint(self.destination_lat, self.destination_lon),
            start_time=self.travel_start_time,
            end_time=self.travel_end_time,
            duration_min=self.travel_duration,
            distance_m=self.travel_distance,
            mode=self.travel_mode.value,
            purpose=self.travel_purpose.value,
            line=line,
        )


def trip_to_row(record: TripRecord) -> Dict[str, Any]:
    return {
        "person_id": record.person_id,
        "travel_date": record.travel_date.isoformat(),
        "origin_lat": repr(record.origin.lat),
        "origin_lon": repr(record.origin.lon),
        "destination_lat": repr(record.destination.lat),
        "destination_lon": repr(record.destination.lon),
        "travel_start_time": format_clock(record.start_time),
        "travel_end_time": format_clock(record.end_time),
        "travel_duration": str(record.duration_min),
        "travel_distance": repr(record.distance_m),
        "travel_mode": record.mode,
        "travel_purpose": record.purpose,
    }
