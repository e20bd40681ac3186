# services/synth_service.py
"""
Synthetic survey generation from archetype templates. Stands in for private
survey microdata: every person is drawn from a counter-based stream keyed by
(rng_seed, person index), so output depends on the spec alone.
"""
import datetime as dt
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.errors import AnchorFailure, ConfigError, InvalidSpec
from core.managers.config_manager import read_document
from core.models.dataset import Dataset
from core.models.diary import MINUTES_PER_DAY, TrajectoryPoint, TravelDiary, day_type_of
from core.models.geo import GeoPoint, destination_point, haversine_m
from core.models.plan import cruise_minutes
from core.models.profile import IndividualProfile
from core.rng import choice_index, derive_rng
from core.vocabulary import (DEFAULT_CRUISE_SPEEDS_KMH, DEFAULT_SPEED_CAPS_KMH, MODES, PROFILE_DIMENSIONS, PURPOSE_CATEGORIES, PURPOSES,
                             SURVEY_MARGINALS, TripPurpose, is_member)
from event_bus import EventBus
from services.spatial_anchor_service import SpatialAnchor

logger = logging.getLogger(__name__)

WEIGHT_TOLERANCE = 1e-9
MIN_TRIP_M = 50.0
MAX_TRIP_M = 90000.0


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Area(_Block):
    lat: float = Field(ge=-90.0, le=90.0)
    lon: float = Field(ge=-180.0, le=180.0)
    radius_m: float = Field(0.0, ge=0.0)


class FirstDeparture(_Block):
    minutes: List[int]
    weights: List[float]
    jitter_min: int = Field(0, ge=0)


class DistanceTemplate(_Block):
    """Either a fixed distance or a lognormal around a median."""
    fixed_m: Optional[float] = Field(None, ge=0.0)
    median_m: Optional[float] = Field(None, gt=0.0)
    sigma: float = Field(0.5, ge=0.0)

    @model_validator(mode="after")
    def _one_form(self) -> "DistanceTemplate":
        if (self.fixed_m is None) == (self.median_m is None):
            raise ValueError("give exactly one of fixed_m or median_m")
        return self


class ModeBand(_Block):
    up_to_m: Optional[float] = None
    weights: Dict[str, float]


class Behavior(_Block):
    first_departure: FirstDeparture
    trip_count: Dict[int, float]
    first_purpose: Dict[str, float]
    purpose_transitions: Dict[str, Dict[str, float]] = Field(default_factory=dict)
    distances: Dict[str, DistanceTemplate] = Field(default_factory=dict)
    distance_default: DistanceTemplate = Field(default_factory=lambda: DistanceTemplate(median_m=3000.0))
    mode_bands: List[ModeBand]
    dwell_min: Dict[str, Tuple[int, int]] = Field(default_factory=dict)
    dwell_default: Tuple[int, int] = (30, 120)
    return_home: bool = True


class Archetype(_Block):
    name: str
    weight: float = Field(ge=0.0)
    attributes: Dict[str, Any] = Field(default_factory=dict)
    home_area: Area
    work_area: Optional[Area] = None
    behavior: Behavior
    weekend: Optional[Behavior] = None


class SynthSpec(_Block):
    person_count: int = Field(ge=1)
    rng_seed: int = Field(ge=0)
    start_date: dt.date = dt.date(2024, 3, 4)
    days: int = Field(1, ge=1)
    anchor_to_network: bool = False
    detour_factor: float = Field(1.3, ge=1.0)
    cruise_speeds_kmh: Dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_CRUISE_SPEEDS_KMH))
    archetypes: List[Archetype]


def _check_weights(weights: Dict[Any, float] | List[float], what: str):
    values = list(weights.values()) if isinstance(weights, dict) else list(weights)
    if not values:
        raise InvalidSpec(f"{what}: empty distribution")
    if any(v < 0 for v in values):
        raise InvalidSpec(f"{what}: negative weight")
    if abs(sum(values) - 1.0) > WEIGHT_TOLERANCE:
        raise InvalidSpec(f"{what}: weights sum to {sum(values)!r}, not 1")


def _check_vocab(values, allowed, what: str):
    unknown = [v for v in values if v not in allowed]
    if unknown:
        raise InvalidSpec(f"{what}: unknown values {unknown}")


def check_spec(spec: SynthSpec):
    """Raises InvalidSpec unless every distribution is a proper one over known vocabulary."""
    if not spec.archetypes:
        raise InvalidSpec("at least one archetype is required")
    _check_weights([a.weight for a in spec.archetypes], "archetype weights")
    _check_vocab(spec.cruise_speeds_kmh, MODES, "cruise_speeds_kmh")
    _check_vocab(MODES, spec.cruise_speeds_kmh, "cruise_speeds_kmh coverage")
    too_fast = {m: v for m, v in spec.cruise_speeds_kmh.items() if not 0 < v <= DEFAULT_SPEED_CAPS_KMH[m]}
    if too_fast:
        raise InvalidSpec(f"cruise_speeds_kmh must be positive and within the speed caps: {too_fast}")
    for arch in spec.archetypes:
        where = f"archetype '{arch.name}'"
        for dim, value in arch.attributes.items():
            if dim not in PROFILE_DIMENSIONS:
                raise InvalidSpec(f"{where}: unknown attribute '{dim}'")
            options = value if isinstance(value, dict) else {value: 1.0}
            if dim == "owns_car":
                options = {_as_bool(k): w for k, w in options.items()}
            for option in options:
                if not is_member(dim, option):
                    raise InvalidSpec(f"{where}: '{option}' is not a valid {dim}")
            _check_weights(options, f"{where} attribute {dim}")
        for label, behavior in (("behavior", arch.behavior), ("weekend", arch.weekend)):
            if behavior is None:
                continue
            w = f"{where} {label}"
            fd = behavior.first_departure
            if len(fd.minutes) != len(fd.weights):
                raise InvalidSpec(f"{w}: first_departure minutes and weights differ in length")
            if any(not 0 <= m < MINUTES_PER_DAY for m in fd.minutes):
                raise InvalidSpec(f"{w}: first_departure minutes outside the day")
            _check_weights(fd.weights, f"{w} first_departure")
            if any(k < 0 for k in behavior.trip_count):
                raise InvalidSpec(f"{w}: negative trip count")
            _check_weights(behavior.trip_count, f"{w} trip_count")
            _check_vocab(behavior.first_purpose, PURPOSES, f"{w} first_purpose")
            _check_weights(behavior.first_purpose, f"{w} first_purpose")
            for source, row in behavior.purpose_transitions.items():
                _check_vocab([source], PURPOSES, f"{w} purpose_transitions")
                _check_vocab(row, PURPOSES, f"{w} purpose_transitions[{source}]")
                _check_weights(row, f"{w} purpose_transitions[{source}]")
            _check_vocab(behavior.distances, PURPOSES, f"{w} distances")
            _check_vocab(behavior.dwell_min, PURPOSES, f"{w} dwell_min")
            for lo, hi in list(behavior.dwell_min.values()) + [behavior.dwell_default]:
                if not 0 <= lo <= hi:
                    raise InvalidSpec(f"{w}: dwell range ({lo}, {hi}) is invalid")
            if not behavior.mode_bands or behavior.mode_bands[-1].up_to_m is not None:
                raise InvalidSpec(f"{w}: mode_bands must end with an open band (no up_to_m)")
            bounds = [b.up_to_m for b in behavior.mode_bands[:-1]]
            if any(b is None for b in bounds) or bounds != sorted(bounds):
                raise InvalidSpec(f"{w}: mode_bands must be in increasing up_to_m order")
            for band in behavior.mode_bands:
                _check_vocab(band.weights, MODES, f"{w} mode_bands")
                _check_weights(band.weights, f"{w} mode_bands")


def _as_bool(value: Any) -> Any:
    if isinstance(value, str) and value.lower() in ("true", "false", "yes", "no"):
        return value.lower() in ("true", "yes")
    return value


def load_synth_spec(path: Path) -> SynthSpec:
    document = read_document(Path(path))
    try:
        spec = SynthSpec.model_validate(document)
    except ValidationError as e:
        raise InvalidSpec(str(e))
    check_spec(spec)
    return spec


def apportion(total: int, weights: List[float]) -> List[int]:
    """Largest-remainder split of `total` by weights; remainder ties go to the earlier entry."""
    quotas = [total * w for w in weights]
    counts = [math.floor(q) for q in quotas]
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: total - sum(counts)]:
        counts[i] += 1
    return counts


def _weighted(rng: np.random.Generator, options: Dict[Any, float]) -> Any:
    keys = list(options.keys())
    return keys[choice_index(rng, [options[k] for k in keys])]


def _point_in_area(rng: np.random.Generator, area: Area) -> GeoPoint:
    center = GeoPoint(area.lat, area.lon)
    if area.radius_m <= 0:
        return center
    radius = area.radius_m * math.sqrt(rng.random())
    return destination_point(center, rng.uniform(0.0, 2.0 * math.pi), radius)


class SynthService:
    """Builds synthetic datasets from a SynthSpec."""

    def __init__(self, event_bus: EventBus):
        self.event_bus = event_bus
        logger.info("SynthService initialized.")

    def synth_dataset(self, spec: SynthSpec, anchor: Optional[SpatialAnchor] = None) -> Dataset:
        check_spec(spec)
        if spec.anchor_to_network and anchor is None:
            raise ConfigError("synth spec asks for network anchoring but no network is configured")
        network = anchor if spec.anchor_to_network else None

        counts = apportion(spec.person_count, [a.weight for a in spec.archetypes])
        profiles: List[IndividualProfile] = []
        diaries: List[TravelDiary] = []
        empty_days: List[Tuple[str, dt.date]] = []
        index = 0
        for archetype, count in zip(spec.archetypes, counts):
            for _ in range(count):
                rng = derive_rng(spec.rng_seed, "synth", index)
                profile = self._sample_profile(rng, archetype, f"P{index + 1:06d}")
                profiles.append(profile)
                for day in range(spec.days):
                    date = spec.start_date + dt.timedelta(days=day)
                    behavior = archetype.behavior
                    if day_type_of(date) == "weekend" and archetype.weekend is not None:
                        behavior = archetype.weekend
                    points = self._sample_day(rng, spec, behavior, profile, network)
                    if points:
                        diaries.append(TravelDiary(profile.person_id, date, tuple(points), origin=profile.home))
                    else:
                        empty_days.append((profile.person_id, date))
                index += 1

        dataset = Dataset.build(profiles, diaries, empty_days)
        self.log("info", f"Synthesized {len(profiles)} persons across {len(spec.archetypes)} archetypes: "
                         f"{len(diaries)} diaries, {len(empty_days)} no-trip days, {dataset.trip_count} trips.")
        return dataset

    def _sample_profile(self, rng: np.random.Generator, archetype: Archetype, person_id: str) -> IndividualProfile:
        values: Dict[str, Any] = {}
        for dim in PROFILE_DIMENSIONS:
            given = archetype.attributes.get(dim)
            if given is None:
                options = SURVEY_MARGINALS[dim]
                total = sum(options.values())
                options = {k: v / total for k, v in options.items()}
            elif isinstance(given, dict):
                options = given
            else:
                options = {given: 1.0}
            value = _weighted(rng, options)
            values[dim] = bool(_as_bool(value)) if dim == "owns_car" else value
        home = _point_in_area(rng, archetype.home_area)
        work = _point_in_area(rng, archetype.work_area) if archetype.work_area else None
        return IndividualProfile(person_id=person_id, home=home, work=work, **values)

    def _sample_distance(self, rng: np.random.Generator, behavior: Behavior, purpose: str) -> float:
        template = behavior.distances.get(purpose, behavior.distance_default)
        if template.fixed_m is not None:
            return template.fixed_m
        value = template.median_m * math.exp(template.sigma * rng.standard_normal())
        return min(max(value, MIN_TRIP_M), MAX_TRIP_M)

    @staticmethod
    def _sample_mode(rng: np.random.Generator, behavior: Behavior, distance_m: float) -> str:
        for band in behavior.mode_bands:
            if band.up_to_m is None or distance_m < band.up_to_m:
                return _weighted(rng, band.weights)
        return _weighted(rng, behavior.mode_bands[-1].weights)

    def _purposes(self, rng: np.random.Generator, behavior: Behavior, count: int) -> List[str]:
        purposes = [_weighted(rng, behavior.first_purpose)]
        for _ in range(count - 1):
            row = behavior.purpose_transitions.get(purposes[-1], behavior.first_purpose)
            purposes.append(_weighted(rng, row))
        if behavior.return_home and count >= 2:
            purposes[-1] = TripPurpose.RETURNING_HOME.value
        return purposes

    def _sample_day(self, rng: np.random.Generator, spec: SynthSpec, behavior: Behavior,
                    profile: IndividualProfile, network: Optional[SpatialAnchor]) -> List[TrajectoryPoint]:
        count = int(_weighted(rng, behavior.trip_count))
        if count <= 0:
            return []
        fd = behavior.first_departure
        depart = fd.minutes[choice_index(rng, fd.weights)]
        if fd.jitter_min:
            depart += int(rng.integers(-fd.jitter_min, fd.jitter_min + 1))
        depart = min(max(depart, 0), MINUTES_PER_DAY - 1)

        points: List[TrajectoryPoint] = []
        here = profile.home
        for purpose in self._purposes(rng, behavior, count):
            target = self._sample_distance(rng, behavior, purpose)
            mode = self._sample_mode(rng, behavior, target)
            categories = PURPOSE_CATEGORIES[purpose]
            category = categories[int(rng.integers(len(categories)))] if len(categories) > 1 else categories[0]
            bearing = rng.uniform(0.0, 2.0 * math.pi)
            poi_id = None
            try:
                if purpose == TripPurpose.RETURNING_HOME.value:
                    if network is not None:
                        distance = network.route_to(here, profile.home).network_distance_m
                    else:
                        distance = haversine_m(here, profile.home) * spec.detour_factor
                    location = profile.home
                elif network is not None:
                    result = network.anchor(here, category, target)
                    location, distance, poi_id = result.location, result.network_distance_m, result.poi_id
                else:
                    location, distance = destination_point(here, bearing, target), target
            except AnchorFailure as e:
                logger.debug(f"[SynthService] {profile.person_id}: trip dropped ({e.message})")
                continue

            duration = cruise_minutes(distance, spec.cruise_speeds_kmh[mode])
            arrive = depart + duration
            if arrive >= MINUTES_PER_DAY:
                break
            points.append(TrajectoryPoint(arrive, location, purpose, float(distance), mode, duration,
                                          poi_id=poi_id, category=category if network is not None else None))
            here = location
            lo, hi = behavior.dwell_min.get(purpose, behavior.dwell_default)
            depart = arrive + int(rng.integers(lo, hi + 1))
            if depart >= MINUTES_PER_DAY:
                break
        return points

    def log(self, level: str, message: str):
        getattr(logger, level, logger.info)(f"[SynthService] {message}")
        self.event_bus.emit("log_message_received", "SynthService", level, message)
