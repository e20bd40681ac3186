# tests/conftest.py
import datetime as dt
from typing import List, Optional

import pytest

from core.binning import Binning
from core.llm_client import LLMGateway
from core.models.dataset import Dataset
from core.models.diary import TrajectoryPoint, TravelDiary
from core.models.geo import GeoPoint, destination_point
from core.models.profile import IndividualProfile
from core.vocabulary import DEFAULT_CRUISE_SPEEDS_KMH
from event_bus import EventBus
from providers import ReplayBackend, ReplaySampler, ScriptedBackend
from services.spatial_anchor_service import SpatialAnchorService

CENTRE = GeoPoint(22.55, 114.05)
MONDAY = dt.date(2024, 3, 4)
SATURDAY = dt.date(2024, 3, 9)
BANDS = (1000.0, 3000.0, 10000.0)


def make_profile(person_id: str = "P1", **overrides) -> IndividualProfile:
    values = dict(
        person_id=person_id,
        age_band="26-30",
        gender="Female",
        occupation="Professional and Technical Personnel",
        income="Medium",
        education="Bachelor's Degree",
        owns_car=False,
        housing="Rented House",
        primary_mode="Bus and Subway",
        home=CENTRE,
        work=None,
    )
    values.update(overrides)
    return IndividualProfile(**values)


def make_point(arrive_time: int, distance_m: float = 2000.0, mode: str = "Bus and Subway",
               duration_min: int = 20, purpose: str = "Commuting to Work",
               location: Optional[GeoPoint] = None) -> TrajectoryPoint:
    return TrajectoryPoint(arrive_time, location or CENTRE, purpose, distance_m, mode, duration_min)


def commute_diary(person_id: str, date: dt.date = MONDAY, depart: int = 480, distance_m: float = 6000.0,
                  home: GeoPoint = CENTRE) -> TravelDiary:
    """Home -> work -> home with fixed geometry, valid under the default speed caps."""
    work = destination_point(home, 0.7, distance_m)
    out_duration = 24
    back_depart = depart + out_duration + 540
    points = (
        TrajectoryPoint(depart + out_duration, work, "Commuting to Work", distance_m, "Bus and Subway", out_duration),
        TrajectoryPoint(back_depart + out_duration, home, "Returning Home", distance_m, "Bus and Subway",
                        out_duration),
    )
    return TravelDiary(person_id, date, points, origin=home)


def errand_diary(person_id: str, date: dt.date = MONDAY, depart: int = 900, distance_m: float = 800.0,
                 home: GeoPoint = CENTRE) -> TravelDiary:
    """Short walking errand in the afternoon."""
    shop = destination_point(home, 2.0, distance_m)
    duration = 12
    points = (
        TrajectoryPoint(depart + duration, shop, "Shopping", distance_m, "Walking", duration),
        TrajectoryPoint(depart + duration + 45 + duration, home, "Returning Home", distance_m, "Walking", duration),
    )
    return TravelDiary(person_id, date, points, origin=home)


def two_archetype_dataset(per_group: int = 40) -> Dataset:
    """Young commuters versus retirees running short errands; clearly separated behaviour."""
    profiles: List[IndividualProfile] = []
    diaries: List[TravelDiary] = []
    for i in range(per_group):
        pid = f"C{i:03d}"
        profiles.append(make_profile(pid, age_band="26-30", occupation="Professional and Technical Personnel"))
        diaries.append(commute_diary(pid, depart=450 + (i % 4) * 15, distance_m=5000.0 + 250 * (i % 5)))
    for i in range(per_group):
        pid = f"R{i:03d}"
        profiles.append(make_profile(pid, age_band=">51", occupation="Retired/Unemployed", income="Low",
                                     primary_mode="Walking"))
        diaries.append(errand_diary(pid, depart=840 + (i % 4) * 20, distance_m=600.0 + 50 * (i % 5)))
    return Dataset.build(profiles, diaries)


def three_archetype_dataset(per_group: int = 30) -> Dataset:
    """Adds late-morning students to the two archetypes; start-time peaks sit at least three hours apart."""
    base = two_archetype_dataset(per_group)
    profiles = list(base.profiles.values())
    diaries = list(base.diaries)
    for i in range(per_group):
        pid = f"S{i:03d}"
        profiles.append(make_profile(pid, age_band="18-25", occupation="Students"))
        diaries.append(commute_diary(pid, depart=660 + (i % 4) * 10, distance_m=2500.0 + 100 * (i % 5)))
    return Dataset.build(profiles, diaries)


@pytest.fixture
def event_bus() -> EventBus:
    return EventBus()


@pytest.fixture
def binning() -> Binning:
    return Binning()


@pytest.fixture
def sampler(binning) -> ReplaySampler:
    return ReplaySampler(binning, DEFAULT_CRUISE_SPEEDS_KMH, BANDS)


@pytest.fixture
def replay_gateway(sampler) -> LLMGateway:
    return LLMGateway(ReplayBackend(sampler, run_seed=7), cache_path=None, max_in_flight=4)


@pytest.fixture
def scripted_gateway_factory():
    """Builds a gateway over a ScriptedBackend from fixture records."""
    def build(records, strict: bool = True) -> LLMGateway:
        return LLMGateway(ScriptedBackend.from_records(records, strict=strict), cache_path=None)
    return build


@pytest.fixture
def archetype_dataset() -> Dataset:
    return two_archetype_dataset()


@pytest.fixture
def grid_anchor(event_bus):
    """12 x 12 grid at 250 m spacing around CENTRE, five POIs per category."""
    service = SpatialAnchorService(event_bus, snap_radius_m=500.0)
    return service.generate_grid_network(12, 12, 250.0, CENTRE, pois_per_category=5, seed=3)
