# tests/test_validation.py
import dataclasses

import pytest

from conftest import MONDAY, commute_diary, make_point, make_profile
from core.models.diary import TravelDiary, parse_clock
from core.models.geo import GeoPoint
from core.validation import validate_diary, validate_profile
from core.vocabulary import DEFAULT_SPEED_CAPS_KMH


def test_valid_profile_has_no_violations():
    assert validate_profile(make_profile()).ok


def test_profile_vocabulary_and_coordinates_are_checked():
    profile = make_profile(age_band="17", home=GeoPoint(95.0, 10.0), work=GeoPoint(10.0, -181.0))
    result = validate_profile(profile)
    fields = {v.field for v in result.violations}
    assert fields == {"age_band", "home", "work"}


def test_blank_person_id_is_rejected():
    result = validate_profile(make_profile("  "))
    assert [v.field for v in result.violations] == ["person_id"]


def test_valid_diary(binning):
    assert validate_diary(commute_diary("P1")).ok


def test_empty_diary_is_invalid():
    result = validate_diary(TravelDiary("P1", MONDAY, ()))
    assert not result.ok
    assert result.violations[0].field == "points"


def test_non_monotone_arrivals():
    diary = TravelDiary("P1", MONDAY, (make_point(600), make_point(600)))
    messages = validate_diary(diary).messages()
    assert any("non-monotone" in m for m in messages)


def test_overlapping_legs():
    # second leg departs at 590, before the first arrival at 600
    diary = TravelDiary("P1", MONDAY, (make_point(600), make_point(610, duration_min=20)))
    assert any("overlaps" in m for m in validate_diary(diary).messages())


@pytest.mark.parametrize("mode, distance_m, duration_min, ok", [
    ("Walking", 1000.0, 10, True),      # 6 km/h
    ("Walking", 1200.0, 10, False),     # 7.2 km/h
    ("Walking", 7000.0, 60, True),      # exactly at the cap
    ("Electric Bike/Bicycle", 5000.0, 10, False),
    ("Driving", 30000.0, 20, True),
])
def test_speed_caps(mode, distance_m, duration_min, ok):
    diary = TravelDiary("P1", MONDAY, (make_point(600, distance_m, mode, duration_min),))
    assert validate_diary(diary).ok is ok


def test_arrival_must_fall_inside_the_day():
    diary = TravelDiary("P1", MONDAY, (make_point(1440),))
    assert any("arrive_time" in v.field for v in validate_diary(diary).violations)


def test_leg_cannot_start_before_midnight():
    diary = TravelDiary("P1", MONDAY, (make_point(10, duration_min=20),))
    assert any("before midnight" in m for m in validate_diary(diary).messages())


def test_unknown_purpose_and_mode():
    point = dataclasses.replace(make_point(600), purpose="Flying", mode="Rocket")
    fields = {v.field for v in validate_diary(TravelDiary("P1", MONDAY, (point,))).violations}
    assert {"points[0].purpose", "points[0].mode"} <= fields


def test_custom_caps_must_cover_every_mode():
    with pytest.raises(ValueError):
        validate_diary(commute_diary("P1"), {"Walking": 7.0})


def test_default_caps():
    assert DEFAULT_SPEED_CAPS_KMH["Walking"] == 7
    assert DEFAULT_SPEED_CAPS_KMH["Bus and Subway"] == 60


@pytest.mark.parametrize("text, minutes", [("00:00", 0), ("08:30", 510), ("23:59", 1439), ("7:05", 425)])
def test_parse_clock(text, minutes):
    assert parse_clock(text) == minutes


@pytest.mark.parametrize("text", ["24:00", "12:60", "noon", ""])
def test_parse_clock_rejects(text):
    with pytest.raises(ValueError):
        parse_clock(text)
