# tests/test_synth.py
import copy
from pathlib import Path

import pytest

from core.errors import ConfigError, InvalidSpec
from core.validation import validate_diary, validate_profile
from core.vocabulary import DEFAULT_CRUISE_SPEEDS_KMH
from services.synth_service import SynthService, SynthSpec, apportion, check_spec, load_synth_spec

DEMO_SPEC = Path(__file__).resolve().parent.parent / "config" / "demo_synth.toml"

BEHAVIOR = {
    "first_departure": {"minutes": [480], "weights": [1.0], "jitter_min": 15},
    "trip_count": {2: 1.0},
    "first_purpose": {"Commuting to Work": 1.0},
    "distances": {"Commuting to Work": {"median_m": 5000.0, "sigma": 0.3}},
    "mode_bands": [
        {"up_to_m": 1500.0, "weights": {"Walking": 1.0}},
        {"weights": {"Bus and Subway": 1.0}},
    ],
    "dwell_default": [300, 540],
}


def spec_dict(**overrides) -> dict:
    data = {
        "person_count": 30,
        "rng_seed": 5,
        "days": 2,
        "archetypes": [
            {
                "name": "commuter",
                "weight": 0.7,
                "attributes": {"occupation": "Skilled Workers", "age_band": {"26-30": 0.5, "31-35": 0.5}},
                "home_area": {"lat": 22.55, "lon": 114.05, "radius_m": 600.0},
                "behavior": copy.deepcopy(BEHAVIOR),
            },
            {
                "name": "stay-at-home",
                "weight": 0.3,
                "attributes": {"occupation": "Retired/Unemployed", "owns_car": False},
                "home_area": {"lat": 22.56, "lon": 114.04},
                "behavior": dict(copy.deepcopy(BEHAVIOR), trip_count={0: 1.0}),
            },
        ],
    }
    data.update(overrides)
    return data


@pytest.fixture
def service(event_bus):
    return SynthService(event_bus)


def test_apportion_uses_largest_remainders():
    assert apportion(10, [0.5, 0.25, 0.25]) == [5, 3, 2]
    assert apportion(7, [1 / 3, 1 / 3, 1 / 3]) == [3, 2, 2]
    assert sum(apportion(101, [0.1, 0.2, 0.7])) == 101


def test_same_spec_gives_the_same_dataset(service):
    spec = SynthSpec.model_validate(spec_dict())
    first = service.synth_dataset(spec)
    second = service.synth_dataset(SynthSpec.model_validate(spec_dict()))
    assert first == second


def test_archetypes_shape_profiles_and_days(service):
    dataset = service.synth_dataset(SynthSpec.model_validate(spec_dict()))
    assert len(dataset.profiles) == 30

    commuters = [p for p in dataset.profiles.values() if p.occupation == "Skilled Workers"]
    retirees = [p for p in dataset.profiles.values() if p.occupation == "Retired/Unemployed"]
    assert len(commuters) == 21 and len(retirees) == 9
    assert {p.age_band for p in commuters} <= {"26-30", "31-35"}
    assert all(not p.owns_car for p in retirees)
    assert all(validate_profile(p).ok for p in dataset.profiles.values())

    # stay-at-home persons never travel; their days are recorded as empty
    retiree_ids = {p.person_id for p in retirees}
    assert not any(d.person_id in retiree_ids for d in dataset.diaries)
    assert len(dataset.empty_days) == 9 * 2
    assert all(validate_diary(d).ok for d in dataset.diaries)
    assert all(d.points[0].purpose == "Commuting to Work" for d in dataset.diaries)
    assert all(d.points[-1].purpose == "Returning Home" for d in dataset.diaries)


def test_a_different_seed_changes_the_output(service):
    a = service.synth_dataset(SynthSpec.model_validate(spec_dict()))
    b = service.synth_dataset(SynthSpec.model_validate(spec_dict(rng_seed=6)))
    assert a.diaries != b.diaries


@pytest.mark.parametrize("mutate, message", [
    (lambda d: d["archetypes"][0].update(weight=0.6), "archetype weights"),
    (lambda d: d["archetypes"][0]["behavior"]["first_purpose"].update({"Teleporting": 0.0}), "unknown values"),
    (lambda d: d["archetypes"][0]["behavior"]["mode_bands"].pop(), "open band"),
    (lambda d: d["archetypes"][0]["attributes"].update(income="Billionaire"), "not a valid income"),
    (lambda d: d["archetypes"][0]["attributes"].update(shoe_size="42"), "unknown attribute"),
    (lambda d: d.update(cruise_speeds_kmh={**DEFAULT_CRUISE_SPEEDS_KMH, "Walking": 12.0}), "within the speed caps"),
])
def test_invalid_specs(mutate, message):
    data = spec_dict()
    mutate(data)
    with pytest.raises(InvalidSpec) as info:
        check_spec(SynthSpec.model_validate(data))
    assert message in info.value.message


def test_network_anchoring_requires_a_network(service):
    spec = SynthSpec.model_validate(spec_dict(anchor_to_network=True))
    with pytest.raises(ConfigError):
        service.synth_dataset(spec)


def test_anchored_points_land_on_pois(service, grid_anchor):
    data = spec_dict(anchor_to_network=True, person_count=10)
    for archetype in data["archetypes"]:
        archetype["behavior"]["distances"] = {"Commuting to Work": {"fixed_m": 900.0}}
    dataset = service.synth_dataset(SynthSpec.model_validate(data), grid_anchor)

    assert dataset.diaries
    for diary in dataset.diaries:
        first = diary.points[0]
        assert first.poi_id in grid_anchor.pois.pois
        assert first.category == "workplace"
        assert grid_anchor.pois.pois[first.poi_id].location == first.location
        assert validate_diary(diary).ok


def test_bundled_demo_spec_loads(service):
    spec = load_synth_spec(DEMO_SPEC)
    assert len(spec.archetypes) == 3
    assert spec.anchor_to_network


def test_unreadable_spec_raises_invalid_spec(tmp_path):
    path = tmp_path / "spec.toml"
    path.write_text('person_count = 0\nrng_seed = 1\narchetypes = []\n', encoding="utf-8")
    with pytest.raises(InvalidSpec):
        load_synth_spec(path)
