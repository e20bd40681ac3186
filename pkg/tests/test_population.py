# tests/test_population.py
import datetime as dt
import json

import pytest

from conftest import BANDS, two_archetype_dataset
from core.errors import EmptyCohort, UnknownDimension
from core.managers.config_manager import CohortConfig, GenerationConfig, HomeArea
from events import StageFinished, StageStarted
from services.cohort_service import CohortService
from services.population_service import PopulationService
from services.run_log_service import RUN_LOG_FILENAME, RunLogService

ATTRIBUTES = ("occupation", "age_band", "income", "gender", "owns_car", "education", "housing", "primary_mode")


def test_mirror_mode_targets_every_surveyed_day(event_bus):
    dataset = two_archetype_dataset(3)
    profiles, days = PopulationService(event_bus, run_seed=1).target(dataset, GenerationConfig())
    assert [p.person_id for p in profiles] == list(dataset.person_ids)
    assert days == sorted(d.key for d in dataset.diaries)


def test_sample_mode_is_seeded(event_bus):
    dataset = two_archetype_dataset(10)
    config = GenerationConfig(mode="sample", count=5, start_date="2024-03-09", days=2)
    first = PopulationService(event_bus, run_seed=4).target(dataset, config)
    second = PopulationService(event_bus, run_seed=4).target(dataset, config)

    assert first == second
    profiles, days = first
    assert [p.person_id for p in profiles] == ["G000001", "G000002", "G000003", "G000004", "G000005"]
    assert len(days) == 10
    assert {date for _, date in days} == {dt.date(2024, 3, 9), dt.date(2024, 3, 10)}


def test_filters_restrict_the_attribute_draws(event_bus):
    dataset = two_archetype_dataset(10)
    profiles = PopulationService(event_bus, run_seed=2).sample_profiles(
        dataset, 12, filters={"occupation": ["Retired/Unemployed"]})
    assert {p.occupation for p in profiles} == {"Retired/Unemployed"}
    assert {p.age_band for p in profiles} == {">51"}
    assert {p.income for p in profiles} == {"Low"}


def test_profiles_are_shared_across_persons(event_bus):
    dataset = two_archetype_dataset(10)
    profiles = PopulationService(event_bus, run_seed=8).sample_profiles(dataset, 7, persons_per_profile=3)
    assert len(profiles) == 7
    for group in (profiles[0:3], profiles[3:6]):
        assert len({tuple(getattr(p, a) for a in ATTRIBUTES) for p in group}) == 1
    assert len({p.person_id for p in profiles}) == 7


def test_sampling_rejects_bad_filters(event_bus):
    dataset = two_archetype_dataset(3)
    service = PopulationService(event_bus, run_seed=1)
    with pytest.raises(UnknownDimension):
        service.sample_profiles(dataset, 1, filters={"shoe_size": [42]})
    with pytest.raises(EmptyCohort):
        service.sample_profiles(dataset, 1, filters={"occupation": ["Students"]})
    with pytest.raises(EmptyCohort):
        service.sample_profiles(dataset, 1, home_area=HomeArea(lat=40.0, lon=116.4, radius_m=1000.0))


async def test_cohort_tree_keeps_attributes_coherent(event_bus, replay_gateway, binning, archetype_dataset):
    cohorts = CohortService(event_bus, replay_gateway, CohortConfig(min_cohort_size=20), binning, BANDS)
    tree = await cohorts.refine_hierarchy(archetype_dataset)

    profiles = PopulationService(event_bus, run_seed=3).sample_profiles(archetype_dataset, 40, tree=tree)

    assert {(p.occupation, p.age_band) for p in profiles} <= {
        ("Professional and Technical Personnel", "26-30"),
        ("Retired/Unemployed", ">51"),
    }


def test_run_log_records_stages_and_warnings(tmp_path, event_bus):
    service = RunLogService(event_bus, tmp_path)
    event_bus.emit("stage_started", StageStarted("cohort"))
    event_bus.emit("log_message_received", "CohortService", "warning", "gate retried")
    event_bus.emit("log_message_received", "CohortService", "info", "tree built")
    event_bus.emit("step_dropped", object())
    event_bus.emit("stage_finished", StageFinished("cohort", ["out/cohort_tree.jsonl"]))

    record = json.loads((tmp_path / RUN_LOG_FILENAME).read_text(encoding="utf-8"))
    assert record["stages"][0]["stage"] == "cohort"
    assert record["stages"][0]["seconds"] >= 0.0
    assert record["warnings"] == [{"source": "CohortService", "level": "warning", "message": "gate retried"}]
    assert record["event_counts"]["log_message_received"] == 2
    assert record["event_counts"]["step_dropped"] == 1
    assert service.snapshot() == record
