# tests/test_cohort.py
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import BANDS, commute_diary, make_profile
from core.errors import EmptyCohort, UnknownDimension, UnparseableScore
from core.managers.config_manager import CohortConfig
from core.models.cohort import CohortTree, key_matches
from core.models.dataset import Dataset
from core.storage import read_jsonl
from core.vocabulary import AGE_BANDS, INCOMES, OCCUPATIONS
from services.cohort_service import START_HOURS_FILE, TREE_FILE, CohortService, partition, summarize

people = st.lists(
    st.tuples(st.sampled_from(AGE_BANDS), st.sampled_from(INCOMES), st.sampled_from(OCCUPATIONS)),
    min_size=1, max_size=40,
)


def dataset_of(rows) -> Dataset:
    profiles = [make_profile(f"P{i:03d}", age_band=a, income=inc, occupation=occ)
                for i, (a, inc, occ) in enumerate(rows)]
    return Dataset.build(profiles, [commute_diary(p.person_id) for p in profiles])


@settings(max_examples=100, deadline=None)
@given(people, st.sampled_from([["age_band"], ["income"], ["age_band", "income"], ["occupation", "income"]]))
def test_partition_is_exact_and_disjoint(rows, dims):
    dataset = dataset_of(rows)
    cohorts = partition(dataset, dims)

    seen = [pid for _, ids in cohorts for pid in ids]
    assert sorted(seen) == sorted(dataset.person_ids)
    assert len(seen) == len(set(seen))
    for key, ids in cohorts:
        assert ids
        assert [d for d, _ in key] == dims
        assert all(key_matches(key, dataset.profiles[pid]) for pid in ids)


def test_partition_follows_vocabulary_order():
    dataset = dataset_of([(">51", "Low", "Students"), ("18-25", "Low", "Students"), ("26-30", "Low", "Students")])
    assert [key[0][1] for key, _ in partition(dataset, ["age_band"])] == ["18-25", "26-30", ">51"]


def test_partition_rejects_unknown_dimensions(archetype_dataset):
    with pytest.raises(UnknownDimension):
        partition(archetype_dataset, ["shoe_size"])
    with pytest.raises(ValueError):
        partition(archetype_dataset, [])


def test_summarize_counts_days_and_trips(archetype_dataset, binning):
    commuters = [pid for pid in archetype_dataset.person_ids if pid.startswith("C")]
    stats = summarize(archetype_dataset, commuters, binning, BANDS)
    assert stats.member_count == 40
    assert stats.all.day_count == 40
    assert stats.all.total_trips == 80
    assert stats.weekday.day_count == 40
    assert stats.weekend.day_count == 0
    assert stats.all.trips_per_day_hist[2] == 40
    with pytest.raises(EmptyCohort):
        summarize(archetype_dataset, [], binning, BANDS)


def cohort_service(event_bus, gateway, binning, **config) -> CohortService:
    return CohortService(event_bus, gateway, CohortConfig(**config), binning, BANDS)


async def test_replay_gate_splits_separated_archetypes(event_bus, replay_gateway, binning, archetype_dataset):
    service = cohort_service(event_bus, replay_gateway, binning, min_cohort_size=20)
    tree = await service.refine_hierarchy(archetype_dataset)

    assert tree.root.split_dimension == "occupation"
    assert tree.root.gate_score == 10
    leaves = tree.leaves()
    assert [leaf.label for leaf in leaves] == [
        "occupation=Professional and Technical Personnel",
        "occupation=Retired/Unemployed",
    ]
    assert sorted(pid for leaf in leaves for pid in leaf.members) == sorted(archetype_dataset.person_ids)
    assert replay_gateway.dispatch_count == 0


async def test_minimum_cohort_size_blocks_a_split(event_bus, replay_gateway, binning, archetype_dataset):
    service = cohort_service(event_bus, replay_gateway, binning, min_cohort_size=41)
    decisions = []
    event_bus.subscribe("cohort_split_decided", decisions.append)

    tree = await service.refine_hierarchy(archetype_dataset)

    assert len(tree.nodes) == 1
    assert decisions and not any(d.split for d in decisions)
    assert all(d.score == 10 for d in decisions)


async def test_low_model_rating_keeps_the_root(event_bus, scripted_gateway_factory, binning, archetype_dataset):
    gateway = scripted_gateway_factory([
        {"template_id": "initial_group_division", "slots_hash": "*", "response": "Rating: 3/10"},
    ])
    service = cohort_service(event_bus, gateway, binning, min_cohort_size=10)
    decisions = []
    event_bus.subscribe("cohort_split_decided", decisions.append)

    tree = await service.refine_hierarchy(archetype_dataset)

    assert len(tree.nodes) == 1
    # only the dimensions on which the archetypes differ are put to the gate
    assert [d.dimension for d in decisions] == ["occupation", "age_band", "income", "primary_mode"]
    assert all(d.score == 3 and not d.split for d in decisions)


async def test_high_model_rating_splits(event_bus, scripted_gateway_factory, binning, archetype_dataset):
    gateway = scripted_gateway_factory([
        {"template_id": "initial_group_division", "slots_hash": "*",
         "response": "The groups differ sharply in start times.\nRating: 8"},
    ])
    service = cohort_service(event_bus, gateway, binning, min_cohort_size=10, max_depth=1)
    tree = await service.refine_hierarchy(archetype_dataset)
    assert tree.root.split_dimension == "occupation"
    assert tree.root.gate_score == 8
    assert len(tree.leaves()) == 2


async def test_unparseable_rating_is_retried_then_raised(event_bus, scripted_gateway_factory, binning,
                                                         archetype_dataset):
    gateway = scripted_gateway_factory([
        {"template_id": "initial_group_division", "slots_hash": "*", "response": "hard to say"},
    ])
    service = cohort_service(event_bus, gateway, binning, min_cohort_size=10, gate_max_retries=2)
    with pytest.raises(UnparseableScore):
        await service.refine_hierarchy(archetype_dataset)
    assert gateway.backend.calls == 3


async def test_written_tree_reloads(tmp_path, event_bus, replay_gateway, binning, archetype_dataset):
    service = cohort_service(event_bus, replay_gateway, binning, min_cohort_size=20)
    tree = await service.refine_hierarchy(archetype_dataset)
    paths = service.write_tree(tree, tmp_path, {"config_hash": "abc", "run_seed": 1})

    assert [p.name for p in paths] == [TREE_FILE, START_HOURS_FILE]
    meta, records = read_jsonl(tmp_path / TREE_FILE)
    assert meta == {"config_hash": "abc", "run_seed": 1}
    reloaded = CohortTree.from_records(records)
    assert [n.label for n in reloaded.nodes] == [n.label for n in tree.nodes]
    retiree = archetype_dataset.profiles["R001"]
    assert reloaded.lookup(retiree).label == "occupation=Retired/Unemployed"
    assert (reloaded.lookup(retiree).stats.all.start_time_hist == tree.lookup(retiree).stats.all.start_time_hist).all()
