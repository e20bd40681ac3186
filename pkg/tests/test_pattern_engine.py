# tests/test_pattern_engine.py
import numpy as np
import pytest
from scipy.spatial.distance import jensenshannon

from conftest import (BANDS, MONDAY, commute_diary, make_point, make_profile, three_archetype_dataset,
                      two_archetype_dataset)
from core.errors import UnmatchableResponse
from core.managers.config_manager import AblationConfig, CohortConfig, PatternConfig
from core.models.diary import TravelDiary
from core.models.pattern import MaskedDiary, MobilityPattern
from services.cohort_service import CohortService, partition, summarize
from services.pattern_service import PATTERNS_FILE, PatternBook, PatternService, parse_masked_value, score_field


def pattern_service(event_bus, gateway, binning, ablation=None, **config) -> PatternService:
    return PatternService(event_bus, gateway, PatternConfig(**config), ablation or AblationConfig(), binning, BANDS,
                          run_seed=11)


def pattern_for(dataset, key, binning) -> MobilityPattern:
    members = [pid for pid in dataset.person_ids
               if all(getattr(dataset.profiles[pid], d) == v for d, v in key)]
    stats = summarize(dataset, members, binning, BANDS)
    return MobilityPattern(key, stats, "narrative", stats_digest=stats.digest(binning))


@pytest.mark.parametrize("name, filled, truth, expected", [
    ("arrive_time", 560, 510, 1.0),
    ("arrive_time", 571, 510, 0.0),
    ("distance_m", 3500.0, 2000.0, 0.0),
    ("distance_m", 2900.0, 2000.0, 1.0),
    ("purpose", "Shopping", "Shopping", 1.0),
    ("mode", "Walking", "Driving", 0.0),
])
def test_score_field(name, filled, truth, expected):
    assert score_field(name, filled, truth, time_tolerance_min=60, distance_tolerance=0.5) == expected


def test_parse_masked_value():
    assert parse_masked_value("arrive_time", " 09:20 ") == 560
    assert parse_masked_value("distance_m", "1000-3000") == 2000.0
    assert parse_masked_value("purpose", "shopping") == "Shopping"
    with pytest.raises(ValueError):
        parse_masked_value("mode", "Teleport")


def test_pattern_book_returns_the_most_specific_match(binning):
    dataset = two_archetype_dataset(5)
    book = PatternBook([
        pattern_for(dataset, (), binning),
        pattern_for(dataset, (("occupation", "Retired/Unemployed"),), binning),
        pattern_for(dataset, (("occupation", "Retired/Unemployed"), ("income", "Low")), binning),
    ])
    assert book.lookup(dataset.profiles["R001"]).label == "occupation=Retired/Unemployed|income=Low"
    assert book.lookup(dataset.profiles["C001"]).label == "ALL"

    narrow = PatternBook(book.patterns[1:])
    with pytest.raises(UnmatchableResponse):
        narrow.lookup(dataset.profiles["C001"])


def test_holdout_split_is_seeded_and_floored(event_bus, replay_gateway, binning, archetype_dataset):
    service = pattern_service(event_bus, replay_gateway, binning, holdout_fraction=0.2)
    groups = partition(archetype_dataset, ["occupation"])
    held = service.holdout_split(groups)

    assert [len(ids) for ids in held.values()] == [8, 8]
    assert held == service.holdout_split(list(reversed(groups)))
    for key, members in groups:
        assert set(held["|".join(f"{d}={v}" for d, v in key)]) <= set(members)


async def test_masked_completion_is_scored_per_field(event_bus, scripted_gateway_factory, binning):
    gateway = scripted_gateway_factory([
        {"template_id": "patterns_update_step2", "slots_hash": "*",
         "response": "Best guess.\n```\nP1.ARRIVE_TIME: 09:20\nP2.DISTANCE_M: 3500\n```"},
    ])
    service = pattern_service(event_bus, gateway, binning)
    diary = TravelDiary("P1", MONDAY, (make_point(510), make_point(1120, distance_m=2000.0)))
    masked = MaskedDiary(diary, frozenset({(0, "arrive_time"), (1, "distance_m")}))
    pattern = pattern_for(two_archetype_dataset(3), (), binning)

    result = await service.complete_masked(masked, pattern)

    assert result.filled == {(0, "arrive_time"): 560, (1, "distance_m"): 3500.0}
    assert result.field_scores == {(0, "arrive_time"): 1.0, (1, "distance_m"): 0.0}
    assert result.score == 0.5
    assert result.rationale == "Best guess."


async def test_missing_masked_field_scores_zero(event_bus, scripted_gateway_factory, binning):
    gateway = scripted_gateway_factory([
        {"template_id": "patterns_update_step2", "slots_hash": "*", "response": "```\nP1.MODE: Hovercraft\n```"},
    ])
    service = pattern_service(event_bus, gateway, binning)
    diary = commute_diary("P1")
    masked = MaskedDiary(diary, frozenset({(0, "mode"), (1, "purpose")}))
    result = await service.complete_masked(masked, pattern_for(two_archetype_dataset(3), (), binning))
    assert result.filled == {}
    assert result.score == 0.0


async def test_classifier_separates_archetypes(event_bus, replay_gateway, binning):
    dataset = two_archetype_dataset(30)
    service = pattern_service(event_bus, replay_gateway, binning)
    patterns = [pattern_for(dataset, key, binning) for key, _ in partition(dataset, ["occupation"])]

    correct = 0
    for diary in dataset.diaries:
        index, _ = await service.infer_group(diary, patterns)
        truth = dataset.profiles[diary.person_id].occupation
        correct += patterns[index].cohort_key[0][1] == truth
    assert correct / len(dataset.diaries) >= 0.9


async def test_unrecognised_group_label(event_bus, scripted_gateway_factory, binning):
    gateway = scripted_gateway_factory([
        {"template_id": "patterns_update_step1", "slots_hash": "*", "response": "GROUP: nobody"},
    ])
    service = pattern_service(event_bus, gateway, binning)
    patterns = [pattern_for(two_archetype_dataset(3), (("occupation", "Retired/Unemployed"),), binning)]
    with pytest.raises(UnmatchableResponse):
        await service.infer_group(commute_diary("X"), patterns)


async def test_poor_patterns_are_revised_up_to_the_round_limit(event_bus, scripted_gateway_factory, binning):
    gateway = scripted_gateway_factory([
        {"template_id": "pattern_extraction", "slots_hash": "*", "response": "They commute early."},
        {"template_id": "patterns_update_step1", "slots_hash": "*", "response": "GROUP: nobody"},
        {"template_id": "patterns_update_step2", "slots_hash": "*", "response": "no idea"},
    ])
    service = pattern_service(event_bus, gateway, binning, max_revision_rounds=2, eval_min_trajectories=3)
    revisions = []
    event_bus.subscribe("pattern_revised", revisions.append)

    dataset = two_archetype_dataset(4)
    pattern = pattern_for(dataset, (("occupation", "Professional and Technical Personnel"),), binning)
    holdout = dataset.diaries_of([pid for pid in dataset.person_ids if pid.startswith("C")])
    final = await service.self_evaluate(pattern, [pattern], holdout)

    assert final.revision == 2
    assert [r.revision for r in revisions] == [1, 2]
    assert [h["revision"] for h in final.history] == [0, 1, 2]
    assert final.eval_scores["group_inference_accuracy"] == 0.0
    assert final.narrative == "They commute early."


async def test_self_evaluation_without_holdout_leaves_the_pattern(event_bus, replay_gateway, binning):
    service = pattern_service(event_bus, replay_gateway, binning)
    pattern = pattern_for(two_archetype_dataset(3), (), binning)
    assert (await service.self_evaluate(pattern, [pattern], [])).eval_scores is None
    assert replay_gateway.dispatch_count == 0


async def tree_for(event_bus, gateway, binning, dataset):
    cohorts = CohortService(event_bus, gateway, CohortConfig(min_cohort_size=10), binning, BANDS)
    return await cohorts.refine_hierarchy(dataset)


async def test_build_patterns_with_replay(tmp_path, event_bus, replay_gateway, binning, archetype_dataset):
    tree = await tree_for(event_bus, replay_gateway, binning, archetype_dataset)
    service = pattern_service(event_bus, replay_gateway, binning)

    patterns = await service.build_patterns(archetype_dataset, tree)

    assert [p.label for p in patterns] == [n.label for n in tree.nodes]
    root, *leaves = patterns
    assert root.eval_scores is None
    for leaf in leaves:
        assert leaf.eval_scores["group_inference_accuracy"] == 1.0
        assert leaf.eval_scores["attribute_match_rate"] == 1.0
        assert leaf.stats.member_count == 32  # 40 members less 8 held out

    service.write_patterns(patterns, tmp_path, {"config_hash": "abc", "run_seed": 11})
    book = PatternBook.load(tmp_path / PATTERNS_FILE)
    assert book.lookup(archetype_dataset.profiles["R003"]).label == "occupation=Retired/Unemployed"


async def test_disabling_self_evaluation_skips_the_model(event_bus, replay_gateway, binning, archetype_dataset):
    tree = await tree_for(event_bus, replay_gateway, binning, archetype_dataset)
    service = pattern_service(event_bus, replay_gateway, binning,
                              ablation=AblationConfig(disable_self_evaluation=True))
    patterns = await service.build_patterns(archetype_dataset, tree)
    assert replay_gateway.dispatch_count == 0
    assert all(p.narrative == p.stats_digest for p in patterns)


async def test_pattern_dimension_override(event_bus, replay_gateway, binning, archetype_dataset):
    tree = await tree_for(event_bus, replay_gateway, binning, archetype_dataset)
    service = pattern_service(event_bus, replay_gateway, binning,
                              ablation=AblationConfig(disable_self_evaluation=True, pattern_dims_override=["income"]))
    patterns = await service.build_patterns(archetype_dataset, tree)
    assert [p.label for p in patterns] == ["ALL", "income=Low", "income=Medium"]
    assert PatternBook(patterns).lookup(make_profile("Z", income="Medium")).label == "income=Medium"


def nearest_cohort(diary: TravelDiary, candidates, binning) -> int:
    start = np.zeros(24)
    distance = np.zeros(binning.distance_bin_count)
    for point in diary.points:
        start[point.depart_time // 60] += 1
        distance[binning.distance_bin(point.distance_m)] += 1
    scores = [jensenshannon(start, c.start_time_hist, base=2) ** 2
              + jensenshannon(distance, c.distance_hist, base=2) ** 2
              for c in candidates]
    return int(np.argmin(scores))


async def test_three_archetype_accuracy_agrees_with_a_nearest_cohort_recount(event_bus, replay_gateway, binning):
    dataset = three_archetype_dataset(30)
    tree = await tree_for(event_bus, replay_gateway, binning, dataset)
    service = pattern_service(event_bus, replay_gateway, binning)

    patterns = {p.label: p for p in await service.build_patterns(dataset, tree)}

    leaves = [patterns[leaf.label] for leaf in tree.leaves()]
    assert len(leaves) == 3
    held = service.holdout_split([(leaf.key, leaf.members) for leaf in tree.leaves()])
    candidates = [p.stats.all for p in leaves]
    for own, pattern in enumerate(leaves):
        held_diaries = [d for d in dataset.diaries_of(held[pattern.label]) if d.points]
        diaries = held_diaries[: service.config.eval_min_trajectories]
        recount = sum(nearest_cohort(d, candidates, binning) == own for d in diaries) / len(diaries)
        assert pattern.eval_scores["group_inference_accuracy"] == pytest.approx(recount)
        assert recount >= 0.9
