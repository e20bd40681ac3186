# tests/test_diary_reasoner.py
from typing import Dict, List

import pytest

from conftest import BANDS, CENTRE, MONDAY, SATURDAY, make_profile, two_archetype_dataset
from core.errors import PlanUnparseable
from core.rng import derive_rng
from core.llm_client import LLMGateway
from core.managers.config_manager import AblationConfig, CohortConfig, PatternConfig, ReasonerConfig
from core.models.geo import haversine_m
from core.models.pattern import MobilityPattern
from core.models.plan import ActivityDecision, CommittedStep, DailyPlan, PlanEntry
from core.models.transcript import PromptRequest
from core.validation import validate_diary
from providers import ReplayBackend
from providers.base import LLMBackend
from services.cohort_service import CohortService, summarize
from services.diary_reasoner_service import DiaryReasonerService, ReasonerState, parse_plan, validate_decision
from services.pattern_service import PatternBook, PatternService

ENTRY = """WINDOW: 08:00-08:29
PURPOSE: Commuting to Work
CATEGORY: workplace
DISTANCE_M: 4000-6000
MODE: Bus and Subway"""

PLAN = f"Morning commute only.\n```\n{ENTRY}\n```"


def decision_text(mode: str = "Bus and Subway", depart: str = "08:10", distance: str = "4000-6000",
                  purpose: str = "Commuting to Work", category: str = "workplace") -> str:
    return (f"Leaving for work.\n```\nPURPOSE: {purpose}\nCATEGORY: {category}\nDEPART: {depart}\n"
            f"DISTANCE_M: {distance}\nMODE: {mode}\n```")


class SequenceBackend(LLMBackend):
    """Answers each template from a queue; the last answer repeats once the queue runs dry."""

    backend_id = "sequence"
    model_name = "queue"

    def __init__(self, answers: Dict[str, List[str]]):
        self.answers = {k: list(v) for k, v in answers.items()}
        self.seen: List[PromptRequest] = []

    async def generate(self, request: PromptRequest) -> str:
        self.seen.append(request)
        queue = self.answers[request.template_id]
        return queue.pop(0) if len(queue) > 1 else queue[0]


@pytest.fixture
def commuter_pattern(binning) -> MobilityPattern:
    dataset = two_archetype_dataset(10)
    members = [pid for pid in dataset.person_ids if pid.startswith("C")]
    stats = summarize(dataset, members, binning, BANDS)
    return MobilityPattern((("occupation", "Professional and Technical Personnel"),), stats, "Commutes by bus.",
                           stats_digest=stats.digest(binning))


@pytest.fixture
def events(event_bus):
    seen = {name: [] for name in ("decision_rethought", "step_fell_back", "step_dropped", "diary_generated")}
    for name, bucket in seen.items():
        event_bus.subscribe(name, bucket.append)
    return seen


def reasoner(event_bus, gateway, sampler, ablation=None, **config) -> DiaryReasonerService:
    return DiaryReasonerService(event_bus, gateway, ReasonerConfig(**config), ablation or AblationConfig(), sampler,
                                run_seed=7)


def state_for(pattern, current_time=0, steps=()) -> ReasonerState:
    plan = DailyPlan("P1", MONDAY, "weekday", ())
    return ReasonerState(make_profile("P1"), pattern, plan, current_time=current_time, current_location=CENTRE,
                         steps=list(steps))


def test_late_long_walk_cannot_finish_before_midnight(commuter_pattern):
    decision = ActivityDecision(1200, "Shopping", "shop", 30000, 30000, "Walking")
    problems = validate_decision(decision, state_for(commuter_pattern, 600), ReasonerConfig().speed_caps_kmh)
    assert problems == ["cannot complete before midnight at 7 km/h"]


def test_departure_must_follow_the_last_arrival(commuter_pattern):
    previous = ActivityDecision(480, "Shopping", "shop", 800, 800, "Walking")
    step = CommittedStep(previous, 600, 800.0, None, "model")
    decision = ActivityDecision(600, "Returning Home", "shop", 800, 800, "Walking")
    problems = validate_decision(decision, state_for(commuter_pattern, 600, [step]), ReasonerConfig().speed_caps_kmh)
    assert "time regression" in problems
    assert "Returning Home must go to a residence" in problems

    first = ActivityDecision(0, "Shopping", "shop", 800, 800, "Walking")
    assert validate_decision(first, state_for(commuter_pattern, 0), ReasonerConfig().speed_caps_kmh) == []


def test_parse_plan():
    plan, problems = parse_plan(PLAN, "P1", MONDAY)
    assert problems == []
    (entry,) = plan.entries
    assert (entry.window_start, entry.window_end, entry.d_lo, entry.d_hi) == (480, 509, 4000, 6000)
    assert plan.day_type == "weekday"

    empty, _ = parse_plan("```\nTRIPS: 0\n```", "P1", SATURDAY)
    assert empty.entries == () and empty.day_type == "weekend"


@pytest.mark.parametrize("text, problem", [
    ("no block at all", "no fenced plan block"),
    ("```\nWINDOW: 08:00-08:29\nPURPOSE: Shopping\n```", "missing CATEGORY"),
    (PLAN.replace("workplace", "moon"), "unknown location category"),
    (PLAN.replace("4000-6000", "6000-4000"), "reversed"),
    (f"```\n{ENTRY}\n\n{ENTRY}\n```", "overlaps"),
])
def test_unusable_plans(text, problem):
    plan, problems = parse_plan(text, "P1", MONDAY)
    assert plan is None
    assert any(problem in p for p in problems)


async def test_rejected_decision_is_rethought(event_bus, sampler, commuter_pattern, events):
    backend = SequenceBackend({"daily_plan": [PLAN],
                               "recursive_reasoning": [decision_text(mode="Hovercraft"), decision_text()]})
    service = reasoner(event_bus, LLMGateway(backend), sampler)

    diary = await service.generate_diary(make_profile("P1"), commuter_pattern, MONDAY)

    (point,) = diary.points
    assert point.depart_time == 490
    assert point.mode == "Bus and Subway"
    assert haversine_m(CENTRE, point.location) == pytest.approx(5000.0, rel=1e-3)
    assert [e.attempt for e in events["decision_rethought"]] == [1]
    assert "unknown travel mode 'Hovercraft'" in events["decision_rethought"][0].violations
    assert events["step_fell_back"] == []
    assert backend.seen[-1].feedback == "unknown travel mode 'Hovercraft'"
    assert len(diary.provenance) == 3


async def test_exhausted_rethinks_fall_back_to_the_plan(event_bus, sampler, commuter_pattern, events):
    backend = SequenceBackend({"daily_plan": [PLAN], "recursive_reasoning": ["I refuse to answer."]})
    service = reasoner(event_bus, LLMGateway(backend), sampler, max_rethinks=3)

    diary = await service.generate_diary(make_profile("P1"), commuter_pattern, MONDAY)

    (point,) = diary.points
    assert 480 <= point.depart_time <= 509
    assert point.purpose == "Commuting to Work"
    assert len(events["decision_rethought"]) == 3
    assert [e.step for e in events["step_fell_back"]] == [0]
    assert "missing" in events["step_fell_back"][0].reason


async def test_rethink_can_be_disabled(event_bus, sampler, commuter_pattern, events):
    backend = SequenceBackend({"daily_plan": [PLAN], "recursive_reasoning": [decision_text(mode="Hovercraft")]})
    service = reasoner(event_bus, LLMGateway(backend), sampler, ablation=AblationConfig(disable_rethink=True))
    await service.generate_diary(make_profile("P1"), commuter_pattern, MONDAY)
    assert events["decision_rethought"] == []
    assert len(events["step_fell_back"]) == 1
    assert sum(r.template_id == "recursive_reasoning" for r in backend.seen) == 1


async def test_unusable_plan_falls_back_to_a_sampled_plan(event_bus, sampler, commuter_pattern, events):
    backend = SequenceBackend({"daily_plan": ["Let me think about it."],
                               "recursive_reasoning": ["still thinking"]})
    service = reasoner(event_bus, LLMGateway(backend), sampler, plan_reprompts=1)

    with pytest.raises(PlanUnparseable):
        await service.generate_plan(make_profile("P1"), commuter_pattern, MONDAY)

    diary = await service.generate_diary(make_profile("P1"), commuter_pattern, MONDAY)
    assert events["step_fell_back"][0].step == -1
    # every commuter day in the statistics has two trips
    assert len(diary.points) == 2
    assert validate_diary(diary).ok


async def test_arrival_after_midnight_ends_the_day(event_bus, sampler, commuter_pattern, events):
    late_plan = PLAN.replace("08:00-08:29", "23:10-23:25").replace("4000-6000", "30000-30000") \
        .replace("Bus and Subway", "Driving")
    backend = SequenceBackend({"daily_plan": [late_plan],
                               "recursive_reasoning": [decision_text("Driving", "23:20", "30000-30000")]})
    service = reasoner(event_bus, LLMGateway(backend), sampler)

    diary = await service.generate_diary(make_profile("P1"), commuter_pattern, MONDAY)

    assert diary is None
    assert "after midnight" in events["step_dropped"][0].reason
    assert events["diary_generated"][0].point_count == 0


async def test_empty_plan_gives_an_empty_day(event_bus, sampler, commuter_pattern):
    backend = SequenceBackend({"daily_plan": ["```\nTRIPS: 0\n```"], "recursive_reasoning": [""]})
    service = reasoner(event_bus, LLMGateway(backend), sampler)
    assert await service.generate_diary(make_profile("P1"), commuter_pattern, SATURDAY) is None
    assert all(r.template_id == "daily_plan" for r in backend.seen)


async def replay_population(event_bus, sampler, binning, dataset):
    gateway = LLMGateway(ReplayBackend(sampler, run_seed=7))
    cohorts = CohortService(event_bus, gateway, CohortConfig(min_cohort_size=5), binning, BANDS)
    tree = await cohorts.refine_hierarchy(dataset)
    patterns = PatternService(event_bus, gateway, PatternConfig(), AblationConfig(disable_self_evaluation=True),
                              binning, BANDS, run_seed=7)
    book = PatternBook(await patterns.build_patterns(dataset, tree))
    service = reasoner(event_bus, gateway, sampler)
    days = [(pid, MONDAY) for pid in dataset.person_ids]
    return await service.generate_population(list(dataset.profiles.values()), days, book)


async def test_replay_population_is_deterministic_and_valid(event_bus, sampler, binning):
    dataset = two_archetype_dataset(6)
    first = await replay_population(event_bus, sampler, binning, dataset)
    second = await replay_population(event_bus, sampler, binning, dataset)

    assert first == second
    assert len(first.diaries) + len(first.empty_days) == 12
    assert all(validate_diary(d).ok for d in first.diaries)
    assert [d.person_id for d in first.diaries] == sorted(d.person_id for d in first.diaries)
    assert all(d.provenance for d in first.diaries)


EVENING = PlanEntry(window_start=1020, window_end=1050, purpose="Returning Home", category="residence",
                    d_lo=4000, d_hi=6000, mode="Bus and Subway")


@pytest.mark.parametrize("current_time, earliest", [(0, 1020), (660, 1020), (1019, 1020), (1035, 1036)])
def test_replay_departure_stays_inside_the_window(sampler, current_time, earliest):
    for seed in range(50):
        decision = sampler.decide(EVENING, current_time, derive_rng(seed, "decide"))
        assert earliest <= decision.depart_time <= EVENING.window_end
        assert (decision.purpose, decision.category, decision.mode) == ("Returning Home", "residence",
                                                                         "Bus and Subway")


def test_replay_departure_after_a_passed_window(sampler):
    assert sampler.decide(EVENING, 1380, derive_rng(1, "decide")).depart_time == 1381
