# services/diary_reasoner_service.py
import asyncio
import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from core.errors import AnchorFailure, DecisionUnparseable, PlanUnparseable
from core.llm_client import LLMGateway
from core.managers.config_manager import AblationConfig, ReasonerConfig
from core.models.dataset import Dataset, PersonDay
from core.models.diary import MINUTES_PER_DAY, TrajectoryPoint, TravelDiary, day_type_of, format_clock, parse_clock
from core.models.geo import GeoPoint, destination_point, haversine_m
from core.models.pattern import MobilityPattern
from core.models.plan import (ActivityDecision, CommittedStep, DailyPlan, PlanEntry, cruise_minutes,
                              render_schedule)
from core.models.profile import IndividualProfile
from core.models.transcript import GenerationParams
from core.response_parser import extract_block, parse_distance_range, parse_entries, parse_fields
from core.rng import derive_rng
from core.validation import validate_diary
from core.vocabulary import DECISION_CATEGORIES, MODES, PURPOSES, LocationCategory, TripPurpose
from event_bus import EventBus
from events import DecisionRethought, DiaryGenerated, StepDropped, StepFellBack
from providers.replay_provider import ReplaySampler
from services.pattern_service import PatternBook
from services.spatial_anchor_service import SpatialAnchor

logger = logging.getLogger(__name__)

MAX_DISTANCE_M = 100000
PLAN_KEYS = ("WINDOW", "PURPOSE", "CATEGORY", "DISTANCE_M", "MODE")
DECISION_KEYS = ("PURPOSE", "CATEGORY", "DEPART", "DISTANCE_M", "MODE")


def canonical(value: str, vocabulary: Sequence[str]) -> str:
    """Vocabulary word matching `value` case-insensitively; the stripped value otherwise."""
    value = value.strip()
    for word in vocabulary:
        if word.lower() == value.lower():
            return word
    return value


def vocabulary_problems(purpose: str, category: str, mode: str, d_lo: int, d_hi: int) -> List[str]:
    problems = []
    if purpose not in PURPOSES:
        problems.append(f"unknown purpose '{purpose}'")
    if category not in DECISION_CATEGORIES:
        problems.append(f"unknown location category '{category}'")
    if mode not in MODES:
        problems.append(f"unknown travel mode '{mode}'")
    if d_lo < 0:
        problems.append("distance range must be nonnegative")
    if d_lo > d_hi:
        problems.append(f"distance range {d_lo}-{d_hi} is reversed")
    if d_hi > MAX_DISTANCE_M:
        problems.append(f"distance range upper bound {d_hi} m exceeds {MAX_DISTANCE_M} m")
    if purpose == TripPurpose.RETURNING_HOME.value and category != LocationCategory.RESIDENCE.value:
        problems.append("Returning Home must go to a residence")
    return problems


def parse_plan(text: str, person_id: str, date: dt.date) -> Tuple[Optional[DailyPlan], List[str]]:
    """The plan in a response, or the problems that make it unusable."""
    block = extract_block(text)
    if block is None:
        return None, ["no fenced plan block found"]
    entries = parse_entries(block)
    if any(entry.get("TRIPS", "").strip() == "0" for entry in entries):
        return DailyPlan(person_id, date, day_type_of(date), ()), []

    plan_entries: List[PlanEntry] = []
    problems: List[str] = []
    for number, entry in enumerate(entries, start=1):
        missing = [key for key in PLAN_KEYS if key not in entry]
        if missing:
            problems.append(f"trip {number} is missing {', '.join(missing)}")
            continue
        try:
            start_text, end_text = entry["WINDOW"].split("-", 1)
            start, end = parse_clock(start_text), parse_clock(end_text)
            d_lo, d_hi = parse_distance_range(entry["DISTANCE_M"])
        except ValueError as e:
            problems.append(f"trip {number}: {e}")
            continue
        purpose = canonical(entry["PURPOSE"], PURPOSES)
        category = canonical(entry["CATEGORY"], DECISION_CATEGORIES)
        mode = canonical(entry["MODE"], MODES)
        problems.extend(f"trip {number}: {p}" for p in vocabulary_problems(purpose, category, mode, d_lo, d_hi))
        if end < start:
            problems.append(f"trip {number}: window ends before it starts")
        if plan_entries and start <= plan_entries[-1].window_end:
            problems.append(f"trip {number}: window overlaps or precedes the previous trip")
        plan_entries.append(PlanEntry(start, end, purpose, category, d_lo, d_hi, mode))

    if not plan_entries and not problems:
        problems.append("plan block lists no trips")
    if problems:
        return None, problems
    return DailyPlan(person_id, date, day_type_of(date), tuple(plan_entries)), []


def parse_decision(text: str) -> ActivityDecision:
    fields = parse_fields(text)
    missing = [key for key in DECISION_KEYS if key not in fields]
    if missing:
        raise DecisionUnparseable(f"Decision block is missing {', '.join(missing)}", missing=missing)
    try:
        depart = parse_clock(fields["DEPART"])
        d_lo, d_hi = parse_distance_range(fields["DISTANCE_M"])
    except ValueError as e:
        raise DecisionUnparseable(f"Unreadable decision field: {e}")
    block = extract_block(text) or ""
    rationale = text.replace(block, "").replace("```", "").strip()
    return ActivityDecision(
        depart_time=depart,
        purpose=canonical(fields["PURPOSE"], PURPOSES),
        category=canonical(fields["CATEGORY"], DECISION_CATEGORIES),
        d_lo=d_lo,
        d_hi=d_hi,
        mode=canonical(fields["MODE"], MODES),
        rationale=rationale[:500],
    )


@dataclass
class ReasonerState:
    profile: IndividualProfile
    pattern: MobilityPattern
    plan: DailyPlan
    current_time: int = 0
    current_location: Optional[GeoPoint] = None
    steps: List[CommittedStep] = field(default_factory=list)
    step_index: int = 0
    rethink_count: int = 0

    @property
    def pending(self) -> Optional[PlanEntry]:
        entries = self.plan.entries
        return entries[self.step_index] if self.step_index < len(entries) else None


def validate_decision(decision: ActivityDecision, state: ReasonerState,
                      speed_caps: Mapping[str, float]) -> List[str]:
    """Feasibility problems with a decision; an empty list means it can be committed."""
    violations: List[str] = []
    regressed = decision.depart_time <= state.current_time if state.steps else decision.depart_time < state.current_time
    if regressed:
        violations.append("time regression")
    if not 0 <= decision.depart_time < MINUTES_PER_DAY:
        violations.append("departure outside the day")
    violations.extend(vocabulary_problems(decision.purpose, decision.category, decision.mode,
                                          decision.d_lo, decision.d_hi))
    cap = speed_caps.get(decision.mode)
    if cap is not None and decision.d_lo >= 0:
        minimal = (decision.d_lo / 1000.0) / cap * 60.0
        if decision.depart_time + minimal >= MINUTES_PER_DAY:
            violations.append(f"cannot complete before midnight at {cap:g} km/h")
    return violations


class DiaryReasonerService:
    """
    Turns a profile and its retrieved pattern into a travel diary: a daily
    plan first, then one reasoned and validated decision per step, each
    anchored to a place on the road network.
    """

    def __init__(self, event_bus: EventBus, gateway: LLMGateway, config: ReasonerConfig, ablation: AblationConfig,
                 sampler: ReplaySampler, run_seed: int, anchor: Optional[SpatialAnchor] = None,
                 temperature: float = 0.2, max_tokens: int = 1024, workers: int = 4):
        self.event_bus = event_bus
        self.gateway = gateway
        self.config = config
        self.ablation = ablation
        self.sampler = sampler
        self.run_seed = run_seed
        self.anchor = anchor
        self.params = GenerationParams(temperature=temperature, max_tokens=max_tokens)
        self.workers = workers
        logger.info("DiaryReasonerService initialized.")

    @staticmethod
    def _date_slot(date: dt.date) -> str:
        return f"{date.isoformat()} ({date.strftime('%A')}, {day_type_of(date)})"

    async def generate_plan(self, profile: IndividualProfile, pattern: MobilityPattern, date: dt.date,
                            provenance: Optional[List[str]] = None) -> DailyPlan:
        slots = [profile.describe(), pattern.prompt_text(), self._date_slot(date)]
        context = {"stats": pattern.stats, "day_type": day_type_of(date)}
        feedback = None
        problems: List[str] = []
        for attempt in range(self.config.plan_reprompts + 1):
            text, transcript = await self.gateway.complete("daily_plan", slots, self.params, feedback, context)
            if provenance is not None:
                provenance.append(transcript.request_hash)
            plan, problems = parse_plan(text, profile.person_id, date)
            if plan is not None:
                return plan
            logger.warning(f"[DiaryReasonerService] Plan for {profile.person_id} on {date} rejected "
                           f"(attempt {attempt + 1}): {problems}")
            feedback = "\n".join(problems)
        raise PlanUnparseable(f"No usable plan for {profile.person_id} on {date.isoformat()}",
                              person_id=profile.person_id, date=date.isoformat(), problems=problems)

    async def reason_step(self, state: ReasonerState, feedback: Optional[str] = None,
                          provenance: Optional[List[str]] = None) -> ActivityDecision:
        slots = [
            format_clock(state.current_time),
            state.plan.render(),
            render_schedule(state.steps),
            state.profile.describe(),
            state.pattern.prompt_text(),
        ]
        context = {
            "entry": state.pending,
            "current_time": state.current_time,
        }
        text, transcript = await self.gateway.complete("recursive_reasoning", slots, self.params, feedback, context)
        if provenance is not None:
            provenance.append(transcript.request_hash)
        return parse_decision(text)

    def validate_decision(self, decision: ActivityDecision, state: ReasonerState) -> List[str]:
        return validate_decision(decision, state, self.config.speed_caps_kmh)

    def _fallback(self, state: ReasonerState, date: dt.date) -> ActivityDecision:
        rng = derive_rng(self.run_seed, "fallback", state.profile.person_id, date.isoformat(), state.step_index)
        return self.sampler.decide(state.pending, state.current_time, rng)

    def _place(self, state: ReasonerState, decision: ActivityDecision, date: dt.date) -> Tuple[GeoPoint, float, Optional[int]]:
        """Destination, travelled distance and POI id for a decision."""
        origin = state.current_location
        home = state.profile.home
        if decision.purpose == TripPurpose.RETURNING_HOME.value:
            if self.anchor is None:
                return home, haversine_m(origin, home), None
            routed = self.anchor.route_to(origin, home)
            return home, routed.network_distance_m, None
        if self.anchor is None:
            rng = derive_rng(self.run_seed, "place", state.profile.person_id, date.isoformat(), state.step_index)
            location = destination_point(origin, rng.uniform(0.0, 2.0 * math.pi), decision.target_m)
            return location, haversine_m(origin, location), None
        anchored = self.anchor.anchor(origin, decision.category, decision.target_m)
        return anchored.location, anchored.network_distance_m, anchored.poi_id

    async def _decide(self, state: ReasonerState, date: dt.date,
                      provenance: List[str]) -> Tuple[Optional[ActivityDecision], str]:
        """A valid decision for the pending step and its source, or (None, reason) to drop it."""
        attempts = 1 if self.ablation.disable_rethink else 1 + self.config.max_rethinks
        feedback = None
        last_problems: List[str] = []
        person_id = state.profile.person_id
        for attempt in range(attempts):
            state.rethink_count = attempt
            try:
                decision = await self.reason_step(state, feedback, provenance)
                problems = self.validate_decision(decision, state)
            except DecisionUnparseable as e:
                problems = [e.message]
            if not problems:
                return decision, "model"
            last_problems = problems
            if attempt + 1 < attempts:
                self.event_bus.emit("decision_rethought",
                                    DecisionRethought(person_id, state.step_index, attempt + 1, problems))
            feedback = "\n".join(problems)

        reason = "; ".join(last_problems)
        self.event_bus.emit("step_fell_back", StepFellBack(person_id, state.step_index, reason))
        logger.info(f"[DiaryReasonerService] {person_id} step {state.step_index}: falling back ({reason}).")
        decision = self._fallback(state, date)
        problems = self.validate_decision(decision, state)
        if problems:
            return None, "; ".join(problems)
        return decision, "fallback"

    async def generate_diary(self, profile: IndividualProfile, pattern: MobilityPattern,
                             date: dt.date) -> Optional[TravelDiary]:
        """The person-day's diary, or None for a day without trips."""
        provenance: List[str] = []
        try:
            plan = await self.generate_plan(profile, pattern, date, provenance)
        except PlanUnparseable as e:
            rng = derive_rng(self.run_seed, "fallback-plan", profile.person_id, date.isoformat())
            entries = self.sampler.sample_plan(pattern.stats.for_day_type(day_type_of(date)), rng)
            plan = DailyPlan(profile.person_id, date, day_type_of(date), tuple(entries))
            self.event_bus.emit("step_fell_back", StepFellBack(profile.person_id, -1, e.message))
            self.log("warning", f"{e.message}; using a sampled plan.")

        state = ReasonerState(profile, pattern, plan, current_location=profile.home)
        points: List[TrajectoryPoint] = []
        while state.pending is not None:
            decision, source = await self._decide(state, date, provenance)
            if decision is None:
                self._drop(state, source)
                continue
            try:
                location, distance, poi_id = self._place(state, decision, date)
            except AnchorFailure as e:
                self._drop(state, e.message)
                continue
            duration = cruise_minutes(distance, self.config.cruise_speeds_kmh[decision.mode])
            arrive = decision.depart_time + duration
            if arrive >= MINUTES_PER_DAY:
                self._drop(state, f"arrival {arrive} falls after midnight")
                break
            points.append(TrajectoryPoint(arrive, location, decision.purpose, distance, decision.mode, duration,
                                          poi_id=poi_id, category=decision.category))
            state.steps.append(CommittedStep(decision, arrive, distance, poi_id, source))
            state.current_time = arrive
            state.current_location = location
            state.step_index += 1
            state.rethink_count = 0

        self.event_bus.emit("diary_generated", DiaryGenerated(profile.person_id, date.isoformat(), len(points)))
        if not points:
            return None
        diary = TravelDiary(profile.person_id, date, tuple(points), origin=profile.home,
                            provenance=tuple(provenance))
        result = validate_diary(diary, self.config.speed_caps_kmh)
        if not result.ok:
            raise AssertionError(f"Generated diary for {profile.person_id} on {date} is invalid: {result.messages()}")
        return diary

    def _drop(self, state: ReasonerState, reason: str):
        self.event_bus.emit("step_dropped", StepDropped(state.profile.person_id, state.step_index, reason))
        logger.warning(f"[DiaryReasonerService] Dropped step {state.step_index} for "
                       f"{state.profile.person_id}: {reason}")
        state.step_index += 1
        state.rethink_count = 0

    async def generate_population(self, profiles: Sequence[IndividualProfile], days: Sequence[PersonDay],
                                  patterns: PatternBook) -> Dataset:
        """Generates every (person, date) in `days`; output order follows `days`."""
        by_id: Dict[str, IndividualProfile] = {p.person_id: p for p in profiles}
        semaphore = asyncio.Semaphore(self.workers)

        async def one(person_id: str, date: dt.date) -> Optional[TravelDiary]:
            async with semaphore:
                profile = by_id[person_id]
                return await self.generate_diary(profile, patterns.lookup(profile), date)

        results = await asyncio.gather(*(one(pid, date) for pid, date in days))
        diaries = [d for d in results if d is not None]
        empty = [day for day, d in zip(days, results) if d is None]
        self.log("info", f"Generated {len(diaries)} diaries and {len(empty)} no-trip days "
                         f"for {len(by_id)} people.")
        return Dataset.build(profiles, diaries, empty)

    def log(self, level: str, message: str):
        getattr(logger, level, logger.info)(f"[DiaryReasonerService] {message}")
        self.event_bus.emit("log_message_received", "DiaryReasonerService", level, message)
