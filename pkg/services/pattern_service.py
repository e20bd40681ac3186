# services/pattern_service.py
import asyncio
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from core.binning import Binning
from core.errors import HoldoutLeak, UnmatchableResponse, UnparseableField
from core.llm_client import LLMGateway
from core.managers.config_manager import AblationConfig, PatternConfig
from core.models.cohort import CohortKey, CohortStats, CohortTree, key_label, key_matches
from core.models.dataset import Dataset
from core.models.diary import TravelDiary, parse_clock
from core.models.pattern import MASKABLE_FIELDS, MaskedDiary, MobilityPattern
from core.models.profile import IndividualProfile
from core.models.transcript import GenerationParams
from core.response_parser import extract_block, match_label, parse_distance_range, parse_fields
from core.rng import derive_rng
from core.storage import read_jsonl, write_jsonl
from core.vocabulary import MODES, PURPOSES
from event_bus import EventBus
from events import PatternRevised
from services.cohort_service import partition, summarize

logger = logging.getLogger(__name__)

PATTERNS_FILE = "patterns.jsonl"
ROOT_DIMENSION = "overall population"
MAX_FAILURE_EXAMPLES = 3


@dataclass
class CompletionResult:
    filled: Dict[Tuple[int, str], Any]
    field_scores: Dict[Tuple[int, str], float]
    rationale: str = ""

    @property
    def score(self) -> float:
        return sum(self.field_scores.values()) / len(self.field_scores) if self.field_scores else 0.0


@dataclass
class EvaluationRound:
    group_inference_accuracy: float
    masked_completion_score: float
    attribute_match_rate: float
    failures: List[str] = field(default_factory=list)
    rationales: List[str] = field(default_factory=list)

    def scores(self) -> Dict[str, float]:
        return {
            "group_inference_accuracy": self.group_inference_accuracy,
            "masked_completion_score": self.masked_completion_score,
            "attribute_match_rate": self.attribute_match_rate,
        }


def describe_key(key: CohortKey, member_count: int) -> str:
    if not key:
        return f"All surveyed individuals ({member_count} people)."
    traits = "; ".join(f"{dim.replace('_', ' ')}: {value}" for dim, value in key)
    return f"{traits} ({member_count} people)."


def rationale_of(text: str) -> str:
    """Response prose with any fenced block and contract lines removed."""
    block = extract_block(text)
    if block is not None:
        text = text.replace(block, "")
    lines = [ln.strip() for ln in text.replace("```", "").splitlines()]
    lines = [ln for ln in lines if ln and not ln.upper().startswith(("GROUP:", "RATING:"))]
    return " ".join(lines)[:300]


class PatternBook:
    """Patterns by cohort key; a profile gets the most specific pattern whose key it satisfies."""

    def __init__(self, patterns: Sequence[MobilityPattern]):
        self.patterns = list(patterns)

    def lookup(self, profile: IndividualProfile) -> MobilityPattern:
        best: Optional[MobilityPattern] = None
        for pattern in self.patterns:
            if key_matches(pattern.cohort_key, profile):
                if best is None or len(pattern.cohort_key) > len(best.cohort_key):
                    best = pattern
        if best is None:
            raise UnmatchableResponse(f"No pattern covers person '{profile.person_id}'",
                                      person_id=profile.person_id)
        return best

    @classmethod
    def load(cls, path: Path) -> "PatternBook":
        _, records = read_jsonl(path)
        return cls([MobilityPattern.from_dict(r) for r in records])


def score_field(name: str, filled: Any, truth: Any, time_tolerance_min: int, distance_tolerance: float) -> float:
    if name in ("purpose", "mode"):
        return 1.0 if filled == truth else 0.0
    if name == "arrive_time":
        return 1.0 if abs(int(filled) - int(truth)) <= time_tolerance_min else 0.0
    return 1.0 if abs(float(filled) - float(truth)) <= distance_tolerance * float(truth) else 0.0


def parse_masked_value(name: str, raw: str) -> Any:
    raw = raw.strip()
    if name == "arrive_time":
        return parse_clock(raw)
    if name == "distance_m":
        lo, hi = parse_distance_range(raw)
        return (lo + hi) / 2.0
    vocabulary = PURPOSES if name == "purpose" else MODES
    for word in vocabulary:
        if word.lower() == raw.lower():
            return word
    raise ValueError(f"'{raw}' is not a known {name}")


class PatternService:
    """
    Extracts per-cohort mobility patterns and scores them by self-evaluation
    on held-out diaries, re-extracting with failure examples when they fall short.
    """

    def __init__(self, event_bus: EventBus, gateway: LLMGateway, config: PatternConfig, ablation: AblationConfig,
                 binning: Binning, band_edges_m: Sequence[float], run_seed: int, temperature: float = 0.2,
                 max_tokens: int = 1024):
        self.event_bus = event_bus
        self.gateway = gateway
        self.config = config
        self.ablation = ablation
        self.binning = binning
        self.band_edges_m = tuple(band_edges_m)
        self.run_seed = run_seed
        self.params = GenerationParams(temperature=temperature, max_tokens=max_tokens)
        logger.info("PatternService initialized.")

    # --- extraction ---

    def _new_pattern(self, key: CohortKey, stats: CohortStats, narrative: str) -> MobilityPattern:
        return MobilityPattern(key, stats, narrative, stats_digest=stats.digest(self.binning))

    async def extract_patterns(self, cohort_key: CohortKey, stats: CohortStats,
                               failure_examples: Sequence[str] = ()) -> MobilityPattern:
        """One extraction call per dimension of the key; responses concatenated in key order."""
        digest = stats.digest(self.binning)
        behaviour = digest
        if failure_examples:
            behaviour += "\n\nExamples the current pattern failed to explain:\n" + "\n\n".join(failure_examples)
        dimensions = [dim for dim, _ in cohort_key] or [ROOT_DIMENSION]
        profile_text = describe_key(cohort_key, stats.member_count)
        responses = await asyncio.gather(*(
            self.gateway.complete("pattern_extraction", [profile_text, behaviour, dim], self.params,
                                  context={"stats": stats, "dimension": dim})
            for dim in dimensions
        ))
        narrative = "\n\n".join(text.strip() for text, _ in responses)
        return self._new_pattern(cohort_key, stats, narrative)

    # --- self-evaluation primitives ---

    async def infer_group(self, anonymized: TravelDiary, patterns: Sequence[MobilityPattern]) -> Tuple[int, str]:
        """Index into `patterns` of the predicted cohort, plus the rationale."""
        if not patterns:
            raise ValueError("infer_group needs at least one pattern")
        summaries = "\n\n".join(p.summary_text() for p in patterns)
        text, _ = await self.gateway.complete(
            "patterns_update_step1", [summaries, anonymized.anonymized_text()], self.params,
            context={"diary": anonymized, "candidates": [(p.label, p.stats) for p in patterns]},
        )
        index = match_label(text, [p.label for p in patterns])
        if index is None:
            raise UnmatchableResponse("No group label recognised in response", response=text[:200])
        return index, rationale_of(text)

    async def complete_masked(self, masked: MaskedDiary, pattern: MobilityPattern) -> CompletionResult:
        text, _ = await self.gateway.complete(
            "patterns_update_step2", [pattern.prompt_text(), masked.masked_text()], self.params,
            context={"masked": masked, "stats": pattern.stats},
        )
        fields = parse_fields(text)
        filled: Dict[Tuple[int, str], Any] = {}
        scores: Dict[Tuple[int, str], float] = {}
        for index, name in masked.sorted_masks():
            raw = fields.get(f"P{index + 1}.{name.upper()}")
            try:
                if raw is None:
                    raise UnparseableField(f"P{index + 1}.{name.upper()} missing from response")
                value = parse_masked_value(name, raw)
            except (ValueError, UnparseableField) as e:
                logger.debug(f"[PatternService] Unparseable masked field {index}/{name}: {e}")
                scores[(index, name)] = 0.0
                continue
            filled[(index, name)] = value
            scores[(index, name)] = score_field(name, value, masked.truth(index, name),
                                                self.config.time_tolerance_min, self.config.distance_tolerance)
        return CompletionResult(filled, scores, rationale_of(text))

    def mask_for(self, diary: TravelDiary, label: str, ordinal: int) -> MaskedDiary:
        rng = derive_rng(self.run_seed, "mask", label, ordinal)
        index = int(rng.integers(len(diary.points)))
        name = MASKABLE_FIELDS[int(rng.integers(len(MASKABLE_FIELDS)))]
        return MaskedDiary(diary, frozenset({(index, name)}))

    async def _evaluate_once(self, pattern: MobilityPattern, candidates: Sequence[MobilityPattern],
                             diaries: Sequence[TravelDiary]) -> EvaluationRound:
        own = next(i for i, p in enumerate(candidates) if p.label == pattern.label)
        correct, completion, attribute = 0.0, 0.0, 0.0
        failures: List[str] = []
        rationales: List[str] = []
        truth_pairs = set(pattern.cohort_key)
        for ordinal, diary in enumerate(diaries):
            try:
                predicted, why = await self.infer_group(diary, candidates)
            except UnmatchableResponse:
                predicted, why = None, ""
            if predicted == own:
                correct += 1
            else:
                named = candidates[predicted].label if predicted is not None else "no group"
                failures.append(f"{diary.anonymized_text()}\n(assigned to {named}, belongs to {pattern.label})")
            if predicted is None:
                attribute += 0.0 if truth_pairs else 1.0
            else:
                recovered = truth_pairs & set(candidates[predicted].cohort_key)
                attribute += len(recovered) / len(truth_pairs) if truth_pairs else 1.0
            if why:
                rationales.append(why)

            masked = self.mask_for(diary, pattern.label, ordinal)
            completion_result = await self.complete_masked(masked, pattern)
            completion += completion_result.score
            if completion_result.score < 1.0:
                failures.append(f"{masked.masked_text()}\n(masked fields filled incorrectly)")
            if completion_result.rationale:
                rationales.append(completion_result.rationale)

        n = len(diaries)
        return EvaluationRound(correct / n, completion / n, attribute / n, failures, rationales)

    async def self_evaluate(self, pattern: MobilityPattern, candidates: Sequence[MobilityPattern],
                            holdout: Sequence[TravelDiary]) -> MobilityPattern:
        """Scores one cohort's pattern; re-extracts with failure examples while a score is below threshold."""
        diaries = [d for d in holdout if d.points][: self.config.eval_min_trajectories]
        if not diaries:
            logger.info(f"[PatternService] No holdout diaries for {pattern.label}; left unevaluated.")
            return pattern

        result = await self._evaluate_once(pattern, candidates, diaries)
        pattern.eval_scores = result.scores()
        pattern.history.append({"revision": pattern.revision, "scores": result.scores()})
        insights = list(dict.fromkeys(result.rationales))
        while (min(result.group_inference_accuracy, result.masked_completion_score) < self.config.revision_threshold
               and pattern.revision < self.config.max_revision_rounds):
            revised = await self.extract_patterns(pattern.cohort_key, pattern.stats,
                                                  result.failures[:MAX_FAILURE_EXAMPLES])
            revised.revision = pattern.revision + 1
            revised.history = pattern.history
            current = [revised if p.label == pattern.label else p for p in candidates]
            result = await self._evaluate_once(revised, current, diaries)
            revised.eval_scores = result.scores()
            revised.history.append({"revision": revised.revision, "scores": result.scores()})
            insights.extend(r for r in result.rationales if r not in insights)
            self.event_bus.emit("pattern_revised", PatternRevised(revised.label, revised.revision, result.scores()))
            logger.info(f"[PatternService] Revised {revised.label} to revision {revised.revision}: {result.scores()}")
            pattern = revised
        pattern.insights = tuple(insights[: self.config.max_insights])
        return pattern

    # --- stage driver ---

    def holdout_split(self, groups: Sequence[Tuple[CohortKey, Sequence[str]]]) -> Dict[str, Tuple[str, ...]]:
        """floor(fraction * n) members of each evaluation cohort held out, by seeded shuffle."""
        held: Dict[str, Tuple[str, ...]] = {}
        for key, members in groups:
            label = key_label(key)
            ordered = sorted(members)
            rng = derive_rng(self.run_seed, "holdout", label)
            shuffled = [ordered[i] for i in rng.permutation(len(ordered))]
            held[label] = tuple(shuffled[: math.floor(self.config.holdout_fraction * len(ordered))])
        return held

    def _targets(self, dataset: Dataset, tree: CohortTree):
        """(pattern cohorts, evaluation cohorts) as (key, members) lists."""
        override = self.ablation.pattern_dims_override
        if override:
            flat = partition(dataset, override)
            return [((), dataset.person_ids)] + flat, flat
        everything = [(n.key, n.members) for n in tree.nodes]
        leaves = [(n.key, n.members) for n in tree.leaves()]
        return everything, leaves

    async def build_patterns(self, dataset: Dataset, tree: CohortTree) -> List[MobilityPattern]:
        targets, eval_groups = self._targets(dataset, tree)
        held = self.holdout_split(eval_groups)
        held_ids = {pid for ids in held.values() for pid in ids}

        def training(members: Sequence[str]) -> List[str]:
            return [pid for pid in members if pid not in held_ids]

        stats_list = []
        for key, members in targets:
            train = training(members)
            if set(train) & held_ids:
                raise HoldoutLeak(f"Training members of {key_label(key)} overlap the holdout")
            # A cohort too small to lose anyone to the holdout is summarized whole.
            stats_list.append(summarize(dataset, train or list(members), self.binning, self.band_edges_m))

        if self.ablation.disable_self_evaluation:
            patterns = [self._new_pattern(key, stats, stats.digest(self.binning))
                        for (key, _), stats in zip(targets, stats_list)]
            self.log("info", f"Self-evaluation disabled; {len(patterns)} digest-only patterns.")
            return patterns

        patterns = list(await asyncio.gather(*(
            self.extract_patterns(key, stats) for (key, _), stats in zip(targets, stats_list)
        )))

        by_label = {p.label: i for i, p in enumerate(patterns)}
        eval_patterns = [patterns[by_label[key_label(key)]] for key, _ in eval_groups]
        holdouts = []
        for key, members in eval_groups:
            held_members = held[key_label(key)]
            if set(held_members) & set(training(members)):
                raise HoldoutLeak(f"Holdout of {key_label(key)} overlaps its training members")
            holdouts.append(dataset.diaries_of(held_members))

        evaluated = await asyncio.gather(*(
            self.self_evaluate(pattern, eval_patterns, holdout)
            for pattern, holdout in zip(eval_patterns, holdouts)
        ))
        for pattern in evaluated:
            patterns[by_label[pattern.label]] = pattern
        revised = sum(1 for p in patterns if p.revision > 0)
        self.log("info", f"Built {len(patterns)} patterns; evaluated {len(evaluated)}, revised {revised}.")
        return patterns

    def write_patterns(self, patterns: Sequence[MobilityPattern], out_dir: Path, meta: dict) -> Path:
        return write_jsonl(Path(out_dir) / PATTERNS_FILE, (p.to_dict() for p in patterns), meta)

    def log(self, level: str, message: str):
        getattr(logger, level, logger.info)(f"[PatternService] {message}")
        self.event_bus.emit("log_message_received", "PatternService", level, message)
