# providers/replay_provider.py
"""
Statistical replay backend: ignores prompt prose and answers from the cohort
statistics attached to the request context, with a counter-based RNG keyed by
(run_seed, request_hash).
"""
import itertools
import logging
import math
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.binning import Binning
from core.divergence import jsd_counts
from core.errors import BackendError, MissingContext
from core.models.cohort import HOURS, BehaviorCounts, band_of
from core.models.diary import MINUTES_PER_DAY, TravelDiary, format_clock
from core.models.pattern import MaskedDiary
from core.models.plan import ActivityDecision, PlanEntry
from core.models.transcript import PromptRequest, request_hash
from core.rng import choice_index, derive_rng
from core.vocabulary import MODES, PURPOSE_CATEGORIES, PURPOSES
from .base import LLMBackend

logger = logging.getLogger(__name__)

WINDOW_WIDTH = 29
MIN_SAMPLED_M = 20.0
MAX_SAMPLED_M = 90000.0


def gate_score(candidates: Sequence[BehaviorCounts], jsd_scale: float) -> Tuple[int, float]:
    """
    Rating from the largest pairwise JSD among candidate start-time and
    distance histograms: floor(1 + 9 * min(1, maxJSD / scale) + 0.5).
    """
    max_jsd = 0.0
    for a, b in itertools.combinations(candidates, 2):
        for name in ("start_time_hist", "distance_hist"):
            p, q = getattr(a, name), getattr(b, name)
            if p.sum() > 0 and q.sum() > 0:
                max_jsd = max(max_jsd, jsd_counts(p, q))
    score = math.floor(1 + 9 * min(1.0, max_jsd / jsd_scale) + 0.5)
    return int(min(10, max(1, score))), max_jsd


class ReplaySampler:
    """Samples plans and decisions from BehaviorCounts. Shared with the reasoner's fallback path."""

    def __init__(self, binning: Binning, cruise_speeds_kmh: Mapping[str, float], band_edges_m: Sequence[float]):
        self.binning = binning
        self.cruise_speeds_kmh = dict(cruise_speeds_kmh)
        self.band_edges_m = tuple(band_edges_m)

    def _draw(self, rng: np.random.Generator, primary: np.ndarray, fallback: np.ndarray) -> int:
        return choice_index(rng, primary if primary.sum() > 0 else fallback)

    def _sample_distance(self, counts: BehaviorCounts, purpose_index: int, rng: np.random.Generator) -> float:
        bin_index = self._draw(rng, counts.purpose_distance_hist[purpose_index], counts.distance_hist)
        low, high = self.binning.distance_bounds(bin_index)
        low = max(low, MIN_SAMPLED_M)
        if high <= low:
            return min(low, MAX_SAMPLED_M)
        value = math.exp(rng.uniform(math.log(low), math.log(high)))
        return min(value, MAX_SAMPLED_M)

    def sample_plan(self, counts: BehaviorCounts, rng: np.random.Generator) -> List[PlanEntry]:
        trip_count = choice_index(rng, counts.trips_per_day_hist)
        if trip_count == 0 or counts.total_trips == 0:
            return []

        entries: List[PlanEntry] = []
        purpose_index: Optional[int] = None
        for step in range(trip_count):
            if step == 0:
                purpose_index = self._draw(rng, counts.first_purpose_freq, counts.purpose_freq)
                hour = self._draw(rng, counts.first_start_hist, counts.start_time_hist)
                window_start = hour * 60
            else:
                dwell_bin = self._draw(rng, counts.dwell_hist[purpose_index], np.ones(self.binning.si_bin_count))
                previous = entries[-1]
                window_start = previous.planned_arrival(self.cruise_speeds_kmh) + dwell_bin * self.binning.si_bin_min
                purpose_index = self._draw(rng, counts.purpose_transition[purpose_index], counts.purpose_freq)
            if window_start >= MINUTES_PER_DAY:
                break
            window_end = min(window_start + WINDOW_WIDTH, MINUTES_PER_DAY - 1)

            purpose = PURPOSES[purpose_index]
            distance = self._sample_distance(counts, purpose_index, rng)
            band = band_of(distance, self.band_edges_m)
            mode = MODES[self._draw(rng, counts.mode_by_band[band], counts.mode_freq)]
            categories = PURPOSE_CATEGORIES[purpose]
            category = categories[int(rng.integers(len(categories)))] if len(categories) > 1 else categories[0]
            entries.append(PlanEntry(
                window_start=window_start,
                window_end=window_end,
                purpose=purpose,
                category=category,
                d_lo=int(math.floor(0.9 * distance)),
                d_hi=int(math.ceil(1.1 * distance)),
                mode=mode,
            ))
        return entries

    def decide(self, entry: PlanEntry, current_time: int, rng: np.random.Generator) -> ActivityDecision:
        """
        The entry's fields with a departure drawn uniformly from the part of its
        window still ahead of `current_time`. Once the window has passed the
        departure is the next minute.
        """
        earliest = max(entry.window_start, current_time + 1)
        if earliest <= entry.window_end:
            depart = earliest + int(rng.integers(0, entry.window_end - earliest + 1))
        else:
            depart = min(current_time + 1, MINUTES_PER_DAY - 1)
        return ActivityDecision(
            depart_time=depart,
            purpose=entry.purpose,
            category=entry.category,
            d_lo=entry.d_lo,
            d_hi=entry.d_hi,
            mode=entry.mode,
            rationale="sampled from cohort statistics",
        )

    def diary_histograms(self, diary: TravelDiary) -> Tuple[np.ndarray, np.ndarray]:
        start = np.zeros(HOURS, dtype=np.int64)
        distance = np.zeros(self.binning.distance_bin_count, dtype=np.int64)
        for point in diary.points:
            start[max(0, point.depart_time) // 60] += 1
            distance[self.binning.distance_bin(point.distance_m)] += 1
        return start, distance

    def group_distances(self, diary: TravelDiary, candidates: Sequence[BehaviorCounts]) -> List[float]:
        start, distance = self.diary_histograms(diary)
        scores = []
        for counts in candidates:
            if counts.start_time_hist.sum() == 0 or start.sum() == 0:
                scores.append(math.inf)
                continue
            scores.append(jsd_counts(start, counts.start_time_hist) + jsd_counts(distance, counts.distance_hist))
        return scores

    def infer_group(self, diary: TravelDiary, candidates: Sequence[BehaviorCounts]) -> int:
        """Nearest cohort by start-time plus distance JSD; first candidate wins ties."""
        scores = self.group_distances(diary, candidates)
        best = 0
        for index, score in enumerate(scores):
            if score < scores[best]:
                best = index
        return best

    def complete_masked(self, masked: MaskedDiary, counts: BehaviorCounts) -> Dict[Tuple[int, str], Any]:
        modal_purpose = PURPOSES[int(np.argmax(counts.purpose_freq))]
        filled: Dict[Tuple[int, str], Any] = {}
        for index, name in masked.sorted_masks():
            if name == "purpose":
                filled[(index, name)] = modal_purpose
            elif name == "mode":
                filled[(index, name)] = MODES[int(np.argmax(counts.mode_freq))]
            elif name == "arrive_time":
                filled[(index, name)] = int(np.argmax(counts.start_time_hist)) * 60 + 30
            else:
                purpose = modal_purpose if (index, "purpose") in masked.masks else masked.base.points[index].purpose
                row = counts.purpose_distance_hist[PURPOSES.index(purpose)]
                if row.sum() == 0:
                    row = counts.distance_hist
                filled[(index, name)] = self._median_distance(row)
        return filled

    def _median_distance(self, row: np.ndarray) -> int:
        total = row.sum()
        if total <= 0:
            return 0
        bin_index = int(np.searchsorted(np.cumsum(row), total / 2.0, side="left"))
        low, high = self.binning.distance_bounds(bin_index)
        if low <= 0:
            return int(round(high / 2.0))
        return int(round(math.sqrt(low * high)))


class ReplayBackend(LLMBackend):
    """Deterministic offline stand-in for the language model."""

    backend_id = "replay"

    def __init__(self, sampler: ReplaySampler, run_seed: int, gate_jsd_scale: float = 0.3):
        self.sampler = sampler
        self.run_seed = run_seed
        self.gate_jsd_scale = gate_jsd_scale
        # The seed is part of the backend identity so cached replies never cross seeds.
        self.model_name = f"replay-{run_seed}"
        self.calls = 0
        self._handlers = {
            "initial_group_division": self._rate_split,
            "pattern_extraction": self._describe_stats,
            "patterns_update_step1": self._infer_group,
            "patterns_update_step2": self._complete_masked,
            "daily_plan": self._plan,
            "recursive_reasoning": self._decide,
        }

    @staticmethod
    def _require(request: PromptRequest, *keys: str):
        for key in keys:
            if key not in request.context:
                raise MissingContext(request.template_id, key)
        return [request.context[key] for key in keys]

    async def generate(self, request: PromptRequest) -> str:
        self.calls += 1
        handler = self._handlers.get(request.template_id)
        if handler is None:
            raise BackendError(f"Replay backend cannot answer template '{request.template_id}'",
                               template_id=request.template_id)
        rng = derive_rng(self.run_seed, request_hash(self.backend_id, self.model_name, request.prompt,
                                                     request.params.temperature))
        return handler(request, rng)

    def _rate_split(self, request: PromptRequest, rng) -> str:
        (candidates,) = self._require(request, "candidates")
        score, max_jsd = gate_score([c.all for c in candidates], self.gate_jsd_scale)
        return f"Largest pairwise divergence between candidate subgroups: {max_jsd:.4f}.\nRATING: {score}"

    def _describe_stats(self, request: PromptRequest, rng) -> str:
        stats, dimension = self._require(request, "stats", "dimension")
        return f"Dimension: {dimension}\n{stats.digest(self.sampler.binning)}"

    def _infer_group(self, request: PromptRequest, rng) -> str:
        diary, candidates = self._require(request, "diary", "candidates")
        labels = [label for label, _ in candidates]
        counts = [stats.all for _, stats in candidates]
        scores = self.sampler.group_distances(diary, counts)
        best = self.sampler.infer_group(diary, counts)
        return (f"Closest group by start-time and distance divergence ({scores[best]:.4f}).\n"
                f"GROUP: {labels[best]}")

    def _complete_masked(self, request: PromptRequest, rng) -> str:
        masked, stats = self._require(request, "masked", "stats")
        filled = self.sampler.complete_masked(masked, stats.all)
        lines = []
        for (index, name), value in sorted(filled.items()):
            if name == "arrive_time":
                value = format_clock(value)
            lines.append(f"P{index + 1}.{name.upper()}: {value}")
        return "Filled with the group's most common values.\n```\n" + "\n".join(lines) + "\n```"

    def _plan(self, request: PromptRequest, rng) -> str:
        stats, day_type = self._require(request, "stats", "day_type")
        entries = self.sampler.sample_plan(stats.for_day_type(day_type), rng)
        if not entries:
            return "```\nTRIPS: 0\n```"
        return "```\n" + "\n\n".join(e.to_block() for e in entries) + "\n```"

    def _decide(self, request: PromptRequest, rng) -> str:
        entry, current_time = self._require(request, "entry", "current_time")
        decision = self.sampler.decide(entry, current_time, rng)
        return f"Following the plan ({entry.purpose}).\n```\n{decision.to_block()}\n```"


__all__ = ["ReplayBackend", "ReplaySampler", "gate_score"]
