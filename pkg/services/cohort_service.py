# services/cohort_service.py
import asyncio
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import pandas as pd

from core.binning import Binning
from core.errors import EmptyCohort, UnknownDimension, UnparseableScore
from core.llm_client import LLMGateway
from core.managers.config_manager import CohortConfig
from core.models.cohort import (HOURS, BehaviorCounts, CohortKey, CohortNode, CohortStats, CohortTree,
                                key_label)
from core.models.dataset import Dataset
from core.models.transcript import GenerationParams
from core.response_parser import extract_score
from core.storage import write_csv, write_jsonl
from core.vocabulary import PROFILE_DIMENSIONS
from event_bus import EventBus
from events import CohortSplitDecided
from providers.replay_provider import gate_score

logger = logging.getLogger(__name__)

TREE_FILE = "cohort_tree.jsonl"
START_HOURS_FILE = "cohort_start_hours.csv"


@dataclass(frozen=True)
class GateDecision:
    score: int
    split: bool
    rationale: str


def partition(dataset: Dataset, dims: Sequence[str], members: Optional[Iterable[str]] = None,
              base_key: CohortKey = ()) -> List[Tuple[CohortKey, Tuple[str, ...]]]:
    """
    Exact partition of `members` (default: everyone) by the values of `dims`.
    Cohorts come out in vocabulary order; empty ones are omitted.
    """
    if not dims:
        raise ValueError("partition needs at least one dimension")
    for dim in dims:
        if dim not in PROFILE_DIMENSIONS:
            raise UnknownDimension(dim)
    groups: Dict[Tuple, List[str]] = {}
    for person_id in (dataset.person_ids if members is None else members):
        profile = dataset.profiles[person_id]
        values = tuple(getattr(profile, dim) for dim in dims)
        groups.setdefault(values, []).append(person_id)

    def order(values: Tuple) -> Tuple[int, ...]:
        return tuple(PROFILE_DIMENSIONS[dim].index(v) for dim, v in zip(dims, values))

    return [
        (tuple(base_key) + tuple(zip(dims, values)), tuple(ids))
        for values, ids in sorted(groups.items(), key=lambda item: order(item[0]))
    ]


def summarize(dataset: Dataset, members: Sequence[str], binning: Binning,
              band_edges_m: Sequence[float] = (1000.0, 3000.0, 10000.0)) -> CohortStats:
    if not members:
        raise EmptyCohort()
    member_set = set(members)
    bands = len(band_edges_m) + 1
    counts = {name: BehaviorCounts.empty(binning, bands) for name in ("all", "weekday", "weekend")}
    for diary in dataset.diaries:
        if diary.person_id in member_set:
            counts["all"].observe_diary(diary, binning, band_edges_m)
            counts[diary.day_type].observe_diary(diary, binning, band_edges_m)
    for person_id, date in dataset.empty_days:
        if person_id in member_set:
            counts["all"].observe_empty_day()
            counts["weekend" if date.weekday() >= 5 else "weekday"].observe_empty_day()
    return CohortStats(len(member_set), counts["all"], counts["weekday"], counts["weekend"], tuple(band_edges_m))


class CohortService:
    """
    Builds the cohort tree: breadth-first attribute splits, each one approved
    by the rating gate and by the minimum cohort size.
    """

    def __init__(self, event_bus: EventBus, gateway: LLMGateway, config: CohortConfig, binning: Binning,
                 band_edges_m: Sequence[float], gate_temperature: float = 0.0):
        self.event_bus = event_bus
        self.gateway = gateway
        self.config = config
        self.binning = binning
        self.band_edges_m = tuple(band_edges_m)
        self.gate_temperature = gate_temperature
        logger.info("CohortService initialized.")

    def summarize(self, dataset: Dataset, members: Sequence[str]) -> CohortStats:
        return summarize(dataset, members, self.binning, self.band_edges_m)

    async def segmentation_gate(self, parent: CohortStats, candidate_splits: Sequence[CohortStats], dim: str,
                                key: CohortKey = ()) -> GateDecision:
        if self.gateway.is_replay:
            score, max_jsd = gate_score([c.all for c in candidate_splits], self.config.gate_jsd_scale)
            rationale = f"max pairwise JSD {max_jsd:.4f} across {len(candidate_splits)} candidate subgroups"
            return GateDecision(score, score >= self.config.split_threshold, rationale)

        slots = [parent.digest(self.binning), key_label(key) if key else "the whole population", dim]
        params = GenerationParams(temperature=self.gate_temperature)
        feedback = None
        for attempt in range(self.config.gate_max_retries + 1):
            text, _ = await self.gateway.complete("initial_group_division", slots, params, feedback,
                                                  {"candidates": list(candidate_splits)})
            score = extract_score(text)
            if score is not None:
                return GateDecision(score, score >= self.config.split_threshold, text.strip())
            logger.warning(f"[CohortService] No rating in gate response for '{dim}' (attempt {attempt + 1}).")
            feedback = f"Answer {attempt + 1} did not contain a rating between 1 and 10."
        raise UnparseableScore(text)

    async def _expand(self, dataset: Dataset, node: CohortNode):
        """
        Offers each unused dimension to the gate in configured order. A rejected
        or undersized split moves on to the next dimension; the first accepted
        one is returned, or None once every dimension has been declined.
        """
        used = {dim for dim, _ in node.key}
        for dim in self.config.dimensions:
            if dim in used:
                continue
            children = partition(dataset, [dim], node.members, node.key)
            if len(children) < 2:
                continue
            stats = [self.summarize(dataset, ids) for _, ids in children]
            decision = await self.segmentation_gate(node.stats, stats, dim, node.key)
            big_enough = all(len(ids) >= self.config.min_cohort_size for _, ids in children)
            accepted = decision.split and big_enough
            self.event_bus.emit("cohort_split_decided",
                                CohortSplitDecided(node.label, dim, decision.score, accepted))
            logger.debug(f"[CohortService] {node.label} on {dim}: score {decision.score}, "
                         f"sizes {[len(ids) for _, ids in children]}, accepted={accepted}")
            if accepted:
                return dim, decision.score, children, stats
        return None

    async def refine_hierarchy(self, dataset: Dataset) -> CohortTree:
        members = dataset.person_ids
        root = CohortNode(0, (), tuple(members), self.summarize(dataset, members))
        nodes = [root]
        frontier = [root]
        depth = 0
        while frontier and depth < self.config.max_depth:
            results = await asyncio.gather(*(self._expand(dataset, node) for node in frontier))
            next_frontier = []
            for node, result in zip(frontier, results):
                if result is None:
                    continue
                dim, score, children, stats = result
                node.split_dimension = dim
                node.gate_score = score
                for (key, ids), child_stats in zip(children, stats):
                    child = CohortNode(len(nodes), key, ids, child_stats, parent_id=node.node_id, depth=depth + 1)
                    node.children.append(child.node_id)
                    nodes.append(child)
                    next_frontier.append(child)
            frontier = next_frontier
            depth += 1

        tree = CohortTree(nodes)
        self.log("info", f"Cohort tree built: {len(nodes)} nodes, {len(tree.leaves())} leaves, depth {depth}.")
        return tree

    def write_tree(self, tree: CohortTree, out_dir: Path, meta: dict) -> List[Path]:
        out_dir = Path(out_dir)
        rows = []
        for leaf in tree.leaves():
            row = {"cohort": leaf.label, "members": leaf.stats.member_count}
            row.update({f"h{h:02d}": int(leaf.stats.all.start_time_hist[h]) for h in range(HOURS)})
            rows.append(row)
        frame = pd.DataFrame(rows)
        return [
            write_jsonl(out_dir / TREE_FILE, tree.to_records(), meta),
            write_csv(out_dir / START_HOURS_FILE, frame, meta),
        ]

    def log(self, level: str, message: str):
        getattr(logger, level, logger.info)(f"[CohortService] {message}")
        self.event_bus.emit("log_message_received", "CohortService", level, message)
