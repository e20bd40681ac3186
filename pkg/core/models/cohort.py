# core/models/cohort.py
"""
Cohort keys, per-cohort behaviour counts and the cohort tree.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.binning import Binning
from core.models.diary import TravelDiary
from core.models.profile import IndividualProfile
from core.vocabulary import MODES, PURPOSES

CohortKey = Tuple[Tuple[str, Any], ...]
ROOT_LABEL = "ALL"
HOURS = 24
TRIPS_PER_DAY_BINS = 16  # 0..14 plus 15+
_PURPOSE_INDEX = {p: i for i, p in enumerate(PURPOSES)}
_MODE_INDEX = {m: i for i, m in enumerate(MODES)}


def key_label(key: CohortKey) -> str:
    if not key:
        return ROOT_LABEL
    return "|".join(f"{dim}={value}" for dim, value in key)


def key_matches(key: CohortKey, profile: IndividualProfile) -> bool:
    return all(profile.attribute(dim) == value for dim, value in key)


def key_to_list(key: CohortKey) -> List[List[Any]]:
    return [[dim, value] for dim, value in key]


def key_from_list(items: Iterable[Sequence[Any]]) -> CohortKey:
    return tuple((str(dim), value) for dim, value in items)


def band_of(distance_m: float, band_edges_m: Sequence[float]) -> int:
    return int(np.searchsorted(np.asarray(band_edges_m, dtype=float), distance_m, side="right"))


@dataclass
class BehaviorCounts:
    """
    Count tables over a set of person-days. Arrays are indexed by the order
    of PURPOSES and MODES; distance columns follow the shared Binning.
    """
    start_time_hist: np.ndarray
    distance_hist: np.ndarray
    mode_freq: np.ndarray
    purpose_freq: np.ndarray
    trips_per_day_hist: np.ndarray
    purpose_transition: np.ndarray
    first_start_hist: np.ndarray
    first_purpose_freq: np.ndarray
    purpose_distance_hist: np.ndarray
    mode_by_band: np.ndarray
    dwell_hist: np.ndarray
    day_count: int = 0

    @classmethod
    def empty(cls, binning: Binning, band_count: int) -> "BehaviorCounts":
        n_p, n_m, n_d = len(PURPOSES), len(MODES), binning.distance_bin_count
        zeros = lambda *shape: np.zeros(shape, dtype=np.int64)
        return cls(
            start_time_hist=zeros(HOURS),
            distance_hist=zeros(n_d),
            mode_freq=zeros(n_m),
            purpose_freq=zeros(n_p),
            trips_per_day_hist=zeros(TRIPS_PER_DAY_BINS),
            purpose_transition=zeros(n_p, n_p),
            first_start_hist=zeros(HOURS),
            first_purpose_freq=zeros(n_p),
            purpose_distance_hist=zeros(n_p, n_d),
            mode_by_band=zeros(band_count, n_m),
            dwell_hist=zeros(n_p, binning.si_bin_count),
        )

    def observe_empty_day(self):
        self.day_count += 1
        self.trips_per_day_hist[0] += 1

    def observe_diary(self, diary: TravelDiary, binning: Binning, band_edges_m: Sequence[float]):
        self.day_count += 1
        points = diary.points
        self.trips_per_day_hist[min(len(points), TRIPS_PER_DAY_BINS - 1)] += 1
        previous = None
        for index, point in enumerate(points):
            p = _PURPOSE_INDEX[point.purpose]
            m = _MODE_INDEX[point.mode]
            d = binning.distance_bin(point.distance_m)
            hour = max(0, point.depart_time) // 60
            self.start_time_hist[hour] += 1
            self.distance_hist[d] += 1
            self.mode_freq[m] += 1
            self.purpose_freq[p] += 1
            self.purpose_distance_hist[p, d] += 1
            self.mode_by_band[band_of(point.distance_m, band_edges_m), m] += 1
            if index == 0:
                self.first_start_hist[hour] += 1
                self.first_purpose_freq[p] += 1
            else:
                q = _PURPOSE_INDEX[previous.purpose]
                self.purpose_transition[q, p] += 1
                dwell = max(0, point.depart_time - previous.arrive_time)
                self.dwell_hist[q, binning.si_bin(dwell)] += 1
            previous = point

    @property
    def total_trips(self) -> int:
        return int(self.purpose_freq.sum())

    def merged(self, other: "BehaviorCounts") -> "BehaviorCounts":
        values = {name: getattr(self, name) + getattr(other, name) for name in _ARRAY_FIELDS}
        return BehaviorCounts(**values, day_count=self.day_count + other.day_count)

    def to_dict(self) -> Dict[str, Any]:
        data = {name: getattr(self, name).tolist() for name in _ARRAY_FIELDS}
        data["day_count"] = self.day_count
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BehaviorCounts":
        values = {name: np.asarray(data[name], dtype=np.int64) for name in _ARRAY_FIELDS}
        return cls(**values, day_count=int(data.get("day_count", 0)))


_ARRAY_FIELDS = (
    "start_time_hist", "distance_hist", "mode_freq", "purpose_freq", "trips_per_day_hist",
    "purpose_transition", "first_start_hist", "first_purpose_freq", "purpose_distance_hist",
    "mode_by_band", "dwell_hist",
)


def _shares(counts: np.ndarray, labels: Sequence[str], top: int) -> str:
    total = counts.sum()
    if total <= 0:
        return "none"
    order = sorted(range(len(counts)), key=lambda i: (-counts[i], i))[:top]
    return ", ".join(f"{labels[i]} {100.0 * counts[i] / total:.1f}%" for i in order if counts[i] > 0)


@dataclass
class CohortStats:
    member_count: int
    all: BehaviorCounts
    weekday: BehaviorCounts
    weekend: BehaviorCounts
    band_edges_m: Tuple[float, ...] = (1000.0, 3000.0, 10000.0)

    def for_day_type(self, day_type: Optional[str]) -> BehaviorCounts:
        """Counts for a day type, falling back to all days when that type was never observed."""
        counts = {"weekday": self.weekday, "weekend": self.weekend}.get(day_type or "all", self.all)
        return counts if counts.day_count > 0 else self.all

    def digest(self, binning: Binning) -> str:
        """Plain-text statistics summary. Used as prompt context and as the replay pattern narrative."""
        counts = self.all
        lines = [
            f"members: {self.member_count}",
            f"person-days: {counts.day_count}",
            f"trips: {counts.total_trips}",
        ]
        if counts.total_trips:
            peak = int(np.argmax(counts.start_time_hist))
            lines.append(f"peak start hour: {peak}")
            hours = ", ".join(f"{h}:{int(c)}" for h, c in enumerate(counts.start_time_hist) if c)
            lines.append(f"start hours (hour:count): {hours}")
            if counts.first_start_hist.sum():
                lines.append(f"first departure peak hour: {int(np.argmax(counts.first_start_hist))}")
            median_bin = _median_index(counts.distance_hist)
            low, high = binning.distance_bounds(median_bin)
            lines.append(f"median trip distance: {low:.0f}-{high:.0f} m")
            lines.append(f"purposes: {_shares(counts.purpose_freq, PURPOSES, 5)}")
            lines.append(f"modes: {_shares(counts.mode_freq, MODES, 4)}")
        if counts.day_count:
            trips = np.arange(TRIPS_PER_DAY_BINS)
            mean = float((trips * counts.trips_per_day_hist).sum()) / counts.day_count
            lines.append(f"trips per day: mean {mean:.2f}")
        for day_type, sub in (("weekday", self.weekday), ("weekend", self.weekend)):
            if sub.total_trips:
                lines.append(f"{day_type} peak start hour: {int(np.argmax(sub.start_time_hist))} "
                             f"({sub.day_count} person-days)")
        return "\n".join(lines)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "member_count": self.member_count,
            "band_edges_m": list(self.band_edges_m),
            "all": self.all.to_dict(),
            "weekday": self.weekday.to_dict(),
            "weekend": self.weekend.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CohortStats":
        return cls(
            member_count=int(data["member_count"]),
            all=BehaviorCounts.from_dict(data["all"]),
            weekday=BehaviorCounts.from_dict(data["weekday"]),
            weekend=BehaviorCounts.from_dict(data["weekend"]),
            band_edges_m=tuple(float(v) for v in data.get("band_edges_m", (1000.0, 3000.0, 10000.0))),
        )


def _median_index(counts: np.ndarray) -> int:
    total = counts.sum()
    if total <= 0:
        return 0
    cumulative = np.cumsum(counts)
    return int(np.searchsorted(cumulative, total / 2.0, side="left"))


@dataclass
class CohortNode:
    node_id: int
    key: CohortKey
    members: Tuple[str, ...]
    stats: CohortStats
    parent_id: Optional[int] = None
    depth: int = 0
    children: List[int] = field(default_factory=list)
    split_dimension: Optional[str] = None
    gate_score: Optional[int] = None

    @property
    def label(self) -> str:
        return key_label(self.key)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def to_dict(self) -> Dict[str, Any]:
        return {
            "node_id": self.node_id,
            "parent_id": self.parent_id,
            "depth": self.depth,
            "label": self.label,
            "key": key_to_list(self.key),
            "members": list(self.members),
            "children": list(self.children),
            "split_dimension": self.split_dimension,
            "gate_score": self.gate_score,
            "stats": self.stats.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CohortNode":
        return cls(
            node_id=int(data["node_id"]),
            key=key_from_list(data["key"]),
            members=tuple(data["members"]),
            stats=CohortStats.from_dict(data["stats"]),
            parent_id=data.get("parent_id"),
            depth=int(data.get("depth", 0)),
            children=[int(c) for c in data.get("children", [])],
            split_dimension=data.get("split_dimension"),
            gate_score=data.get("gate_score"),
        )


@dataclass
class CohortTree:
    """Nodes in breadth-first order; node 0 is the root."""
    nodes: List[CohortNode]

    @property
    def root(self) -> CohortNode:
        return self.nodes[0]

    def node(self, node_id: int) -> CohortNode:
        return self.nodes[node_id]

    def children_of(self, node: CohortNode) -> List[CohortNode]:
        return [self.nodes[c] for c in node.children]

    def leaves(self) -> List[CohortNode]:
        return [n for n in self.nodes if n.is_leaf]

    def lookup(self, profile: IndividualProfile) -> CohortNode:
        """Deepest node whose key the profile satisfies."""
        node = self.root
        while True:
            nxt = next((c for c in self.children_of(node) if key_matches(c.key, profile)), None)
            if nxt is None:
                return node
            node = nxt

    def to_records(self) -> List[Dict[str, Any]]:
        return [n.to_dict() for n in self.nodes]

    @classmethod
    def from_records(cls, records: Iterable[Dict[str, Any]]) -> "CohortTree":
        nodes = sorted((CohortNode.from_dict(r) for r in records), key=lambda n: n.node_id)
        return cls(nodes)
