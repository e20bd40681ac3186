# core/models/pattern.py
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Optional, Tuple

from core.models.cohort import CohortKey, CohortStats, key_from_list, key_label, key_to_list
from core.models.diary import TravelDiary, format_clock

MASKABLE_FIELDS = ("arrive_time", "purpose", "mode", "distance_m")
MASK_TOKEN = "[MASKED]"


@dataclass
class MobilityPattern:
    cohort_key: CohortKey
    stats: CohortStats
    narrative: str
    revision: int = 0
    eval_scores: Optional[Dict[str, float]] = None
    insights: Tuple[str, ...] = field(default_factory=tuple)
    history: List[Dict[str, Any]] = field(default_factory=list)
    stats_digest: str = ""

    @property
    def label(self) -> str:
        return key_label(self.cohort_key)

    def prompt_text(self) -> str:
        """What generation prompts see as the cohort's mobility pattern."""
        parts = [f"Group: {self.label}", self.stats_digest, self.narrative]
        if self.insights:
            parts.append("Insights from earlier evaluation:\n" + "\n".join(f"- {i}" for i in self.insights))
        return "\n\n".join(p for p in parts if p)

    def summary_text(self) -> str:
        """Label plus digest, the form listed in group-inference prompts."""
        return f"GROUP {self.label}\n{self.stats_digest}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cohort_key": key_to_list(self.cohort_key),
            "label": self.label,
            "revision": self.revision,
            "eval_scores": self.eval_scores,
            "narrative": self.narrative,
            "insights": list(self.insights),
            "history": self.history,
            "stats_digest": self.stats_digest,
            "stats": self.stats.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MobilityPattern":
        return cls(
            cohort_key=key_from_list(data["cohort_key"]),
            stats=CohortStats.from_dict(data["stats"]),
            narrative=data.get("narrative", ""),
            revision=int(data.get("revision", 0)),
            eval_scores=data.get("eval_scores"),
            insights=tuple(data.get("insights") or ()),
            history=list(data.get("history") or []),
            stats_digest=data.get("stats_digest", ""),
        )


@dataclass(frozen=True)
class MaskedDiary:
    base: TravelDiary
    masks: FrozenSet[Tuple[int, str]]

    def __post_init__(self):
        if not self.masks:
            raise ValueError("a masked diary needs at least one mask")
        for index, name in self.masks:
            if name not in MASKABLE_FIELDS or not 0 <= index < len(self.base.points):
                raise ValueError(f"invalid mask ({index}, {name})")

    def sorted_masks(self) -> List[Tuple[int, str]]:
        return sorted(self.masks)

    def truth(self, index: int, name: str) -> Any:
        return getattr(self.base.points[index], name)

    def masked_text(self) -> str:
        """Anonymous rendering with masked fields replaced by a token; points numbered from 1."""
        lines = [f"Date: {self.base.date.isoformat()} ({self.base.day_type})"]
        for index, point in enumerate(self.base.points):
            hidden = {name for i, name in self.masks if i == index}
            arrive = MASK_TOKEN if "arrive_time" in hidden else format_clock(point.arrive_time)
            purpose = MASK_TOKEN if "purpose" in hidden else point.purpose
            mode = MASK_TOKEN if "mode" in hidden else point.mode
            distance = MASK_TOKEN if "distance_m" in hidden else f"{point.distance_m:.0f} m"
            lines.append(f"P{index + 1}: arrive {arrive}, purpose {purpose}, mode {mode}, distance {distance}")
        return "\n".join(lines)
