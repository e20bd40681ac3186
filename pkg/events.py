# events.py
from dataclasses import dataclass, field
from typing import Any, Dict, List


# --- Pipeline Stage Events ---

@dataclass
class StageStarted:
    """Published by the Application when a subcommand begins."""
    stage: str

@dataclass
class StageFinished:
    """Published when a subcommand completes; lists the artifacts it wrote."""
    stage: str
    artifacts: List[str] = field(default_factory=list)


# --- Cohort & Pattern Events ---

@dataclass
class CohortSplitDecided:
    cohort_label: str
    dimension: str
    score: int
    split: bool

@dataclass
class PatternRevised:
    """Published after each pattern-update round."""
    cohort_label: str
    revision: int
    scores: Dict[str, Any]


# --- Diary Generation Events ---

@dataclass
class DecisionRethought:
    person_id: str
    step: int
    attempt: int
    violations: List[str]

@dataclass
class StepFellBack:
    """A step exhausted its rethinks and was filled by the replay sampler."""
    person_id: str
    step: int
    reason: str

@dataclass
class StepDropped:
    person_id: str
    step: int
    reason: str

@dataclass
class DiaryGenerated:
    person_id: str
    date: str
    point_count: int

