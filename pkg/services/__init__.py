# services/__init__.py
from .survey_ingest_service import SurveyIngestService
from .synth_service import SynthService
from .spatial_anchor_service import SpatialAnchorService
from .cohort_service import CohortService
from .pattern_service import PatternService
from .population_service import PopulationService
from .diary_reasoner_service import DiaryReasonerService
from .evaluation_service import EvaluationService
from .run_log_service import RunLogService
from .command_handler import CommandHandler

__all__ = [
    "SurveyIngestService",
    "SynthService",
    "SpatialAnchorService",
    "CohortService",
    "PatternService",
    "PopulationService",
    "DiaryReasonerService",
    "EvaluationService",
    "RunLogService",
    "CommandHandler",
]
