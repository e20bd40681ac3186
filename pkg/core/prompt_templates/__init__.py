# core/prompt_templates/__init__.py
"""
Exposes the six prompt templates by template id. Bodies are fixed text with
<INPUT n> slots; each template may append an output contract.
"""
from typing import Dict, Sequence

from core.errors import MobForgeError

from .base import SlotPrompt
from .daily_plan import DailyPlanPrompt
from .group_division import InitialGroupDivisionPrompt
from .pattern_extraction import PatternExtractionPrompt
from .patterns_update import GroupInferencePrompt, MaskedCompletionPrompt
from .recursive_reasoning import RecursiveReasoningPrompt
from .rules import OutputContracts

TEMPLATES: Dict[str, SlotPrompt] = {
    prompt.template_id: prompt
    for prompt in (
        InitialGroupDivisionPrompt(),
        PatternExtractionPrompt(),
        GroupInferencePrompt(),
        MaskedCompletionPrompt(),
        DailyPlanPrompt(),
        RecursiveReasoningPrompt(),
    )
}


def get_template(template_id: str) -> SlotPrompt:
    try:
        return TEMPLATES[template_id]
    except KeyError:
        raise MobForgeError(f"Unknown template '{template_id}'", template_id=template_id)


def render_prompt(template_id: str, slots: Sequence[str]) -> str:
    return get_template(template_id).render(slots)


__all__ = [
    "TEMPLATES",
    "get_template",
    "render_prompt",
    "OutputContracts",
    "SlotPrompt",
    "DailyPlanPrompt",
    "InitialGroupDivisionPrompt",
    "PatternExtractionPrompt",
    "GroupInferencePrompt",
    "MaskedCompletionPrompt",
    "RecursiveReasoningPrompt",
]
