# core/prompt_templates/pattern_extraction.py
from .base import SlotPrompt


class PatternExtractionPrompt(SlotPrompt):
    """Free-prose analysis of one attribute dimension of a cohort; no structured output."""

    template_id = "pattern_extraction"

    _body = "\n\n".join([
        "The profiles of this group are as follows <INPUT 1>.",
        "The patterns and distributions of their travel behaviors are as follows <INPUT 2>.",
        "Please use common knowledge and logical reasoning to deeply consider the impact of each dimension of the "
        "group's attributes on their travel patterns. Please list in detail the correlations between each attribute "
        "and travel behavior, and analyze the fundamental reasons behind these connections. Please first analyze "
        "the dimension <INPUT 3>.",
    ])
