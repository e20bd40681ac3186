# core/prompt_templates/recursive_reasoning.py
from .base import SlotPrompt
from .rules import OutputContracts


class RecursiveReasoningPrompt(SlotPrompt):
    """One step of the day walk: what is the person doing at the current time."""

    template_id = "recursive_reasoning"

    _body = "\n\n".join([
        "Current time: <INPUT 1>",
        "Overall plan for today: <INPUT 2>",
        "Earlier schedule for today: <INPUT 3>",
        "Individual profiles: <INPUT 4>",
        "Mobility patterns of this group: <INPUT 5>",
        "Task: Based on the overall plan for today and the given earlier schedule, infer what the person is most "
        "likely doing at the current time. Please fully consider real-world plausibility. If there is any travel "
        "involved, provide the destination and the most likely range of travel distance, taking into account the "
        "group's attributes and mobility patterns.",
    ])

    _contract = OutputContracts.DECISION
