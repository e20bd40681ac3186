# core/prompt_templates/daily_plan.py
from .base import SlotPrompt
from .rules import OutputContracts


class DailyPlanPrompt(SlotPrompt):
    """Day-level plan for one profile: <INPUT 1> profile, <INPUT 2> pattern, <INPUT 3> date and day type."""

    template_id = "daily_plan"

    _body = "\n\n".join([
        "You are a daily planning expert, skilled at creating clear and reasonable daily plans for individuals based "
        "on various factors (such as location, external conditions, personal attributes, and previous reflections).",
        "Skill:",
        "Creating a daily life plan for someone.",
        "The individual profiles are as follows: <INPUT 1>.",
        "The mobility patterns of this group are as follows: <INPUT 2>.",
        "Please deeply analyze the mobility patterns and accurately infer what activities the person will likely "
        "engage in throughout the day and for how long. Present the plan in a step-by-step, executable format.",
        "Constraints:",
        "The plan should not include any speculative or uncertain terms.",
        "If there are any unspecified contexts, you may make appropriate assumptions to ensure the plan appears "
        "realistic.",
        "Provide the plan directly, without explanations or summaries.",
        "Now, please provide the plan for <INPUT 3>.",
    ])

    _contract = OutputContracts.PLAN
