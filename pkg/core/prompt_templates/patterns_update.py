# core/prompt_templates/patterns_update.py
from .base import SlotPrompt
from .rules import OutputContracts


class GroupInferencePrompt(SlotPrompt):
    """Self-evaluation, first step: which cohort does an anonymous diary belong to."""

    template_id = "patterns_update_step1"

    _body = "\n\n".join([
        "These are the mobility patterns you have identified <INPUT 1>. These are the travel trajectories I have "
        "provided <INPUT 2>. Please analyze the observed anonymous travel trajectories and compare them with the "
        "patterns you have identified.",
        "Please follow the steps below:",
        "Look at each trajectory and compare it to the patterns you identified.",
        "Decide which group the trajectory belongs to. For example, if the trajectory shows regular long-distance "
        "travel during work hours, it might belong to 'young professionals'. Furthermore, you need to infer the age, "
        "income level, and gender of 'young professionals'.",
        "Explain your reasoning. For instance, \"This trajectory shows long commutes in the morning and evening, "
        "matching the 'young professionals' pattern.\"",
        "Start with the first trajectory: Describe it, infer the group, and explain your reasoning.",
    ])

    _contract = OutputContracts.GROUP


class MaskedCompletionPrompt(SlotPrompt):
    """Self-evaluation, second step: fill the masked fields of a diary."""

    template_id = "patterns_update_step2"

    _body = "\n\n".join([
        "These are the mobility patterns you have identified <INPUT 1>. This is a trajectory with some information "
        "masked <INPUT 2>.",
        "Please follow the steps below:",
        "Fill in missing details like travel times and reasons. For example, if you know someone is a 'student' and "
        "the trajectory is missing the reason for travel at 8 AM, infer it's likely for school.",
        "Think about why they travel the way they do. For instance, 'students' travel early for classes.",
        "Update the patterns if needed. If you find a new behavior that doesn't fit existing patterns, refine your "
        "groups.",
        "Start with the first anonymized trajectory: Fill in missing details, explain the reasoning, and update the "
        "patterns if necessary.",
    ])

    _contract = OutputContracts.MASKED_FIELDS
