# core/prompt_templates/group_division.py
from .base import SlotPrompt
from .rules import OutputContracts


class InitialGroupDivisionPrompt(SlotPrompt):
    """Asks for a 1-10 rating on whether a cohort should be split along one more dimension."""

    template_id = "initial_group_division"

    _body = "\n\n".join([
        "You have a travel survey dataset regarding travel conditions. Preliminary data analysis has revealed "
        "several key insights <INPUT 1>.",
        "Your goal is to capture the complex diversity in human mobility behaviors present in these data across "
        "different groups, aiming to uncover the subtle differences and unique aspects of travel patterns among "
        "various subgroups. Currently, you have initially classified the subjects based on several criteria "
        "<INPUT 2>. To gain a more refined understanding of the diversity in travel patterns, please evaluate "
        "whether it is necessary to further segment the groups based on another specific dimension <INPUT 3>, "
        "considering the statistical distribution characteristics of the current data and general knowledge from "
        "daily life. Based on this consideration, please provide a rating (ranging from 1 to 10), where a higher "
        "score (closer to 10) indicates a strong recommendation for additional segmentation to obtain deeper "
        "insights.",
    ])

    _contract = OutputContracts.RATING
