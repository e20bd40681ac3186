# core/prompt_templates/rules.py
from core.vocabulary import DECISION_CATEGORIES, MODES, PURPOSES


class OutputContracts:
    """
    Structured-output instructions appended after the prompt bodies. The
    response parser reads exactly these shapes.
    """

    RATING = """
**OUTPUT CONTRACT**
- Finish your answer with a single line of the form `RATING: n`, where n is an integer from 1 to 10.
"""

    GROUP = """
**OUTPUT CONTRACT**
- Finish your answer with a single line of the form `GROUP: <label>`.
- The label must be copied exactly from the group labels listed with the mobility patterns.
"""

    MASKED_FIELDS = """
**OUTPUT CONTRACT**
- Finish your answer with a fenced block (```) holding one line per masked field.
- Key each line as `P<point number>.<FIELD>`, e.g. `P2.PURPOSE: Shopping`.
- FIELD is one of ARRIVE_TIME (HH:MM), PURPOSE, MODE, DISTANCE_M (integer meters).
"""

    PLAN = f"""
**OUTPUT CONTRACT**
- Finish your answer with a fenced block (```) listing the trips of the day in order.
- Separate trips with a blank line. Each trip has exactly these lines:
  WINDOW: HH:MM-HH:MM
  PURPOSE: one of {", ".join(PURPOSES)}
  CATEGORY: one of {", ".join(DECISION_CATEGORIES)}
  DISTANCE_M: lo-hi (integer meters)
  MODE: one of {", ".join(MODES)}
- Windows must not overlap and must be in increasing order.
- If the person makes no trips, the block contains the single line `TRIPS: 0`.
"""

    DECISION = f"""
**OUTPUT CONTRACT**
- Finish your answer with a fenced block (```) containing exactly these lines:
  PURPOSE: one of {", ".join(PURPOSES)}
  CATEGORY: one of {", ".join(DECISION_CATEGORIES)}
  DEPART: HH:MM
  DISTANCE_M: lo-hi (integer meters)
  MODE: one of {", ".join(MODES)}
"""

    @staticmethod
    def feedback(violations) -> str:
        """Appended on a re-prompt so the model can correct its previous answer."""
        lines = "\n".join(f"- {v}" for v in violations)
        return f"\n**YOUR PREVIOUS ANSWER WAS REJECTED**\n{lines}\nCorrect these problems and answer again.\n"
