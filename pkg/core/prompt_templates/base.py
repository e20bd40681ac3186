# core/prompt_templates/base.py
import re
from typing import Sequence

from core.errors import SlotArityMismatch

SLOT = re.compile(r"<INPUT (\d+)>")


class SlotPrompt:
    """
    A fixed prompt body with numbered <INPUT n> slots, followed by an output
    contract. Subclasses set `template_id`, `_body` and `_contract`.
    """

    template_id: str = ""
    _body: str = ""
    _contract: str = ""

    @property
    def body(self) -> str:
        return self._body

    @property
    def output_contract(self) -> str:
        return self._contract

    @property
    def slot_count(self) -> int:
        return len(set(SLOT.findall(self._body)))

    def fill(self, slots: Sequence[str]) -> str:
        """Replaces each slot in one pass, so slot text is never re-expanded."""
        if len(slots) != self.slot_count:
            raise SlotArityMismatch(self.template_id, self.slot_count, len(slots))
        return SLOT.sub(lambda m: str(slots[int(m.group(1)) - 1]), self._body)

    def render(self, slots: Sequence[str]) -> str:
        """Assembles the final prompt string."""
        filled = self.fill(slots)
        if not self._contract:
            return filled
        return f"{filled}\n{self._contract}"
