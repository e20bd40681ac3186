# providers/base.py
"""
Define the abstract contract (interface) that all language-model backends must
adhere to.
"""
import logging
from abc import ABC, abstractmethod

from core.models.transcript import PromptRequest

logger = logging.getLogger(__name__)


class LLMBackend(ABC):
    """
    Abstract Base Class for all language-model backends.

    `backend_id` and `model_name` enter the request hash, so two backends
    never share cached responses.
    """

    backend_id: str = "base"
    model_name: str = "none"

    @abstractmethod
    async def generate(self, request: PromptRequest) -> str:
        """
        Produce the response text for one rendered prompt.

        Args:
            request: The rendered prompt, its template id and slots, sampling
                     parameters and any context attached by the caller.

        Returns:
            The raw response text.
        """

    async def close(self):
        """Release network resources, if any."""
        return None
