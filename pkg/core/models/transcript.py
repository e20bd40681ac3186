# core/models/transcript.py
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence


def slots_hash(slots: Sequence[str], feedback: Optional[str] = None) -> str:
    """Fixture lookup key: the slot texts, plus any re-prompt feedback."""
    parts = list(slots) + ([feedback] if feedback else [])
    return hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()


def request_hash(backend_id: str, model_name: str, rendered_prompt: str, temperature: float) -> str:
    payload = json.dumps([backend_id, model_name, rendered_prompt, float(temperature)], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.2
    max_tokens: int = 1024
    seed: Optional[int] = None


@dataclass
class PromptRequest:
    """
    One rendered prompt plus what offline backends need: the template id and
    slots (fixture lookup) and a context dict (statistics for replay).
    """
    template_id: str
    slots: Sequence[str]
    prompt: str
    params: GenerationParams = field(default_factory=GenerationParams)
    feedback: Optional[str] = None
    context: Dict[str, Any] = field(default_factory=dict)

    @property
    def slots_hash(self) -> str:
        return slots_hash(self.slots, self.feedback)


@dataclass(frozen=True)
class PromptTranscript:
    template_id: str
    rendered_prompt: str
    response_text: str
    backend_id: str
    model_name: str
    request_hash: str
    timestamp: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "template_id": self.template_id,
            "rendered_prompt": self.rendered_prompt,
            "response_text": self.response_text,
            "backend_id": self.backend_id,
            "model_name": self.model_name,
            "request_hash": self.request_hash,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PromptTranscript":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__})
