# providers/scripted_provider.py
"""
Fixture-driven backend: canned responses looked up by (template_id, slots hash).
"""
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

from core.errors import ConfigError, FixtureMiss
from core.models.transcript import PromptRequest, slots_hash
from .base import LLMBackend

logger = logging.getLogger(__name__)

WILDCARD = "*"


class ScriptedBackend(LLMBackend):
    """
    Returns the fixture response for a request's (template_id, slots_hash).
    A record with slots_hash "*" answers any request for its template that has
    no exact fixture. Records may give `slots` (and optional `feedback`)
    instead of a precomputed hash.
    """

    backend_id = "scripted"

    def __init__(self, fixtures: Dict[Tuple[str, str], str], strict: bool = True, model_name: str = "fixtures"):
        self.fixtures = dict(fixtures)
        self.strict = strict
        self.model_name = model_name
        self.calls = 0

    @classmethod
    def from_records(cls, records: Iterable[dict], strict: bool = True) -> "ScriptedBackend":
        fixtures: Dict[Tuple[str, str], str] = {}
        for record in records:
            key_hash = record.get("slots_hash")
            if key_hash is None:
                key_hash = slots_hash(record.get("slots", []), record.get("feedback"))
            fixtures[(record["template_id"], key_hash)] = record["response"]
        return cls(fixtures, strict=strict)

    @classmethod
    def from_file(cls, path: Path, strict: bool = True) -> "ScriptedBackend":
        records = []
        try:
            with open(path, "r", encoding="utf-8") as f:
                for line_no, line in enumerate(f, start=1):
                    if line.strip():
                        records.append(json.loads(line))
        except FileNotFoundError:
            raise ConfigError(f"Fixture file not found at {path}", path=str(path))
        except json.JSONDecodeError as e:
            raise ConfigError(f"Fixture file {path} line {line_no} is not JSON: {e}", path=str(path))
        logger.info(f"[ScriptedBackend] Loaded {len(records)} fixtures from {path}")
        return cls.from_records(records, strict=strict)

    def lookup(self, template_id: str, key_hash: str) -> Optional[str]:
        response = self.fixtures.get((template_id, key_hash))
        if response is None:
            response = self.fixtures.get((template_id, WILDCARD))
        return response

    async def generate(self, request: PromptRequest) -> str:
        self.calls += 1
        response = self.lookup(request.template_id, request.slots_hash)
        if response is not None:
            return response
        if self.strict:
            raise FixtureMiss(request.template_id, request.slots_hash)
        logger.warning(f"[ScriptedBackend] No fixture for '{request.template_id}'; returning empty response.")
        return ""
