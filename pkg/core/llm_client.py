# core/llm_client.py
import asyncio
import datetime as dt
import json
import logging
from pathlib import Path
from types import MappingProxyType
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

from core.models.transcript import GenerationParams, PromptRequest, PromptTranscript, request_hash
from core.prompt_templates import OutputContracts, render_prompt
from providers.base import LLMBackend

logger = logging.getLogger(__name__)


class LLMGateway:
    """
    The single entry point for model calls. Renders templates, answers from the
    transcript cache when it can, and otherwise dispatches to the configured
    backend with a bound on in-flight requests.
    """

    def __init__(self, backend: LLMBackend, cache_path: Optional[Path] = None, max_in_flight: int = 8):
        self.backend = backend
        self.cache_path = Path(cache_path) if cache_path else None
        self._semaphore = asyncio.Semaphore(max_in_flight)
        self._write_lock = asyncio.Lock()
        self._pending: Dict[str, asyncio.Future] = {}
        self._snapshot: Mapping[str, PromptTranscript] = MappingProxyType(self._load_cache())
        self.dispatch_count = 0
        self.cache_hits = 0
        logger.info(f"[LLMGateway] Initialized with backend '{backend.backend_id}' "
                    f"({len(self._snapshot)} cached transcripts).")

    @property
    def backend_id(self) -> str:
        return self.backend.backend_id

    @property
    def is_replay(self) -> bool:
        return self.backend.backend_id == "replay"

    def _load_cache(self) -> Dict[str, PromptTranscript]:
        cache: Dict[str, PromptTranscript] = {}
        if not self.cache_path or not self.cache_path.exists():
            return cache
        with open(self.cache_path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    transcript = PromptTranscript.from_dict(json.loads(line))
                except (json.JSONDecodeError, KeyError, TypeError) as e:
                    logger.warning(f"[LLMGateway] Skipping unreadable cache line {line_no}: {e}")
                    continue
                cache[transcript.request_hash] = transcript
        return cache

    @staticmethod
    def render(template_id: str, slots: Sequence[str], feedback: Optional[str] = None) -> str:
        prompt = render_prompt(template_id, slots)
        if feedback:
            prompt += OutputContracts.feedback(feedback.splitlines())
        return prompt

    def cached(self, key: str) -> Optional[PromptTranscript]:
        return self._snapshot.get(key)

    async def complete(self, template_id: str, slots: Sequence[str],
                       params: Optional[GenerationParams] = None, feedback: Optional[str] = None,
                       context: Optional[Dict[str, Any]] = None) -> Tuple[str, PromptTranscript]:
        """
        Returns the response text and its transcript. Identical requests in
        flight at the same time share one backend dispatch.
        """
        params = params or GenerationParams()
        prompt = self.render(template_id, slots, feedback)
        key = request_hash(self.backend.backend_id, self.backend.model_name, prompt, params.temperature)

        hit = self._snapshot.get(key)
        if hit is not None:
            self.cache_hits += 1
            return hit.response_text, hit

        pending = self._pending.get(key)
        if pending is not None:
            transcript = await asyncio.shield(pending)
            return transcript.response_text, transcript

        future = asyncio.get_running_loop().create_future()
        self._pending[key] = future
        try:
            request = PromptRequest(template_id, list(slots), prompt, params, feedback, dict(context or {}))
            async with self._semaphore:
                self.dispatch_count += 1
                text = await self.backend.generate(request)
            transcript = PromptTranscript(
                template_id=template_id,
                rendered_prompt=prompt,
                response_text=text,
                backend_id=self.backend.backend_id,
                model_name=self.backend.model_name,
                request_hash=key,
                timestamp=dt.datetime.now(dt.timezone.utc).isoformat(),
            )
            await self._store(transcript)
            future.set_result(transcript)
            return text, transcript
        except BaseException as e:
            if not future.done():
                future.set_exception(e)
                # Mark retrieved so an unawaited failure is not reported at shutdown.
                future.exception()
            raise
        finally:
            self._pending.pop(key, None)

    async def _store(self, transcript: PromptTranscript):
        async with self._write_lock:
            updated = dict(self._snapshot)
            updated[transcript.request_hash] = transcript
            self._snapshot = MappingProxyType(updated)
            if not self.cache_path:
                return
            self.cache_path.parent.mkdir(parents=True, exist_ok=True)
            try:
                with open(self.cache_path, "a", encoding="utf-8") as f:
                    f.write(json.dumps(transcript.to_dict(), ensure_ascii=False) + "\n")
            except IOError as e:
                logger.error(f"[LLMGateway] Failed to append transcript to {self.cache_path}: {e}")

    async def close(self):
        await self.backend.close()
        logger.info(f"[LLMGateway] Closed after {self.dispatch_count} dispatches and {self.cache_hits} cache hits.")
