# providers/remote_provider.py
"""
Implement the LLMBackend interface for chat-completion HTTP endpoints,
handling request construction, retries and response extraction.
"""
import asyncio
import logging
from typing import Optional

import aiohttp

from core.errors import BackendError, BackendUnreachable
from core.models.transcript import PromptRequest
from .base import LLMBackend

logger = logging.getLogger(__name__)

TRANSIENT_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


class RemoteChatBackend(LLMBackend):
    """
    A backend for any service speaking the chat-completion wire protocol.
    Transient failures are retried with exponential backoff.
    """

    backend_id = "remote"

    def __init__(self, endpoint: str, model_name: str, api_key: Optional[str],
                 max_retries: int = 4, backoff_base_s: float = 1.0, timeout_s: float = 120.0):
        self.endpoint = endpoint
        self.model_name = model_name
        self.api_key = api_key
        self.max_retries = max_retries
        self.backoff_base_s = backoff_base_s
        self.timeout = aiohttp.ClientTimeout(total=timeout_s)
        self._session: Optional[aiohttp.ClientSession] = None
        if not api_key:
            logger.warning("[RemoteChatBackend] No API key set; requests will be sent unauthenticated.")
        logger.info(f"[RemoteChatBackend] Initialized for model '{model_name}' at {endpoint}")

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return headers

    async def _get_session(self) -> aiohttp.ClientSession:
        if self._session is None or self._session.closed:
            self._session = aiohttp.ClientSession(timeout=self.timeout, headers=self._headers())
        return self._session

    async def generate(self, request: PromptRequest) -> str:
        payload = {
            "model": self.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_tokens,
        }
        if request.params.seed is not None:
            payload["seed"] = request.params.seed

        last_error = ""
        for attempt in range(self.max_retries + 1):
            if attempt:
                delay = self.backoff_base_s * (2 ** (attempt - 1))
                logger.warning(f"[RemoteChatBackend] Retry {attempt}/{self.max_retries} in {delay:.1f}s: {last_error}")
                await asyncio.sleep(delay)
            try:
                session = await self._get_session()
                async with session.post(self.endpoint, json=payload) as response:
                    if response.status == 200:
                        data = await response.json()
                        return self._extract_content(data)
                    body = await response.text()
                    last_error = f"status {response.status}: {body[:200]}"
                    if response.status not in TRANSIENT_STATUS:
                        raise BackendError(f"Chat endpoint rejected the request ({last_error})",
                                           status=response.status)
            except (aiohttp.ClientError, asyncio.TimeoutError) as e:
                last_error = f"{type(e).__name__}: {e}"

        raise BackendUnreachable(f"Chat endpoint unreachable after {self.max_retries} retries ({last_error})",
                                 endpoint=self.endpoint)

    @staticmethod
    def _extract_content(data: dict) -> str:
        try:
            content = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise BackendError("Response lacks choices[0].message.content", response=str(data)[:200])
        return content or ""

    async def close(self):
        if self._session and not self._session.closed:
            await self._session.close()
