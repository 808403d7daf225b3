"""Chat-completion backends for the analyst and reviewer agents."""

import logging
import os
from typing import Any, Callable, Optional

import openai
from dotenv import load_dotenv
from openai import OpenAI
from tenacity import (
    Retrying,
    before_sleep_log,
    retry_if_exception_type,
    stop_after_attempt,
    wait_random_exponential,
)

from ..errors import BackendError

logger = logging.getLogger(__name__)

# (system_prompt, user_prompt) -> reply text
ChatBackend = Callable[[str, str], str]

RETRYABLE_ERRORS = (
    openai.APIConnectionError,
    openai.RateLimitError,
    openai.InternalServerError,
)
MAX_BACKOFF_SECONDS = 60


class OpenAIChatBackend:
    """Chat-completions client with jittered exponential backoff.

    Transport failures, rate limits and 5xx responses are retried
    ``retry_limit`` times; anything else fails immediately. Both end in
    ``BackendError`` with the last underlying error as its cause.
    """

    def __init__(
        self,
        model: str,
        temperature: Optional[float] = None,
        endpoint: Optional[str] = None,
        timeout: float = 60.0,
        retry_limit: int = 3,
        backoff_base: float = 1.0,
        client: Any = None,
    ):
        if client is None:
            load_dotenv()
            api_key = os.getenv("OPENAI_API_KEY", "").strip()
            if not api_key:
                raise BackendError("Missing required env: OPENAI_API_KEY")
            client = OpenAI(api_key=api_key, base_url=endpoint, timeout=timeout, max_retries=0)
        self.client = client
        self.model = model
        self.temperature = temperature
        self.retry_limit = retry_limit
        self.backoff_base = backoff_base

    def _complete(self, system_prompt: str, user_prompt: str) -> str:
        kwargs = {}
        if self.temperature is not None:
            kwargs["temperature"] = self.temperature
        response = self.client.chat.completions.create(
            model=self.model,
            messages=[
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_prompt},
            ],
            **kwargs,
        )
        content = response.choices[0].message.content
        return content if isinstance(content, str) else ""

    def __call__(self, system_prompt: str, user_prompt: str) -> str:
        retrying = Retrying(
            stop=stop_after_attempt(self.retry_limit + 1),
            wait=wait_random_exponential(multiplier=self.backoff_base, max=MAX_BACKOFF_SECONDS),
            retry=retry_if_exception_type(RETRYABLE_ERRORS),
            before_sleep=before_sleep_log(logger, logging.WARNING),
            reraise=True,
        )
        try:
            for attempt in retrying:
                with attempt:
                    text = self._complete(system_prompt, user_prompt)
        except RETRYABLE_ERRORS as exc:
            raise BackendError(
                f"{self.model}: request failed after {self.retry_limit + 1} attempts: {exc}"
            ) from exc
        except openai.OpenAIError as exc:
            raise BackendError(f"{self.model}: request failed: {exc}") from exc
        return text
