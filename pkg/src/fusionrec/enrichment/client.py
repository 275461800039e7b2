"""Chat-completion client for the vision-language inference endpoint.

One request carries a text part (the rendered prompt) and one base64 image
part. Temperature defaults to zero so generation is reproducible. The HTTP
transport and the backoff sleeper are injectable for tests; ``n_requests``
counts actual network calls.
"""

import base64
import os
import threading
import time

import requests

from ..errors import GenerationError, TransportError

CREDENTIAL_ENV = "FUSIONREC_API_KEY"


def _default_transport(url, payload, headers, timeout):
    response = requests.post(url, json=payload, headers=headers, timeout=timeout)
    response.raise_for_status()
    return response.json()


class VLMClient:
    def __init__(self, url: str, model: str, temperature: float = 0.0,
                 timeout: float = 60.0, max_attempts: int = 3,
                 backoff_start: float = 1.0, transport=None, sleeper=time.sleep):
        self.url = url.rstrip("/")
        self.model = model
        self.temperature = temperature
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff_start = backoff_start
        self.transport = transport or _default_transport
        self.sleeper = sleeper
        self.n_requests = 0
        self._count_lock = threading.Lock()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        credential = os.environ.get(CREDENTIAL_ENV)
        if credential:
            headers["Authorization"] = f"Bearer {credential}"
        return headers

    def _payload(self, prompt: str, image_bytes: bytes) -> dict:
        encoded = base64.b64encode(image_bytes).decode("ascii")
        return {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": prompt},
                        {
                            "type": "image_url",
                            "image_url": {"url": f"data:image/jpeg;base64,{encoded}"},
                        },
                    ],
                }
            ],
        }

    def describe(self, prompt: str, image_bytes: bytes, item_key: str = "") -> str:
        """One chat completion with bounded retries and exponential backoff."""
        payload = self._payload(prompt, image_bytes)
        endpoint = f"{self.url}/chat/completions"
        delay = self.backoff_start
        last_error = None
        for attempt in range(self.max_attempts):
            if attempt > 0:
                self.sleeper(delay)
                delay *= 2
            try:
                with self._count_lock:
                    self.n_requests += 1
                body = self.transport(endpoint, payload, self._headers(), self.timeout)
            except Exception as e:  # noqa: BLE001 - every transport failure retries
                last_error = e
                continue
            try:
                text = body["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError) as e:
                raise TransportError(
                    f"malformed response from {endpoint}: {e}", item_key=item_key
                ) from e
            if not text or not text.strip():
                raise GenerationError(
                    f"empty generation for item {item_key!r}", item_key=item_key
                )
            return text
        raise TransportError(
            f"endpoint {endpoint} unreachable after {self.max_attempts} attempts: "
            f"{last_error}",
            item_key=item_key,
        )
