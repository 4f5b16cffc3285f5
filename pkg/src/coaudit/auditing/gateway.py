"""Send prompts to a chat-completion backend, with record and replay.

Responses are stored in a cassette keyed by a hash of the prompt text,
temperature and model tag, so a campaign can be replayed offline in any
order.
"""

import base64
import hashlib
import json
import logging
import os
import threading
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Any
from typing import Literal
from typing import Protocol

# HTTP client for the live backend
import requests

from coaudit.auditing.prompts import PromptInstance
from coaudit.errors import CoAuditError
from coaudit.errors import QuotaError
from coaudit.errors import ReplayMissError
from coaudit.errors import TransportError

logger = logging.getLogger(__name__)

BackendMode = Literal["live", "replay", "record"]
ExchangeSource = Literal["live", "replay"]

DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
DEFAULT_MODEL_TAG = "gpt-4"
DEFAULT_API_KEY_ENV = "COAUDIT_API_KEY"


@dataclass(frozen=True)
class LlmRequest:
    """A single-turn completion request.

    Attributes:
        prompt_text: The rendered prompt.
        temperature: Sampling temperature, 0 for reproduction runs.
        max_tokens: Completion token limit.
        model_tag: Model name sent to the backend.
        target: FunctionId of the prompt, for diagnostics only.
    """

    prompt_text: str
    temperature: float = 0.0
    max_tokens: int = 8000
    model_tag: str = DEFAULT_MODEL_TAG
    target: str = ""

    @property
    def request_hash(self) -> str:
        """SHA-256 of prompt text, temperature and model tag."""
        payload = json.dumps([self.prompt_text, float(self.temperature), self.model_tag])
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class LlmExchange:
    """A request with its response, or the error that replaced it."""

    request: LlmRequest
    response_text: str
    latency_ms: float
    source: ExchangeSource
    error: str | None = None


class CompletionBackend(Protocol):
    """Anything that turns a request into response text."""

    def complete(self, request: LlmRequest) -> str:
        """Return the completion text for a request."""
        ...


class Cassette:
    """Append-only store of responses keyed by request hash.

    The file holds one JSON metadata line followed by one
    ``{"hash": ..., "response": <base64>}`` line per entry.
    """

    def __init__(
        self,
        path: str | Path | None = None,
        entries: dict[str, str] | None = None,
        metadata: dict[str, Any] | None = None,
    ) -> None:
        """Create a cassette, optionally backed by a file for appends."""
        self.path = Path(path) if path is not None else None
        self.entries: dict[str, str] = dict(entries or {})
        self.metadata: dict[str, Any] = dict(metadata or {})
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: str | Path, model_tag: str = DEFAULT_MODEL_TAG) -> "Cassette":
        """Open a cassette file, starting an empty one if it does not exist.

        Args:
            path: Cassette file.
            model_tag: Recorded in the metadata of a new cassette.

        Returns:
            The cassette.

        Raises:
            ValueError: If a line is not a cassette record.
        """
        path = Path(path)
        if not path.exists():
            metadata = {"model_tag": model_tag, "captured": date.today().isoformat()}
            return cls(path=path, metadata=metadata)
        entries: dict[str, str] = {}
        metadata: dict[str, Any] = {}
        with open(path, encoding="utf-8") as handle:
            for number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                record = json.loads(line)
                if "metadata" in record:
                    metadata = record["metadata"]
                elif "hash" in record and "response" in record:
                    entries[record["hash"]] = base64.b64decode(record["response"]).decode("utf-8")
                else:
                    raise ValueError(f"Line {number} of {path} is not a cassette record.")
        return cls(path=path, entries=entries, metadata=metadata)

    def lookup(self, request_hash: str) -> str | None:
        """Return the stored response for a hash, if any."""
        return self.entries.get(request_hash)

    def append(self, request_hash: str, response_text: str) -> None:
        """Store a response; an existing entry is never replaced."""
        with self._lock:
            if request_hash in self.entries:
                return
            self.entries[request_hash] = response_text
            if self.path is None:
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            new_file = not self.path.exists()
            with open(self.path, "a", encoding="utf-8") as handle:
                if new_file:
                    handle.write(json.dumps({"metadata": self.metadata}) + "\n")
                encoded = base64.b64encode(response_text.encode("utf-8")).decode("ascii")
                handle.write(json.dumps({"hash": request_hash, "response": encoded}) + "\n")


class LiveBackend:
    """JSON chat-completion endpoint with bearer authentication.

    The API key is read from an environment variable at call time and is
    never logged or stored.
    """

    def __init__(
        self,
        endpoint: str = DEFAULT_ENDPOINT,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        retries: int = 3,
        backoff: float = 1.0,
        timeout: float = 120.0,
        session: requests.Session | None = None,
    ) -> None:
        """Configure the endpoint and retry policy."""
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self.session = session if session is not None else requests.Session()

    def complete(self, request: LlmRequest) -> str:
        """Post the request, retrying server and connection errors.

        Raises:
            QuotaError: On HTTP 429.
            TransportError: On other client errors, a malformed body, or when
                all retries fail.
        """
        api_key = os.environ.get(self.api_key_env)
        if not api_key:
            raise TransportError(f"Environment variable {self.api_key_env} holds no API key")
        payload = {
            "model": request.model_tag,
            "messages": [{"role": "user", "content": request.prompt_text}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Authorization": f"Bearer {api_key}"}

        failure = "no attempt made"
        attempts = self.retries + 1
        for attempt in range(1, attempts + 1):
            try:
                response = self.session.post(
                    self.endpoint, json=payload, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as err:
                failure = type(err).__name__
            else:
                if response.status_code == 429:
                    raise QuotaError(f"Endpoint answered HTTP 429 for {request.target or 'a request'}")
                if response.status_code >= 500:
                    failure = f"HTTP {response.status_code}"
                elif response.status_code >= 400:
                    raise TransportError(f"Endpoint answered HTTP {response.status_code}")
                else:
                    return self._content(response)
            if attempt < attempts:
                delay = self.backoff * 2 ** (attempt - 1)
                logger.warning("Attempt %s failed (%s), retrying in %.1fs", attempt, failure, delay)
                time.sleep(delay)
        raise TransportError(f"Endpoint failed after {attempts} attempts: {failure}")

    @staticmethod
    def _content(response: requests.Response) -> str:
        try:
            return str(response.json()["choices"][0]["message"]["content"])
        except (ValueError, KeyError, IndexError, TypeError) as err:
            raise TransportError("Endpoint returned an unexpected response body") from err


class Gateway:
    """Dispatch requests according to the backend mode.

    * ``replay`` answers from the cassette only (strict) or falls back to the
      backend without recording (non-strict).
    * ``record`` answers from the cassette when possible and otherwise calls
      the backend and appends the response.
    * ``live`` always calls the backend.
    """

    def __init__(
        self,
        mode: BackendMode,
        cassette: Cassette | None = None,
        backend: CompletionBackend | None = None,
        strict: bool = True,
    ) -> None:
        """Check that the mode has what it needs.

        Raises:
            ValueError: If a cassette or backend required by the mode is missing.
        """
        if mode not in ("live", "replay", "record"):
            raise ValueError(f"Unknown backend mode {mode!r}.")
        if mode in ("replay", "record") and cassette is None:
            raise ValueError(f"Backend mode '{mode}' needs a cassette.")
        if mode in ("live", "record") and backend is None:
            raise ValueError(f"Backend mode '{mode}' needs a live backend.")
        self.mode = mode
        self.cassette = cassette
        self.backend = backend
        self.strict = strict
        self._hash_locks: dict[str, threading.Lock] = {}
        self._hash_locks_guard = threading.Lock()

    def _hash_lock(self, request_hash: str) -> threading.Lock:
        with self._hash_locks_guard:
            return self._hash_locks.setdefault(request_hash, threading.Lock())

    def _call(self, request: LlmRequest) -> tuple[str, ExchangeSource]:
        if self.mode == "record":
            # One backend call per hash; duplicates in flight wait and read the cassette
            with self._hash_lock(request.request_hash):
                return self._lookup_or_complete(request)
        return self._lookup_or_complete(request)

    def _lookup_or_complete(self, request: LlmRequest) -> tuple[str, ExchangeSource]:
        if self.mode != "live" and self.cassette is not None:
            stored = self.cassette.lookup(request.request_hash)
            if stored is not None:
                return stored, "replay"
            if self.mode == "replay" and (self.strict or self.backend is None):
                raise ReplayMissError(
                    f"No cassette entry for {request.target or 'request'} ({request.request_hash[:12]})"
                )
        if self.backend is None:
            raise TransportError("No live backend is configured")
        response = self.backend.complete(request)
        if self.mode == "record" and self.cassette is not None:
            self.cassette.append(request.request_hash, response)
        return response, "live"

    def send(self, request: LlmRequest) -> LlmExchange:
        """Send one request.

        Raises:
            ReplayMissError: In strict replay when the cassette has no entry.
            TransportError: When the live backend fails.
            QuotaError: When the live backend is rate limited.
        """
        started = time.monotonic()
        response, source = self._call(request)
        # Replayed exchanges report no latency so replay runs are reproducible
        latency = 0.0 if source == "replay" else (time.monotonic() - started) * 1000
        return LlmExchange(request=request, response_text=response, latency_ms=latency, source=source)

    def _send_isolated(self, request: LlmRequest) -> LlmExchange:
        try:
            return self.send(request)
        except CoAuditError as err:
            logger.warning("Request for %s failed: %s", request.target, err)
            source: ExchangeSource = "live" if self.mode == "live" else "replay"
            return LlmExchange(request=request, response_text="", latency_ms=0.0, source=source, error=str(err))

    def run_plan(
        self,
        plan: Sequence[PromptInstance],
        parallelism: int = 1,
        temperature: float = 0.0,
        max_tokens: int = 8000,
        model_tag: str = DEFAULT_MODEL_TAG,
    ) -> list[LlmExchange]:
        """Send every prompt of a plan.

        Args:
            plan: Prompts in plan order.
            parallelism: Maximum requests in flight.
            temperature: Sampling temperature.
            max_tokens: Completion token limit.
            model_tag: Model name.

        Returns:
            One exchange per prompt, in plan order. Failed entries carry the
            error message instead of a response.

        Raises:
            ValueError: If parallelism is below 1.
        """
        if parallelism < 1:
            raise ValueError(f"Parallelism must be at least 1, got {parallelism}.")
        requests_ = [
            LlmRequest(
                prompt_text=prompt.text,
                temperature=temperature,
                max_tokens=max_tokens,
                model_tag=model_tag,
                target=prompt.target,
            )
            for prompt in plan
        ]
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            exchanges = list(pool.map(self._send_isolated, requests_))
        failed = sum(exchange.error is not None for exchange in exchanges)
        logger.info("Completed %s request(s), %s failed", len(exchanges), failed)
        return exchanges


def write_exchanges(exchanges: Sequence[LlmExchange], path: str | Path) -> Path:
    """Write exchanges as JSON lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for exchange in exchanges:
            handle.write(json.dumps(asdict(exchange)) + "\n")
    return path


def read_exchanges(path: str | Path) -> list[LlmExchange]:
    """Read exchanges written by :func:`write_exchanges`."""
    exchanges = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            record["request"] = LlmRequest(**record["request"])
            exchanges.append(LlmExchange(**record))
    return exchanges
