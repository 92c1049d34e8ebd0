"""Provider-agnostic chat access with strict response parsing and a full
audit trail.

The provider surface is a single text-in/text-out call with optional image
attachments; a scripted provider makes every stage testable offline.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import requests

from .config import SamplingParams
from .errors import ProviderError, ResponseParseError
from .parsers import (
    parse_free_text,
    parse_headed_sections,
    parse_json_array,
    parse_style_component,
    parse_task_list,
    parse_verdict_passed,
    parse_verdict_yes_no,
)
from .prompts import PromptTemplate, get_template

_FORMAT_REMINDERS = {
    "style_component": (
        'Format reminder: respond ONLY in the exact format '
        '"{style_marker}<STYLE_CONTENT>{component_marker}<COMPONENT_CONTENT>" '
        "with no other text."
    ),
    "verdict_passed": (
        'Format reminder: respond with the single word "Passed." if the code '
        "is fine, otherwise respond with the corrected code only."
    ),
    "verdict_yes_no": 'Format reminder: respond with a single word: "Yes" or "No".',
    "json_systems": (
        "Format reminder: respond ONLY with the JSON array using exactly the keys "
        '"name", "category", "purpose", "code_snippet_usage", "complexity", '
        '"features". Do not wrap it in markdown.'
    ),
    "json_roadmap": (
        "Format reminder: respond ONLY with the JSON array using exactly the keys "
        '"title", "objective", "components_logic", "builds_on", "best_practices". '
        "Do not wrap it in markdown."
    ),
    "headed_sections": (
        "Format reminder: the response must contain the section heads "
        "{heads}, each on its own line, in this order."
    ),
    "task_list": (
        'Format reminder: list the tasks as "- Task 1", "- Task 2", ... with '
        "consecutive numbering and the description on the following lines."
    ),
    "free_text": "Format reminder: respond with plain text only.",
}


class Provider(Protocol):
    def chat(self, prompt: str, sampling: SamplingParams, images: list[bytes] | None = None) -> str:
        ...


class ScriptedProvider:
    """Deterministic offline provider. Accepts either a callable
    (prompt, sampling, images) -> str or a list of canned replies consumed
    in order; an Exception instance in the list is raised instead."""

    def __init__(self, script: Callable | list | None = None):
        self._script = script or []
        self._index = 0
        self.calls: list[str] = []

    def chat(self, prompt: str, sampling: SamplingParams, images: list[bytes] | None = None) -> str:
        self.calls.append(prompt)
        if callable(self._script):
            result = self._script(prompt, sampling, images)
        else:
            if self._index >= len(self._script):
                raise ProviderError("scripted provider ran out of replies")
            result = self._script[self._index]
            self._index += 1
        if isinstance(result, Exception):
            raise result
        return str(result)


class MappingProvider:
    """Offline provider configured from a mapping of template name to a
    reply or list of replies (cycled). The gateway passes the template
    name through `chat_with_template`, keeping runs deterministic."""

    def __init__(self, mapping: dict[str, object]):
        self.mapping = mapping
        self._counts: dict[str, int] = {}

    @classmethod
    def from_file(cls, path) -> "MappingProvider":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def chat_with_template(
        self, template_name: str, prompt: str, sampling: SamplingParams, images=None
    ) -> str:
        if template_name not in self.mapping:
            raise ProviderError(f"no scripted reply for template {template_name!r}")
        entry = self.mapping[template_name]
        if isinstance(entry, list):
            idx = self._counts.get(template_name, 0)
            self._counts[template_name] = idx + 1
            entry = entry[idx % len(entry)]
        return str(entry)

    def chat(self, prompt: str, sampling: SamplingParams, images=None) -> str:
        raise ProviderError("MappingProvider needs the template-aware entry point")


class HttpChatProvider:
    """OpenAI-compatible chat endpoint. Endpoint and key come from the
    environment, never from config files."""

    def __init__(
        self,
        api_base_env: str = "LLM_API_BASE",
        api_key_env: str = "LLM_API_KEY",
        model_env: str = "LLM_MODEL",
        timeout: float = 120.0,
    ):
        self.api_base = os.environ.get(api_base_env, "").rstrip("/")
        self.api_key = os.environ.get(api_key_env, "")
        self.model = os.environ.get(model_env, "")
        self.timeout = timeout
        if not self.api_base or not self.model:
            raise ProviderError(
                f"provider endpoint not configured; set {api_base_env} and {model_env}"
            )

    def chat(self, prompt: str, sampling: SamplingParams, images: list[bytes] | None = None) -> str:
        import base64

        if images:
            content: list[dict] = [{"type": "text", "text": prompt}]
            for img in images:
                encoded = base64.b64encode(img).decode("ascii")
                content.append(
                    {
                        "type": "image_url",
                        "image_url": {"url": f"data:image/png;base64,{encoded}"},
                    }
                )
        else:
            content = prompt  # type: ignore[assignment]
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": content}],
            "temperature": sampling.temperature,
            "top_p": sampling.top_p,
            "max_tokens": sampling.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(
                f"{self.api_base}/chat/completions",
                json=payload,
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ProviderError(f"provider request failed: {exc}") from exc
        if resp.status_code != 200:
            raise ProviderError(f"provider returned {resp.status_code}: {resp.text[:500]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc


class RateLimiter:
    """Token bucket shared by all workers driving one gateway."""

    def __init__(self, calls_per_second: float | None = None):
        self.min_interval = 1.0 / calls_per_second if calls_per_second else 0.0
        self._lock = threading.Lock()
        self._next_allowed = 0.0

    def acquire(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            wait = self._next_allowed - now
            self._next_allowed = max(now, self._next_allowed) + self.min_interval
        if wait > 0:
            time.sleep(wait)


@dataclass
class PromptExchange:
    exchange_id: str
    template: str
    variables_digest: str
    raw_response: str
    parsed: object
    attempts: int
    latency_s: float
    status: str  # ok | parse_failed | provider_failed
    error: str = ""
    prompt_chars: int = 0
    response_chars: int = 0

    def to_json(self) -> str:
        parsed = self.parsed
        if not isinstance(parsed, (str, int, float, bool, list, dict, type(None))):
            parsed = repr(parsed)
        return json.dumps(
            {
                "id": self.exchange_id,
                "template": self.template,
                "variables_digest": self.variables_digest,
                "raw_response": self.raw_response,
                "parsed": parsed,
                "attempts": self.attempts,
                "latency_s": round(self.latency_s, 4),
                "status": self.status,
                "error": self.error,
                "prompt_chars": self.prompt_chars,
                "response_chars": self.response_chars,
            },
            sort_keys=True,
        )


def _parse_by_grammar(template: PromptTemplate, text: str):
    grammar = template.grammar
    if grammar == "style_component":
        return parse_style_component(text, template.style_marker, template.component_marker)
    if grammar == "verdict_passed":
        return parse_verdict_passed(text)
    if grammar == "verdict_yes_no":
        return parse_verdict_yes_no(text)
    if grammar == "json_systems":
        return parse_json_array(text, "systems")
    if grammar == "json_roadmap":
        return parse_json_array(text, "roadmap")
    if grammar == "headed_sections":
        return parse_headed_sections(text, template.heads, template.section_divider)
    if grammar == "task_list":
        return parse_task_list(text)
    return parse_free_text(text)


def _format_reminder(template: PromptTemplate) -> str:
    reminder = _FORMAT_REMINDERS[template.grammar]
    return reminder.format(
        style_marker=template.style_marker,
        component_marker=template.component_marker,
        heads=", ".join(repr(h) for h in template.heads),
    )


class Gateway:
    """Renders templates, calls the provider, parses per grammar.

    On a parse failure one reprompt with a format reminder is issued; the
    second failure is final. Every exchange is appended to the audit log,
    success or not.
    """

    def __init__(
        self,
        provider: Provider,
        sampling: SamplingParams | None = None,
        audit_path: str | Path | None = None,
        provider_retries: int = 2,
        backoff_s: float = 1.0,
        rate_limiter: RateLimiter | None = None,
    ):
        self.provider = provider
        self.sampling = sampling or SamplingParams()
        self.audit_path = Path(audit_path) if audit_path else None
        self.provider_retries = provider_retries
        self.backoff_s = backoff_s
        self.rate_limiter = rate_limiter or RateLimiter()
        self._seq = 0
        self._audit_lock = threading.Lock()

    def _next_id(self, template_name: str) -> str:
        self._seq += 1
        return f"x{self._seq:06d}-{template_name}"

    def _call_provider(
        self, prompt: str, sampling: SamplingParams, images, template_name: str = ""
    ) -> str:
        last_error: Exception | None = None
        for attempt in range(self.provider_retries + 1):
            self.rate_limiter.acquire()
            try:
                if hasattr(self.provider, "chat_with_template"):
                    return self.provider.chat_with_template(
                        template_name, prompt, sampling, images
                    )
                return self.provider.chat(prompt, sampling, images)
            except ProviderError as exc:
                last_error = exc
                if attempt < self.provider_retries:
                    time.sleep(self.backoff_s * (2**attempt))
        raise ProviderError(f"provider failed after retries: {last_error}")

    def _persist(self, exchange: PromptExchange) -> None:
        if self.audit_path is None:
            return
        with self._audit_lock:
            self.audit_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.audit_path, "a", encoding="utf-8") as fh:
                fh.write(exchange.to_json() + "\n")

    def complete(
        self,
        template_name: str,
        variables: dict[str, object],
        sampling: SamplingParams | None = None,
        images: list[bytes] | None = None,
        reminder: str | None = None,
    ) -> PromptExchange:
        template = get_template(template_name)
        sampling = sampling or self.sampling
        prompt = template.render(variables)
        if reminder:
            prompt = f"{prompt}\n\n{reminder}"
        digest = hashlib.sha256(
            json.dumps({k: str(v) for k, v in sorted(variables.items())}).encode()
        ).hexdigest()[:16]
        exchange_id = self._next_id(template_name)
        started = time.monotonic()
        attempts = 0
        raw = ""
        error: Exception | None = None
        parsed = None
        status = "ok"
        current_prompt = prompt
        while attempts < 2:
            attempts += 1
            try:
                raw = self._call_provider(current_prompt, sampling, images, template_name)
            except ProviderError as exc:
                status = "provider_failed"
                error = exc
                break
            try:
                parsed = _parse_by_grammar(template, raw)
                status = "ok"
                error = None
                break
            except ResponseParseError as exc:
                status = "parse_failed"
                error = exc
                current_prompt = f"{prompt}\n\n{_format_reminder(template)}"
        exchange = PromptExchange(
            exchange_id=exchange_id,
            template=template_name,
            variables_digest=digest,
            raw_response=raw,
            parsed=parsed,
            attempts=attempts,
            latency_s=time.monotonic() - started,
            status=status,
            error=str(error) if error else "",
            prompt_chars=len(current_prompt),
            response_chars=len(raw),
        )
        self._persist(exchange)
        if status == "provider_failed":
            raise ProviderError(str(error))
        if status != "ok":
            raise ResponseParseError(
                f"template {template_name!r}: response failed its grammar after "
                f"a format-reminder reprompt: {error}"
            )
        return exchange


def build_gateway(
    provider: Provider | None = None,
    sampling: SamplingParams | None = None,
    store=None,
) -> Gateway:
    """Wire a gateway whose audit log lives inside the store, when given."""
    audit = None
    if store is not None:
        audit = store.subdir("audit") / "exchanges.jsonl"
    if provider is None:
        provider = HttpChatProvider()
    return Gateway(provider, sampling=sampling, audit_path=audit)
