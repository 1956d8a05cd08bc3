"""Model gateway: provider abstraction plus completion parsing.

Three providers share one interface. Live talks to an OpenAI-style chat
endpoint, Replay serves completions recorded in a fixture file, and Record
wraps Live while appending every completion to a fixture. Fixture keys hash
the prompt text together with each attached image digest, so a fixture is
stable across runs and insensitive to provider metadata.

A fixture value is either one {"text", "provider_meta"} object or a list of
them; Replay steps through list variants on repeated identical requests,
which is how "regenerate" picks up the next recorded completion, and sticks
at the last variant once exhausted.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import re
import threading
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import httpx

from .errors import (
    FixtureMiss,
    NoJsonFound,
    ProviderUnavailable,
    SchemaError,
    Timeout,
)
from .model import BlendOutcome, ChangeGroup, ComponentSource, StyleEdit
from .prompts import PromptBundle
from .repair import repair


# ---------------------------------------------------------------------------
# Requests and completions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelRequest:
    bundle: PromptBundle
    temperature: float = 1.0
    request_id: str = field(default_factory=lambda: uuid.uuid4().hex)

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")


@dataclass(frozen=True)
class RawCompletion:
    text: str
    provider_meta: dict

    def __post_init__(self):
        if not self.text:
            raise ValueError("completion text must be non-empty")


def request_key(bundle: PromptBundle) -> str:
    """Stable fixture key: SHA-256 over prompt text and image digests."""
    h = hashlib.sha256()
    h.update(bundle.text.encode("utf-8"))
    for image in bundle.images:
        h.update(b"\x00")
        h.update(hashlib.sha256(image.bytes).digest())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------


class ProviderKind(Enum):
    LIVE = "live"
    REPLAY = "replay"
    RECORD = "record"


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model: str = "gpt-4o"
    api_key_env: str = "UIBLEND_API_KEY"
    timeout_s: float = 60.0


class Provider:
    kind: ProviderKind

    def complete(self, req: ModelRequest) -> RawCompletion:
        raise NotImplementedError


class LiveProvider(Provider):
    kind = ProviderKind.LIVE

    def __init__(self, config: EndpointConfig):
        self.config = config

    def complete(self, req: ModelRequest) -> RawCompletion:
        api_key = os.environ.get(self.config.api_key_env, "")
        if not api_key:
            raise ProviderUnavailable(
                f"no API key in environment variable {self.config.api_key_env}"
            )
        content: list[dict] = [{"type": "text", "text": req.bundle.text}]
        for image in req.bundle.images:
            encoded = base64.b64encode(image.bytes).decode("ascii")
            content.append(
                {
                    "type": "image_url",
                    "image_url": {"url": f"data:image/{image.media_type};base64,{encoded}"},
                }
            )
        payload = {
            "model": self.config.model,
            "temperature": req.temperature,
            "messages": [{"role": "user", "content": content}],
        }
        try:
            response = httpx.post(
                self.config.url,
                json=payload,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=self.config.timeout_s,
            )
        except httpx.TimeoutException as exc:
            raise Timeout(f"model endpoint timed out: {exc}") from exc
        except httpx.HTTPError as exc:
            raise ProviderUnavailable(f"model endpoint unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ProviderUnavailable(
                f"model endpoint returned {response.status_code}: {response.text[:200]}"
            )
        body = response.json()
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed endpoint response: {exc}") from exc
        meta = {"model": body.get("model", self.config.model)}
        meta.update(body.get("usage") or {})
        return RawCompletion(text=text, provider_meta=meta)


class ReplayProvider(Provider):
    kind = ProviderKind.REPLAY

    def __init__(self, fixture_path: str | Path):
        self.fixture_path = Path(fixture_path)
        if not self.fixture_path.exists():
            raise FixtureMiss(f"fixture file not found: {self.fixture_path}")
        with open(self.fixture_path, encoding="utf-8") as fh:
            self._fixtures = json.load(fh)
        self._cursor: dict[str, int] = {}
        self._lock = threading.Lock()

    def reset(self) -> None:
        """Rewind all variant cursors (a fresh scripted run starts here)."""
        with self._lock:
            self._cursor.clear()

    def complete(self, req: ModelRequest) -> RawCompletion:
        key = request_key(req.bundle)
        entry = self._fixtures.get(key)
        if entry is None:
            raise FixtureMiss(f"no recorded completion for request {key[:16]}…")
        if isinstance(entry, list):
            with self._lock:
                index = min(self._cursor.get(key, 0), len(entry) - 1)
                self._cursor[key] = index + 1
            entry = entry[index]
        return RawCompletion(
            text=entry["text"], provider_meta=dict(entry.get("provider_meta", {}))
        )


class RecordProvider(Provider):
    kind = ProviderKind.RECORD

    def __init__(self, config: EndpointConfig, fixture_path: str | Path):
        self.live = LiveProvider(config)
        self.fixture_path = Path(fixture_path)
        self._lock = threading.Lock()

    def complete(self, req: ModelRequest) -> RawCompletion:
        raw = self.live.complete(req)
        key = request_key(req.bundle)
        record = {"text": raw.text, "provider_meta": raw.provider_meta}
        with self._lock:
            fixtures: dict = {}
            if self.fixture_path.exists():
                with open(self.fixture_path, encoding="utf-8") as fh:
                    fixtures = json.load(fh)
            existing = fixtures.get(key)
            if existing is None:
                fixtures[key] = record
            elif isinstance(existing, list):
                existing.append(record)
            else:
                fixtures[key] = [existing, record]
            self.fixture_path.parent.mkdir(parents=True, exist_ok=True)
            tmp = self.fixture_path.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(fixtures, fh, indent=2, sort_keys=True)
            tmp.replace(self.fixture_path)
        return raw


def make_provider(
    kind: ProviderKind,
    endpoint: EndpointConfig | None = None,
    fixture_path: str | Path | None = None,
) -> Provider:
    if kind is ProviderKind.LIVE:
        if endpoint is None:
            raise ValueError("Live provider needs an endpoint config")
        return LiveProvider(endpoint)
    if kind is ProviderKind.REPLAY:
        if fixture_path is None:
            raise ValueError("Replay provider needs a fixture path")
        return ReplayProvider(fixture_path)
    if endpoint is None or fixture_path is None:
        raise ValueError("Record provider needs an endpoint config and a fixture path")
    return RecordProvider(endpoint, fixture_path)


# ---------------------------------------------------------------------------
# Completion parsing
# ---------------------------------------------------------------------------

_FENCE_LINE_RE = re.compile(r"^\s*```.*$", re.M)


def _balanced_object_end(text: str, start: int) -> int | None:
    """Index just past the '}' closing the object opened at ``start``,
    honoring JSON string literals and escapes."""
    depth = 0
    i = start
    n = len(text)
    while i < n:
        c = text[i]
        if c == '"':
            i += 1
            while i < n:
                if text[i] == "\\":
                    i += 2
                    continue
                if text[i] == '"':
                    break
                i += 1
            if i >= n:
                return None
        elif c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    return None


def extract_json(raw: RawCompletion) -> str:
    """First maximal balanced JSON object in the completion, fences and
    surrounding prose stripped. The returned string is guaranteed to parse."""
    text = _FENCE_LINE_RE.sub("", raw.text)
    pos = text.find("{")
    while pos != -1:
        end = _balanced_object_end(text, pos)
        if end is not None:
            candidate = text[pos:end]
            try:
                json.loads(candidate)
                return candidate
            except json.JSONDecodeError:
                pass
        pos = text.find("{", pos + 1)
    raise NoJsonFound("completion contains no parseable JSON object")


def _default_id_gen() -> str:
    return uuid.uuid4().hex


def parse_outcome(
    raw: RawCompletion,
    stock_photos: list[str] | None = None,
    id_gen: Callable[[], str] = _default_id_gen,
) -> BlendOutcome:
    """Parse a completion against the response schema. Generated code goes
    through syntax repair; repair failures propagate to the caller."""
    obj = json.loads(extract_json(raw))
    if not isinstance(obj, dict):
        raise SchemaError("response is not a JSON object")

    def _string_field(key: str) -> str:
        value = obj.get(key)
        if not isinstance(value, str):
            raise SchemaError(f"missing or ill-typed key {key!r}")
        return value

    explanation = _string_field("designExplanation")
    differences = _string_field("differences")
    updated_code = _string_field("updatedCode")
    changes = obj.get("categorizedChanges")
    if not isinstance(changes, list):
        raise SchemaError("missing or ill-typed key 'categorizedChanges'")

    report = repair(updated_code, stock_photos)

    groups: list[ChangeGroup] = []
    for entry in changes:
        if not isinstance(entry, dict):
            raise SchemaError("categorizedChanges entries must be objects")
        category = entry.get("category")
        if not isinstance(category, str) or not category.strip():
            raise SchemaError("change group without a category")
        raw_edits = entry.get("changes")
        if not isinstance(raw_edits, list):
            raise SchemaError(f"change group {category!r} without a changes list")
        edits: list[StyleEdit] = []
        for change in raw_edits:
            if not isinstance(change, dict):
                raise SchemaError("changes entries must be objects")
            before = change.get("before") or ""
            after = change.get("after") or ""
            kind = change.get("type") or ""
            if not isinstance(before, str) or not isinstance(after, str):
                raise SchemaError("before/after must be strings")
            if not (before.strip() or after.strip()):
                continue  # models occasionally emit empty placeholder rows
            edits.append(StyleEdit(kind=str(kind), before=before, after=after))
        if edits:
            groups.append(
                ChangeGroup(id=id_gen(), category=category, edits=tuple(edits))
            )

    return BlendOutcome(
        design_explanation=explanation,
        differences=differences,
        updated_code=report.repaired,
        groups=tuple(groups),
    )


def serialize_outcome(outcome: BlendOutcome) -> dict:
    """Inverse of parse_outcome: re-emit the response schema (camelCase)."""
    return {
        "designExplanation": outcome.design_explanation,
        "differences": outcome.differences,
        "updatedCode": outcome.updated_code.text,
        "categorizedChanges": [
            {
                "category": g.category,
                "changes": [
                    {"type": e.kind, "before": e.before, "after": e.after}
                    for e in g.edits
                ],
            }
            for g in outcome.groups
        ],
    }


# ---------------------------------------------------------------------------
# Gateway facade
# ---------------------------------------------------------------------------


class Gateway:
    """Ties a provider to parsing, with one automatic schema retry on Live."""

    def __init__(self, provider: Provider):
        self.provider = provider

    def complete(self, req: ModelRequest) -> RawCompletion:
        return self.provider.complete(req)

    def blend_outcome(
        self,
        req: ModelRequest,
        stock_photos: list[str] | None = None,
        id_gen: Callable[[], str] = _default_id_gen,
    ) -> BlendOutcome:
        raw = self.provider.complete(req)
        try:
            return parse_outcome(raw, stock_photos, id_gen)
        except SchemaError:
            if self.provider.kind is not ProviderKind.LIVE:
                raise
            retry = ModelRequest(bundle=req.bundle, temperature=req.temperature)
            raw = self.provider.complete(retry)
            return parse_outcome(raw, stock_photos, id_gen)
