"""Shared fixtures: deterministic ids, tiny images, stub providers."""

from __future__ import annotations

import io
import json
import random
from collections import defaultdict

import pytest
from PIL import Image

from uiblend.gateway import Provider, ProviderKind, RawCompletion
from uiblend.images import load_screen_image


def make_png(width: int = 8, height: int = 8, color=(200, 40, 40)) -> bytes:
    buf = io.BytesIO()
    Image.new("RGB", (width, height), color).save(buf, format="PNG")
    return buf.getvalue()


def make_jpeg(width: int = 8, height: int = 8, color=(40, 40, 200)) -> bytes:
    buf = io.BytesIO()
    Image.new("RGB", (width, height), color).save(buf, format="JPEG")
    return buf.getvalue()


class CountingIds:
    def __init__(self):
        self.counts = defaultdict(int)

    def __call__(self, prefix: str) -> str:
        self.counts[prefix] += 1
        return f"{prefix}{self.counts[prefix]}"


class StubProvider(Provider):
    """Always answers with the queued completions, cycling on exhaustion."""

    kind = ProviderKind.REPLAY

    def __init__(self, *texts: str):
        self.texts = list(texts)
        self.calls = 0

    def complete(self, req) -> RawCompletion:
        text = self.texts[min(self.calls, len(self.texts) - 1)]
        self.calls += 1
        return RawCompletion(text=text, provider_meta={"model": "stub"})


def completion_payload(
    updated_code: str,
    groups: list[dict] | None = None,
    explanation: str = "Example design.",
    differences: str = "Example differences.",
) -> str:
    return json.dumps(
        {
            "designExplanation": explanation,
            "differences": differences,
            "updatedCode": updated_code,
            "categorizedChanges": groups or [],
        }
    )


@pytest.fixture
def png_bytes() -> bytes:
    return make_png()


@pytest.fixture
def screen_image(png_bytes):
    return load_screen_image("img-test", png_bytes)


@pytest.fixture
def ids() -> CountingIds:
    return CountingIds()


@pytest.fixture
def rng() -> random.Random:
    return random.Random(0xC0FFEE)


# ---------------------------------------------------------------------------
# Clean component generator (shared by repair and diff tests)
# ---------------------------------------------------------------------------

CLASS_POOL = (
    "p-2 p-4 mt-2 mb-4 flex flex-col gap-2 gap-4 text-sm text-lg bg-white "
    "bg-gray-100 bg-gray-900 rounded-lg rounded-full items-center "
    "justify-between w-full h-10 font-bold text-gray-900 text-gray-500 shadow"
).split()
WORDS = ("profile", "settings", "hiking", "photos", "about", "friends", "events")
STOCK = ("/stock/landscape0.jpg", "/stock/portrait0.jpg", "/stock/landscape1.jpg")


def gen_class_tokens(rng: random.Random, n_min: int = 1, n_max: int = 4) -> str:
    return " ".join(
        rng.choice(CLASS_POOL) for _ in range(rng.randint(n_min, n_max))
    )


def gen_clean_component(rng: random.Random) -> str:
    """A well-formed arrow component: balanced, no imports/exports/fences,
    only /stock/ image paths, no .map calls."""

    def element(depth: int) -> str:
        if depth == 0 or rng.random() < 0.3:
            roll = rng.random()
            if roll < 0.25:
                return f'<img src="{rng.choice(STOCK)}" className="{gen_class_tokens(rng)}"/>'
            if roll < 0.6:
                return f'<p className="{gen_class_tokens(rng)}">{rng.choice(WORDS)}</p>'
            return f"<span>{rng.choice(WORDS)}</span>"
        children = "".join(element(depth - 1) for _ in range(rng.randint(1, 3)))
        return f'<div className="{gen_class_tokens(rng)}">{children}</div>'

    body = element(rng.randint(1, 3))
    roll = rng.random()
    if roll < 0.4:
        return f"() => {body}"
    if roll < 0.7:
        return f"() => (\n  {body}\n)"
    return f"() => {{\n  return (\n    {body}\n  );\n}}"
