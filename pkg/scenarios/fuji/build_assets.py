"""Regenerate the fuji scenario's binary and golden assets.

Produces, next to this file:
    example.png          drawn reference screen (dark profile with a carousel)
    fixture.json         recorded completions keyed by request hash
    golden_snapshot.json canonical state snapshot of one full scripted run

The completion payloads are authored here; their updatedCode bodies are
derived with the real diff engine so fixture codes and deterministic toggles
can never drift apart. Run after changing prompts, templates, or the script:

    python3 scenarios/fuji/build_assets.py
"""

from __future__ import annotations

import json
from pathlib import Path

from PIL import Image, ImageDraw

from uiblend.diffs import disable_group, enable_group
from uiblend.gateway import request_key
from uiblend.images import load_screen_image
from uiblend.model import (
    AspectKind,
    BlendAspect,
    ChangeGroup,
    ComponentSource,
    StyleEdit,
)
from uiblend.prompts import (
    default_manifest,
    render_global_prompt,
    render_localized_prompt,
)
from uiblend.repair import repair
from uiblend.service.scenario import run_scenario

HERE = Path(__file__).parent


# ---------------------------------------------------------------------------
# Reference screen image
# ---------------------------------------------------------------------------


def draw_example() -> bytes:
    img = Image.new("RGB", (400, 800), (17, 24, 39))  # dark slate background
    d = ImageDraw.Draw(img)
    d.rectangle([0, 0, 400, 96], fill=(31, 41, 55))  # header bar
    d.ellipse([24, 24, 72, 72], fill=(156, 163, 175))  # avatar
    d.rectangle([88, 32, 300, 44], fill=(243, 244, 246))  # name line
    d.rectangle([88, 54, 240, 62], fill=(156, 163, 175))  # subtitle line
    for i in range(4):  # horizontal chip carousel
        x = 16 + i * 96
        d.rounded_rectangle([x, 128, x + 84, 176], radius=16, fill=(31, 41, 55))
        d.rectangle([x + 12, 146, x + 72, 156], fill=(209, 213, 219))
    d.rounded_rectangle([16, 208, 180, 240], radius=16, fill=(37, 99, 235))  # button
    for i in range(5):  # feed cards
        y = 272 + i * 100
        d.rounded_rectangle([16, y, 384, y + 84], radius=8, fill=(31, 41, 55))
    out = HERE / "example.png"
    img.save(out, format="PNG")
    return out.read_bytes()


# ---------------------------------------------------------------------------
# Change groups (shared between fixture payloads and derived codes)
# ---------------------------------------------------------------------------


def edits(*rows: tuple[str, str, str]) -> tuple[StyleEdit, ...]:
    return tuple(StyleEdit(kind=k, before=b, after=a) for k, b, a in rows)


COLOR_V1 = ChangeGroup(
    id="authoring",
    category="Color",
    edits=edits(
        ("background color", "bg-white", "bg-gray-900"),
        ("text color", "text-gray-900", "text-gray-100"),
        ("surface color", "bg-gray-100", "bg-gray-800"),
        ("muted text color", "text-gray-500", "text-gray-400"),
    ),
)
LAYOUT_V1 = ChangeGroup(
    id="authoring",
    category="Layout",
    edits=edits(
        (
            "list layout",
            "flex flex-col gap-2 mt-2",
            "flex flex-col divide-y divide-gray-700 mt-2",
        ),
        ("row spacing", "text-sm p-2", "text-sm py-3 px-2"),
    ),
)
COLOR_V2 = ChangeGroup(
    id="authoring",
    category="Color",
    edits=edits(
        ("background color", "bg-white", "bg-gray-950"),
        ("text color", "text-gray-900", "text-gray-50"),
        ("surface color", "bg-gray-100", "bg-gray-900"),
        ("muted text color", "text-gray-500", "text-gray-400"),
    ),
)
TYPE_V2 = ChangeGroup(
    id="authoring",
    category="Typography",
    edits=edits(("name emphasis", "font-bold text-lg", "font-semibold text-xl")),
)
CAROUSEL = ChangeGroup(
    id="authoring",
    category="Layout",
    edits=edits(
        (
            "list direction",
            "flex flex-col divide-y divide-gray-700 mt-2",
            "flex flex-row gap-3 overflow-x-auto mt-2",
        ),
        ("chip shape", "rounded", "rounded-full shrink-0"),
    ),
)
BUTTON_CLASSES = "mt-2 px-4 py-1 rounded-full bg-blue-600 text-white text-sm"
CONTENT_ADD = ChangeGroup(
    id="authoring",
    category="Content",
    edits=edits(("profile action button", "", BUTTON_CLASSES)),
)

SUBTITLE_LINE = (
    '<p className="text-gray-500 text-sm">Trail runner and weekend photographer</p>'
)
BUTTON_LINE = (
    f'<button className="{BUTTON_CLASSES}">Edit Profile</button>'
)


def groups_payload(*groups: ChangeGroup) -> list[dict]:
    return [
        {
            "category": g.category,
            "changes": [
                {"type": e.kind, "before": e.before, "after": e.after}
                for e in g.edits
            ],
        }
        for g in groups
    ]


def completion(explanation: str, differences: str, code: str, *groups: ChangeGroup) -> str:
    payload = {
        "designExplanation": explanation,
        "differences": differences,
        "updatedCode": code,
        "categorizedChanges": groups_payload(*groups),
    }
    return (
        "Here is the blended component.\n\n```json\n"
        + json.dumps(payload, indent=2)
        + "\n```\n"
    )


def entry(text: str) -> dict:
    return {"text": text, "provider_meta": {"model": "gpt-4o"}}


# ---------------------------------------------------------------------------
# Build
# ---------------------------------------------------------------------------


def main() -> None:
    manifest = default_manifest()
    png = draw_example()
    image = load_screen_image("img1", png)

    base = repair((HERE / "source.txt").read_text(), list(manifest.stock_photos)).repaired
    dark = enable_group(enable_group(base, COLOR_V1), LAYOUT_V1)
    light = disable_group(dark, COLOR_V1)
    carousel = enable_group(light, CAROUSEL)
    assert SUBTITLE_LINE in carousel.text, "subtitle drifted from the fixture codes"
    buttoned = ComponentSource(
        text=carousel.text.replace(
            SUBTITLE_LINE, SUBTITLE_LINE + "\n        " + BUTTON_LINE
        )
    )
    alt = enable_group(enable_group(base, COLOR_V2), TYPE_V2)

    fragment_interests = (HERE / "fragment_interests.txt").read_text().strip()
    fragment_header = (HERE / "fragment_header.txt").read_text().strip()

    key_global = request_key(render_global_prompt(base, manifest, image))
    key_layout = request_key(
        render_localized_prompt(
            light,
            frozenset({BlendAspect(kind=AspectKind.LAYOUT)}),
            fragment_interests,
            manifest,
            image,
        )
    )
    key_content = request_key(
        render_localized_prompt(
            carousel,
            frozenset({BlendAspect(kind=AspectKind.CONTENT)}),
            fragment_header,
            manifest,
            image,
        )
    )

    fixtures = {
        key_global: [
            entry(
                completion(
                    "The reference screen uses a near-black slate palette with "
                    "separated rows, so the card adopts dark surfaces and hairline "
                    "dividers between interests.",
                    "Background, text and surface colors move to the dark palette; "
                    "the interest list drops its gap in favor of dividers with "
                    "taller rows.",
                    dark.text,
                    COLOR_V1,
                    LAYOUT_V1,
                )
            ),
            entry(
                completion(
                    "A second take on the reference: deeper background, brighter "
                    "name line, and a larger heading instead of row dividers.",
                    "Colors shift to the deepest slate tones and the name gains a "
                    "heavier size while the list keeps its stacked layout.",
                    alt.text,
                    COLOR_V2,
                    TYPE_V2,
                )
            ),
        ],
        key_layout: entry(
            completion(
                "The reference arranges its chips in a horizontal strip, so the "
                "interest list becomes a scrollable row of pills.",
                "The interests container switches from a divided column to a "
                "horizontal overflow row and each chip becomes a pill.",
                carousel.text,
                CAROUSEL,
            )
        ),
        key_content: entry(
            completion(
                "The reference screen offers a primary action under the header, "
                "so the card gains an Edit Profile button.",
                "A rounded primary button is added below the subtitle; nothing "
                "else changes.",
                buttoned.text,
                CONTENT_ADD,
            )
        ),
    }
    (HERE / "fixture.json").write_text(
        json.dumps(fixtures, indent=2, sort_keys=True) + "\n"
    )

    result = run_scenario(HERE / "script.json")
    (HERE / "golden_snapshot.json").write_text(result.canonical_snapshot())

    # sanity: the run produced the intended forest
    refs = result.refs
    session = result.state.session
    assert refs == {
        "base": "n1",
        "img": "img1",
        "dark": "n2",
        "light": "n3",
        "carousel": "n4",
        "buttoned": "n5",
        "alt": "n6",
    }, refs
    parent = {n.id: n.parent for n in session.source_nodes}
    assert parent == {
        "n1": None,
        "n2": "n1",
        "n3": "n2",
        "n4": "n3",
        "n5": "n4",
        "n6": "n1",
    }, parent
    assert session.node("n3").code.text == light.text
    assert session.node("n4").code.text == carousel.text
    assert session.node("n5").code.text == buttoned.text
    assert session.node("n6").code.text == alt.text
    again = run_scenario(HERE / "script.json")
    assert again.canonical_snapshot() == result.canonical_snapshot()
    print("fuji assets written:")
    print(f"  example.png        {len(png)} bytes")
    print(f"  fixture.json       {len(fixtures)} request keys")
    print(f"  golden_snapshot.json revision {session.revision}")


if __name__ == "__main__":
    main()
