"""Deterministic rendering of the blending prompt templates.

The two blending templates live as golden files under ``templates/`` and are
never embedded inline; rendering fills their ``${...}`` slots and must leave
every other byte untouched. The toggle template is this project's own wording
(the blending templates are fixed, the toggle one may evolve).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import InvariantViolation
from .model import AspectKind, BlendAspect, ChangeGroup, ComponentSource, ScreenImage, sorted_aspects

SLOT_RE = re.compile(r"\$\{([^}]*)\}")

GLOBAL_TEMPLATE = "global"
LOCALIZED_TEMPLATE = "localized"
TOGGLE_TEMPLATE = "toggle"


@dataclass(frozen=True)
class AssetManifest:
    """Assets the model may reference: icon names and stock photo paths."""

    icon_names: tuple[str, ...]
    stock_photos: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "icon_names", tuple(self.icon_names))
        object.__setattr__(self, "stock_photos", tuple(self.stock_photos))
        if not self.icon_names or not self.stock_photos:
            raise InvariantViolation("asset manifest lists must be non-empty")
        for p in self.stock_photos:
            if not p.startswith("/stock/"):
                raise InvariantViolation(f"stock photo {p!r} must live under /stock/")

    def to_dict(self) -> dict:
        return {"icon_names": list(self.icon_names), "stock_photos": list(self.stock_photos)}

    @classmethod
    def from_dict(cls, d: dict) -> "AssetManifest":
        return cls(icon_names=tuple(d["icon_names"]), stock_photos=tuple(d["stock_photos"]))

    @classmethod
    def from_file(cls, path) -> "AssetManifest":
        with open(path, encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


def default_manifest() -> AssetManifest:
    return AssetManifest(
        icon_names=(
            "Camera", "Map", "Heart", "Star", "User", "Settings", "Search",
            "Home", "Mail", "Phone", "Calendar", "Music", "Edit", "Plus",
            "ChevronRight", "ChevronLeft", "Bell", "Bookmark", "Share", "Image",
        ),
        stock_photos=(
            "/stock/landscape0.jpg", "/stock/landscape1.jpg", "/stock/landscape2.jpg",
            "/stock/portrait0.jpg", "/stock/portrait1.jpg", "/stock/portrait2.jpg",
        ),
    )


@dataclass(frozen=True)
class PromptBundle:
    """A rendered prompt plus its out-of-band image attachments."""

    text: str
    images: tuple[ScreenImage, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "images", tuple(self.images))
        if not self.text:
            raise InvariantViolation("prompt text is empty")


class Template:
    """A template file parsed into literal segments and named slots."""

    def __init__(self, name: str, text: str):
        self.name = name
        self.text = text
        parts: list[tuple[str, str]] = []
        pos = 0
        for m in SLOT_RE.finditer(text):
            parts.append(("lit", text[pos:m.start()]))
            parts.append(("slot", m.group(1)))
            pos = m.end()
        parts.append(("lit", text[pos:]))
        self.parts = tuple(parts)

    @property
    def slot_names(self) -> list[str]:
        return [v for k, v in self.parts if k == "slot"]

    def residue(self) -> str:
        """The template with every slot marker deleted."""
        return "".join(v for k, v in self.parts if k == "lit")

    def render(self, fills: dict[str, str]) -> str:
        out: list[str] = []
        for kind, value in self.parts:
            if kind == "lit":
                out.append(value)
            else:
                if value not in fills:
                    raise KeyError(f"template {self.name} slot {value!r} not filled")
                out.append(fills[value])
        return "".join(out)


@lru_cache(maxsize=None)
def load_template(name: str) -> Template:
    text = resources.files("uiblend").joinpath(f"templates/{name}.txt").read_text("utf-8")
    return Template(name, text)


def aspect_phrase(aspects) -> str:
    """Human phrase for the headline slot: lowercase kinds in canonical order
    joined with " and "; a customize aspect contributes its text verbatim."""
    ordered = sorted_aspects(aspects)
    if not ordered:
        raise InvariantViolation("aspect phrase needs at least one aspect")
    parts = [
        a.customize_text if a.kind is AspectKind.CUSTOMIZE else a.kind.value
        for a in ordered
    ]
    return " and ".join(parts)


def rules_line(aspects) -> str:
    """The filter-and-join slot: capitalized non-customize kinds, space-joined."""
    ordered = sorted_aspects(aspects)
    return " ".join(
        a.kind.value.capitalize() for a in ordered if a.kind is not AspectKind.CUSTOMIZE
    )


def customize_rule(aspects) -> str:
    """Extra rule line(s) carrying customize free text, or empty."""
    ordered = sorted_aspects(aspects)
    return "".join(
        f"\n        - Additionally, follow this instruction: {a.customize_text}"
        for a in ordered
        if a.kind is AspectKind.CUSTOMIZE
    )


def render_global_prompt(
    source: ComponentSource, assets: AssetManifest, image: ScreenImage
) -> PromptBundle:
    tpl = load_template(GLOBAL_TEMPLATE)
    text = tpl.render({
        "work-in-progress code": source.text,
        "list of available lucide icon names": ", ".join(assets.icon_names),
    })
    return PromptBundle(text=text, images=(image,))


def render_localized_prompt(
    source: ComponentSource,
    aspects: frozenset[BlendAspect] | set[BlendAspect],
    target_fragment: str,
    assets: AssetManifest,
    image: ScreenImage,
) -> PromptBundle:
    if not aspects:
        raise InvariantViolation("localized prompt needs at least one aspect")
    if not target_fragment:
        raise InvariantViolation("localized prompt needs a target fragment")
    tpl = load_template(LOCALIZED_TEMPLATE)
    text = tpl.render({
        "work-in-progress code": source.text,
        "user specified blending aspect": aspect_phrase(aspects),
        "targetCodeDropped": target_fragment,
        'blendMode.filter(mode => mode !== "Customize").join(" ")': rules_line(aspects),
        "list of avaialble lucide icons": ", ".join(assets.icon_names),
        "customize_rule": customize_rule(aspects),
    })
    return PromptBundle(text=text, images=(image,))


def render_toggle_prompt(
    current: ComponentSource, group: ChangeGroup, enable: bool
) -> PromptBundle:
    tpl = load_template(TOGGLE_TEMPLATE)
    edits = [{"type": e.kind, "before": e.before, "after": e.after} for e in group.edits]
    text = tpl.render({
        "current_code": current.text,
        "category": group.category,
        "edits_json": json.dumps(edits, indent=2),
        "direction": "Apply" if enable else "Revert",
    })
    return PromptBundle(text=text, images=())
