"""Core domain types: components, images, blend requests, semantic diffs, sessions.

All types are immutable values (frozen dataclasses) that validate their
invariants on construction and serialize to canonical snake_case JSON via
``to_dict`` / ``from_dict``. Mutation lives exclusively in the session
service, which creates new nodes rather than editing existing ones.
"""

from __future__ import annotations

import json
import base64
from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    CropOutOfBounds,
    EmptyAspects,
    InvariantViolation,
    MissingImage,
    MissingNode,
    NotFound,
)

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
JPEG_MAGIC = b"\xff\xd8\xff"


# ---------------------------------------------------------------------------
# Component source
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComponentSource:
    """Source text of a single-screen UI component.

    Structural invariants (no import/export statements, exactly one top-level
    arrow component) are enforced by the repair pass; every construction path
    that accepts untrusted text runs it through ``repair.repair`` first.
    """

    text: str
    byte_len: int = field(init=False)

    def __post_init__(self):
        if not self.text.strip():
            raise InvariantViolation("component source is empty")
        object.__setattr__(self, "byte_len", len(self.text.encode("utf-8")))

    def to_dict(self) -> dict:
        return {"text": self.text, "byte_len": self.byte_len}

    @classmethod
    def from_dict(cls, d: dict) -> "ComponentSource":
        return cls(text=d["text"])


# ---------------------------------------------------------------------------
# Images and crops
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScreenImage:
    """An uploaded example screenshot or sketch (png or jpeg payload)."""

    id: str
    bytes: bytes
    media_type: str  # "png" | "jpeg"
    width_px: int
    height_px: int

    def __post_init__(self):
        if self.media_type not in ("png", "jpeg"):
            raise InvariantViolation(f"unsupported media_type {self.media_type!r}")
        if self.width_px <= 0 or self.height_px <= 0:
            raise InvariantViolation("image dimensions must be positive")
        magic = PNG_MAGIC if self.media_type == "png" else JPEG_MAGIC
        if not self.bytes.startswith(magic):
            raise InvariantViolation(f"payload magic bytes do not match {self.media_type}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "bytes": base64.b64encode(self.bytes).decode("ascii"),
            "media_type": self.media_type,
            "width_px": self.width_px,
            "height_px": self.height_px,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScreenImage":
        return cls(
            id=d["id"],
            bytes=base64.b64decode(d["bytes"]),
            media_type=d["media_type"],
            width_px=d["width_px"],
            height_px=d["height_px"],
        )


@dataclass(frozen=True)
class CropRegion:
    """Rectangle in source-image pixel coordinates, origin top-left."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0 or self.w <= 0 or self.h <= 0:
            raise CropOutOfBounds(f"degenerate crop region {self}")

    def validate_for(self, img: ScreenImage) -> None:
        if self.x + self.w > img.width_px or self.y + self.h > img.height_px:
            raise CropOutOfBounds(
                f"crop {self} exceeds image bounds {img.width_px}x{img.height_px}"
            )

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @classmethod
    def from_dict(cls, d: dict) -> "CropRegion":
        return cls(x=d["x"], y=d["y"], w=d["w"], h=d["h"])


# ---------------------------------------------------------------------------
# Blend aspects and requests
# ---------------------------------------------------------------------------


class AspectKind(Enum):
    COLOR = "color"
    LAYOUT = "layout"
    CONTENT = "content"
    CUSTOMIZE = "customize"

    @property
    def order(self) -> int:
        return _ASPECT_ORDER[self]


_ASPECT_ORDER = {
    AspectKind.COLOR: 0,
    AspectKind.LAYOUT: 1,
    AspectKind.CONTENT: 2,
    AspectKind.CUSTOMIZE: 3,
}


@dataclass(frozen=True)
class BlendAspect:
    """One dimension to transfer from the example: color, layout, content,
    or a free-text customize instruction."""

    kind: AspectKind
    customize_text: str | None = None

    def __post_init__(self):
        if self.kind is AspectKind.CUSTOMIZE:
            if not (self.customize_text or "").strip():
                raise InvariantViolation("customize aspect requires non-empty text")
        elif self.customize_text is not None:
            raise InvariantViolation("customize_text only valid for customize aspect")

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind.value}
        if self.customize_text is not None:
            d["customize_text"] = self.customize_text
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BlendAspect":
        return cls(kind=AspectKind(d["kind"]), customize_text=d.get("customize_text"))


def sorted_aspects(aspects) -> list[BlendAspect]:
    """Canonical aspect order: color < layout < content < customize."""
    return sorted(aspects, key=lambda a: (a.kind.order, a.customize_text or ""))


class BlendMode(Enum):
    GLOBAL = "global"
    LOCALIZED = "localized"


@dataclass(frozen=True)
class BlendRequest:
    """A user blending intent against one source node and one example image."""

    mode: BlendMode
    source_node: str
    example: str
    crop: CropRegion | None = None
    aspects: frozenset[BlendAspect] = frozenset()
    target_fragment: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "aspects", frozenset(self.aspects))
        if self.mode is BlendMode.GLOBAL:
            if self.aspects:
                raise InvariantViolation("global blend must not carry aspects")
            if self.target_fragment is not None:
                raise InvariantViolation("global blend must not carry a target fragment")
        else:
            if not self.aspects:
                raise EmptyAspects("localized blend requires at least one aspect")
            if not (self.target_fragment or "").strip():
                raise InvariantViolation("localized blend requires a target fragment")

    def to_dict(self) -> dict:
        d: dict = {
            "mode": self.mode.value,
            "source_node": self.source_node,
            "example": self.example,
            "aspects": [a.to_dict() for a in sorted_aspects(self.aspects)],
        }
        if self.crop is not None:
            d["crop"] = self.crop.to_dict()
        if self.target_fragment is not None:
            d["target_fragment"] = self.target_fragment
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BlendRequest":
        return cls(
            mode=BlendMode(d["mode"]),
            source_node=d["source_node"],
            example=d["example"],
            crop=CropRegion.from_dict(d["crop"]) if d.get("crop") else None,
            aspects=frozenset(BlendAspect.from_dict(a) for a in d.get("aspects", [])),
            target_fragment=d.get("target_fragment"),
        )


# ---------------------------------------------------------------------------
# Semantic diff
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StyleEdit:
    """One before/after pair of styling tokens; empty before = pure addition,
    empty after = pure removal."""

    kind: str
    before: str
    after: str

    def __post_init__(self):
        before = " ".join(self.before.split())
        after = " ".join(self.after.split())
        object.__setattr__(self, "before", before)
        object.__setattr__(self, "after", after)
        if not before and not after:
            raise InvariantViolation("style edit with empty before and after")

    @property
    def before_tokens(self) -> list[str]:
        return self.before.split()

    @property
    def after_tokens(self) -> list[str]:
        return self.after.split()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "before": self.before, "after": self.after}

    @classmethod
    def from_dict(cls, d: dict) -> "StyleEdit":
        return cls(kind=d["kind"], before=d["before"], after=d["after"])


@dataclass(frozen=True)
class ChangeGroup:
    """One semantic category of change; the unit of toggling."""

    id: str
    category: str
    edits: tuple[StyleEdit, ...]
    enabled: bool = True

    def __post_init__(self):
        object.__setattr__(self, "edits", tuple(self.edits))
        if not self.edits:
            raise InvariantViolation("change group needs at least one edit")
        if not self.category.strip():
            raise InvariantViolation("change group needs a category")

    def with_enabled(self, enabled: bool) -> "ChangeGroup":
        return ChangeGroup(id=self.id, category=self.category, edits=self.edits, enabled=enabled)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "category": self.category,
            "edits": [e.to_dict() for e in self.edits],
            "enabled": self.enabled,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChangeGroup":
        return cls(
            id=d["id"],
            category=d["category"],
            edits=tuple(StyleEdit.from_dict(e) for e in d["edits"]),
            enabled=d["enabled"],
        )


@dataclass(frozen=True)
class BlendOutcome:
    """The parsed model response for one blend."""

    design_explanation: str
    differences: str
    updated_code: ComponentSource
    groups: tuple[ChangeGroup, ...]

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        ids = [g.id for g in self.groups]
        if len(ids) != len(set(ids)):
            raise InvariantViolation("change group ids must be unique")

    def group(self, group_id: str) -> ChangeGroup:
        for g in self.groups:
            if g.id == group_id:
                return g
        raise NotFound(f"no change group {group_id}")

    def with_group_enabled(self, group_id: str, enabled: bool) -> "BlendOutcome":
        groups = tuple(
            g.with_enabled(enabled) if g.id == group_id else g for g in self.groups
        )
        self.group(group_id)  # raises if absent
        return BlendOutcome(
            design_explanation=self.design_explanation,
            differences=self.differences,
            updated_code=self.updated_code,
            groups=groups,
        )

    def to_dict(self) -> dict:
        return {
            "design_explanation": self.design_explanation,
            "differences": self.differences,
            "updated_code": self.updated_code.to_dict(),
            "groups": [g.to_dict() for g in self.groups],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BlendOutcome":
        return cls(
            design_explanation=d["design_explanation"],
            differences=d["differences"],
            updated_code=ComponentSource.from_dict(d["updated_code"]),
            groups=tuple(ChangeGroup.from_dict(g) for g in d["groups"]),
        )


# ---------------------------------------------------------------------------
# Nodes and sessions
# ---------------------------------------------------------------------------


class ProvenanceKind(Enum):
    UPLOADED = "uploaded"
    BLEND = "blend"
    TOGGLE = "toggle"
    MANUAL_EDIT = "manual_edit"
    REGENERATE = "regenerate"


@dataclass(frozen=True)
class Provenance:
    """How a source node came to exist; blend/regenerate carry the request id,
    toggle carries the flipped group id and its new enabled state."""

    kind: ProvenanceKind
    request_id: str | None = None
    group_id: str | None = None
    enabled: bool | None = None

    def __post_init__(self):
        k = self.kind
        if k in (ProvenanceKind.BLEND, ProvenanceKind.REGENERATE):
            if not self.request_id:
                raise InvariantViolation(f"{k.value} provenance requires request_id")
        elif self.request_id is not None:
            raise InvariantViolation(f"{k.value} provenance must not carry request_id")
        if k is ProvenanceKind.TOGGLE:
            if not self.group_id or self.enabled is None:
                raise InvariantViolation("toggle provenance requires group_id and enabled")
        elif self.group_id is not None or self.enabled is not None:
            raise InvariantViolation(f"{k.value} provenance must not carry toggle fields")

    def to_dict(self) -> dict:
        d: dict = {"kind": self.kind.value}
        if self.request_id is not None:
            d["request_id"] = self.request_id
        if self.group_id is not None:
            d["group_id"] = self.group_id
        if self.enabled is not None:
            d["enabled"] = self.enabled
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Provenance":
        return cls(
            kind=ProvenanceKind(d["kind"]),
            request_id=d.get("request_id"),
            group_id=d.get("group_id"),
            enabled=d.get("enabled"),
        )


@dataclass(frozen=True)
class SourceNode:
    """One immutable version of the work-in-progress component."""

    id: str
    code: ComponentSource
    parent: str | None
    provenance: Provenance
    created_at: str

    def __post_init__(self):
        uploaded = self.provenance.kind is ProvenanceKind.UPLOADED
        if uploaded and self.parent is not None:
            raise InvariantViolation("uploaded nodes have no parent")
        if not uploaded and self.parent is None:
            raise InvariantViolation("derived nodes require a parent")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "code": self.code.to_dict(),
            "parent": self.parent,
            "provenance": self.provenance.to_dict(),
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SourceNode":
        return cls(
            id=d["id"],
            code=ComponentSource.from_dict(d["code"]),
            parent=d["parent"],
            provenance=Provenance.from_dict(d["provenance"]),
            created_at=d["created_at"],
        )


@dataclass(frozen=True)
class Edge:
    from_id: str
    to_id: str
    label: str

    def to_dict(self) -> dict:
        return {"from_id": self.from_id, "to_id": self.to_id, "label": self.label}

    @classmethod
    def from_dict(cls, d: dict) -> "Edge":
        return cls(from_id=d["from_id"], to_id=d["to_id"], label=d["label"])


@dataclass(frozen=True)
class CanvasSession:
    """Persistent node graph: source-node versions, example images, lineage edges."""

    id: str
    source_nodes: tuple[SourceNode, ...] = ()
    example_images: tuple[ScreenImage, ...] = ()
    edges: tuple[Edge, ...] = ()
    revision: int = 0

    def __post_init__(self):
        object.__setattr__(self, "source_nodes", tuple(self.source_nodes))
        object.__setattr__(self, "example_images", tuple(self.example_images))
        object.__setattr__(self, "edges", tuple(self.edges))
        self.validate()

    def validate(self) -> None:
        node_ids = {n.id for n in self.source_nodes}
        image_ids = {i.id for i in self.example_images}
        if len(node_ids) != len(self.source_nodes):
            raise InvariantViolation("duplicate source node ids")
        known = node_ids | image_ids
        for e in self.edges:
            if e.from_id not in known or e.to_id not in known:
                raise InvariantViolation(f"edge {e} references unknown node")
        # parent links must form a forest (acyclic, parents exist)
        parents = {n.id: n.parent for n in self.source_nodes}
        for nid, parent in parents.items():
            if parent is not None and parent not in parents:
                raise InvariantViolation(f"node {nid} has unknown parent {parent}")
            seen = {nid}
            cur = parent
            while cur is not None:
                if cur in seen:
                    raise InvariantViolation(f"parent cycle through {cur}")
                seen.add(cur)
                cur = parents[cur]

    def node(self, node_id: str) -> SourceNode:
        for n in self.source_nodes:
            if n.id == node_id:
                return n
        raise MissingNode(f"no source node {node_id}")

    def image(self, image_id: str) -> ScreenImage:
        for i in self.example_images:
            if i.id == image_id:
                return i
        raise MissingImage(f"no example image {image_id}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "source_nodes": [n.to_dict() for n in self.source_nodes],
            "example_images": [i.to_dict() for i in self.example_images],
            "edges": [e.to_dict() for e in self.edges],
            "revision": self.revision,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CanvasSession":
        return cls(
            id=d["id"],
            source_nodes=tuple(SourceNode.from_dict(n) for n in d["source_nodes"]),
            example_images=tuple(ScreenImage.from_dict(i) for i in d["example_images"]),
            edges=tuple(Edge.from_dict(e) for e in d["edges"]),
            revision=d["revision"],
        )


# ---------------------------------------------------------------------------
# Request validation
# ---------------------------------------------------------------------------


def validate_request(req: BlendRequest, session: CanvasSession) -> None:
    """Check that a request's references resolve inside the session and its
    crop fits the referenced image. Invariants internal to the request are
    enforced at construction."""
    node_ids = {n.id for n in session.source_nodes}
    if req.source_node not in node_ids:
        raise MissingNode(f"no source node {req.source_node}")
    img = None
    for i in session.example_images:
        if i.id == req.example:
            img = i
            break
    if img is None:
        raise MissingImage(f"no example image {req.example}")
    if req.crop is not None:
        req.crop.validate_for(img)


def to_json(value, indent: int | None = None) -> str:
    """Canonical JSON text for any core type (dicts pass through)."""
    d = value.to_dict() if hasattr(value, "to_dict") else value
    return json.dumps(d, ensure_ascii=False, indent=indent)
