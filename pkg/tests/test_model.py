"""Core type invariants and serialization round-trips."""

from __future__ import annotations

import json

import pytest

from uiblend.errors import (
    CropOutOfBounds,
    EmptyAspects,
    InvariantViolation,
    MissingImage,
    MissingNode,
    NotFound,
)
from uiblend.images import crop_image, load_screen_image, sniff_media_type
from uiblend.model import (
    AspectKind,
    BlendAspect,
    BlendMode,
    BlendOutcome,
    BlendRequest,
    CanvasSession,
    ChangeGroup,
    ComponentSource,
    CropRegion,
    Edge,
    Provenance,
    ProvenanceKind,
    ScreenImage,
    SourceNode,
    StyleEdit,
    sorted_aspects,
    to_json,
    validate_request,
)
from conftest import make_jpeg


# ---------------------------------------------------------------------------
# ComponentSource / ScreenImage / CropRegion
# ---------------------------------------------------------------------------


def test_component_source_records_byte_length():
    src = ComponentSource(text="() => <div/>")
    assert src.byte_len == len("() => <div/>".encode())


def test_component_source_rejects_empty():
    with pytest.raises(InvariantViolation):
        ComponentSource(text="   \n ")


def test_component_source_round_trip():
    src = ComponentSource(text="() => <div className=\"p-2\"/>")
    assert ComponentSource.from_dict(src.to_dict()) == src


def test_screen_image_decodes_png(png_bytes):
    img = load_screen_image("i1", png_bytes)
    assert (img.media_type, img.width_px, img.height_px) == ("png", 8, 8)


def test_screen_image_decodes_jpeg():
    img = load_screen_image("i1", make_jpeg(5, 7))
    assert (img.media_type, img.width_px, img.height_px) == ("jpeg", 5, 7)


def test_screen_image_rejects_text_payload():
    from uiblend.errors import UnsupportedImage

    with pytest.raises(UnsupportedImage):
        load_screen_image("i1", b"not an image at all")


def test_screen_image_magic_bytes_must_match():
    with pytest.raises(InvariantViolation):
        ScreenImage(id="i1", bytes=b"garbage", media_type="png", width_px=1, height_px=1)


def test_screen_image_round_trip(png_bytes):
    img = load_screen_image("i1", png_bytes)
    again = ScreenImage.from_dict(json.loads(to_json(img)))
    assert again == img


def test_sniff_media_type(png_bytes):
    assert sniff_media_type(png_bytes) == "png"
    assert sniff_media_type(make_jpeg()) == "jpeg"


def test_crop_region_rejects_degenerate():
    with pytest.raises(CropOutOfBounds):
        CropRegion(x=0, y=0, w=0, h=5)
    with pytest.raises(CropOutOfBounds):
        CropRegion(x=-1, y=0, w=5, h=5)


def test_crop_region_bounds_check(screen_image):
    CropRegion(x=0, y=0, w=8, h=8).validate_for(screen_image)
    with pytest.raises(CropOutOfBounds):
        CropRegion(x=4, y=4, w=8, h=8).validate_for(screen_image)


def test_crop_image_pixels(png_bytes):
    img = load_screen_image("i1", png_bytes)
    cropped = crop_image(img, CropRegion(x=2, y=2, w=4, h=3))
    assert (cropped.width_px, cropped.height_px) == (4, 3)
    assert cropped.media_type == "png"
    assert cropped.id == "i1:crop:2,2,4,3"


def test_crop_image_identity_is_same_object(png_bytes):
    img = load_screen_image("i1", png_bytes)
    assert crop_image(img, CropRegion(x=0, y=0, w=8, h=8)) is img


def test_crop_of_jpeg_reencodes_png():
    img = load_screen_image("i1", make_jpeg(10, 10))
    cropped = crop_image(img, CropRegion(x=0, y=0, w=4, h=4))
    assert cropped.media_type == "png"


# ---------------------------------------------------------------------------
# Aspects and blend requests
# ---------------------------------------------------------------------------


def test_customize_requires_text():
    with pytest.raises(InvariantViolation):
        BlendAspect(kind=AspectKind.CUSTOMIZE)
    with pytest.raises(InvariantViolation):
        BlendAspect(kind=AspectKind.COLOR, customize_text="nope")


def test_aspect_canonical_order():
    aspects = [
        BlendAspect(kind=AspectKind.CUSTOMIZE, customize_text="x"),
        BlendAspect(kind=AspectKind.CONTENT),
        BlendAspect(kind=AspectKind.COLOR),
        BlendAspect(kind=AspectKind.LAYOUT),
    ]
    assert [a.kind for a in sorted_aspects(aspects)] == [
        AspectKind.COLOR,
        AspectKind.LAYOUT,
        AspectKind.CONTENT,
        AspectKind.CUSTOMIZE,
    ]


def test_global_request_carries_no_aspects():
    with pytest.raises(InvariantViolation):
        BlendRequest(
            mode=BlendMode.GLOBAL,
            source_node="n1",
            example="i1",
            aspects=frozenset({BlendAspect(kind=AspectKind.COLOR)}),
        )


def test_localized_request_needs_aspects_and_fragment():
    with pytest.raises(EmptyAspects):
        BlendRequest(
            mode=BlendMode.LOCALIZED,
            source_node="n1",
            example="i1",
            target_fragment="<div/>",
        )
    with pytest.raises(InvariantViolation):
        BlendRequest(
            mode=BlendMode.LOCALIZED,
            source_node="n1",
            example="i1",
            aspects=frozenset({BlendAspect(kind=AspectKind.LAYOUT)}),
        )


def test_blend_request_round_trip():
    req = BlendRequest(
        mode=BlendMode.LOCALIZED,
        source_node="n1",
        example="i1",
        crop=CropRegion(x=1, y=2, w=3, h=4),
        aspects=frozenset(
            {
                BlendAspect(kind=AspectKind.LAYOUT),
                BlendAspect(kind=AspectKind.CUSTOMIZE, customize_text="add a button"),
            }
        ),
        target_fragment="<ul><li>a</li></ul>",
    )
    assert BlendRequest.from_dict(req.to_dict()) == req


# ---------------------------------------------------------------------------
# Style edits, groups, outcomes
# ---------------------------------------------------------------------------


def test_style_edit_normalizes_whitespace():
    edit = StyleEdit(kind="color", before="  bg-black \n text-white ", after="bg-white")
    assert edit.before == "bg-black text-white"
    assert edit.before_tokens == ["bg-black", "text-white"]


def test_style_edit_rejects_both_empty():
    with pytest.raises(InvariantViolation):
        StyleEdit(kind="color", before="  ", after="")


def test_change_group_needs_edits_and_category():
    edit = StyleEdit(kind="color", before="a", after="b")
    with pytest.raises(InvariantViolation):
        ChangeGroup(id="g1", category="Color", edits=())
    with pytest.raises(InvariantViolation):
        ChangeGroup(id="g1", category="  ", edits=(edit,))


def _outcome() -> BlendOutcome:
    return BlendOutcome(
        design_explanation="dark",
        differences="light vs dark",
        updated_code=ComponentSource(text="() => <div className=\"bg-white\"/>"),
        groups=(
            ChangeGroup(
                id="g1",
                category="Color: light to dark",
                edits=(StyleEdit(kind="color", before="bg-black", after="bg-white"),),
            ),
        ),
    )


def test_outcome_group_ids_unique():
    o = _outcome()
    with pytest.raises(InvariantViolation):
        BlendOutcome(
            design_explanation="x",
            differences="y",
            updated_code=o.updated_code,
            groups=(o.groups[0], o.groups[0]),
        )


def test_outcome_with_group_enabled():
    flipped = _outcome().with_group_enabled("g1", False)
    assert flipped.groups[0].enabled is False
    with pytest.raises(NotFound):
        _outcome().with_group_enabled("missing", False)


def test_outcome_round_trip():
    o = _outcome()
    assert BlendOutcome.from_dict(o.to_dict()) == o


# ---------------------------------------------------------------------------
# Provenance, nodes, sessions
# ---------------------------------------------------------------------------


def test_provenance_kind_specific_payload():
    Provenance(kind=ProvenanceKind.BLEND, request_id="r1")
    with pytest.raises(InvariantViolation):
        Provenance(kind=ProvenanceKind.BLEND)
    with pytest.raises(InvariantViolation):
        Provenance(kind=ProvenanceKind.UPLOADED, request_id="r1")
    with pytest.raises(InvariantViolation):
        Provenance(kind=ProvenanceKind.TOGGLE, group_id="g1")  # missing enabled


def _node(node_id: str, parent: str | None, kind=ProvenanceKind.UPLOADED) -> SourceNode:
    prov = (
        Provenance(kind=ProvenanceKind.UPLOADED)
        if kind is ProvenanceKind.UPLOADED
        else Provenance(kind=ProvenanceKind.BLEND, request_id=f"req-{node_id}")
    )
    return SourceNode(
        id=node_id,
        code=ComponentSource(text="() => <div/>"),
        parent=parent,
        provenance=prov,
        created_at="2025-01-01T00:00:00+00:00",
    )


def test_uploaded_node_has_no_parent():
    with pytest.raises(InvariantViolation):
        _node("n1", parent="n0")
    with pytest.raises(InvariantViolation):
        _node("n1", parent=None, kind=ProvenanceKind.BLEND)


def test_session_rejects_duplicate_and_dangling():
    n1 = _node("n1", None)
    with pytest.raises(InvariantViolation):
        CanvasSession(id="s1", source_nodes=(n1, n1))
    with pytest.raises(InvariantViolation):
        CanvasSession(
            id="s1",
            source_nodes=(n1,),
            edges=(Edge(from_id="n1", to_id="ghost", label="blend"),),
        )


def test_session_rejects_unknown_parent():
    n2 = _node("n2", "missing", kind=ProvenanceKind.BLEND)
    with pytest.raises(InvariantViolation):
        CanvasSession(id="s1", source_nodes=(n2,))


def test_session_round_trip(screen_image):
    n1 = _node("n1", None)
    n2 = _node("n2", "n1", kind=ProvenanceKind.BLEND)
    session = CanvasSession(
        id="s1",
        source_nodes=(n1, n2),
        example_images=(screen_image,),
        edges=(Edge(from_id="n1", to_id="n2", label="blend"),),
        revision=3,
    )
    assert CanvasSession.from_dict(session.to_dict()) == session
    assert session.node("n2").parent == "n1"
    with pytest.raises(MissingNode):
        session.node("nope")
    with pytest.raises(MissingImage):
        session.image("nope")


def test_validate_request_resolves_references(screen_image):
    session = CanvasSession(
        id="s1", source_nodes=(_node("n1", None),), example_images=(screen_image,)
    )
    ok = BlendRequest(mode=BlendMode.GLOBAL, source_node="n1", example=screen_image.id)
    validate_request(ok, session)
    with pytest.raises(MissingNode):
        validate_request(
            BlendRequest(mode=BlendMode.GLOBAL, source_node="ghost", example=screen_image.id),
            session,
        )
    with pytest.raises(MissingImage):
        validate_request(
            BlendRequest(mode=BlendMode.GLOBAL, source_node="n1", example="ghost"), session
        )
    with pytest.raises(CropOutOfBounds):
        validate_request(
            BlendRequest(
                mode=BlendMode.GLOBAL,
                source_node="n1",
                example=screen_image.id,
                crop=CropRegion(x=0, y=0, w=64, h=64),
            ),
            session,
        )
