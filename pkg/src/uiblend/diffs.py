"""Semantic-diff toggling over styling-token lists.

A ChangeGroup's edits are before/after runs of styling tokens. Toggling a
group deterministically means locating each edit's token run inside the
document's styling attributes and swapping it for the paired run; the Model
strategy instead asks the model to apply or revert exactly that category.

Replacement semantics (shared with the test oracle): runs are matched per
attribute, left to right, non-overlapping; the scan resumes after the
replacement, never inside it. Every occurrence in every attribute is
replaced. Pure additions (empty before) delete their run on disable; pure
removals (empty after) re-insert their run at the end of the first attribute
the current operation already touched, else at the end of the first styling
attribute. That insertion anchor is a convention: removals carry no position.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import EditNotFound, SchemaError
from .model import BlendOutcome, ChangeGroup, ComponentSource, StyleEdit
from .prompts import render_toggle_prompt
from .repair import repair


class ToggleStrategy(Enum):
    DETERMINISTIC = "deterministic"
    MODEL = "model"


@dataclass(frozen=True)
class TokenSpan:
    """A token run inside one styling attribute."""

    attr_index: int
    start_tok: int
    end_tok: int

    def __post_init__(self):
        if self.start_tok > self.end_tok:
            raise ValueError("span start after end")


@dataclass(frozen=True)
class ClassAttr:
    """One styling attribute: document offsets of its value plus its tokens."""

    index: int
    value_start: int
    value_end: int
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class ClassScan:
    attrs: tuple[ClassAttr, ...]
    skipped_offsets: tuple[int, ...]  # non-literal styling attrs, reported not parsed


_ATTR_HEAD_RE = re.compile(r"\b(?:className|class)\s*=\s*")


def tokenize_class_attrs(code: ComponentSource) -> ClassScan:
    """All string-literal styling attributes in document order.

    Rejoining each attribute's tokens with single spaces and re-embedding
    them at the recorded offsets reproduces the document with attribute
    whitespace normalized and everything else untouched.
    """
    text = code.text
    attrs: list[ClassAttr] = []
    skipped: list[int] = []
    for m in _ATTR_HEAD_RE.finditer(text):
        pos = m.end()
        if pos >= len(text):
            continue
        quote = text[pos]
        if quote not in "\"'":
            skipped.append(m.start())
            continue
        end = pos + 1
        while end < len(text) and text[end] != quote:
            if text[end] == "\\":
                end += 1
            end += 1
        if end >= len(text):
            skipped.append(m.start())
            continue
        value = text[pos + 1:end]
        attrs.append(
            ClassAttr(
                index=len(attrs),
                value_start=pos + 1,
                value_end=end,
                tokens=tuple(value.split()),
            )
        )
    return ClassScan(attrs=tuple(attrs), skipped_offsets=tuple(skipped))


def find_spans(scan: ClassScan, run: Sequence[str]) -> list[TokenSpan]:
    """Non-overlapping occurrences of ``run`` across all attributes."""
    spans: list[TokenSpan] = []
    k = len(run)
    if k == 0:
        return spans
    for attr in scan.attrs:
        i = 0
        tokens = attr.tokens
        while i + k <= len(tokens):
            if list(tokens[i:i + k]) == list(run):
                spans.append(TokenSpan(attr.index, i, i + k - 1))
                i += k
            else:
                i += 1
    return spans


def _replace_run(tokens: list[str], find: Sequence[str], repl: Sequence[str]) -> tuple[list[str], int]:
    k = len(find)
    out: list[str] = []
    count = 0
    i = 0
    while i < len(tokens):
        if k and tokens[i:i + k] == list(find):
            out.extend(repl)
            count += 1
            i += k
        else:
            out.append(tokens[i])
            i += 1
    return out, count


def _apply_edits(
    code: ComponentSource, edits: Sequence[tuple[StyleEdit, list[str], list[str]]]
) -> ComponentSource:
    """Apply (edit, find, repl) triples to the styling attributes.

    An empty ``find`` means insertion at the anchor attribute. Raises
    EditNotFound when a non-empty ``find`` matches nowhere.
    """
    scan = tokenize_class_attrs(code)
    token_lists = [list(a.tokens) for a in scan.attrs]
    touched: list[int] = []
    for edit, find, repl in edits:
        if find:
            total = 0
            for idx, tokens in enumerate(token_lists):
                new_tokens, count = _replace_run(tokens, find, repl)
                if count:
                    token_lists[idx] = new_tokens
                    total += count
                    touched.append(idx)
            if total == 0:
                raise EditNotFound(
                    f"token run {' '.join(find)!r} not found in any styling attribute",
                    edit=edit,
                )
        else:
            if not token_lists:
                raise EditNotFound(
                    "no styling attribute to re-insert removed tokens into",
                    edit=edit,
                )
            anchor = min(touched) if touched else 0
            token_lists[anchor] = token_lists[anchor] + list(repl)
            touched.append(anchor)

    pieces: list[str] = []
    prev = 0
    for attr, new_tokens in zip(scan.attrs, token_lists):
        pieces.append(code.text[prev:attr.value_start])
        if new_tokens == list(attr.tokens):
            pieces.append(code.text[attr.value_start:attr.value_end])
        else:
            pieces.append(" ".join(new_tokens))
        prev = attr.value_end
    pieces.append(code.text[prev:])
    return ComponentSource(text="".join(pieces))


def disable_group(code: ComponentSource, g: ChangeGroup) -> ComponentSource:
    """Revert a group: each edit's ``after`` run becomes its ``before`` run."""
    return _apply_edits(
        code, [(e, e.after_tokens, e.before_tokens) for e in g.edits]
    )


def enable_group(code: ComponentSource, g: ChangeGroup) -> ComponentSource:
    """Apply a group: each edit's ``before`` run becomes its ``after`` run."""
    return _apply_edits(
        code, [(e, e.before_tokens, e.after_tokens) for e in g.edits]
    )


def toggle(
    outcome: BlendOutcome,
    base_code: ComponentSource,
    group_id: str,
    enabled: bool,
    strategy: ToggleStrategy,
    gateway=None,
    stock_photos: list[str] | None = None,
) -> ComponentSource:
    """Produce the code with one group applied or reverted.

    Deterministic swaps token runs in place; Model sends the toggle prompt
    through the gateway and repairs the returned code. The caller owns
    flipping the group's enabled flag in its session state.
    """
    group = outcome.group(group_id)
    if strategy is ToggleStrategy.DETERMINISTIC:
        return enable_group(base_code, group) if enabled else disable_group(base_code, group)
    if gateway is None:
        raise ValueError("Model strategy needs a gateway")
    from .gateway import ModelRequest, extract_json  # late import, avoids cycle

    bundle = render_toggle_prompt(base_code, group, enabled)
    raw = gateway.complete(ModelRequest(bundle=bundle))
    obj = json.loads(extract_json(raw))
    updated = obj.get("updatedCode") if isinstance(obj, dict) else None
    if not isinstance(updated, str):
        raise SchemaError("toggle response missing string key 'updatedCode'")
    return repair(updated, stock_photos).repaired
