"""Heuristic detection and repair of malformed generated component sources.

The rule table runs in a fixed order:

    R1  strip code-fence marker lines
    R2  delete import statements
    R3  delete export keywords/statements, keeping the component expression
    R4  keep only the first arrow-component expression when extra top-level
        statements remain
    R5  rewrite image paths outside the stock manifest to a manifest entry
    R6  append closing delimiters when the imbalance is a pure suffix deficit

Fences run first so import stripping never fires inside fenced prose. The
structural pass is a lightweight string/comment-aware delimiter and JSX-tag
counter, not a grammar; rules R1-R6 are this project's reconstruction of a
regex-heuristic repair stage and are documented as such.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import RepairFailed
from .model import ComponentSource


class Defect(Enum):
    FENCED_OUTPUT = "fenced_output"
    HAS_IMPORT = "has_import"
    HAS_EXPORT = "has_export"
    NOT_ARROW_COMPONENT = "not_arrow_component"
    UNBALANCED_DELIMITERS = "unbalanced_delimiters"
    USES_MAP_OVER_LIST = "uses_map_over_list"
    FORBIDDEN_IMAGE_PATH = "forbidden_image_path"


@dataclass(frozen=True)
class RepairReport:
    repaired: ComponentSource
    applied_rules: tuple[str, ...]
    residual_defects: tuple[Defect, ...]


# HTML void elements may legally appear without a self-closing slash in
# fragments the model copies from rendered markup.
VOID_TAGS = {"img", "br", "hr", "input", "meta", "link", "area", "base", "col",
             "embed", "source", "track", "wbr"}

OPENERS = "({["
CLOSERS = ")}]"
MATCH = {")": "(", "}": "{", "]": "["}
CLOSE_FOR = {"(": ")", "{": "}", "[": "]"}

# characters after which a // can start a line comment (plus start of line)
COMMENT_TRIGGERS = set("{([,;=&|")

FENCE_LINE_RE = re.compile(r"^\s*```")
IMPORT_LINE_RE = re.compile(r"^[ \t]*import\b", re.M)
EXPORT_LINE_RE = re.compile(r"^[ \t]*export\b", re.M)
MAP_CALL_RE = re.compile(r"\.map\s*\(")
SRC_ATTR_RE = re.compile(r"""(\bsrc\s*=\s*(["']))([^"']*)(\2)""")
ARROW_HEAD_RE = re.compile(r"\(")


@dataclass
class ScanState:
    open_stack: list[str]
    crossing: bool
    unterminated_string: bool
    tag_stack: list[str]
    tag_crossing: bool

    @property
    def balanced(self) -> bool:
        return (
            not self.open_stack
            and not self.crossing
            and not self.unterminated_string
            and not self.tag_stack
            and not self.tag_crossing
        )

    @property
    def suffix_deficit_only(self) -> bool:
        """Open ()/{}/[] remain but nothing crossed and all tags closed."""
        return (
            bool(self.open_stack)
            and not self.crossing
            and not self.unterminated_string
            and not self.tag_stack
            and not self.tag_crossing
        )


def _is_comment_start(text: str, i: int) -> bool:
    if not text.startswith("//", i):
        return False
    j = i - 1
    while j >= 0 and text[j] in " \t":
        j -= 1
    return j < 0 or text[j] == "\n" or text[j] in COMMENT_TRIGGERS


def scan(text: str, start: int = 0, end: int | None = None) -> ScanState:
    """One pass over ``text[start:end]`` counting delimiters and JSX tags,
    skipping string literals and comments."""
    state = ScanState([], False, False, [], False)
    n = len(text) if end is None else end
    i = start
    while i < n:
        c = text[i]
        if c in "\"'`":
            j = i + 1
            while j < n:
                if text[j] == "\\":
                    j += 2
                    continue
                if text[j] == c:
                    break
                # plain quotes do not span lines; backticks may
                if c != "`" and text[j] == "\n":
                    j = n
                    break
                j += 1
            if j >= n:
                state.unterminated_string = True
                return state
            i = j + 1
            continue
        if text.startswith("/*", i):
            close = text.find("*/", i + 2)
            i = n if close == -1 else close + 2
            continue
        if _is_comment_start(text, i):
            nl = text.find("\n", i)
            i = n if nl == -1 else nl + 1
            continue
        if c in OPENERS:
            state.open_stack.append(c)
            i += 1
            continue
        if c in CLOSERS:
            if state.open_stack and state.open_stack[-1] == MATCH[c]:
                state.open_stack.pop()
            else:
                state.crossing = True
            i += 1
            continue
        if c == "<":
            consumed = _scan_tag(text, i, n, state)
            if consumed:
                i = consumed
                continue
        i += 1
    return state


def _scan_tag(text: str, i: int, n: int, state: ScanState) -> int | None:
    """Handle a JSX tag starting at ``i`` (which holds '<'). Returns the index
    just past the tag, or None when '<' is not a tag."""
    closing = text.startswith("</", i)
    j = i + (2 if closing else 1)
    m = re.match(r"[A-Za-z][\w.-]*", text[j:n])
    if m:
        name = m.group(0)
        j += m.end()
    elif j < n and text[j] == ">":
        name = ""  # fragment <> or </>
    else:
        return None  # comparison operator or stray '<'
    # walk attributes: strings and brace expressions may contain '>'
    depth = 0
    self_closing = False
    while j < n:
        c = text[j]
        if c in "\"'":
            k = j + 1
            while k < n and text[k] != c:
                if text[k] == "\\":
                    k += 1
                k += 1
            if k >= n:
                state.unterminated_string = True
                return n
            j = k + 1
            continue
        if c == "{":
            depth += 1
        elif c == "}":
            depth = max(0, depth - 1)
        elif c == ">" and depth == 0:
            self_closing = j > i and text[j - 1] == "/"
            j += 1
            break
        j += 1
    else:
        # tag never closed with '>'
        state.tag_stack.append(name or "<>")
        return n
    if closing:
        if state.tag_stack and state.tag_stack[-1] == (name or "<>"):
            state.tag_stack.pop()
        else:
            state.tag_crossing = True
    elif not self_closing and name.lower() not in VOID_TAGS:
        state.tag_stack.append(name or "<>")
    return j


def _matching_close(text: str, i: int, end: int | None = None) -> int | None:
    """Index just past the delimiter closing the opener at ``i``."""
    n = len(text) if end is None else end
    opener = text[i]
    target = CLOSE_FOR[opener]
    depth = 0
    j = i
    while j < n:
        c = text[j]
        if c in "\"'`":
            k = j + 1
            while k < n:
                if text[k] == "\\":
                    k += 2
                    continue
                if text[k] == c:
                    break
                if c != "`" and text[k] == "\n":
                    return None
                k += 1
            if k >= n:
                return None
            j = k + 1
            continue
        if text.startswith("/*", j):
            close = text.find("*/", j + 2)
            if close == -1:
                return None
            j = close + 2
            continue
        if _is_comment_start(text, j):
            nl = text.find("\n", j)
            if nl == -1:
                return None
            j = nl + 1
            continue
        if c == opener:
            depth += 1
        elif c == target:
            depth -= 1
            if depth == 0:
                return j + 1
        j += 1
    return None


def _jsx_extent(text: str, i: int) -> int | None:
    """Index just past the point where the JSX element at ``i`` closes."""
    n = len(text)
    state = ScanState([], False, False, [], False)
    consumed = _scan_tag(text, i, n, state)
    if consumed is None:
        return None
    if not state.tag_stack:
        return consumed if not (state.tag_crossing or state.unterminated_string) else None
    j = consumed
    while j < n:
        c = text[j]
        if c in "\"'`":
            k = j + 1
            while k < n:
                if text[k] == "\\":
                    k += 2
                    continue
                if text[k] == c:
                    break
                k += 1
            if k >= n:
                return None
            j = k + 1
            continue
        if c == "<":
            nxt = _scan_tag(text, j, n, state)
            if nxt is not None:
                j = nxt
                if state.tag_crossing or state.unterminated_string:
                    return None
                if not state.tag_stack:
                    return j
                continue
        j += 1
    return None


def _arrow_extent(text: str, i: int) -> int | None:
    """Extent of an arrow-component expression whose parameter list opens at
    ``i``; the body must be a block, a parenthesized expression, or JSX."""
    params_end = _matching_close(text, i)
    if params_end is None:
        return None
    j = params_end
    while j < len(text) and text[j] in " \t\n":
        j += 1
    if not text.startswith("=>", j):
        return None
    j += 2
    while j < len(text) and text[j] in " \t\n":
        j += 1
    if j >= len(text):
        return None
    c = text[j]
    if c in "({":
        return _matching_close(text, j)
    if c == "<":
        return _jsx_extent(text, j)
    return None


def _single_arrow_span(text: str) -> tuple[int, int] | None:
    """(start, end) of the arrow expression when the whole text is exactly one
    arrow component, allowing one trailing semicolon."""
    start = len(text) - len(text.lstrip())
    if start >= len(text) or text[start] != "(":
        return None
    end = _arrow_extent(text, start)
    if end is None:
        return None
    rest = text[end:].strip()
    if rest in ("", ";"):
        return (start, end)
    return None


def _find_arrow_component(text: str) -> tuple[int, int] | None:
    """First arrow-component expression anywhere in the text."""
    for m in ARROW_HEAD_RE.finditer(text):
        span = _arrow_extent(text, m.start())
        if span is not None:
            return (m.start(), span)
    return None


# ---------------------------------------------------------------------------
# Content transforms shared by check() and repair()
# ---------------------------------------------------------------------------


def _strip_fences(text: str) -> str:
    lines = [ln for ln in text.splitlines() if not FENCE_LINE_RE.match(ln)]
    return "\n".join(lines)


def _remove_imports(text: str) -> str:
    out = text
    while True:
        m = IMPORT_LINE_RE.search(out)
        if not m:
            return out
        # statement ends at the first top-level ';' or end of line
        j = m.end()
        depth = 0
        end = None
        while j < len(out):
            c = out[j]
            if c in "\"'`":
                k = j + 1
                while k < len(out) and out[k] != c:
                    if out[k] == "\\":
                        k += 1
                    k += 1
                j = k + 1
                continue
            if c in OPENERS:
                depth += 1
            elif c in CLOSERS:
                depth -= 1
            elif c == ";" and depth <= 0:
                end = j + 1
                break
            elif c == "\n" and depth <= 0:
                end = j
                break
            j += 1
        if end is None:
            end = len(out)
        if end < len(out) and out[end] == "\n":
            end += 1
        out = out[:m.start()] + out[end:]


_EXPORT_BRACE_RE = re.compile(r"^[ \t]*export[ \t]+\{[^}]*\}[ \t]*;?[ \t]*$", re.M)
_EXPORT_DEFAULT_NAME_RE = re.compile(r"^[ \t]*export[ \t]+default[ \t]+\w+[ \t]*;?[ \t]*$", re.M)
_EXPORT_DEFAULT_RE = re.compile(r"^([ \t]*)export[ \t]+default[ \t]+", re.M)
_EXPORT_BINDING_RE = re.compile(
    r"^([ \t]*)export[ \t]+(?:const|let|var)[ \t]+\w+[ \t]*=[ \t]*", re.M
)
_EXPORT_BARE_RE = re.compile(r"^([ \t]*)export[ \t]+", re.M)
_BINDING_RE = re.compile(r"^([ \t]*)(?:const|let|var)[ \t]+\w+[ \t]*=[ \t]*(?=\()", re.M)


def _unwrap_exports(text: str) -> str:
    out = _EXPORT_BRACE_RE.sub("", text)
    out = _EXPORT_DEFAULT_NAME_RE.sub("", out)
    out = _EXPORT_DEFAULT_RE.sub(r"\1", out)
    out = _EXPORT_BINDING_RE.sub(r"\1", out)
    out = _EXPORT_BARE_RE.sub(r"\1", out)
    # the unwrapped statement's terminator goes with the wrapper
    stripped = out.rstrip()
    if stripped.endswith(";"):
        out = stripped[:-1]
    return out


def _forbidden_src_paths(text: str, stock_photos: Sequence[str] | None) -> list[str]:
    bad = []
    for m in SRC_ATTR_RE.finditer(text):
        path = m.group(3)
        if stock_photos is not None:
            if path not in stock_photos:
                bad.append(path)
        elif not path.startswith("/stock/"):
            bad.append(path)
    return bad


def _rewrite_src_paths(text: str, stock_photos: Sequence[str] | None) -> str:
    photos = list(stock_photos) if stock_photos else []

    def pick(path: str) -> str:
        for keyword in ("portrait", "landscape"):
            if keyword in path.lower():
                for p in photos:
                    if keyword in p:
                        return p
        return "/stock/landscape0.jpg"

    def sub(m: re.Match) -> str:
        path = m.group(3)
        if stock_photos is not None:
            forbidden = path not in stock_photos
        else:
            forbidden = not path.startswith("/stock/")
        if not forbidden:
            return m.group(0)
        return m.group(1) + pick(path) + m.group(4)

    return SRC_ATTR_RE.sub(sub, text)


# ---------------------------------------------------------------------------
# check / repair
# ---------------------------------------------------------------------------


def check(text: str, stock_photos: Sequence[str] | None = None) -> list[Defect]:
    """Detect defects. Structural shape is judged on the text with fences,
    imports and exports already notionally removed, so those defects do not
    cascade into a spurious shape defect."""
    defects: list[Defect] = []
    if any(FENCE_LINE_RE.match(ln) for ln in text.splitlines()):
        defects.append(Defect.FENCED_OUTPUT)
    structure = _strip_fences(text) if defects else text
    if IMPORT_LINE_RE.search(structure):
        defects.append(Defect.HAS_IMPORT)
        structure = _remove_imports(structure)
    if EXPORT_LINE_RE.search(structure):
        defects.append(Defect.HAS_EXPORT)
        structure = _unwrap_exports(structure)
    state = scan(structure)
    if not state.balanced:
        defects.append(Defect.UNBALANCED_DELIMITERS)
    elif _single_arrow_span(structure) is None:
        defects.append(Defect.NOT_ARROW_COMPONENT)
    if MAP_CALL_RE.search(text):
        defects.append(Defect.USES_MAP_OVER_LIST)
    if _forbidden_src_paths(text, stock_photos):
        defects.append(Defect.FORBIDDEN_IMAGE_PATH)
    return defects


FATAL_DEFECTS = {Defect.NOT_ARROW_COMPONENT, Defect.UNBALANCED_DELIMITERS}


def repair(text: str, stock_photos: Sequence[str] | None = None) -> RepairReport:
    """Apply R1..R6 in order; raise RepairFailed when the result still is not
    a well-shaped component (the caller regenerates or opens the editor)."""
    work = text
    applied: list[str] = []

    if any(FENCE_LINE_RE.match(ln) for ln in work.splitlines()):
        work = _strip_fences(work)
        applied.append("R1")
    if IMPORT_LINE_RE.search(work):
        work = _remove_imports(work)
        applied.append("R2")
    if EXPORT_LINE_RE.search(work):
        work = _unwrap_exports(work)
        applied.append("R3")
    if _single_arrow_span(work) is None:
        span = _find_arrow_component(work)
        if span is not None:
            work = work[span[0]:span[1]]
            applied.append("R4")
    if _forbidden_src_paths(work, stock_photos):
        work = _rewrite_src_paths(work, stock_photos)
        applied.append("R5")
    state = scan(work)
    if state.suffix_deficit_only:
        closers = "".join(CLOSE_FOR[c] for c in reversed(state.open_stack))
        work = work.rstrip() + closers
        applied.append("R6")
    if applied:
        work = work.strip("\n")

    residual = tuple(check(work, stock_photos))
    fatal = [d for d in residual if d in FATAL_DEFECTS]
    if fatal or not work.strip():
        raise RepairFailed(
            f"unrepairable component source: {', '.join(d.value for d in fatal) or 'empty'}",
            defects=list(residual),
        )
    return RepairReport(
        repaired=ComponentSource(text=work),
        applied_rules=tuple(applied),
        residual_defects=residual,
    )
