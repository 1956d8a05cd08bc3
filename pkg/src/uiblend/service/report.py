"""Scenario reporting: delimited node table plus a rendered lineage figure."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .store import SessionState  # noqa: E402

_KIND_COLORS = {
    "uploaded": "#4c72b0",
    "blend": "#dd8452",
    "toggle": "#55a868",
    "manual_edit": "#c44e52",
    "regenerate": "#8172b3",
}


def write_report(state: SessionState, out_dir: str | Path) -> list[Path]:
    """Write nodes.csv and lineage.png for one session; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [_write_csv(state, out / "nodes.csv"), _write_figure(state, out / "lineage.png")]
    return written


def _write_csv(state: SessionState, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["node_id", "parent", "provenance", "created_at", "code_bytes", "change_groups"]
        )
        for node in state.session.source_nodes:
            outcome = state.outcomes.get(node.id)
            writer.writerow(
                [
                    node.id,
                    node.parent or "",
                    node.provenance.kind.value,
                    node.created_at,
                    node.code.byte_len,
                    len(outcome.groups) if outcome else 0,
                ]
            )
    return path


def _layout_forest(state: SessionState) -> dict[str, tuple[float, float]]:
    """Depth = distance from root, x = in-order position within the depth."""
    nodes = state.session.source_nodes
    depth: dict[str, int] = {}

    def node_depth(node_id: str) -> int:
        if node_id in depth:
            return depth[node_id]
        parent = state.session.node(node_id).parent
        d = 0 if parent is None else node_depth(parent) + 1
        depth[node_id] = d
        return d

    columns: dict[int, int] = {}
    positions: dict[str, tuple[float, float]] = {}
    for node in nodes:
        d = node_depth(node.id)
        x = columns.get(d, 0)
        columns[d] = x + 1
        positions[node.id] = (float(d), -float(x))
    return positions


def _write_figure(state: SessionState, path: Path) -> Path:
    positions = _layout_forest(state)
    fig, ax = plt.subplots(figsize=(9, 5))
    for node in state.session.source_nodes:
        if node.parent is not None:
            x0, y0 = positions[node.parent]
            x1, y1 = positions[node.id]
            ax.annotate(
                "",
                xy=(x1, y1),
                xytext=(x0, y0),
                arrowprops={"arrowstyle": "->", "color": "#888888"},
            )
    for node in state.session.source_nodes:
        x, y = positions[node.id]
        kind = node.provenance.kind.value
        ax.scatter([x], [y], s=600, color=_KIND_COLORS.get(kind, "#999999"), zorder=3)
        ax.annotate(
            f"{node.id}\n{kind}",
            (x, y),
            ha="center",
            va="center",
            fontsize=7,
            color="white",
            zorder=4,
        )
    for i, image in enumerate(state.session.example_images):
        ax.scatter([-1.0], [-float(i)], s=600, marker="s", color="#937860", zorder=3)
        ax.annotate(
            f"{image.id}\nexample",
            (-1.0, -float(i)),
            ha="center",
            va="center",
            fontsize=7,
            color="white",
            zorder=4,
        )
    ax.set_title(f"session {state.session.id}: node lineage")
    ax.set_axis_off()
    ax.margins(0.2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
