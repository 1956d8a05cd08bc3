"""uiblend: blend aspects of example screen images into work-in-progress UI
component code through a multimodal model, with toggleable semantic diffs,
heuristic syntax repair, and an event-sourced node-graph session service."""

__version__ = "0.1.0"
