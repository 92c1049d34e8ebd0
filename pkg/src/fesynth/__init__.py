"""fesynth: an agentic pipeline that harvests React components, seals them
into self-contained snippets, synthesizes new instances with three
strategies, renders and screenshots everything with self-reflective
repair, and scores code generators with a visual-fidelity pass@k."""

__version__ = "0.1.0"
