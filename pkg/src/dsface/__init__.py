"""Toolkit for spacelike constant mean curvature 1 faces in de Sitter
3-space: Weierstrass-type data, null lifts, monodromy classification,
singular set tracing and mesh export."""

__version__ = "0.1.0"
