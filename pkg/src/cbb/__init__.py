"""Procedural polygon change batteries and coarse-shape observers.

Subpackages by concern:

- :mod:`cbb.geometry` — polygon generation, vertex classification, edits
- :mod:`cbb.raster` — mask/image rasterization, palette, PNG IO
- :mod:`cbb.trials` — battery/training-set construction and JSONL manifests
- :mod:`cbb.observers` — exact / hull / closing / external mask producers
- :mod:`cbb.metrics` — relative-area-change scoring, threshold sweeps, fits
- :mod:`cbb.report` — CSV/SVG/markdown artifacts
- :mod:`cbb.cli` — the `cbb` command line
"""

from __future__ import annotations

__version__ = "0.1.0"
