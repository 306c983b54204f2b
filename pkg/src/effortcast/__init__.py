"""Software effort estimation: prompt corpora for LLM fine-tuning, classical baselines, evaluation."""

from __future__ import annotations

__version__ = "0.1.0"
