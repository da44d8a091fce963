"""Prompt templates and rendering."""

from .forge import (DEFAULT_CHAR_BUDGET, DEFAULT_MAX_DIAGNOSTICS, FeedbackContext, Prompt, PromptOverflow,
                    augment_with_feedback, build_prompt)

__all__ = [
    "DEFAULT_CHAR_BUDGET", "DEFAULT_MAX_DIAGNOSTICS", "FeedbackContext", "Prompt", "PromptOverflow",
    "augment_with_feedback", "build_prompt",
]
