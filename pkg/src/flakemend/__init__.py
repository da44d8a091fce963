"""Repair order-dependent and implementation-dependent flaky tests with an LLM in the loop."""

__version__ = "0.1.0"
