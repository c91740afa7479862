"""Agentic grid-world navigation stack."""
