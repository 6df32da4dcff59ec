"""Zero-shot tabular question answering via LLM code generation, sandboxed
execution, and iterative error repair."""

__version__ = "0.1.0"
