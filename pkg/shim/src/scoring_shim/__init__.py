"""Minimal completions server used as a reference scoring backend."""

from .model import TinyCausalLM, load_model
from .server import create_app
from .tokenizer import CharMergeTokenizer

__all__ = ["CharMergeTokenizer", "TinyCausalLM", "create_app", "load_model"]
