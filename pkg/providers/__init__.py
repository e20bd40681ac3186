# providers/__init__.py
"""
This file makes the 'providers' directory a Python package and exposes the
concrete backend classes.
"""
from .base import LLMBackend
from .remote_provider import RemoteChatBackend
from .replay_provider import ReplayBackend, ReplaySampler, gate_score
from .scripted_provider import ScriptedBackend

__all__ = [
    "LLMBackend",
    "RemoteChatBackend",
    "ReplayBackend",
    "ReplaySampler",
    "ScriptedBackend",
    "gate_score",
]
