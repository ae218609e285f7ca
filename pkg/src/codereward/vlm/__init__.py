"""Prompt pipelines that ask a vision-language model for reward programs."""
from .backends import (
    TOKEN_ENV, Backend, BackendError, ChatMessage, LiveBackend, OracleBackend, ReplayBackend,
    ReplayMismatch, Slot, make_backend, scenario_for,
)
from .pipeline import (
    MaxAttemptsExceeded, NoCodeBlock, PipelineConfig, PipelineError, TrajectoryVerifier,
    extract_program, list_items, run_robotic_pipeline, run_task_pipeline,
)

__all__ = [
    "TOKEN_ENV", "Backend", "BackendError", "ChatMessage", "LiveBackend", "MaxAttemptsExceeded",
    "NoCodeBlock", "OracleBackend", "PipelineConfig", "PipelineError", "ReplayBackend", "ReplayMismatch",
    "Slot", "TrajectoryVerifier", "extract_program", "list_items", "make_backend", "run_robotic_pipeline",
    "run_task_pipeline", "scenario_for",
]
