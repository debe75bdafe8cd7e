"""Robust digit classification with hybrid NNMF+CNN features and a
feature-space diffusion defense, evaluated under APGD attacks."""

from . import attacks, config, data, diffusion, features, metrics, nn, nnmf, pipeline
from .config import PipelineConfig, parse_config
from .pipeline import evaluate_scenarios, run_pipeline, write_results

__version__ = "0.1.0"

__all__ = [
    "PipelineConfig", "attacks", "config", "data", "diffusion", "evaluate_scenarios",
    "features", "metrics", "nn", "nnmf", "parse_config", "pipeline", "run_pipeline",
    "write_results",
]
