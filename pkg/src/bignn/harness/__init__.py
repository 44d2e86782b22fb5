"""Experiment harness: configs, data ingestion, replication runners and the CLI."""

from .config import ExperimentSpec, RealDatasetSpec, build_spec, load_spec
from .ingest import load_csv, real_test_size
from .runner import run, run_denoise_bench, run_real, run_sim1, run_sim2

__all__ = ["ExperimentSpec", "RealDatasetSpec", "build_spec", "load_spec", "load_csv",
           "real_test_size", "run", "run_denoise_bench", "run_real", "run_sim1", "run_sim2"]
