"""Monte-Carlo experiment configuration, execution and output."""
from .config import ConfigError, ExperimentConfig, ScenarioConfig, load, parse, serialize, validate
from .experiment import Aborted, ExperimentResult, ResultRow, loaded_smi, run_experiment, run_trial
from .output import HEADER, emit_csv, emit_plot_script, write_csv

__all__ = ["ConfigError", "ExperimentConfig", "ScenarioConfig", "load", "parse", "serialize",
           "validate", "Aborted", "ExperimentResult", "ResultRow", "loaded_smi", "run_experiment",
           "run_trial", "HEADER", "emit_csv", "emit_plot_script", "write_csv"]
