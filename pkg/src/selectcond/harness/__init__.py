from .config import ConfigError, ExperimentConfig, config_schema, load_config, parse_config
from .runner import RunResult, csv_to_rows, rows_to_csv, run, verify_summary, write_outputs
from .scenarios import ROW_COLUMNS, ks_uniform, n_replications, rep_rng, run_replication, summarize

__all__ = [
    "ConfigError", "ExperimentConfig", "config_schema", "load_config", "parse_config",
    "RunResult", "csv_to_rows", "rows_to_csv", "run", "verify_summary", "write_outputs",
    "ROW_COLUMNS", "ks_uniform", "n_replications", "rep_rng", "run_replication", "summarize",
]
