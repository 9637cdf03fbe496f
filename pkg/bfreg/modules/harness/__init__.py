from bfreg.modules.harness.models import (
    TrainConfig, TraceRow, TrainResult, ReplicationResult, StrategySummary, ExperimentReport,
)
from bfreg.modules.harness.schemas import CountsConfig, OptimizerConfig, LofiConfig, ArchConfig, RunConfig
from bfreg.modules.harness.presets import preset, reference_for, PRESETS, REFERENCES
from bfreg.modules.harness.service import (
    relative_rmse, shock_positions, Standardizer, Evaluator, train, train_lofi_network,
    apply_overrides, build_run_config, load_run_config, build_specs, train_config_for, lofi_train_config,
    ReplicationContext, interpolate_fields, prepare_replication, histogram_counts, parameter_histograms,
    sparsity_fraction, run_cell, replication_job, select_lambda, lambda_grid_search, train_lambda_grid,
    ratio_checks, sparsity_check, k_summary, run_replications, crossover_study, replication_rows, histogram_rows,
)
