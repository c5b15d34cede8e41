#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "elfdd/exp/experiment.hpp"

namespace elfdd::exp {

struct MatrixCell {
  std::string distill_model;
  std::string eval_model;
  std::optional<MetricsRecord> baseline;
  std::optional<MetricsRecord> elf;
  /// ELF mean minus baseline mean; set only when both are present.
  std::optional<double> gain;
};

struct CrossArchMatrix {
  std::vector<MatrixCell> cells;  // in first-appearance order of the records
  /// "distill -> eval: missing baseline|ELF|both" for each incomplete cell,
  /// and failed records.
  std::vector<std::string> missing;

  bool complete() const { return missing.empty(); }
  /// Throws ValueError listing every missing cell.
  void require_complete() const;
  std::string csv() const;
  /// Aligned text, accuracies in percent.
  std::string text() const;
  /// The text table followed by the full-scale published values for the same
  /// family and normalization pairs. Rows measured here are labeled
  /// "NOT COMPARABLE".
  std::string gold_comparison(const std::string& citation = "cifar10-ipc10-elf-gain") const;
};

/// Pairs baseline and ELF records by (distillation model, evaluation model).
/// Failed records count as missing.
CrossArchMatrix cross_arch_matrix(const std::vector<MetricsRecord>& records);

/// Nearest published evaluation-model name for a desk-scale one, e.g.
/// "MiniResNet-18-w8-BN" -> "ResNet18-BN".
std::string published_model_name(const std::string& desk_model);

enum class AblationKind { LossTerms, LambdaSweep, Distance, FeatureEpoch, FeatureSource };
std::string to_string(AblationKind k);
AblationKind parse_ablation_kind(const std::string& s);

struct AblationOptions {
  /// Multipliers of the base lambdas for the lambda sweep.
  std::vector<double> lambda_factors{0.5, 1.0, 2.0};
  /// Extractor epochs for the feature-epoch ablation.
  std::vector<int> feature_epochs{10, 30, 50};
};

/// Row labels in enumeration order.
std::vector<std::string> ablation_variants(AblationKind kind, const AblationOptions& options = {});

/// Replaces the grid of `base` by the ablation rows of every ELF entry of the
/// base grid; entry ids become "<base id>.<variant>". Baseline entries of the
/// base grid are dropped (the loss-term and feature-source kinds emit their
/// own baseline rows).
ExperimentConfig ablation_config(AblationKind kind, const ExperimentConfig& base, const AblationOptions& options = {});

/// run_experiment on ablation_config.
ExperimentResult ablation_grid(AblationKind kind, const ExperimentConfig& base, const AblationOptions& options = {});

struct AblationTable {
  AblationKind kind;
  std::vector<std::string> variants;     // enumeration order
  std::vector<std::string> eval_models;  // first-appearance order
  /// mean[v][m], nullopt when the cell is missing or failed.
  std::vector<std::vector<std::optional<double>>> mean, std;

  /// Distance tables put the variants in columns (mae, mse, cos, ce); the
  /// others put them in rows.
  std::string text() const;
  std::string csv() const;
  std::optional<double> at(const std::string& variant, const std::string& eval_model) const;
};

/// Reads the variant from each record's run id suffix.
AblationTable ablation_table(AblationKind kind, const std::vector<MetricsRecord>& records,
                             const AblationOptions& options = {});

enum class ReportFormat { Csv, Json, PlotData };
std::string to_string(ReportFormat f);
ReportFormat parse_report_format(const std::string& s);

/// Csv: one file `out` (records_csv). Json: one file `out` in the records
/// schema. PlotData: directory `out` with one "<run id>.seed<k>.<term>.dat"
/// file per loss term and trace, two whitespace-separated columns (step,
/// value), one line per step; traces are read relative to `trace_root`.
/// Returns the written files.
std::vector<std::filesystem::path> emit_report(const std::vector<MetricsRecord>& records, ReportFormat format,
                                               const std::filesystem::path& out,
                                               const std::filesystem::path& trace_root = {});

}  // namespace elfdd::exp
