#pragma once

#include <optional>
#include <string>
#include <vector>

namespace elfdd::exp {

/// One published full-scale accuracy, in percent. Read-only context for
/// reports; never an acceptance target.
struct GoldEntry {
  /// Which published table the value comes from, e.g. "cifar10-ipc10-elf-gain".
  std::string citation;
  std::string dataset;
  int ipc = 0;  // 0 for whole-dataset training
  std::string method;          // "DM", "DSA", "MTT", "FrePo" or "full-data"
  std::string distill_model;   // e.g. "ConvNet-IN"; empty for full-data rows
  std::string eval_model;      // e.g. "ResNet18-BN"
  /// "baseline", "elf", a distance ("mae", ...), a loss-term row or a feature source.
  std::string variant;
  double mean = 0;
  std::optional<double> std;
};

/// Every bundled entry.
const std::vector<GoldEntry>& gold_table();
/// Entries of one citation key, in transcription order.
std::vector<GoldEntry> gold_entries(const std::string& citation);
/// The citation keys, in transcription order.
std::vector<std::string> gold_citations();
/// A single value; nullopt when absent.
std::optional<GoldEntry> gold_lookup(const std::string& citation, const std::string& method,
                                     const std::string& distill_model, const std::string& eval_model,
                                     const std::string& variant, int ipc = 10);
/// ELF mean minus baseline mean as printed in the gain rows.
std::optional<double> gold_gain(const std::string& citation, const std::string& method,
                                const std::string& eval_model);

}  // namespace elfdd::exp
