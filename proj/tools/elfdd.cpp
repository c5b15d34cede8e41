// elfdd: distill, extract, eval, grid, ablate, report.
//
// Exit codes: 0 success, 1 runtime error, 2 configuration error,
// 3 some grid entries failed.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "elfdd/core/error.hpp"
#include "elfdd/exp/config_file.hpp"
#include "elfdd/exp/experiment.hpp"
#include "elfdd/exp/report.hpp"

namespace fs = std::filesystem;
using namespace elfdd;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

struct Common {
  std::string config_path;
  std::string out_dir;
  int workers = 0;
  exp::ElfOverrides overrides;
};

void add_common(CLI::App* cmd, Common& c, bool elf_flags) {
  cmd->add_option("-c,--config", c.config_path, "experiment INI file")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out-dir", c.out_dir, "output directory (overrides [experiment] out_dir)");
  if (!elf_flags) return;
  cmd->add_option("--workers", c.workers, "parallel grid cells");
  cmd->add_option("--lambda-front", c.overrides.lambda_front, "front loss weight for ELF entries");
  cmd->add_option("--lambda-rear", c.overrides.lambda_rear, "rear loss weight for ELF entries");
  cmd->add_option("--distance", c.overrides.distance, "mae, mse, cos or ce");
  cmd->add_option("--feature-epoch", c.overrides.feature_epoch, "extractor checkpoint epoch");
  cmd->add_option("--split", c.overrides.split, "split point name of the evaluation model");
  cmd->add_option("--spatial-adapt", c.overrides.spatial_adapt, "off or avgpool");
}

exp::ExperimentConfig load(const Common& c) {
  auto config = exp::load_experiment_config(c.config_path);
  if (!c.out_dir.empty()) config.out_dir = c.out_dir;
  if (c.workers > 0) config.workers = c.workers;
  exp::apply_overrides(config, c.overrides);
  return config;
}

const exp::GridEntry& find_entry(const exp::ExperimentConfig& c, const std::string& id) {
  for (const auto& e : c.grid) {
    if (e.id == id) return e;
  }
  std::string ids;
  for (const auto& e : c.grid) ids += " " + e.id;
  throw ConfigError("no grid entry '" + id + "' (have:" + ids + ")");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw ValueError("cannot write " + path.string());
}

int cmd_distill(const Common& c) {
  const auto config = load(c);
  if (!config.distill.path.empty()) throw ConfigError("[distill] path is set: nothing to distill");
  config.distill.config.validate();
  auto [train, test] = config.data.load();
  const auto syn = exp::prepare_synthetic(config, train);
  std::printf("synthetic set: %lld images (%d per class), %s\n", static_cast<long long>(syn.size()), syn.ipc,
              (config.out_dir / "synthetic").c_str());
  return 0;
}

int cmd_extract(const Common& c, const std::string& entry_id, const std::string& out) {
  auto config = load(c);
  config.validate();
  const auto& entry = find_entry(config, entry_id);
  if (!entry.use_elf) throw ConfigError("entry '" + entry_id + "' does not use ELF");
  auto [train, test] = config.data.load();
  const auto syn = exp::prepare_synthetic(config, train);
  const auto path = exp::prepare_cache(config, entry, train, syn);
  if (!out.empty()) {
    fs::create_directories(fs::path(out).parent_path().empty() ? fs::path(".") : fs::path(out).parent_path());
    fs::copy_file(path, out, fs::copy_options::overwrite_existing);
  }
  const auto cache = elf::load_cache(path);
  std::printf("feature cache: %lld entries of %s from %s epoch %d, %s\n", static_cast<long long>(cache.size()),
              shape_string(cache.feature_shape()).c_str(), cache.meta.extractor.name().c_str(),
              cache.meta.extractor_epoch, (out.empty() ? path : fs::path(out)).c_str());
  return 0;
}

int cmd_eval(const Common& c, const std::string& entry_id, std::uint64_t seed) {
  auto config = load(c);
  config.validate();
  const auto& entry = find_entry(config, entry_id);
  auto [train, test] = config.data.load();
  const auto syn = exp::prepare_synthetic(config, train);
  std::optional<elf::FeatureCache> cache;
  if (entry.use_elf) {
    cache = elf::load_cache(exp::prepare_cache(config, entry, train, syn), data::dataset_hash(syn.as_labeled()));
  }
  const auto r = exp::run_cell(entry, seed, config.seed, syn, cache ? &*cache : nullptr, test);
  nlohmann::json j{{"entry", entry.id},
                   {"eval_model", entry.model.name()},
                   {"elf", entry.use_elf},
                   {"seed", seed},
                   {"accuracy", r.accuracy},
                   {"seconds", r.seconds},
                   {"final_losses",
                    {{"task", r.final_losses.task},
                     {"front", r.final_losses.front},
                     {"rear", r.final_losses.rear},
                     {"total", r.final_losses.total}}}};
  std::cout << j.dump(2) << "\n";
  return 0;
}

int finish_grid(const exp::ExperimentResult& result) {
  std::printf("cells trained %d, reused %d, failed entries %d\n", result.cells_trained, result.cells_reused,
              result.failed_entries);
  for (const auto& r : result.records) {
    if (r.status != "ok") std::fprintf(stderr, "entry %s failed: %s\n", r.run_id.c_str(), r.error.c_str());
  }
  return result.failed_entries > 0 ? kExitPartial : 0;
}

int cmd_grid(const Common& c, bool gold) {
  const auto config = load(c);
  const auto result = exp::run_experiment(config);
  const auto matrix = exp::cross_arch_matrix(result.records);
  const std::string text = gold ? matrix.gold_comparison() : matrix.text();
  std::cout << text;
  write_text(config.out_dir / "matrix.txt", text);
  write_text(config.out_dir / "matrix.csv", matrix.csv());
  return finish_grid(result);
}

int cmd_ablate(const Common& c, const std::string& kind_name, const exp::AblationOptions& options) {
  const auto config = load(c);
  const auto kind = exp::parse_ablation_kind(kind_name);
  const auto ablation = exp::ablation_config(kind, config, options);
  const auto result = exp::run_experiment(ablation);
  const auto table = exp::ablation_table(kind, result.records, options);
  std::cout << table.text();
  write_text(ablation.out_dir / ablation.report_subdir / "table.txt", table.text());
  write_text(ablation.out_dir / ablation.report_subdir / "table.csv", table.csv());
  return finish_grid(result);
}

int cmd_report(const std::string& records_path, const std::string& format, const std::string& out,
               const std::string& trace_root) {
  const auto records = exp::load_records(records_path);
  if (format == "matrix" || format == "gold") {
    const auto m = exp::cross_arch_matrix(records);
    const std::string text = format == "gold" ? m.gold_comparison() : m.text();
    if (out.empty()) std::cout << text; else write_text(out, text);
    return m.complete() ? 0 : kExitPartial;
  }
  if (out.empty()) throw ConfigError("report --format " + format + " needs --out");
  const fs::path root = trace_root.empty() ? fs::path(records_path).parent_path() : fs::path(trace_root);
  const auto files = exp::emit_report(records, exp::parse_report_format(format), out, root);
  std::printf("wrote %zu file(s)\n", files.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dataset distillation with ELF feature supervision: experiments at desk scale"};
  app.require_subcommand(1);
  app.set_version_flag("--version", exp::version_string());

  Common common;
  auto* distill = app.add_subcommand("distill", "distill the synthetic set S of an experiment");
  add_common(distill, common, false);

  std::string entry_id, extract_out;
  auto* extract = app.add_subcommand("extract", "build the feature cache an entry uses");
  add_common(extract, common, true);
  extract->add_option("-e,--entry", entry_id, "grid entry id")->required();
  extract->add_option("--cache-out", extract_out, "also copy the cache file here");

  std::uint64_t seed = 0;
  auto* eval = app.add_subcommand("eval", "train and test one (entry, seed) cell");
  add_common(eval, common, true);
  eval->add_option("-e,--entry", entry_id, "grid entry id")->required();
  eval->add_option("-s,--seed", seed, "seed value");

  bool gold = false;
  auto* grid = app.add_subcommand("grid", "run every entry and seed of an experiment (resumable)");
  add_common(grid, common, true);
  grid->add_flag("--gold", gold, "print published full-scale values next to the results");

  std::string kind;
  exp::AblationOptions ablation;
  auto* ablate = app.add_subcommand("ablate", "run an ablation around the ELF entries of an experiment");
  add_common(ablate, common, true);
  ablate->add_option("-k,--kind", kind, "loss-terms, lambda-sweep, distance, feature-epoch or feature-source")
      ->required();
  ablate->add_option("--lambda-factors", ablation.lambda_factors, "multipliers of the base weights")->delimiter(',');
  ablate->add_option("--feature-epochs", ablation.feature_epochs, "extractor epochs to compare")->delimiter(',');

  std::string records_path, format = "csv", out, trace_root;
  auto* report = app.add_subcommand("report", "render records.json as csv, json, plotdata, matrix or gold");
  report->add_option("-r,--records", records_path, "records.json")->required()->check(CLI::ExistingFile);
  report->add_option("-f,--format", format, "csv, json, plotdata, matrix or gold");
  report->add_option("-o,--out", out, "output file (directory for plotdata)");
  report->add_option("--trace-root", trace_root, "directory the trace paths are relative to");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*distill) return cmd_distill(common);
    if (*extract) return cmd_extract(common, entry_id, extract_out);
    if (*eval) return cmd_eval(common, entry_id, seed);
    if (*grid) return cmd_grid(common, gold);
    if (*ablate) return cmd_ablate(common, kind, ablation);
    if (*report) return cmd_report(records_path, format, out, trace_root);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
