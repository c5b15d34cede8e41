#include "elfdd/exp/report.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "elfdd/core/error.hpp"
#include "elfdd/exp/gold.hpp"
#include "elfdd/exp/serialize.hpp"

namespace elfdd::exp {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits = 2) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

std::string signed_fixed(double v) { return (v >= 0 ? "+" : "") + fixed(v); }

std::string pct(const MetricsRecord& r) { return fixed(100 * r.mean) + " +/- " + fixed(100 * r.std); }

// Left-aligned columns separated by two spaces.
std::string aligned(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    if (width.size() < r.size()) width.resize(r.size(), 0);
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::ostringstream out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      line += r[i];
      if (i + 1 < r.size()) line += std::string(width[i] - r[i].size() + 2, ' ');
    }
    out << line << '\n';
  }
  return out.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ValueError("cannot write " + path.string());
}

std::string upper_method(const std::string& m) {
  std::string s = m;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

}  // namespace

void CrossArchMatrix::require_complete() const {
  if (missing.empty()) return;
  std::string msg = "incomplete grid:";
  for (const auto& m : missing) msg += "\n  " + m;
  throw ValueError(msg);
}

CrossArchMatrix cross_arch_matrix(const std::vector<MetricsRecord>& records) {
  CrossArchMatrix m;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& r : records) {
    const auto key = std::make_pair(r.distill_model, r.eval_model);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, m.cells.size()).first;
      m.cells.push_back({r.distill_model, r.eval_model, std::nullopt, std::nullopt, std::nullopt});
    }
    auto& cell = m.cells[it->second];
    const std::string where = r.distill_model + " -> " + r.eval_model;
    if (r.status != "ok") {
      m.missing.push_back(where + ": " + (r.elf ? "ELF" : "baseline") + " run '" + r.run_id + "' failed (" +
                          r.error + ")");
      continue;
    }
    auto& slot = r.elf ? cell.elf : cell.baseline;
    if (slot) {
      m.missing.push_back(where + ": more than one " + std::string(r.elf ? "ELF" : "baseline") + " record ('" +
                          slot->run_id + "', '" + r.run_id + "')");
      continue;
    }
    slot = r;
  }
  for (auto& c : m.cells) {
    if (c.baseline && c.elf) {
      c.gain = c.elf->mean - c.baseline->mean;
    } else {
      const std::string what = !c.baseline && !c.elf ? "both" : !c.baseline ? "baseline" : "ELF";
      m.missing.push_back(c.distill_model + " -> " + c.eval_model + ": missing " + what);
    }
  }
  return m;
}

std::string CrossArchMatrix::csv() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "distill_model,eval_model,baseline_mean,baseline_std,elf_mean,elf_std,gain\n";
  for (const auto& c : cells) {
    out << c.distill_model << ',' << c.eval_model << ',';
    if (c.baseline) out << c.baseline->mean << ',' << c.baseline->std; else out << ',';
    out << ',';
    if (c.elf) out << c.elf->mean << ',' << c.elf->std; else out << ',';
    out << ',';
    if (c.gain) out << *c.gain;
    out << '\n';
  }
  return out.str();
}

std::string CrossArchMatrix::text() const {
  std::vector<std::vector<std::string>> rows{{"distill model", "eval model", "baseline (%)", "w. ELF (%)", "gain"}};
  for (const auto& c : cells) {
    rows.push_back({c.distill_model, c.eval_model, c.baseline ? pct(*c.baseline) : "missing",
                    c.elf ? pct(*c.elf) : "missing", c.gain ? signed_fixed(100 * *c.gain) : "-"});
  }
  std::string out = aligned(rows);
  if (!missing.empty()) {
    out += "missing cells:\n";
    for (const auto& m : missing) out += "  " + m + "\n";
  }
  return out;
}

std::string published_model_name(const std::string& desk) {
  static const std::regex re(R"((MiniResNet|MiniVGG|ConvNet)-(\d+)-w\d+-(IN|BN))");
  std::smatch m;
  if (!std::regex_match(desk, m, re)) return desk;
  const std::string family = m[1];
  const std::string norm = m[3];
  if (family == "MiniResNet") return "ResNet" + m[2].str() + "-" + norm;
  if (family == "MiniVGG") return "VGG" + m[2].str() + "-" + norm;
  return "ConvNet-" + norm;
}

std::string CrossArchMatrix::gold_comparison(const std::string& citation) const {
  const auto gold = gold_entries(citation);
  std::vector<std::vector<std::string>> rows{{"source", "method", "distill model", "eval model", "baseline (%)",
                                              "w. ELF (%)", "gain"}};
  for (const auto& c : cells) {
    const std::string method = c.baseline ? c.baseline->method : c.elf ? c.elf->method : "?";
    rows.push_back({"desk-scale [NOT COMPARABLE]", upper_method(method), c.distill_model, c.eval_model,
                    c.baseline ? pct(*c.baseline) : "missing", c.elf ? pct(*c.elf) : "missing",
                    c.gain ? signed_fixed(100 * *c.gain) : "-"});
    const std::string pub_eval = published_model_name(c.eval_model);
    std::set<std::string> methods;
    for (const auto& g : gold) {
      if (g.eval_model == pub_eval && g.variant == "gain") methods.insert(g.method);
    }
    for (const auto& g : gold) {
      if (g.eval_model != pub_eval || g.variant != "gain" || !methods.count(g.method)) continue;
      methods.erase(g.method);
      auto b = gold_lookup(citation, g.method, g.distill_model, pub_eval, "baseline", g.ipc);
      auto e = gold_lookup(citation, g.method, g.distill_model, pub_eval, "elf", g.ipc);
      auto fmt = [](const std::optional<GoldEntry>& x) {
        return x ? fixed(x->mean) + (x->std ? " +/- " + fixed(*x->std) : "") : std::string("-");
      };
      rows.push_back({"published " + g.dataset + " (" + citation + ")", g.method, g.distill_model, pub_eval, fmt(b),
                      fmt(e), signed_fixed(g.mean)});
    }
  }
  return "Published values are full-scale CIFAR results, printed for context only.\n" + aligned(rows);
}

std::string to_string(AblationKind k) {
  switch (k) {
    case AblationKind::LossTerms: return "loss-terms";
    case AblationKind::LambdaSweep: return "lambda-sweep";
    case AblationKind::Distance: return "distance";
    case AblationKind::FeatureEpoch: return "feature-epoch";
    case AblationKind::FeatureSource: return "feature-source";
  }
  return "?";
}

AblationKind parse_ablation_kind(const std::string& s) {
  for (auto k : {AblationKind::LossTerms, AblationKind::LambdaSweep, AblationKind::Distance, AblationKind::FeatureEpoch,
                 AblationKind::FeatureSource}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown ablation '" + s +
                    "' (expected loss-terms, lambda-sweep, distance, feature-epoch or feature-source)");
}

namespace {

std::string factor_label(double f) {
  std::ostringstream out;
  out << f;
  return out.str();
}

std::string lambda_label(double ff, double fr) { return "lfx" + factor_label(ff) + "-lrx" + factor_label(fr); }

}  // namespace

std::vector<std::string> ablation_variants(AblationKind kind, const AblationOptions& o) {
  switch (kind) {
    case AblationKind::LossTerms: return {"task", "task+rear", "task+front", "front+rear", "task+front+rear"};
    case AblationKind::LambdaSweep: {
      std::vector<std::string> v;
      for (double ff : o.lambda_factors) {
        for (double fr : o.lambda_factors) v.push_back(lambda_label(ff, fr));
      }
      return v;
    }
    case AblationKind::Distance: return {"mae", "mse", "cos", "ce"};
    case AblationKind::FeatureEpoch: {
      std::vector<std::string> v;
      for (int e : o.feature_epochs) v.push_back("e" + std::to_string(e));
      return v;
    }
    case AblationKind::FeatureSource: return {"baseline", "eval-arch", "extractor"};
  }
  return {};
}

ExperimentConfig ablation_config(AblationKind kind, const ExperimentConfig& base, const AblationOptions& o) {
  ExperimentConfig c = base;
  c.grid.clear();
  c.report_subdir = "ablation-" + to_string(kind);
  const auto labels = ablation_variants(kind, o);
  if (kind == AblationKind::FeatureEpoch) {
    std::set<int> epochs(base.extractor.checkpoint_epochs.begin(), base.extractor.checkpoint_epochs.end());
    epochs.insert(o.feature_epochs.begin(), o.feature_epochs.end());
    c.extractor.checkpoint_epochs.assign(epochs.begin(), epochs.end());
  }
  for (const auto& b : base.grid) {
    if (!b.use_elf) continue;
    std::vector<GridEntry> rows(labels.size(), b);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].id = b.id + "." + labels[i];
    switch (kind) {
      case AblationKind::LossTerms:
        rows[0].use_elf = false;
        rows[1].elf.lambda_front = 0;
        rows[2].elf.lambda_rear = 0;
        rows[3].elf.use_task = false;
        break;
      case AblationKind::LambdaSweep: {
        std::size_t i = 0;
        for (double ff : o.lambda_factors) {
          for (double fr : o.lambda_factors) {
            rows[i].elf.lambda_front = ff * b.elf.lambda_front;
            rows[i].elf.lambda_rear = fr * b.elf.lambda_rear;
            ++i;
          }
        }
        break;
      }
      case AblationKind::Distance:
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i].elf.distance = elf::parse_distance(labels[i]);
        break;
      case AblationKind::FeatureEpoch:
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i].elf.feature_epoch = o.feature_epochs[i];
        break;
      case AblationKind::FeatureSource:
        rows[0].use_elf = false;
        rows[1].source = FeatureSource::EvalArch;
        rows[2].source = FeatureSource::Extractor;
        break;
    }
    c.grid.insert(c.grid.end(), rows.begin(), rows.end());
  }
  if (c.grid.empty()) throw ConfigError("the base grid has no ELF entry to ablate");
  return c;
}

ExperimentResult ablation_grid(AblationKind kind, const ExperimentConfig& base, const AblationOptions& options) {
  return run_experiment(ablation_config(kind, base, options));
}

AblationTable ablation_table(AblationKind kind, const std::vector<MetricsRecord>& records, const AblationOptions& o) {
  AblationTable t;
  t.kind = kind;
  t.variants = ablation_variants(kind, o);
  std::vector<const MetricsRecord*> used;
  std::vector<std::size_t> variant_of;
  for (const auto& r : records) {
    for (std::size_t v = 0; v < t.variants.size(); ++v) {
      const std::string suffix = "." + t.variants[v];
      if (r.run_id.size() > suffix.size() && r.run_id.compare(r.run_id.size() - suffix.size(), suffix.size(), suffix) == 0) {
        if (std::find(t.eval_models.begin(), t.eval_models.end(), r.eval_model) == t.eval_models.end()) {
          t.eval_models.push_back(r.eval_model);
        }
        used.push_back(&r);
        variant_of.push_back(v);
        break;
      }
    }
  }
  t.mean.assign(t.variants.size(), std::vector<std::optional<double>>(t.eval_models.size()));
  t.std = t.mean;
  for (std::size_t i = 0; i < used.size(); ++i) {
    const auto& r = *used[i];
    if (r.status != "ok") continue;
    const auto m = static_cast<std::size_t>(
        std::find(t.eval_models.begin(), t.eval_models.end(), r.eval_model) - t.eval_models.begin());
    t.mean[variant_of[i]][m] = r.mean;
    t.std[variant_of[i]][m] = r.std;
  }
  return t;
}

std::optional<double> AblationTable::at(const std::string& variant, const std::string& eval_model) const {
  const auto v = std::find(variants.begin(), variants.end(), variant);
  const auto m = std::find(eval_models.begin(), eval_models.end(), eval_model);
  if (v == variants.end() || m == eval_models.end()) return std::nullopt;
  return mean[static_cast<std::size_t>(v - variants.begin())][static_cast<std::size_t>(m - eval_models.begin())];
}

std::string AblationTable::text() const {
  auto cell = [&](std::size_t v, std::size_t m) {
    return mean[v][m] ? fixed(100 * *mean[v][m]) + " +/- " + fixed(100 * *std[v][m]) : std::string("missing");
  };
  std::vector<std::vector<std::string>> rows;
  if (kind == AblationKind::Distance) {
    std::vector<std::string> head{"eval model"};
    head.insert(head.end(), variants.begin(), variants.end());
    rows.push_back(head);
    for (std::size_t m = 0; m < eval_models.size(); ++m) {
      std::vector<std::string> r{eval_models[m]};
      for (std::size_t v = 0; v < variants.size(); ++v) r.push_back(cell(v, m));
      rows.push_back(r);
    }
  } else {
    std::vector<std::string> head{to_string(kind)};
    head.insert(head.end(), eval_models.begin(), eval_models.end());
    rows.push_back(head);
    for (std::size_t v = 0; v < variants.size(); ++v) {
      std::vector<std::string> r{variants[v]};
      for (std::size_t m = 0; m < eval_models.size(); ++m) r.push_back(cell(v, m));
      rows.push_back(r);
    }
  }
  return "accuracy (%), mean +/- std over seeds\n" + aligned(rows);
}

std::string AblationTable::csv() const {
  std::ostringstream out;
  out << std::setprecision(17) << "ablation,variant,eval_model,mean,std\n";
  for (std::size_t v = 0; v < variants.size(); ++v) {
    for (std::size_t m = 0; m < eval_models.size(); ++m) {
      out << to_string(kind) << ',' << variants[v] << ',' << eval_models[m] << ',';
      if (mean[v][m]) out << *mean[v][m] << ',' << *std[v][m]; else out << ',';
      out << '\n';
    }
  }
  return out.str();
}

std::string to_string(ReportFormat f) {
  switch (f) {
    case ReportFormat::Csv: return "csv";
    case ReportFormat::Json: return "json";
    case ReportFormat::PlotData: return "plotdata";
  }
  return "?";
}

ReportFormat parse_report_format(const std::string& s) {
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  if (s == "plotdata") return ReportFormat::PlotData;
  throw ConfigError("unknown report format '" + s + "' (expected csv, json or plotdata)");
}

std::vector<fs::path> emit_report(const std::vector<MetricsRecord>& records, ReportFormat format, const fs::path& out,
                                  const fs::path& trace_root) {
  if (records.empty()) throw ValueError("emit_report: no records");
  if (format == ReportFormat::Csv) {
    write_file(out, records_csv(records));
    return {out};
  }
  if (format == ReportFormat::Json) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& r : records) list.push_back(record_to_json(r));
    write_file(out, nlohmann::json{{"schema", kRecordsSchema}, {"records", list}}.dump(2) + "\n");
    return {out};
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw ValueError("cannot create directory " + out.string());
  static const char* kTerms[] = {"task", "front", "rear", "total"};
  std::vector<fs::path> written;
  for (const auto& r : records) {
    for (std::size_t s = 0; s < r.trace_files.size(); ++s) {
      const fs::path src = trace_root / r.trace_files[s];
      std::ifstream in(src);
      if (!in) throw ValueError("cannot read trace " + src.string());
      std::string line;
      std::getline(in, line);  // header
      std::vector<std::ostringstream> series(4);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string step, v;
        std::getline(row, step, ',');
        for (int t = 0; t < 4; ++t) {
          std::getline(row, v, ',');
          series[t] << step << ' ' << v << '\n';
        }
      }
      // Trace files are named "seed<k>.trace.csv".
      const std::string name = fs::path(r.trace_files[s]).filename().string();
      const std::string seed = name.substr(0, name.find('.'));
      for (int t = 0; t < 4; ++t) {
        const fs::path p = out / (r.run_id + "." + seed + "." + kTerms[t] + ".dat");
        write_file(p, series[t].str());
        written.push_back(p);
      }
    }
  }
  return written;
}

}  // namespace elfdd::exp
