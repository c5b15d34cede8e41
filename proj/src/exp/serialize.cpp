#include "elfdd/exp/serialize.hpp"

#include <iomanip>
#include <sstream>

#include "elfdd/core/error.hpp"
#include "elfdd/distill/distill.hpp"
#include "elfdd/nn/serialize.hpp"

namespace elfdd::exp {

using nlohmann::json;

std::uint64_t fnv64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json augment_to_json(const data::AugmentConfig& a) {
  json ops = json::array();
  for (auto op : a.ops) ops.push_back(data::to_string(op));
  return {{"ops", ops},
          {"single", a.single},
          {"max_shift", a.max_shift},
          {"scale_lo", a.scale_lo},
          {"scale_hi", a.scale_hi},
          {"cutout", a.cutout}};
}

json elf_to_json(const elf::ElfConfig& c) {
  return {{"lambda_front", c.lambda_front},
          {"lambda_rear", c.lambda_rear},
          {"use_task", c.use_task},
          {"distance", elf::to_string(c.distance)},
          {"split", c.split},
          {"feature_epoch", c.feature_epoch},
          {"spatial_adapt", elf::to_string(c.spatial_adapt)},
          {"epochs", c.epochs},
          {"lr", c.lr},
          {"batch_size", c.batch_size},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"decay_at_half", c.decay_at_half},
          {"augment", augment_to_json(c.augment)}};
}

json experiment_to_json(const ExperimentConfig& c) {
  json data;
  if (c.data.kind == DatasetSpec::Kind::Toy) {
    const auto& t = c.data.toy;
    data = {{"kind", "toy"},
            {"classes", t.class_count},
            {"resolution", t.resolution},
            {"channels", t.channels},
            {"samples_per_class", t.samples_per_class},
            {"noise", t.noise},
            {"seed", t.seed},
            {"test_per_class", c.data.test_per_class}};
  } else {
    json files = json::array();
    for (const auto& p : c.data.cifar_train) files.push_back(p.string());
    data = {{"kind", "cifar10"}, {"train", files}, {"test", c.data.cifar_test.string()}};
  }
  json distill = c.distill.path.empty() ? json{{"config", distill::config_to_json(c.distill.config)}}
                                        : json{{"path", c.distill.path.string()}};
  const auto& t = c.extractor.train;
  json extractor{{"model", nn::config_to_json(c.extractor.model)},
                 {"checkpoint_epochs", c.extractor.checkpoint_epochs},
                 {"batch_size", t.batch_size},
                 {"lr", t.lr},
                 {"momentum", t.momentum},
                 {"weight_decay", t.weight_decay},
                 {"decay_at_half", t.decay_at_half}};
  json grid = json::array();
  for (const auto& e : c.grid) {
    grid.push_back({{"id", e.id},
                    {"model", nn::config_to_json(e.model)},
                    {"use_elf", e.use_elf},
                    {"elf", elf_to_json(e.elf)},
                    {"source", to_string(e.source)},
                    {"hash", e.hash()}});
  }
  return {{"name", c.name},   {"data", data},   {"distill", distill},
          {"extractor", extractor}, {"grid", grid}, {"seeds", c.seeds},
          {"seed", c.seed},   {"out_dir", c.out_dir.string()}, {"report_subdir", c.report_subdir.string()},
          {"workers", c.workers}};
}

json record_to_json(const MetricsRecord& r) {
  return {{"run_id", r.run_id},
          {"config_hash", r.config_hash},
          {"eval_model", r.eval_model},
          {"distill_model", r.distill_model},
          {"method", r.method},
          {"elf", r.elf},
          {"seeds", r.seeds},
          {"accuracies", r.accuracies},
          {"mean", r.mean},
          {"std", r.std},
          {"wall_seconds", r.wall_seconds},
          {"final_losses",
           {{"task", r.final_losses.task},
            {"front", r.final_losses.front},
            {"rear", r.final_losses.rear},
            {"total", r.final_losses.total}}},
          {"status", r.status},
          {"error", r.error},
          {"trace_files", r.trace_files}};
}

MetricsRecord record_from_json(const json& j) {
  try {
    MetricsRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.eval_model = j.at("eval_model").get<std::string>();
    r.distill_model = j.at("distill_model").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.elf = j.at("elf").get<bool>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.accuracies = j.at("accuracies").get<std::vector<double>>();
    r.mean = j.at("mean").get<double>();
    r.std = j.at("std").get<double>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    const auto& l = j.at("final_losses");
    r.final_losses = {l.at("task").get<double>(), l.at("front").get<double>(), l.at("rear").get<double>(),
                      l.at("total").get<double>()};
    r.status = j.at("status").get<std::string>();
    r.error = j.at("error").get<std::string>();
    r.trace_files = j.at("trace_files").get<std::vector<std::string>>();
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad metrics record: ") + e.what());
  }
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

template <class T>
std::string joined(const std::vector<T>& v) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ";" : "") << v[i];
  return out.str();
}

}  // namespace

std::string records_csv(const std::vector<MetricsRecord>& records) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "run_id,config_hash,eval_model,distill_model,method,elf,status,n_seeds,mean,std,wall_seconds,"
         "task_loss,front_loss,rear_loss,total_loss,seeds,accuracies,error\n";
  for (const auto& r : records) {
    out << csv_field(r.run_id) << ',' << r.config_hash << ',' << csv_field(r.eval_model) << ','
        << csv_field(r.distill_model) << ',' << csv_field(r.method) << ',' << (r.elf ? 1 : 0) << ',' << r.status
        << ',' << r.accuracies.size() << ',' << r.mean << ',' << r.std << ',' << r.wall_seconds << ','
        << r.final_losses.task << ',' << r.final_losses.front << ',' << r.final_losses.rear << ','
        << r.final_losses.total << ',' << joined(r.seeds) << ',' << joined(r.accuracies) << ','
        << csv_field(r.error) << '\n';
  }
  return out.str();
}

}  // namespace elfdd::exp
