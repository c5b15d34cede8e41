#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "elfdd/data/augment.hpp"
#include "elfdd/elf/elf.hpp"
#include "elfdd/exp/experiment.hpp"

namespace elfdd::exp {

inline constexpr const char* kRecordsSchema = "elfdd.records/1";

/// FNV-1a 64 of a string.
std::uint64_t fnv64(const std::string& s);

nlohmann::json augment_to_json(const data::AugmentConfig& a);
nlohmann::json elf_to_json(const elf::ElfConfig& c);
nlohmann::json experiment_to_json(const ExperimentConfig& c);

nlohmann::json record_to_json(const MetricsRecord& r);
/// Throws FormatError on missing fields.
MetricsRecord record_from_json(const nlohmann::json& j);

/// Header:
/// run_id,config_hash,eval_model,distill_model,method,elf,status,n_seeds,
/// mean,std,wall_seconds,task_loss,front_loss,rear_loss,total_loss,seeds,accuracies,error
/// where seeds and accuracies are ';'-separated.
std::string records_csv(const std::vector<MetricsRecord>& records);

}  // namespace elfdd::exp
