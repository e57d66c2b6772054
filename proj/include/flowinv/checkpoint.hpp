#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "flowinv/nti.hpp"
#include "flowinv/training.hpp"

namespace flowinv {

// Container layout (all integers little-endian):
//   "FINV" | u32 version | u64 header length | JSON header
//          | u64 value count | value count x f64
struct Container {
    std::uint32_t version = kCheckpointVersion;
    nlohmann::json header;
    Vector values;
};

std::string encode_container(const Container& c);
Container decode_container(std::string_view bytes);

void write_container(const Container& c, const std::filesystem::path& path);
Container read_container(const std::filesystem::path& path);

nlohmann::json to_json(const FieldDims& dims);
FieldDims field_dims_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void save_null_schedule(const NullSchedule& schedule, const std::filesystem::path& path);
NullSchedule load_null_schedule(const std::filesystem::path& path);

}  // namespace flowinv
