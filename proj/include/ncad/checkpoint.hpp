#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ncad/optim.hpp"
#include "ncad/tensor.hpp"

namespace ncad {

// Flat binary parameter container: 8-byte magic, little-endian u64 header
// length, JSON header, then raw little-endian tensor buffers. The header
// carries a mandatory version, the storage dtype, caller metadata, and one
// {name, shape, offset, nbytes} record per tensor (offsets relative to the
// start of the data section).
inline constexpr char kCheckpointMagic[8] = {'N', 'C', 'A', 'D', 'C', 'K', 'P', '1'};
inline constexpr int kCheckpointVersion = 1;

enum class CheckpointDtype { f64, f32 };

CheckpointDtype checkpoint_dtype_from_string(const std::string& s);
std::string to_string(CheckpointDtype d);

struct Checkpoint {
    int version = kCheckpointVersion;
    CheckpointDtype dtype = CheckpointDtype::f64;
    nlohmann::json meta;
    std::vector<ParameterSet::Entry> tensors;  // values always widened to f64 in memory

    ParameterSet to_parameter_set() const;
};

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const nlohmann::json& meta, CheckpointDtype dtype = CheckpointDtype::f64);

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ncad
