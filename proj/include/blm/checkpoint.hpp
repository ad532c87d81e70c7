#pragma once

#include <string>

#include "blm/model.hpp"

namespace blm::model {

// Container layout: magic "BLM1", uint32 LE header length, UTF-8 JSON header
// (config + tensor manifest with name/shape/offset), then raw little-endian
// float32 tensor data in manifest order.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const ModelConfig& config);

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace blm::model
