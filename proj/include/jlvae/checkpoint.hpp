#pragma once

#include <string>

#include "jlvae/model.hpp"

namespace jlvae {

struct Checkpoint {
    ModelConfig config;
    JlvaeParams params;
    std::string preprocess_fingerprint = "none";
};

// Single JSON document. Floats are stored as decimal strings with 17
// significant digits (stated in the file's float_encoding field), so a
// save/load round trip reproduces every parameter bit-exactly.
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace jlvae
