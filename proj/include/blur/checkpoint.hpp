#pragma once

#include <string>

#include "blur/network.hpp"

namespace blur {

// Self-describing binary container: magic "BLURCKPT", format version, a
// JSON model-config block, then named entries each carrying a dtype tag
// (real64 or complex-as-two-real64), shape, and little-endian raw values.
// save(load(save(x))) is byte-identical.
void save_checkpoint(const BlurModel& model, const std::string& path);

// Rebuilds the model from the embedded config, then loads all entries.
BlurModel load_checkpoint(const std::string& path);

// Loads entries into an existing model; any missing, unknown, or
// shape-mismatched entry raises an IoError naming it.
void load_checkpoint_into(BlurModel& model, const std::string& path);

}  // namespace blur
