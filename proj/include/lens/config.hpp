#pragma once

// JSON configuration files for training and synthetic-corpus generation.
// Unknown keys are rejected so typos fail loudly.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "lens/synth.hpp"
#include "lens/training.hpp"

namespace lens {

/// Named encoder/module/dimension combinations.
struct Preset {
  const char* name;
  LensKind lens;
  TrainModule module;
  std::size_t output_dim;
};

std::span<const Preset> presets() noexcept;
/// Default TrainConfig with the preset's fields applied.
TrainConfig preset_config(const std::string& name);

/// Reads {"preset": ..., <TrainConfig fields>}. Explicit fields override the
/// preset.
TrainConfig parse_train_config(std::string_view json_text, const std::string& name = "<config>");
TrainConfig load_train_config(const std::filesystem::path& path);
std::string train_config_json(const TrainConfig& cfg);

SynthConfig parse_synth_config(std::string_view json_text, const std::string& name = "<config>");
SynthConfig load_synth_config(const std::filesystem::path& path);
std::string synth_config_json(const SynthConfig& cfg);

}  // namespace lens
