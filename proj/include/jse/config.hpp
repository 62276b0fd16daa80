#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "jse/pipelines.hpp"
#include "jse/scene.hpp"

namespace jse {

/// Everything a CLI run needs. Loaded from `key = value` lines grouped under
/// [scene], [room], [pipeline], [aec] and [run] headers.
struct RunConfig {
  SceneConfig scene{};
  /// When set, scenes draw SER / SNR uniformly from these ranges instead of
  /// using scene.ser_db / scene.snr_db. "none" clears a range.
  std::optional<std::pair<double, double>> ser_range = std::pair{-20.0, 0.0};
  std::optional<std::pair<double, double>> snr_range = std::pair{0.0, 10.0};
  PipelineConfig pipeline{};
  std::uint64_t seed = 1;
  std::size_t count = 1;
  std::size_t workers = 0;  // 0 = available parallelism
  std::string out = "out";

  /// Sets "section.key" from its textual value. Throws InvalidInput for
  /// unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  /// Every key with its current value, for provenance records.
  std::map<std::string, std::string> entries() const;
  void validate() const;

  /// Scene `index` of the run: seeds derived from the run seed and the index,
  /// SER / SNR drawn from the configured ranges.
  SceneConfig scene_config(std::size_t index) const;

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
};

}  // namespace jse
