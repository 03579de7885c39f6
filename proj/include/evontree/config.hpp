#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evontree/calibration.hpp"
#include "evontree/extraction.hpp"
#include "evontree/gateway.hpp"
#include "evontree/rules.hpp"
#include "evontree/synthesis.hpp"
#include "evontree/synthetic.hpp"

namespace evontree {

struct SyntheticConfig {
  std::uint64_t seed = 0;
  int depth = 3;
  int branching = 3;
  int roots = 1;
  double synonym_rate = 0.5;
  std::filesystem::path ground_truth;  // overrides sampling when set
  NoiseProfile noise;
  GenerationProfile generation;
};

struct EndpointConfig {
  std::string kind = "synthetic";  // "synthetic" | "http"
  std::string endpoint;
  std::string name = "default";
};

struct ModelConfig {
  EndpointConfig primary;
  int timeout_s = 120;
  int max_in_flight = 8;
  int max_attempts = 3;
  int backoff_ms = 1000;
  std::filesystem::path cache_dir;  // default <stage_dir>/cache
  SyntheticConfig synthetic;
  std::optional<EndpointConfig> judge;
};

struct Config {
  ModelConfig model;
  ExtractionConfig extraction;
  bool roots_given = false;
  int threads = 0;  // scoring.threads; 0 = gateway bound
  SweepSpec calibration;
  int hops = 1;
  GapMode gap_mode = GapMode::AllBelow;
  std::vector<double> sweep_offsets{-0.5, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  SynthesisConfig synthesis;
  std::filesystem::path stage_dir = "run";

  // Unknown keys, wrong types and out-of-range values throw Error(ConfigInvalid).
  static Config from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  static Config load(const std::filesystem::path& path);

  nlohmann::ordered_json to_json() const;
  // sha256 over to_json() without the output and cache locations.
  std::string hash() const;
};

struct Overrides {
  std::optional<std::filesystem::path> stage_dir;
  std::optional<std::uint64_t> seed;
  bool no_cache = false;
};

// Applies CLI overrides and EVONTREE_ENDPOINT.
void apply_overrides(Config& cfg, const Overrides& o);

struct Models {
  std::shared_ptr<const GroundTruth> truth;  // synthetic runs only
  std::shared_ptr<Gateway> model;
  std::shared_ptr<Gateway> judge;  // null when no judge is configured
};

Models make_models(const Config& cfg, bool no_cache = false);

}  // namespace evontree
