#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "evontree/config.hpp"

namespace evontree {

enum class Stage { Extract, Calibrate, Confirm, Reliable, Extrapolate, Gap, Synthesize, Report };

std::string_view to_string(Stage s);
std::optional<Stage> stage_from_string(std::string_view s);
const std::vector<Stage>& all_stages();

// Stage artifact names, relative to the stage directory.
std::vector<std::string> stage_inputs(Stage s);
std::vector<std::string> stage_outputs(Stage s);  // trees/ is expanded at run time

struct StageResult {
  Stage stage;
  std::vector<std::filesystem::path> outputs;
  nlohmann::ordered_json tallies = nlohmann::ordered_json::object();
  bool skipped = false;
};

class Pipeline {
 public:
  explicit Pipeline(Config cfg, bool no_cache = false);

  // Runs one stage unconditionally. Throws Error(MissingUpstream) when an input
  // is absent; gateway failures are raised as Error(Transport) after the
  // partial outputs are written, and the stage is then not marked complete.
  StageResult run_stage(Stage s);

  // All stages in order; with resume, stages whose recorded inputs and
  // outputs still hash the same are skipped.
  std::vector<StageResult> run(bool resume = true);

  // sweep.csv over config gap.sweep_offsets.
  std::filesystem::path sweep();

  const Config& config() const noexcept { return cfg_; }
  const Models& models() const noexcept { return models_; }
  std::filesystem::path path(std::string_view name) const { return cfg_.stage_dir / std::string(name); }
  std::filesystem::path manifest_path() const { return path("manifest.json"); }

 private:
  StageResult extract();
  StageResult calibrate();
  StageResult confirm();
  StageResult reliable();
  StageResult extrapolate();
  StageResult gap();
  StageResult synthesize();
  StageResult report();

  void require(const std::vector<std::string>& names) const;
  bool up_to_date(Stage s) const;
  void record(const StageResult& r);
  nlohmann::ordered_json load_manifest() const;

  Config cfg_;
  bool no_cache_;
  Models models_;
};

}  // namespace evontree
