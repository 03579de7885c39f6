#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "evontree/error.hpp"
#include "evontree/pipeline.hpp"

namespace {

int exit_code(evontree::ErrorCode c) {
  using evontree::ErrorCode;
  switch (c) {
    case ErrorCode::ConfigInvalid: return 2;
    case ErrorCode::MissingUpstream: return 3;
    case ErrorCode::Transport:
    case ErrorCode::Protocol:
    case ErrorCode::UnrecognizedPrompt: return 4;
    default: return 1;
  }
}

void print(const evontree::StageResult& r) {
  std::cerr << to_string(r.stage) << (r.skipped ? " (up to date)" : "");
  if (!r.skipped && !r.tallies.empty()) std::cerr << ' ' << r.tallies.dump();
  std::cerr << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ontology extraction, confirmation and gap-driven corpus synthesis"};
  app.require_subcommand(1);

  std::string config;
  std::string stage_dir;
  bool no_cache = false;
  std::uint64_t seed = 0;

  const char* commands[] = {"run",         "extract", "calibrate",  "confirm", "reliable",
                            "extrapolate", "gap",     "synthesize", "report",  "sweep"};
  for (const char* name : commands) {
    auto* sub = app.add_subcommand(name, std::string("run the ") + name + (std::string(name) == "run" ? " pipeline" : " stage"));
    sub->add_option("--config", config, "path to the JSON config")->required();
    sub->add_option("--stage-dir", stage_dir, "directory for stage artifacts");
    sub->add_flag("--no-cache", no_cache, "skip cache reads (responses are still written)");
    sub->add_option("--seed", seed, "override model.synthetic.seed");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  const auto* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  try {
    auto cfg = evontree::Config::load(config);
    evontree::Overrides o;
    if (!stage_dir.empty()) o.stage_dir = stage_dir;
    if (chosen->count("--seed") > 0) o.seed = seed;
    o.no_cache = no_cache;
    evontree::apply_overrides(cfg, o);

    evontree::Pipeline pipeline(std::move(cfg), no_cache);
    if (command == "run") {
      for (const auto& r : pipeline.run(!no_cache)) print(r);
    } else if (command == "sweep") {
      std::cout << pipeline.sweep().string() << '\n';
    } else {
      const auto r = pipeline.run_stage(*evontree::stage_from_string(command));
      print(r);
      for (const auto& p : r.outputs) std::cout << p.string() << '\n';
    }
  } catch (const evontree::Error& e) {
    std::cerr << "evontree " << command << ": " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "evontree " << command << ": " << e.what() << '\n';
    return 1;
  }
  return 0;
}
