#pragma once

#include "hsc/competitors.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace YAML {
class Node;
}

namespace hsc {

/// Model file contents: the model plus a canonical text used for hashing.
struct LoadedModel {
  HomogeneousModel model;
  std::string canonical;
  std::uint64_t hash = 0;
};

/// Parses a model description (see README for the schema). Throws ConfigError.
LoadedModel parse_model(const YAML::Node& node);
LoadedModel load_model_file(const std::filesystem::path& path);
LoadedModel load_model_string(const std::string& text);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

struct GridConfig {
  int N = 1000;
  SolveMode mode = SolveMode::deterministic;
};

struct SimulationConfig {
  std::int64_t paths = 100'000;
  std::uint64_t seed = 1;
  std::vector<double> x0{1.0};
  bool antithetic = false;
  int keep_paths = 10;
};

struct OutputConfig {
  std::filesystem::path directory = "out";
  bool csv = true;
  bool json = true;
};

struct ExperimentConfig {
  std::filesystem::path model_path;  // empty when the model is inline
  std::optional<LoadedModel> model;  // always set by the parsers
  GridConfig grid;
  SimulationConfig simulation;
  OutputConfig outputs;
  std::vector<CompetitorSpec> competitors;
  std::optional<std::filesystem::path> feedback_file;
  SolverOptions solver;
};

/// Command-line overrides applied after parsing.
struct Overrides {
  std::optional<std::filesystem::path> out;
  std::optional<std::int64_t> paths;
  std::optional<std::uint64_t> seed;
  std::optional<int> grid;
};

/// Parses an experiment file; relative paths resolve against its directory.
/// Throws ConfigError on malformed input or violated invariants.
ExperimentConfig load_experiment(const std::filesystem::path& path, const Overrides& overrides = {});
ExperimentConfig parse_experiment(const std::string& text, const std::filesystem::path& base_dir,
                                  const Overrides& overrides = {});

}  // namespace hsc
