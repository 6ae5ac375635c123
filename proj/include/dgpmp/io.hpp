#pragma once

#include "dgpmp/core.hpp"
#include "dgpmp/env.hpp"
#include "dgpmp/expert.hpp"
#include "dgpmp/learn/loss.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace dgpmp::io {

nlohmann::json to_json(const FixedParams& f);
/// Missing keys keep the FixedParams defaults.
FixedParams fixed_params_from_json(const nlohmann::json& j, FixedParams base = {});

nlohmann::json to_json(const State& s);
State state_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);

/// One problem on disk: a JSON file next to its grid and SDF cache.
struct ProblemFile {
  std::string id;
  EnvKind kind = EnvKind::kForest;
  std::uint64_t seed = 0;
  std::string grid;  // paths relative to the problem file
  std::string sdf;
  Problem problem;
};

nlohmann::json to_json(const ProblemFile& p);
/// Loads the SDF cache if present, otherwise recomputes it from the grid.
ProblemFile load_problem(const std::filesystem::path& path);
void save_problem(const std::filesystem::path& path, const ProblemFile& p);

struct ManifestEntry {
  std::string id;
  EnvKind kind = EnvKind::kForest;
  std::string problem;  // relative to the manifest
};

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
/// Loads every problem listed in a manifest, in manifest order.
std::vector<ProblemFile> load_dataset(const std::filesystem::path& manifest);

struct DemoRecord {
  std::string id;
  std::string problem;  // as listed in the manifest
  Trajectory expert;
  std::uint64_t seed = 0;
  int iterations = 0;
  double cost = 0.0;
};

/// One JSON object per line.
void save_demos(const std::filesystem::path& path, const std::vector<DemoRecord>& demos);
std::vector<DemoRecord> load_demos(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace dgpmp::io
