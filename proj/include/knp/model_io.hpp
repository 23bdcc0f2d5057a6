#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "knp/inference.hpp"
#include "knp/knp.hpp"
#include "knp/model_selection.hpp"
#include "knp/simulation.hpp"

namespace knp {

/// Model file format tag; the major number must match on load.
inline constexpr const char* kModelFormat = "knp-model";
inline constexpr int kModelFormatMajor = 1;
inline constexpr int kModelFormatMinor = 0;

/// Declarative settings for every subcommand. Unset sections keep their
/// defaults.
struct RunConfig {
  std::string data;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int threads = 1;
  FitConfig fit;
  CvPlan cv;  // empty grid means CvPlan::default_grid(n)
  BootstrapSpec bootstrap;
  SimDesign simulation;
  std::optional<std::vector<TuningTriple>> sim_grid;  // overrides SimOptions::defaults
};

/// JSON text <-> RunConfig. Unknown keys are rejected.
std::string to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);
RunConfig read_run_config(const std::string& path);

/// FNV-1a hash (hex) of the canonical JSON of the fit settings.
std::string config_hash(const FitConfig& cfg);

struct ModelFile {
  KnpModel model;
  FitConfig config;
  std::string config_hash;
  std::vector<std::string> w_names;
};

void save_model(std::ostream& out, const KnpModel& model, const FitConfig& cfg,
                const std::vector<std::string>& w_names);
void save_model_file(const std::string& path, const KnpModel& model, const FitConfig& cfg,
                     const std::vector<std::string>& w_names);
/// Throws ValidationError on malformed files or a format version mismatch.
ModelFile load_model(std::istream& in);
ModelFile load_model_file(const std::string& path);

}  // namespace knp
