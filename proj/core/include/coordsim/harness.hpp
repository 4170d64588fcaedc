#pragma once

// Configuration, orchestration and report persistence for the command-line
// front end. Every subcommand is deterministic for a fixed configuration.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coordsim/binning.hpp"
#include "coordsim/codec.hpp"
#include "coordsim/polar.hpp"
#include "coordsim/region.hpp"

namespace coordsim::harness {

inline constexpr int kSchemaVersion = 1;

/// Validation failure located by a JSON pointer into the configuration.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string pointer, const std::string& message);
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

struct RegionOptions {
  std::size_t w_size = 2;
  std::size_t max_w_size = 0;  // nonzero: sweep |W| = 1..max_w_size instead
  std::size_t restarts = 32;
  std::size_t iterations = 2000;
  std::size_t inner_steps = 4;
  double tol = region::kDefaultTolerance;
};

struct BinningOptions {
  prob::JointPMF joint = binning::dsbs(0.1);
  std::vector<std::size_t> n_list = {4, 8, 12};
  std::vector<double> rates = {0.2, 0.3, 0.8};
  std::size_t replicates = 100;
  std::size_t draws = 400;
};

struct ExperimentConfig {
  std::optional<polar::SourceModel> model;
  std::optional<region::CoordinationTarget> target;
  std::optional<region::AuxiliaryDecomposition> aux;
  polar::PolarParams params;
  std::uint64_t seed = 1;
  std::size_t k = 8;
  std::size_t trials = 10;
  std::vector<std::uint64_t> seeds;  // explicit trial seeds; empty means seed, seed+1, ...
  std::filesystem::path output_dir = ".";
  std::optional<std::filesystem::path> sets_cache;
  RegionOptions region;
  BinningOptions binning;

  /// Seeds actually used by `simulate`.
  std::vector<std::uint64_t> trial_seeds() const;
};

/// Parses and validates a configuration document. Unknown keys are
/// rejected; relative file references resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");
ExperimentConfig parse_config_file(const std::filesystem::path& path);
/// Reads a document from a path, or from stdin when the path is "-".
nlohmann::json load_json(const std::filesystem::path& path);

/// Echo of the effective configuration.
nlohmann::json to_json(const ExperimentConfig& c);

/// (P_U, P_X, P_{Y|X}, P_{V|UXY}) of a source model.
region::CoordinationTarget target_from_model(const polar::SourceModel& m);
/// The model's own (P_{W|UX}, P_{V|WY}) as a region witness.
region::AuxiliaryDecomposition aux_from_model(const polar::SourceModel& m);

/// Loads the construction from the cache when the key matches, otherwise
/// builds it and, if a cache path is given, stores it.
polar::Construction load_or_construct(const polar::SourceModel& m, const polar::PolarParams& params,
                                      std::uint64_t seed, const std::optional<std::filesystem::path>& cache);

struct RunOutcome {
  nlohmann::json report;
  std::vector<std::filesystem::path> files;
  std::string summary;  // human-readable text for the terminal
};

RunOutcome run_region(const ExperimentConfig& c);
RunOutcome run_construct(const ExperimentConfig& c);
RunOutcome run_simulate(const ExperimentConfig& c);
RunOutcome run_verify_binning(const ExperimentConfig& c);

/// Dispatches by subcommand name.
RunOutcome run(const std::string& subcommand, const ExperimentConfig& c);

/// CSV of simulation rows: n,k,seed,s_error_rate,...,d1_plus_d2.
std::string trials_csv(const std::vector<codec::TrialResult>& rows);

/// CSV of binning statistics: n,rate,lemma,statistic,value.
std::string binning_csv(const std::vector<binning::BinningTrialStats>& rows);

/// Long-format merge of simulate reports: n,k,seed,metric,value.
/// Throws std::runtime_error on a schema-version mismatch.
std::string emit_plotdata(const std::vector<nlohmann::json>& reports);

/// Mean and standard error of each per-trial metric.
nlohmann::json aggregate(const std::vector<codec::TrialResult>& rows);

/// Fixed-format double for CSV output.
std::string format_number(double v);

}  // namespace coordsim::harness
