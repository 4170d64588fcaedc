// coordsim: command-line front end.
//
//   coordsim {region|construct|simulate|verify-binning} --config FILE [--seed N] [--out DIR] ...
//   coordsim plotdata REPORT... [--out DIR]

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "coordsim/harness.hpp"

namespace fs = std::filesystem;
using coordsim::harness::ConfigError;
using coordsim::harness::ExperimentConfig;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

struct Overrides {
  std::optional<std::size_t> w_size, restarts, n, k, trials, replicates;
  std::optional<double> tol;
  std::optional<std::string> sets_cache;
  std::vector<std::size_t> n_list;
  std::vector<double> rates;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "configuration JSON ('-' for stdin)")->required();
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--out", c.out, "output directory");
}

int fail(const std::string& kind, const std::string& message, const std::string& pointer = {}) {
  json err = {{"error", kind}, {"message", message}};
  if (!pointer.empty()) err["pointer"] = pointer;
  std::cerr << err.dump() << '\n';
  return kind == "config" ? 2 : 1;
}

ExperimentConfig load(const Common& common, const Overrides& o) {
  ExperimentConfig c = coordsim::harness::parse_config_file(common.config);
  if (common.seed) c.seed = *common.seed;
  if (common.out) c.output_dir = *common.out;
  if (o.w_size) {
    if (*o.w_size < 1) throw ConfigError("--w-size", "must be at least 1");
    c.region.w_size = *o.w_size;
    c.region.max_w_size = 0;
  }
  if (o.restarts) c.region.restarts = *o.restarts;
  if (o.tol) c.region.tol = *o.tol;
  if (o.n) {
    if (*o.n < 2 || !coordsim::polar::is_power_of_two(*o.n))
      throw ConfigError("--n", "must be a power of two >= 2, got " + std::to_string(*o.n));
    c.params.n = *o.n;
  }
  if (o.k) {
    if (*o.k < 2) throw ConfigError("--k", "chaining needs k >= 2");
    c.k = *o.k;
  }
  if (o.trials) {
    if (*o.trials < 1) throw ConfigError("--trials", "must be at least 1");
    c.trials = *o.trials;
    c.seeds.clear();
  }
  if (o.sets_cache) c.sets_cache = *o.sets_cache;
  if (!o.n_list.empty()) c.binning.n_list = o.n_list;
  if (!o.rates.empty()) c.binning.rates = o.rates;
  if (o.replicates) c.binning.replicates = *o.replicates;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Strong coordination simulator: rate regions, polar construction, codec runs, binning oracles"};
  app.require_subcommand(1);

  Common common;
  Overrides o;

  auto* region = app.add_subcommand("region", "search for an auxiliary witness and print the rate ledger");
  add_common(region, common);
  region->add_option("--w-size", o.w_size, "auxiliary alphabet size");
  region->add_option("--restarts", o.restarts, "random restarts");
  region->add_option("--tol", o.tol, "residual tolerance");

  auto* construct = app.add_subcommand("construct", "estimate the polarized entropy profile and index sets");
  add_common(construct, common);
  construct->add_option("--n", o.n, "block length");
  construct->add_option("--sets-cache", o.sets_cache, "binary sets cache path");

  auto* simulate = app.add_subcommand("simulate", "run the block-Markov codec end to end");
  add_common(simulate, common);
  simulate->add_option("--n", o.n, "block length");
  simulate->add_option("--k", o.k, "number of blocks");
  simulate->add_option("--trials", o.trials, "number of seeded trials");
  simulate->add_option("--sets-cache", o.sets_cache, "binary sets cache path");

  auto* binning = app.add_subcommand("verify-binning", "brute-force random binning experiments");
  add_common(binning, common);
  binning->add_option("--n-list", o.n_list, "blocklengths")->delimiter(',');
  binning->add_option("--rates", o.rates, "rates in bits per symbol")->delimiter(',');
  binning->add_option("--replicates", o.replicates, "binnings per point");

  std::vector<std::string> reports;
  std::string plot_out = ".";
  auto* plot = app.add_subcommand("plotdata", "merge simulate reports into long-format CSV");
  plot->add_option("reports", reports, "simulate_report.json files");
  plot->add_option("--out", plot_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (plot->parsed()) {
      std::vector<json> docs;
      for (const auto& r : reports) docs.push_back(coordsim::harness::load_json(r));
      const std::string csv = coordsim::harness::emit_plotdata(docs);
      fs::create_directories(plot_out);
      const fs::path p = fs::path(plot_out) / "plotdata.csv";
      std::ofstream(p, std::ios::binary) << csv;
      std::cout << p.string() << '\n';
      return 0;
    }
    const std::string sub = app.get_subcommands().front()->get_name();
    const ExperimentConfig c = load(common, o);
    const auto outcome = coordsim::harness::run(sub, c);
    std::cout << outcome.summary;
    for (const auto& f : outcome.files) std::cout << "wrote " << f.string() << '\n';
    return 0;
  } catch (const ConfigError& e) {
    return fail("config", e.what(), e.pointer());
  } catch (const json::exception& e) {
    return fail("config", e.what());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
}
