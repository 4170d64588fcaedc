#include "coordsim/harness.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "coordsim/prob_json.hpp"

namespace coordsim::harness {

namespace fs = std::filesystem;
using nlohmann::json;

ConfigError::ConfigError(std::string pointer, const std::string& message)
    : std::runtime_error((pointer.empty() ? std::string("/") : pointer) + ": " + message), pointer_(std::move(pointer)) {}

std::vector<std::uint64_t> ExperimentConfig::trial_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> s(trials);
  for (std::size_t t = 0; t < trials; ++t) s[t] = seed + t;
  return s;
}

// ------------------------------------------------------------ validation

namespace {

std::string child(const std::string& ptr, const std::string& key) {
  std::string escaped;
  for (char ch : key) {
    if (ch == '~') escaped += "~0";
    else if (ch == '/') escaped += "~1";
    else escaped += ch;
  }
  return ptr + "/" + escaped;
}

void require_object(const json& j, const std::string& ptr) {
  if (!j.is_object()) throw ConfigError(ptr, "expected an object");
}

void allow_keys(const json& j, const std::string& ptr, std::initializer_list<const char*> keys) {
  require_object(j, ptr);
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : keys) ok = ok || key == k;
    if (!ok) throw ConfigError(child(ptr, key), "unknown key");
  }
}

std::uint64_t as_uint(const json& j, const std::string& ptr) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<std::int64_t>() < 0))
    throw ConfigError(ptr, "expected a nonnegative integer");
  return j.get<std::uint64_t>();
}

double as_double(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw ConfigError(ptr, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(ptr, "expected a finite number");
  return v;
}

template <typename F>
auto as_list(const json& j, const std::string& ptr, F&& element) {
  if (!j.is_array()) throw ConfigError(ptr, "expected an array");
  std::vector<decltype(element(j, ptr))> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(element(j[i], ptr + "/" + std::to_string(i)));
  return out;
}

void check_axes(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw ConfigError(ptr, "expected an array of axes");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = ptr + "/" + std::to_string(i);
    allow_keys(j[i], p, {"name", "size"});
    if (!j[i].contains("name") || !j[i]["name"].is_string()) throw ConfigError(child(p, "name"), "expected a string");
    if (!j[i].contains("size")) throw ConfigError(child(p, "size"), "missing");
    as_uint(j[i]["size"], child(p, "size"));
  }
}

template <typename F>
auto wrap(const std::string& ptr, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(ptr, e.what());
  }
}

prob::JointPMF joint_at(const json& j, const std::string& ptr) {
  allow_keys(j, ptr, {"axes", "table"});
  if (j.contains("axes")) check_axes(j["axes"], child(ptr, "axes"));
  return wrap(ptr, [&] { return prob::joint_from_json(j); });
}

prob::ConditionalPMF conditional_at(const json& j, const std::string& ptr) {
  allow_keys(j, ptr, {"given_axes", "out_axes", "table"});
  for (const char* k : {"given_axes", "out_axes"})
    if (j.contains(k)) check_axes(j[k], child(ptr, k));
  return wrap(ptr, [&] { return prob::conditional_from_json(j); });
}

void require_keys(const json& j, const std::string& ptr, std::initializer_list<const char*> keys) {
  for (const char* k : keys)
    if (!j.contains(k)) throw ConfigError(child(ptr, k), "missing");
}

polar::SourceModel model_at(const json& j, const std::string& ptr) {
  allow_keys(j, ptr, {"u_prior", "x_prior", "channel", "w_rule", "v_rule"});
  require_keys(j, ptr, {"u_prior", "x_prior", "channel", "w_rule", "v_rule"});
  auto u = joint_at(j["u_prior"], child(ptr, "u_prior"));
  auto x = joint_at(j["x_prior"], child(ptr, "x_prior"));
  auto ch = conditional_at(j["channel"], child(ptr, "channel"));
  auto w = conditional_at(j["w_rule"], child(ptr, "w_rule"));
  auto v = conditional_at(j["v_rule"], child(ptr, "v_rule"));
  return wrap(ptr, [&] { return polar::SourceModel(std::move(u), std::move(x), std::move(ch), std::move(w), std::move(v)); });
}

region::CoordinationTarget target_at(const json& j, const std::string& ptr) {
  allow_keys(j, ptr, {"p_u", "p_x", "channel", "action_rule"});
  require_keys(j, ptr, {"p_u", "p_x", "channel", "action_rule"});
  auto u = joint_at(j["p_u"], child(ptr, "p_u"));
  auto x = joint_at(j["p_x"], child(ptr, "p_x"));
  auto ch = conditional_at(j["channel"], child(ptr, "channel"));
  auto a = conditional_at(j["action_rule"], child(ptr, "action_rule"));
  return wrap(ptr, [&] { return region::CoordinationTarget(std::move(u), std::move(x), std::move(ch), std::move(a)); });
}

region::AuxiliaryDecomposition aux_at(const json& j, const std::string& ptr) {
  allow_keys(j, ptr, {"w_size", "p_w_given_ux", "p_v_given_wy"});
  require_keys(j, ptr, {"p_w_given_ux", "p_v_given_wy"});
  auto w = conditional_at(j["p_w_given_ux"], child(ptr, "p_w_given_ux"));
  auto v = conditional_at(j["p_v_given_wy"], child(ptr, "p_v_given_wy"));
  if (j.contains("w_size") && as_uint(j["w_size"], child(ptr, "w_size")) != w.cols())
    throw ConfigError(child(ptr, "w_size"), "does not match the W alphabet of p_w_given_ux");
  const std::size_t ws = w.cols();
  return region::AuxiliaryDecomposition{ws, std::move(w), std::move(v)};
}

// Inline object under `key`, or a file named by `key_file`.
template <typename F>
auto inline_or_file(const json& doc, const fs::path& base, const std::string& key, F&& parse)
    -> std::optional<decltype(parse(doc, std::string()))> {
  const std::string file_key = key + "_file";
  if (doc.contains(key) && doc.contains(file_key))
    throw ConfigError(child("", file_key), "give either '" + key + "' or '" + file_key + "', not both");
  if (doc.contains(key)) return parse(doc[key], child("", key));
  if (doc.contains(file_key)) {
    const std::string ptr = child("", file_key);
    if (!doc[file_key].is_string()) throw ConfigError(ptr, "expected a path string");
    fs::path p = doc[file_key].get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) throw ConfigError(ptr, "file not found: " + p.string());
    const json inner = wrap(ptr, [&] { return load_json(p); });
    return parse(inner, ptr);
  }
  return std::nullopt;
}

}  // namespace

json load_json(const fs::path& path) {
  if (path == "-") return json::parse(std::cin);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

ExperimentConfig parse_config(const json& doc, const fs::path& base) {
  allow_keys(doc, "",
             {"schema_version", "model", "model_file", "target", "target_file", "aux", "params", "seed", "k",
              "trials", "seeds", "output_dir", "sets_cache", "region", "binning"});
  ExperimentConfig c;
  if (doc.contains("schema_version") && as_uint(doc["schema_version"], "/schema_version") != kSchemaVersion)
    throw ConfigError("/schema_version", "unsupported schema version");

  c.model = inline_or_file(doc, base, "model", model_at);
  c.target = inline_or_file(doc, base, "target", target_at);
  if (doc.contains("aux")) c.aux = aux_at(doc["aux"], "/aux");

  if (doc.contains("params")) {
    const auto& p = doc["params"];
    allow_keys(p, "/params", {"n", "beta", "mc_samples"});
    if (p.contains("n")) c.params.n = as_uint(p["n"], "/params/n");
    if (p.contains("beta")) c.params.beta = as_double(p["beta"], "/params/beta");
    if (p.contains("mc_samples")) c.params.mc_samples = as_uint(p["mc_samples"], "/params/mc_samples");
  }
  if (c.params.n < 2 || !polar::is_power_of_two(c.params.n))
    throw ConfigError("/params/n", "must be a power of two >= 2, got " + std::to_string(c.params.n));
  if (!(c.params.beta > 0.0 && c.params.beta < 0.5)) throw ConfigError("/params/beta", "must lie in (0, 0.5)");
  if (c.params.mc_samples < 1) throw ConfigError("/params/mc_samples", "must be positive");

  if (doc.contains("seed")) c.seed = as_uint(doc["seed"], "/seed");
  if (doc.contains("k")) c.k = as_uint(doc["k"], "/k");
  if (c.k < 2) throw ConfigError("/k", "chaining needs k >= 2");
  if (doc.contains("trials")) c.trials = as_uint(doc["trials"], "/trials");
  if (c.trials < 1) throw ConfigError("/trials", "must be at least 1");
  if (doc.contains("seeds")) {
    c.seeds = as_list(doc["seeds"], "/seeds", as_uint);
    if (c.seeds.empty()) throw ConfigError("/seeds", "must not be empty when given");
    c.trials = c.seeds.size();
  }
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) throw ConfigError("/output_dir", "expected a path string");
    c.output_dir = doc["output_dir"].get<std::string>();
  }
  if (doc.contains("sets_cache")) {
    if (!doc["sets_cache"].is_string()) throw ConfigError("/sets_cache", "expected a path string");
    fs::path p = doc["sets_cache"].get<std::string>();
    c.sets_cache = p.is_relative() ? base / p : p;
  }
  if (doc.contains("region")) {
    const auto& r = doc["region"];
    allow_keys(r, "/region", {"w_size", "max_w_size", "restarts", "iterations", "inner_steps", "tol"});
    if (r.contains("w_size")) c.region.w_size = as_uint(r["w_size"], "/region/w_size");
    if (r.contains("max_w_size")) c.region.max_w_size = as_uint(r["max_w_size"], "/region/max_w_size");
    if (r.contains("restarts")) c.region.restarts = as_uint(r["restarts"], "/region/restarts");
    if (r.contains("iterations")) c.region.iterations = as_uint(r["iterations"], "/region/iterations");
    if (r.contains("inner_steps")) c.region.inner_steps = as_uint(r["inner_steps"], "/region/inner_steps");
    if (r.contains("tol")) c.region.tol = as_double(r["tol"], "/region/tol");
    if (c.region.w_size < 1) throw ConfigError("/region/w_size", "must be at least 1");
    if (c.region.restarts < 1) throw ConfigError("/region/restarts", "must be at least 1");
    if (!(c.region.tol > 0.0)) throw ConfigError("/region/tol", "must be positive");
  }
  if (doc.contains("binning")) {
    const auto& b = doc["binning"];
    allow_keys(b, "/binning", {"joint", "n_list", "rates", "replicates", "draws"});
    if (b.contains("joint")) {
      c.binning.joint = joint_at(b["joint"], "/binning/joint");
      if (c.binning.joint.rank() != 2) throw ConfigError("/binning/joint", "must have exactly two axes (A, B)");
    }
    if (b.contains("n_list")) c.binning.n_list = as_list(b["n_list"], "/binning/n_list", as_uint);
    if (b.contains("rates")) c.binning.rates = as_list(b["rates"], "/binning/rates", as_double);
    if (b.contains("replicates")) c.binning.replicates = as_uint(b["replicates"], "/binning/replicates");
    if (b.contains("draws")) c.binning.draws = as_uint(b["draws"], "/binning/draws");
    if (c.binning.replicates < 1) throw ConfigError("/binning/replicates", "must be at least 1");
    if (c.binning.draws < 1) throw ConfigError("/binning/draws", "must be at least 1");
  }
  return c;
}

ExperimentConfig parse_config_file(const fs::path& path) {
  const json doc = wrap("", [&] { return load_json(path); });
  return parse_config(doc, path == "-" ? fs::path(".") : path.parent_path());
}

json to_json(const ExperimentConfig& c) {
  json j = {{"schema_version", kSchemaVersion},
            {"params", {{"n", c.params.n}, {"beta", c.params.beta}, {"mc_samples", c.params.mc_samples}}},
            {"seed", c.seed},
            {"k", c.k},
            {"trials", c.trials},
            {"seeds", c.trial_seeds()},
            {"region",
             {{"w_size", c.region.w_size},
              {"max_w_size", c.region.max_w_size},
              {"restarts", c.region.restarts},
              {"iterations", c.region.iterations},
              {"inner_steps", c.region.inner_steps},
              {"tol", c.region.tol}}},
            {"binning",
             {{"joint", prob::to_json(c.binning.joint)},
              {"n_list", c.binning.n_list},
              {"rates", c.binning.rates},
              {"replicates", c.binning.replicates},
              {"draws", c.binning.draws}}}};
  if (c.model) j["model"] = polar::to_json(*c.model);
  if (c.target) j["target"] = region::to_json(*c.target);
  if (c.aux) j["aux"] = region::to_json(*c.aux);
  return j;
}

// ----------------------------------------------------------- model glue

region::CoordinationTarget target_from_model(const polar::SourceModel& m) {
  const auto uxyv = codec::coordination_target(m);
  return region::CoordinationTarget(m.u_prior, m.x_prior, m.channel, prob::condition(uxyv, {"V"}, {"U", "X", "Y"}));
}

region::AuxiliaryDecomposition aux_from_model(const polar::SourceModel& m) {
  const std::size_t us = m.u_size();
  std::vector<double> w_ux(us * 2 * 2);
  for (std::size_t u = 0; u < us; ++u)
    for (std::size_t x = 0; x < 2; ++x)
      for (std::size_t w = 0; w < 2; ++w) w_ux[(u * 2 + x) * 2 + w] = m.w_rule(x * us + u, w);
  prob::ConditionalPMF w_given_ux({{"U", us}, {"X", 2}}, {{"W", 2}}, std::move(w_ux));
  return region::AuxiliaryDecomposition{2, std::move(w_given_ux), m.v_rule};
}

polar::Construction load_or_construct(const polar::SourceModel& m, const polar::PolarParams& params,
                                      std::uint64_t seed, const std::optional<fs::path>& cache) {
  const polar::CacheKey key{params.n, params.beta, params.mc_samples, seed, polar::model_fingerprint(m)};
  if (cache)
    if (auto hit = polar::read_sets_cache(*cache, key)) return std::move(*hit);
  auto built = polar::construct(m, params, seed);
  if (cache) polar::write_sets_cache(*cache, key, built);
  return built;
}

// ---------------------------------------------------------------- output

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

fs::path write_text(const fs::path& dir, const std::string& name, const std::string& text) {
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + p.string());
  return p;
}

const polar::SourceModel& need_model(const ExperimentConfig& c, const char* sub) {
  if (!c.model) throw ConfigError("/model", std::string("subcommand '") + sub + "' needs a source model");
  return *c.model;
}

struct Metric {
  const char* name;
  double codec::TrialResult::*field;
};

constexpr Metric kMetrics[] = {
    {"s_error_rate", &codec::TrialResult::s_error_rate}, {"w_error_rate", &codec::TrialResult::w_error_rate},
    {"tv_estimate", &codec::TrialResult::tv_estimate},   {"mi_consecutive", &codec::TrialResult::mi_consecutive},
    {"cr_rate", &codec::TrialResult::cr_rate},           {"side_rate", &codec::TrialResult::side_rate},
    {"d1_plus_d2", &codec::TrialResult::d1_plus_d2},
};

json set_sizes(const polar::PolarIndexSets& s) {
  return {{"A1", s.a1.size()},   {"A2", s.a2.size()},   {"A3", s.a3.size()},   {"A4", s.a4.size()},
          {"B1", s.b1.size()},   {"B2", s.b2.size()},   {"B3", s.b3.size()},   {"B4", s.b4.size()},
          {"Bp1", s.bp1.size()}, {"Ap2", s.ap2.size()}, {"Ap3", s.ap3.size()}, {"Bp3", s.bp3.size()}};
}

json certificate_json(const codec::DivergenceCertificate& d) {
  return {{"value", d.value}, {"std_error", d.std_error}, {"bound", d.bound}};
}

json profile_summary(const polar::PolarizedEntropyProfile& p) {
  json fam = json::array();
  for (std::size_t f = 0; f < polar::kFamilyCount; ++f)
    fam.push_back({{"name", polar::family_name(f)}, {"average", p.average(f)}, {"total_std_error", p.total_std_error[f]}});
  return {{"n", p.n}, {"samples", p.samples}, {"families", fam}};
}

// Theorem-side ledger for a model's own witness; failures are reported in place.
json model_ledger(const polar::SourceModel& m) {
  json out;
  try {
    const auto target = target_from_model(m);
    const auto aux = aux_from_model(m);
    const auto verdict = region::evaluate(target, aux);
    out["verdict"] = region::to_json(verdict);
    try {
      out["ledger"] = region::to_json(region::binning_rate_ledger(target, aux));
    } catch (const region::EmptyWindow& e) {
      out["ledger_error"] = e.what();
    }
  } catch (const std::exception& e) {
    out["error"] = e.what();
  }
  return out;
}

}  // namespace

json aggregate(const std::vector<codec::TrialResult>& rows) {
  json out = json::object();
  const double t = static_cast<double>(rows.size());
  for (const auto& m : kMetrics) {
    double mean = 0.0;
    for (const auto& r : rows) mean += r.*(m.field);
    mean = rows.empty() ? 0.0 : mean / t;
    double ss = 0.0;
    for (const auto& r : rows) ss += (r.*(m.field) - mean) * (r.*(m.field) - mean);
    const double se = rows.size() > 1 ? std::sqrt(ss / (t - 1) / t) : 0.0;
    out[m.name] = {{"mean", mean}, {"std_error", se}};
  }
  return out;
}

std::string trials_csv(const std::vector<codec::TrialResult>& rows) {
  std::ostringstream os;
  os << "n,k,seed";
  for (const auto& m : kMetrics) os << ',' << m.name;
  os << '\n';
  for (const auto& r : rows) {
    os << r.n << ',' << r.k << ',' << r.seed;
    for (const auto& m : kMetrics) os << ',' << format_number(r.*(m.field));
    os << '\n';
  }
  return os.str();
}

std::string binning_csv(const std::vector<binning::BinningTrialStats>& rows) {
  std::ostringstream os;
  os << "n,rate,lemma,statistic,value\n";
  for (const auto& r : rows) {
    const std::string prefix =
        std::to_string(r.n) + ',' + format_number(r.rate) + ',' + binning::lemma_name(r.lemma) + ',';
    const bool sw = r.lemma == binning::Lemma::SlepianWolf;
    os << prefix << (sw ? "error_rate" : "kl_to_uniform") << ',' << format_number(sw ? r.error_rate : r.kl_to_uniform)
       << '\n';
    os << prefix << "std_error," << format_number(r.std_error) << '\n';
    if (sw) os << prefix << "empty_bin_rate," << format_number(r.empty_bin_rate) << '\n';
    os << prefix << "replicates," << r.replicates << '\n';
  }
  return os.str();
}

std::string emit_plotdata(const std::vector<json>& reports) {
  std::ostringstream os;
  os << "n,k,seed,metric,value\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (!r.is_object() || !r.contains("schema_version") || r["schema_version"] != kSchemaVersion)
      throw std::runtime_error("report " + std::to_string(i) + ": schema version mismatch (expected " +
                               std::to_string(kSchemaVersion) + ")");
    if (!r.contains("trials") || !r["trials"].is_array())
      throw std::runtime_error("report " + std::to_string(i) + " has no trial rows");
    for (const auto& row : r["trials"])
      for (const auto& m : kMetrics)
        os << row.at("n").get<std::size_t>() << ',' << row.at("k").get<std::size_t>() << ','
           << row.at("seed").get<std::uint64_t>() << ',' << m.name << ','
           << format_number(row.at(m.name).get<double>()) << '\n';
  }
  return os.str();
}

// ------------------------------------------------------------ subcommands

RunOutcome run_region(const ExperimentConfig& c) {
  std::optional<region::CoordinationTarget> target = c.target;
  if (!target && c.model) target = target_from_model(*c.model);
  if (!target) throw ConfigError("/target", "subcommand 'region' needs a target or a source model");
  std::optional<region::AuxiliaryDecomposition> planted = c.aux;
  if (!planted && c.model && !c.target) planted = aux_from_model(*c.model);

  const region::SearchBudget budget{c.region.restarts, c.region.iterations, c.region.inner_steps, c.seed};
  const auto verdict = c.region.max_w_size > 0
                           ? region::sweep_auxiliary(*target, c.region.max_w_size, budget, c.region.tol)
                           : region::search_auxiliary(*target, c.region.w_size, budget, c.region.tol);

  RunOutcome out;
  json& rep = out.report;
  rep["schema_version"] = kSchemaVersion;
  rep["subcommand"] = "region";
  rep["config"] = to_json(c);
  rep["verdict"] = region::to_json(verdict);
  rep["empirical_region"] = region::empirical_region_check(*target, verdict.witness, c.region.tol);

  std::ostringstream text;
  text << "search (|W| = " << verdict.witness.w_size << "): " << rep["verdict"]["verdict_label"].get<std::string>()
       << "\n  residual    " << verdict.residual << "\n  info slack  " << verdict.info_slack << "\n  inner rate  "
       << verdict.inner_rate << "\n  outer rate  " << verdict.outer_rate << "\n  restarts    "
       << verdict.feasible_restarts << " feasible of " << verdict.restarts << "\n";

  auto ledger_for = [&](const region::AuxiliaryDecomposition& aux, const char* key) {
    try {
      const auto l = region::binning_rate_ledger(*target, aux);
      rep[key] = region::to_json(l);
      text << "\nrate ledger (" << key << ")\n" << region::format_ledger(l);
    } catch (const region::EmptyWindow& e) {
      rep[key] = {{"error", e.what()}, {"window", e.window()}};
      text << "\nrate ledger (" << key << "): " << e.what() << "\n";
    }
  };
  if (verdict.feasible) ledger_for(verdict.witness, "ledger");
  if (planted) {
    const auto pv = region::evaluate(*target, *planted, c.region.tol);
    rep["planted"] = region::to_json(pv);
    text << "\nplanted witness: residual " << pv.residual << ", inner rate " << pv.inner_rate << ", outer rate "
         << pv.outer_rate << "\n";
    ledger_for(*planted, "planted_ledger");
  }
  out.summary = text.str();
  out.files.push_back(write_text(c.output_dir, "region_report.json", rep.dump(2) + "\n"));
  out.files.push_back(write_text(c.output_dir, "region_ledger.txt", out.summary));
  return out;
}

RunOutcome run_construct(const ExperimentConfig& c) {
  const auto& m = need_model(c, "construct");
  const fs::path cache = c.sets_cache.value_or(c.output_dir / "sets.csix");
  const auto built = load_or_construct(m, c.params, c.seed, cache);

  RunOutcome out;
  json& rep = out.report;
  rep["schema_version"] = kSchemaVersion;
  rep["subcommand"] = "construct";
  rep["config"] = to_json(c);
  rep["delta"] = c.params.delta();
  rep["set_sizes"] = set_sizes(built.sets);
  rep["sets"] = polar::to_json(built.sets);
  rep["profile"] = polar::to_json(built.profile);
  rep["rates"] = polar::to_json(polar::rate_report(built.sets, c.k));
  rep["certificate"] = certificate_json(codec::divergence_certificate(built.profile, built.sets, c.params));
  rep["sets_cache"] = cache.string();

  std::ostringstream text;
  text << "n = " << c.params.n << ", delta = " << c.params.delta() << "\n";
  for (const auto& [name, size] : rep["set_sizes"].items()) text << "  |" << name << "| = " << size << "\n";
  out.summary = text.str();
  out.files.push_back(cache);
  out.files.push_back(write_text(c.output_dir, "construct_report.json", rep.dump(2) + "\n"));
  return out;
}

RunOutcome run_simulate(const ExperimentConfig& c) {
  const auto& m = need_model(c, "simulate");
  const auto built = load_or_construct(m, c.params, c.seed, c.sets_cache);
  const auto seeds = c.trial_seeds();
  const auto rows = codec::run_end_to_end(m, built, c.params, c.k, seeds);

  RunOutcome out;
  json& rep = out.report;
  rep["schema_version"] = kSchemaVersion;
  rep["subcommand"] = "simulate";
  rep["config"] = to_json(c);
  rep["set_sizes"] = set_sizes(built.sets);
  rep["anomalies"] = {{"b2_reassigned", built.sets.b2_reassigned},
                      {"bp1_violations", built.sets.bp1_violations},
                      {"nesting_violations", built.sets.nesting_violations}};
  rep["profile"] = profile_summary(built.profile);
  rep["rates"] = polar::to_json(polar::rate_report(built.sets, c.k));
  rep["certificate"] = certificate_json(codec::divergence_certificate(built.profile, built.sets, c.params));
  rep["region"] = model_ledger(m);
  json trials = json::array();
  for (const auto& r : rows) trials.push_back(codec::to_json(r));
  rep["trials"] = trials;
  rep["aggregates"] = aggregate(rows);

  std::ostringstream text;
  for (const auto& [name, v] : rep["aggregates"].items())
    text << "  " << name << " = " << v["mean"].get<double>() << " (se " << v["std_error"].get<double>() << ")\n";
  out.summary = text.str();
  out.files.push_back(write_text(c.output_dir, "simulate_report.json", rep.dump(2) + "\n"));
  out.files.push_back(write_text(c.output_dir, "trials.csv", trials_csv(rows)));
  return out;
}

RunOutcome run_verify_binning(const ExperimentConfig& c) {
  binning::RegimeSweep sweep{c.binning.n_list, c.binning.rates, c.binning.replicates, c.binning.draws, c.seed};
  const auto rows = wrap("/binning", [&] { return binning::verify_lemma_regimes(c.binning.joint, sweep); });

  RunOutcome out;
  json& rep = out.report;
  rep["schema_version"] = kSchemaVersion;
  rep["subcommand"] = "verify-binning";
  rep["config"] = to_json(c);
  const auto& j = c.binning.joint;
  rep["entropies"] = {{"H(A)", prob::entropy(prob::marginalize(j, {j.axes()[0].name}))},
                      {"H(B)", prob::entropy(prob::marginalize(j, {j.axes()[1].name}))},
                      {"H(A|B)", prob::conditional_entropy(j, {j.axes()[0].name}, {j.axes()[1].name})},
                      {"H(B|A)", prob::conditional_entropy(j, {j.axes()[1].name}, {j.axes()[0].name})}};
  json table = json::array();
  std::ostringstream text;
  for (const auto& r : rows) {
    const bool sw = r.lemma == binning::Lemma::SlepianWolf;
    table.push_back({{"lemma", binning::lemma_name(r.lemma)},
                     {"n", r.n},
                     {"rate", r.rate},
                     {"replicates", r.replicates},
                     {sw ? "error_rate" : "kl_to_uniform", sw ? r.error_rate : r.kl_to_uniform},
                     {"std_error", r.std_error},
                     {"empty_bin_rate", r.empty_bin_rate}});
    text << "  " << binning::lemma_name(r.lemma) << " n=" << r.n << " R=" << r.rate << ": "
         << (sw ? r.error_rate : r.kl_to_uniform) << " (se " << r.std_error << ")\n";
  }
  rep["rows"] = table;
  out.summary = text.str();
  out.files.push_back(write_text(c.output_dir, "binning_report.json", rep.dump(2) + "\n"));
  out.files.push_back(write_text(c.output_dir, "binning.csv", binning_csv(rows)));
  return out;
}

RunOutcome run(const std::string& sub, const ExperimentConfig& c) {
  if (sub == "region") return run_region(c);
  if (sub == "construct") return run_construct(c);
  if (sub == "simulate") return run_simulate(c);
  if (sub == "verify-binning") return run_verify_binning(c);
  throw std::invalid_argument("unknown subcommand '" + sub + "'");
}

}  // namespace coordsim::harness
