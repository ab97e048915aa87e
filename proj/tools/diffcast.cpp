// diffcast command-line driver.
//
// Exit codes: 0 success, 1 data or other runtime error, 2 configuration or
// usage error, 3 training divergence, 4 checkpoint/track mismatch,
// 5 scenario/observation misalignment, 6 value-benchmark coverage gap.
// Errors go to stderr as one JSON object; stdout lists written files.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <set>
#include <thread>

#include <CLI11.hpp>

#include <diffcast/diffcast.hpp>

namespace fs = std::filesystem;
using namespace diffcast;
using nlohmann::json;

namespace {

struct ModelDirs {
  std::string wind, pv, load;
};

struct RunConfig {
  Track track = Track::pv;
  std::string data;
  std::vector<int> zones; // empty: every zone in the data
  std::array<double, 3> split{0.7, 0.15, 0.15};
  std::optional<int> validation_days, test_days;
  std::uint64_t seed = 0;
  int threads = 0; // 0: hardware concurrency

  ScheduleKind schedule_kind = ScheduleKind::linear;
  int steps = kDefaultSteps;
  double beta_start = kDefaultBetaStart;
  double beta_end = kDefaultBetaEnd;
  ReverseVariance variance = ReverseVariance::beta;

  DenoiserArchitecture arch;
  AdamConfig adam;
  int epochs = 200;
  int batch_size = 64;

  int scenarios = 100;
  std::string sample_split = "test";
  std::string model_dir;    // train output read by generate
  std::string scenario_dir; // generate output read by evaluate

  MetricOptions metrics;

  RetailerModel retailer;
  std::map<std::string, ModelDirs> value_models;
  std::string obs_wind, obs_pv, obs_load;
  std::vector<Date> value_days;
  std::vector<int> pv_zones, wind_zones;
  int load_zone = 1;
  double load_base = 0.0; // 0: from the load manifest, else the observed maximum
  int max_scenarios = 20;

  SyntheticProfile profile = SyntheticProfile::sine_pv;
  int synth_days = 1000;
  int synth_zones = 1;
  Date synth_first_day = Date(2013, 1, 1);

  int thread_count() const {
    if (threads > 0) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
  }
};

json to_json(const RunConfig &c) {
  json models = json::object();
  for (const auto &[name, d] : c.value_models) models[name] = {{"wind", d.wind}, {"pv", d.pv}, {"load", d.load}};
  std::vector<std::string> days;
  for (const auto &d : c.value_days) days.push_back(d.str());
  auto opt_int = [](const std::optional<int> &v) { return v ? json(*v) : json(nullptr); };
  return {
      {"track", std::string(to_string(c.track))},
      {"data", c.data},
      {"zones", c.zones},
      {"seed", c.seed},
      {"threads", c.threads},
      {"split", {{"fractions", c.split}, {"validation_days", opt_int(c.validation_days)}, {"test_days", opt_int(c.test_days)}}},
      {"schedule",
       {{"kind", std::string(to_string(c.schedule_kind))},
        {"steps", c.steps},
        {"beta_start", c.beta_start},
        {"beta_end", c.beta_end},
        {"variance", std::string(to_string(c.variance))}}},
      {"denoiser",
       {{"hidden", c.arch.hidden},
        {"embed_dim", c.arch.embed_dim},
        {"activation", std::string(to_string(c.arch.activation))}}},
      {"optimizer",
       {{"learning_rate", c.adam.learning_rate},
        {"beta1", c.adam.beta1},
        {"beta2", c.adam.beta2},
        {"epsilon", c.adam.epsilon},
        {"epochs", c.epochs},
        {"batch_size", c.batch_size}}},
      {"generate", {{"scenarios", c.scenarios}, {"split", c.sample_split}, {"model_dir", c.model_dir}}},
      {"evaluate", {{"scenario_dir", c.scenario_dir}}},
      {"metrics",
       {{"crps_estimator", std::string(to_string(c.metrics.crps_estimator))},
        {"vs_gamma", c.metrics.vs_gamma},
        {"tie_tolerance", c.metrics.tie_tolerance ? json(*c.metrics.tie_tolerance) : json(nullptr)},
        {"min_reliability_days", c.metrics.min_reliability_days}}},
      {"retailer", retailer_to_json(c.retailer)},
      {"value",
       {{"models", models},
        {"observations", {{"wind", c.obs_wind}, {"pv", c.obs_pv}, {"load", c.obs_load}}},
        {"days", days},
        {"pv_zones", c.pv_zones},
        {"wind_zones", c.wind_zones},
        {"load_zone", c.load_zone},
        {"load_base", c.load_base},
        {"max_scenarios", c.max_scenarios}}},
      {"synth",
       {{"profile", std::string(to_string(c.profile))},
        {"days", c.synth_days},
        {"zones", c.synth_zones},
        {"first_day", c.synth_first_day.str()}}},
  };
}

// Rejects keys the reader does not know, so a typo cannot silently fall back to a default.
void check_keys(const json &j, const std::string &where, std::initializer_list<const char *> known) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto &[key, _] : j.items()) {
    bool ok = false;
    for (const char *k : known) ok = ok || key == k;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

std::string resolve(const fs::path &base, const std::string &p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (base / p).lexically_normal().string();
}

template <class T>
void read(const json &j, const char *key, T &dst) {
  if (j.contains(key) && !j.at(key).is_null()) dst = j.at(key).get<T>();
}

RunConfig parse_config(const json &j, const fs::path &base) {
  RunConfig c;
  check_keys(j, "config", {"track", "data", "zones", "seed", "threads", "split", "schedule", "denoiser", "optimizer",
                           "generate", "evaluate", "metrics", "retailer", "value", "synth"});
  if (j.contains("track")) c.track = parse_track(j.at("track").get<std::string>());
  read(j, "data", c.data);
  c.data = resolve(base, c.data);
  read(j, "zones", c.zones);
  read(j, "seed", c.seed);
  read(j, "threads", c.threads);
  if (j.contains("split")) {
    const auto &s = j.at("split");
    check_keys(s, "split", {"fractions", "validation_days", "test_days"});
    read(s, "fractions", c.split);
    if (s.contains("validation_days") && !s.at("validation_days").is_null()) c.validation_days = s.at("validation_days").get<int>();
    if (s.contains("test_days") && !s.at("test_days").is_null()) c.test_days = s.at("test_days").get<int>();
  }
  if (j.contains("schedule")) {
    const auto &s = j.at("schedule");
    check_keys(s, "schedule", {"kind", "steps", "beta_start", "beta_end", "variance"});
    if (s.contains("kind")) c.schedule_kind = parse_schedule_kind(s.at("kind").get<std::string>());
    read(s, "steps", c.steps);
    read(s, "beta_start", c.beta_start);
    read(s, "beta_end", c.beta_end);
    if (s.contains("variance")) c.variance = parse_reverse_variance(s.at("variance").get<std::string>());
  }
  if (j.contains("denoiser")) {
    const auto &s = j.at("denoiser");
    check_keys(s, "denoiser", {"hidden", "embed_dim", "activation"});
    read(s, "hidden", c.arch.hidden);
    read(s, "embed_dim", c.arch.embed_dim);
    if (s.contains("activation")) c.arch.activation = parse_activation(s.at("activation").get<std::string>());
  }
  if (j.contains("optimizer")) {
    const auto &s = j.at("optimizer");
    check_keys(s, "optimizer", {"learning_rate", "beta1", "beta2", "epsilon", "epochs", "batch_size"});
    read(s, "learning_rate", c.adam.learning_rate);
    read(s, "beta1", c.adam.beta1);
    read(s, "beta2", c.adam.beta2);
    read(s, "epsilon", c.adam.epsilon);
    read(s, "epochs", c.epochs);
    read(s, "batch_size", c.batch_size);
  }
  if (j.contains("generate")) {
    const auto &s = j.at("generate");
    check_keys(s, "generate", {"scenarios", "split", "model_dir"});
    read(s, "scenarios", c.scenarios);
    read(s, "split", c.sample_split);
    read(s, "model_dir", c.model_dir);
    c.model_dir = resolve(base, c.model_dir);
  }
  if (j.contains("evaluate")) {
    const auto &s = j.at("evaluate");
    check_keys(s, "evaluate", {"scenario_dir"});
    read(s, "scenario_dir", c.scenario_dir);
    c.scenario_dir = resolve(base, c.scenario_dir);
  }
  if (j.contains("metrics")) {
    const auto &s = j.at("metrics");
    check_keys(s, "metrics", {"crps_estimator", "vs_gamma", "tie_tolerance", "min_reliability_days"});
    if (s.contains("crps_estimator")) c.metrics.crps_estimator = parse_crps_estimator(s.at("crps_estimator").get<std::string>());
    read(s, "vs_gamma", c.metrics.vs_gamma);
    if (s.contains("tie_tolerance") && !s.at("tie_tolerance").is_null())
      c.metrics.tie_tolerance = s.at("tie_tolerance").get<double>();
    read(s, "min_reliability_days", c.metrics.min_reliability_days);
  }
  if (j.contains("retailer")) {
    const auto &s = j.at("retailer");
    check_keys(s, "retailer", {"battery_capacity", "charge_limit", "discharge_limit", "eta_charge", "eta_discharge",
                               "soc_initial", "soc_final", "price", "penalty_surplus", "penalty_deficit",
                               "wind_capacity", "pv_capacity", "load_capacity"});
    c.retailer = retailer_from_json(s);
  }
  if (j.contains("value")) {
    const auto &s = j.at("value");
    check_keys(s, "value", {"models", "observations", "days", "pv_zones", "wind_zones", "load_zone", "load_base",
                            "max_scenarios"});
    if (s.contains("models"))
      for (const auto &[name, m] : s.at("models").items()) {
        check_keys(m, "value.models." + name, {"wind", "pv", "load"});
        c.value_models[name] = {resolve(base, m.at("wind").get<std::string>()),
                                resolve(base, m.at("pv").get<std::string>()),
                                resolve(base, m.at("load").get<std::string>())};
      }
    if (s.contains("observations")) {
      const auto &o = s.at("observations");
      check_keys(o, "value.observations", {"wind", "pv", "load"});
      read(o, "wind", c.obs_wind);
      read(o, "pv", c.obs_pv);
      read(o, "load", c.obs_load);
      c.obs_wind = resolve(base, c.obs_wind);
      c.obs_pv = resolve(base, c.obs_pv);
      c.obs_load = resolve(base, c.obs_load);
    }
    if (s.contains("days"))
      for (const auto &d : s.at("days")) c.value_days.push_back(Date::parse(d.get<std::string>()));
    read(s, "pv_zones", c.pv_zones);
    read(s, "wind_zones", c.wind_zones);
    read(s, "load_zone", c.load_zone);
    read(s, "load_base", c.load_base);
    read(s, "max_scenarios", c.max_scenarios);
  }
  if (j.contains("synth")) {
    const auto &s = j.at("synth");
    check_keys(s, "synth", {"profile", "days", "zones", "first_day"});
    if (s.contains("profile")) c.profile = parse_profile(s.at("profile").get<std::string>());
    read(s, "days", c.synth_days);
    read(s, "zones", c.synth_zones);
    if (s.contains("first_day")) c.synth_first_day = Date::parse(s.at("first_day").get<std::string>());
  }
  return c;
}

Schedule build_schedule(const RunConfig &c) {
  try {
    return make_schedule(c.schedule_kind, c.steps, c.beta_start, c.beta_end, c.variance);
  } catch (const ParameterError &e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  } catch (const ScheduleError &e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
}

void validate_common(const RunConfig &c) {
  if (c.threads < 0) throw ConfigError("threads must be >= 0");
  for (int z : c.zones)
    if (z < 1 || z > zone_count(c.track))
      throw ConfigError("zone " + std::to_string(z) + " outside 1.." + std::to_string(zone_count(c.track)) + " for the " +
                        std::string(to_string(c.track)) + " track");
}

void require_file(const std::string &path, const std::string &what) {
  if (path.empty()) throw ConfigError(what + " is not set");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " '" + path + "' does not exist");
}

void require_dir(const std::string &path, const std::string &what) {
  if (path.empty()) throw ConfigError(what + " is not set");
  if (!fs::is_directory(path)) throw ConfigError(what + " '" + path + "' does not exist");
}

void validate_training(const RunConfig &c) {
  validate_common(c);
  require_file(c.data, "data");
  double sum = 0.0;
  for (double f : c.split) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  if ((c.validation_days && *c.validation_days < 0) || (c.test_days && *c.test_days < 0))
    throw ConfigError("split day counts must be non-negative");
  if (c.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (c.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(c.adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (c.arch.hidden.empty()) throw ConfigError("denoiser needs at least one hidden layer");
  for (int h : c.arch.hidden)
    if (h < 1) throw ConfigError("hidden widths must be positive");
  if (c.arch.embed_dim < 2 || c.arch.embed_dim % 2) throw ConfigError("embed_dim must be a positive even number");
  build_schedule(c);
}

json read_json(const std::string &path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(f);
  } catch (const json::exception &e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_json(const fs::path &path, const json &j) {
  std::ofstream f(path);
  if (!f) throw SchemaError("cannot write '" + path.string() + "'");
  f << j.dump(2) << '\n';
}

// Every written file is announced on stdout.
void announce(const fs::path &p) { std::cout << p.string() << '\n'; }

fs::path checkpoint_path(const fs::path &dir, int zone) { return dir / ("checkpoint_zone" + std::to_string(zone) + ".bin"); }
fs::path loss_path(const fs::path &dir, int zone) { return dir / ("loss_zone" + std::to_string(zone) + ".csv"); }
fs::path scenario_path(const fs::path &dir, int zone) { return dir / ("scenarios_zone" + std::to_string(zone) + ".csv"); }

// Zones with a file of the given prefix in `dir`, ascending.
std::vector<int> zones_in(const fs::path &dir, const std::string &prefix, const std::string &ext) {
  const std::regex re(prefix + "([0-9]+)\\" + ext);
  std::vector<int> out;
  for (const auto &e : fs::directory_iterator(dir)) {
    std::smatch m;
    const auto name = e.path().filename().string();
    if (std::regex_match(name, m, re)) out.push_back(std::stoi(m[1]));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Dataset split_dataset(Dataset ds, const RunConfig &c) {
  const auto n = ds.days().size();
  if (c.validation_days || c.test_days) {
    const auto nv = static_cast<std::size_t>(c.validation_days.value_or(
        static_cast<int>(std::floor(c.split[1] * static_cast<double>(n) + 1e-9))));
    const auto nt = static_cast<std::size_t>(
        c.test_days.value_or(static_cast<int>(std::floor(c.split[2] * static_cast<double>(n) + 1e-9))));
    return split_random_counts(std::move(ds), nv, nt, c.seed);
  }
  return split_random(std::move(ds), c.split, c.seed);
}

std::vector<int> selected_zones(const RunConfig &c, const Dataset &ds) {
  if (c.zones.empty()) return ds.zones();
  const auto have = ds.zones();
  for (int z : c.zones)
    if (!std::binary_search(have.begin(), have.end(), z))
      throw ConfigError("zone " + std::to_string(z) + " has no samples in the data");
  return c.zones;
}

// ---------------------------------------------------------------------------

int cmd_synth(const RunConfig &c, const fs::path &out) {
  if (c.synth_days < 1) throw ConfigError("synth.days must be >= 1");
  const Track t = profile_track(c.profile);
  if (c.synth_zones < 1 || c.synth_zones > zone_count(t))
    throw ConfigError("synth.zones must be in 1.." + std::to_string(zone_count(t)));
  const auto ds = generate_synthetic(c.synth_days, c.seed, c.profile, c.synth_zones, c.synth_first_day);
  fs::create_directories(out);
  const auto path = out / (std::string(to_string(c.profile)) + ".csv");
  write_csv(ds, path.string());
  announce(path);
  return 0;
}

int cmd_train(const RunConfig &c, const fs::path &out) {
  validate_training(c);
  const auto sched = build_schedule(c);
  auto raw = load_csv(c.data, c.track);
  auto ds = normalize(split_dataset(std::move(raw), c));
  const auto zones = selected_zones(c, ds);
  fs::create_directories(out);
  write_json(out / "manifest.json", manifest_to_json(ds));
  announce(out / "manifest.json");
  auto resolved = to_json(c);
  write_json(out / "config.json", resolved);
  announce(out / "config.json");

  for (int zone : zones) {
    TrainConfig tc;
    tc.epochs = c.epochs;
    tc.batch_size = c.batch_size;
    tc.adam = c.adam;
    tc.seed = derive_seed(c.seed, 100, static_cast<std::uint64_t>(zone));
    tc.arch = c.arch;
    const auto result = train(ds, sched, tc, zone);

    std::ofstream log(loss_path(out, zone));
    log << "epoch,learn_loss,validation_loss\n";
    for (const auto &e : result.log)
      log << e.epoch << ',' << detail::fmt_double(e.learn_loss) << ','
          << (std::isnan(e.validation_loss) ? std::string() : detail::fmt_double(e.validation_loss)) << '\n';
    log.close();
    announce(loss_path(out, zone));

    write_checkpoint(checkpoint_path(out, zone).string(), result.params,
                     {{"track", std::string(to_string(c.track))},
                      {"zone", zone},
                      {"channels", ds.channels},
                      {"schedule", schedule_to_json(sched)},
                      {"seed", tc.seed},
                      {"epochs", c.epochs},
                      {"best_epoch", result.best_epoch}});
    announce(checkpoint_path(out, zone));
  }
  return 0;
}

int cmd_generate(const RunConfig &c, const fs::path &out, std::string model_dir) {
  validate_common(c);
  require_file(c.data, "data");
  if (model_dir.empty()) model_dir = c.model_dir;
  require_dir(model_dir, "model directory");
  require_file((fs::path(model_dir) / "manifest.json").string(), "manifest");
  if (c.scenarios < 1) throw ConfigError("generate.scenarios must be >= 1");
  Split which;
  try {
    which = parse_split(c.sample_split);
  } catch (const ParameterError &e) {
    throw ConfigError(e.what());
  }

  const auto manifest = read_json((fs::path(model_dir) / "manifest.json").string());
  auto ds = apply_manifest(load_csv(c.data, c.track), manifest);
  std::vector<int> zones = c.zones.empty() ? zones_in(model_dir, "checkpoint_zone", ".bin") : c.zones;
  if (zones.empty()) throw CheckpointError("no checkpoints in '" + model_dir + "'");

  fs::create_directories(out);
  for (int zone : zones) {
    const auto ck = read_checkpoint(checkpoint_path(model_dir, zone).string());
    const auto track = ck.header.at("track").get<std::string>();
    if (track != to_string(c.track))
      throw CheckpointError("checkpoint for zone " + std::to_string(zone) + " was trained on track '" + track +
                            "', configured track is '" + std::string(to_string(c.track)) + "'");
    if (ck.header.at("zone").get<int>() != zone)
      throw CheckpointError("checkpoint file for zone " + std::to_string(zone) + " holds zone " +
                            std::to_string(ck.header.at("zone").get<int>()));
    if (ck.params.arch.cond_dim != ds.channels * kPeriods)
      throw CheckpointError("checkpoint expects " + std::to_string(ck.params.arch.cond_dim / kPeriods) +
                            " weather channels, data has " + std::to_string(ds.channels));
    const auto sched = schedule_from_json(ck.header.at("schedule"));
    const auto sets = sample_split(as_noise_model(ck.params), ds, sched, which, zone, c.scenarios,
                                   derive_seed(c.seed, 200, static_cast<std::uint64_t>(zone)), c.thread_count());
    write_scenarios(scenario_path(out, zone).string(), sets);
    announce(scenario_path(out, zone));
  }
  json m = manifest;
  m["scenario_split"] = c.sample_split;
  write_json(out / "manifest.json", m);
  announce(out / "manifest.json");
  return 0;
}

Vector profile_vector(const DayProfile &p) {
  Vector v(kPeriods);
  for (int t = 0; t < kPeriods; ++t) v[t] = p[t];
  return v;
}

int cmd_evaluate(const RunConfig &c, const fs::path &out, std::string scenario_dir) {
  validate_common(c);
  require_file(c.data, "data");
  if (scenario_dir.empty()) scenario_dir = c.scenario_dir;
  require_dir(scenario_dir, "scenario directory");
  if (c.metrics.tie_tolerance && !(*c.metrics.tie_tolerance >= 0.0))
    throw ConfigError("metrics.tie_tolerance must be non-negative");

  const auto raw = load_csv(c.data, c.track);
  std::optional<json> manifest;
  if (fs::is_regular_file(fs::path(scenario_dir) / "manifest.json"))
    manifest = read_json((fs::path(scenario_dir) / "manifest.json").string());
  if (manifest && manifest->at("track").get<std::string>() != to_string(c.track))
    throw CheckpointError("scenarios were generated for track '" + manifest->at("track").get<std::string>() +
                          "', configured track is '" + std::string(to_string(c.track)) + "'");

  std::vector<int> zones = c.zones.empty() ? zones_in(scenario_dir, "scenarios_zone", ".csv") : c.zones;
  if (zones.empty()) throw AlignmentError("no scenario files in '" + scenario_dir + "'");

  // Observations are the days of the split the scenarios were drawn for;
  // without a manifest, the days present in the scenario file.
  std::optional<Split> which;
  std::map<Date, Split> split;
  if (manifest) {
    which = parse_split(manifest->value("scenario_split", std::string("test")));
    for (const auto &[day, s] : manifest->at("split").items()) split[Date::parse(day)] = parse_split(s.get<std::string>());
  }
  std::vector<ZoneInput> inputs;
  for (int zone : zones) {
    ZoneInput zi;
    zi.zone = zone;
    zi.scenarios = read_scenarios(scenario_path(scenario_dir, zone).string());
    for (const auto &s : raw.samples) {
      if (s.zone != zone) continue;
      const bool wanted = which ? (split.count(s.day) && split.at(s.day) == *which) : zi.scenarios.count(s.day) > 0;
      if (wanted) zi.observations[s.day] = profile_vector(s.x);
    }
    inputs.push_back(std::move(zi));
  }
  double base = 1.0;
  if (c.track == Track::load) {
    if (manifest)
      base = scaler_from_json(manifest->at("scaler")).learn_max;
    else
      for (const auto &s : raw.samples) base = std::max(base, *std::max_element(s.x.begin(), s.x.end()));
  }
  const auto rep = evaluate(inputs, base, c.metrics);
  fs::create_directories(out);
  auto j = report_to_json(rep);
  j["track"] = std::string(to_string(c.track));
  j["crps_estimator"] = std::string(to_string(c.metrics.crps_estimator));
  j["tie_tolerance"] = c.metrics.tie_tolerance ? json(*c.metrics.tie_tolerance) : json(nullptr);
  write_json(out / "report.json", j);
  announce(out / "report.json");
  write_reliability_csv((out / "reliability.csv").string(), rep.reliability);
  announce(out / "reliability.csv");
  return 0;
}

// zone -> day -> scenario matrix of one generate output directory
TrackScenarios read_scenario_dir(const std::string &dir, Track track, double scale) {
  require_dir(dir, std::string(to_string(track)) + " scenario directory");
  const fs::path mpath = fs::path(dir) / "manifest.json";
  if (fs::is_regular_file(mpath)) {
    const auto m = read_json(mpath.string());
    if (m.at("track").get<std::string>() != to_string(track))
      throw CheckpointError("'" + dir + "' holds " + m.at("track").get<std::string>() + " scenarios, expected " +
                            std::string(to_string(track)));
  }
  TrackScenarios out;
  for (int zone : zones_in(dir, "scenarios_zone", ".csv")) {
    auto days = read_scenarios(scenario_path(dir, zone).string());
    for (auto &[_, m] : days) m /= scale;
    out[zone] = std::move(days);
  }
  return out;
}

TrackObservations read_observations(const std::string &path, Track track, double scale) {
  const auto ds = load_csv(path, track);
  TrackObservations out;
  for (const auto &s : ds.samples) out[s.zone][s.day] = profile_vector(s.x) / scale;
  return out;
}

int cmd_value(const RunConfig &c, const fs::path &out) {
  validate_common(c);
  c.retailer.validate();
  if (c.value_models.empty()) throw ConfigError("value.models is empty");
  require_file(c.obs_wind, "value.observations.wind");
  require_file(c.obs_pv, "value.observations.pv");
  require_file(c.obs_load, "value.observations.load");
  if (c.max_scenarios < 0) throw ConfigError("value.max_scenarios must be >= 0");
  if (c.load_base < 0.0) throw ConfigError("value.load_base must be >= 0");

  double load_base = c.load_base;
  if (load_base == 0.0)
    for (const auto &[_, d] : c.value_models) {
      const fs::path mpath = fs::path(d.load) / "manifest.json";
      if (fs::is_regular_file(mpath)) {
        load_base = scaler_from_json(read_json(mpath.string()).at("scaler")).learn_max;
        break;
      }
    }
  if (load_base == 0.0) {
    for (const auto &s : load_csv(c.obs_load, Track::load).samples)
      load_base = std::max(load_base, *std::max_element(s.x.begin(), s.x.end()));
    if (!(load_base > 0.0)) throw ConfigError("cannot infer a positive load base; set value.load_base");
  }

  ValueInputs in;
  in.wind = read_observations(c.obs_wind, Track::wind, 1.0);
  in.pv = read_observations(c.obs_pv, Track::pv, 1.0);
  in.load = read_observations(c.obs_load, Track::load, load_base);
  for (const auto &[name, d] : c.value_models) {
    ModelScenarios ms;
    ms.name = name;
    ms.wind = read_scenario_dir(d.wind, Track::wind, 1.0);
    ms.pv = read_scenario_dir(d.pv, Track::pv, 1.0);
    ms.load = read_scenario_dir(d.load, Track::load, load_base);
    in.models.push_back(std::move(ms));
  }
  in.load_zone = c.load_zone;
  const auto &first = in.models.front();
  auto keys = [](const TrackScenarios &t) {
    std::vector<int> z;
    for (const auto &[k, _] : t) z.push_back(k);
    return z;
  };
  in.pv_zones = c.pv_zones.empty() ? keys(first.pv) : c.pv_zones;
  in.wind_zones = c.wind_zones.empty() ? keys(first.wind) : c.wind_zones;
  if (in.pv_zones.empty() || in.wind_zones.empty()) throw CoverageError("no pv or wind scenario files found");
  if (c.value_days.empty()) {
    std::set<Date> days;
    for (const auto &ms : in.models)
      for (const auto *t : {&ms.wind, &ms.pv, &ms.load})
        for (const auto &[_, byday] : *t)
          for (const auto &[d, _m] : byday) days.insert(d);
    in.days.assign(days.begin(), days.end());
  } else {
    in.days = c.value_days;
  }

  ValueOptions opt;
  opt.max_scenarios = c.max_scenarios;
  opt.threads = c.thread_count();
  const auto rep = run_value_benchmark(in, c.retailer, opt);
  fs::create_directories(out);
  auto j = value_report_to_json(rep);
  j["load_base"] = load_base;
  j["retailer"] = retailer_to_json(c.retailer);
  write_json(out / "value.json", j);
  announce(out / "value.json");
  write_value_csv((out / "value.csv").string(), rep);
  announce(out / "value.csv");
  return 0;
}

int exit_code_for(const std::string &kind) {
  static const std::map<std::string, int> codes{{"config", 2},     {"model-validation", 2}, {"divergence", 3},
                                                {"checkpoint", 4}, {"alignment", 5},        {"coverage", 6}};
  auto it = codes.find(kind);
  return it == codes.end() ? 1 : it->second;
}

int report_error(const std::string &kind, const std::string &message) {
  const int code = exit_code_for(kind);
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump() << std::endl;
  return code;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"diffcast: diffusion scenario generation, scoring and value benchmark"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 ok, 1 data/runtime error, 2 config or usage error, 3 divergence,\n"
             "4 checkpoint/track mismatch, 5 alignment error, 6 coverage error.\n"
             "Relative paths in the config file resolve against the file's directory.\n\n"
             "Config defaults:\n" +
             to_json(RunConfig{}).dump(2));

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::string data, model_dir, scenario_dir;
  std::optional<int> zone, epochs, scenarios, days, zones;
  std::string profile;
  std::vector<std::string> model_specs, obs_specs;

  auto common = [&](CLI::App *cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "master seed (overrides config seed, default 0)");
    cmd->add_option("--out", out_dir, "output directory")->capture_default_str();
  };
  auto *synth = app.add_subcommand("synth", "write a synthetic dataset CSV");
  common(synth);
  synth->add_option("--profile", profile, "sine_pv, ramp_wind or bimodal_load (default sine_pv)");
  synth->add_option("--days", days, "number of days (default 1000)");
  synth->add_option("--zones", zones, "number of zones (default 1)");

  auto *train_cmd = app.add_subcommand("train", "train one denoiser per zone");
  common(train_cmd);
  train_cmd->add_option("--data", data, "dataset CSV (overrides config data)");
  train_cmd->add_option("--zone", zone, "train a single zone");
  train_cmd->add_option("--epochs", epochs, "override optimizer.epochs (default 200)");

  auto *gen = app.add_subcommand("generate", "sample scenarios for a split");
  common(gen);
  gen->add_option("--data", data, "dataset CSV (overrides config data)");
  gen->add_option("--model", model_dir, "train output directory (overrides generate.model_dir)");
  gen->add_option("--zone", zone, "generate a single zone");
  gen->add_option("--scenarios", scenarios, "scenarios per day (default 100)");

  auto *eval = app.add_subcommand("evaluate", "score scenarios against observations");
  common(eval);
  eval->add_option("--data", data, "observation CSV (overrides config data)");
  eval->add_option("--scenarios", scenario_dir, "generate output directory (overrides evaluate.scenario_dir)");
  eval->add_option("--zone", zone, "evaluate a single zone");

  auto *value = app.add_subcommand("value", "run the day-ahead bidding benchmark");
  common(value);
  value->add_option("--model", model_specs, "NAME=WIND_DIR,PV_DIR,LOAD_DIR (repeatable; adds to value.models)");
  value->add_option("--observations", obs_specs, "TRACK=CSV (repeatable; overrides value.observations)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    return report_error("config", e.what());
  }

  try {
    const fs::path out(out_dir);
    RunConfig cfg;
    if (!config_path.empty()) {
      try {
        cfg = parse_config(read_json(config_path), fs::path(config_path).parent_path());
      } catch (const json::exception &e) {
        throw ConfigError(std::string("config: ") + e.what());
      } catch (const ParameterError &e) {
        throw ConfigError(std::string("config: ") + e.what());
      } catch (const ParseError &e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    }
    if (seed) cfg.seed = *seed;
    if (!data.empty()) cfg.data = data;
    if (zone) cfg.zones = {*zone};
    if (epochs) cfg.epochs = *epochs;
    if (scenarios) cfg.scenarios = *scenarios;

    if (synth->parsed()) {
      if (!profile.empty()) {
        try {
          cfg.profile = parse_profile(profile);
        } catch (const ParameterError &e) {
          throw ConfigError(e.what());
        }
      }
      if (days) cfg.synth_days = *days;
      if (zones) cfg.synth_zones = *zones;
      return cmd_synth(cfg, out);
    }
    if (train_cmd->parsed()) return cmd_train(cfg, out);
    if (gen->parsed()) return cmd_generate(cfg, out, model_dir);
    if (eval->parsed()) return cmd_evaluate(cfg, out, scenario_dir);
    if (value->parsed()) {
      for (const auto &spec : model_specs) {
        const auto eq = spec.find('=');
        const auto parts = eq == std::string::npos ? std::vector<std::string>{} : CLI::detail::split(spec.substr(eq + 1), ',');
        if (parts.size() != 3) throw ConfigError("--model expects NAME=WIND_DIR,PV_DIR,LOAD_DIR, got '" + spec + "'");
        cfg.value_models[spec.substr(0, eq)] = {parts[0], parts[1], parts[2]};
      }
      for (const auto &spec : obs_specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos) throw ConfigError("--observations expects TRACK=CSV, got '" + spec + "'");
        const auto track = spec.substr(0, eq), path = spec.substr(eq + 1);
        if (track == "wind") cfg.obs_wind = path;
        else if (track == "pv") cfg.obs_pv = path;
        else if (track == "load") cfg.obs_load = path;
        else throw ConfigError("unknown observation track '" + track + "'");
      }
      return cmd_value(cfg, out);
    }
  } catch (const Error &e) {
    return report_error(e.kind(), e.what());
  } catch (const std::exception &e) {
    return report_error("runtime", e.what());
  }
  return 0;
}
