#include "hlsga_cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hlsga/errors.hpp"
#include "hlsga/rng.hpp"

namespace hlsga::cli {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::string_view where, std::set<std::string> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) {
      throw ConfigError("unknown config key '" + std::string(where) + "." + key + "'");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, std::string_view where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + std::string(where) + "." + key + "' has the wrong type");
  }
}

std::size_t isqrt_exact(std::size_t d) {
  const auto s = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(d))));
  return s * s == d ? s : 0;
}

void parse_dataset(const json& j, DatasetConfig& d) {
  reject_unknown(j, "dataset", {"kind", "images", "labels", "cifar_batches", "synth"});
  std::string kind = "mnist";
  read(j, "kind", kind, "dataset");
  if (kind == "mnist") {
    d.kind = DatasetKind::kMnist;
  } else if (kind == "cifar") {
    d.kind = DatasetKind::kCifar;
  } else if (kind == "synth") {
    d.kind = DatasetKind::kSynth;
  } else {
    throw ConfigError("dataset.kind must be mnist, cifar or synth (got '" + kind + "')");
  }
  std::string path;
  if (j.contains("images")) {
    read(j, "images", path, "dataset");
    d.images = path;
  }
  if (j.contains("labels")) {
    read(j, "labels", path, "dataset");
    d.labels = path;
  }
  std::vector<std::string> batches;
  read(j, "cifar_batches", batches, "dataset");
  d.cifar_batches.assign(batches.begin(), batches.end());
  if (j.contains("synth")) {
    const json& s = j.at("synth");
    reject_unknown(s, "dataset.synth", {"n", "d", "classes", "separation"});
    read(s, "n", d.synth_n, "dataset.synth");
    read(s, "d", d.synth_d, "dataset.synth");
    read(s, "classes", d.synth_classes, "dataset.synth");
    read(s, "separation", d.synth_separation, "dataset.synth");
  }
}

void parse_trainer(const json& j, TrainConfig& t) {
  reject_unknown(j, "trainer",
                 {"learning_rate", "beta1", "beta2", "epsilon", "batch_size", "epochs", "grad_tol"});
  read(j, "learning_rate", t.learning_rate, "trainer");
  read(j, "beta1", t.beta1, "trainer");
  read(j, "beta2", t.beta2, "trainer");
  read(j, "epsilon", t.epsilon, "trainer");
  read(j, "batch_size", t.batch_size, "trainer");
  read(j, "epochs", t.epochs, "trainer");
  read(j, "grad_tol", t.grad_tol, "trainer");
}

void parse_hls(const json& j, RunConfig& cfg) {
  reject_unknown(j, "hls_settings",
                 {"delta", "dw_box", "t0", "ratio", "steps", "freeze", "freeze_k", "refresh_steps",
                  "hessian_limit"});
  HlsConfig& h = cfg.hls_settings;
  if (j.contains("delta") && !j.at("delta").is_null()) {
    double delta = 0.0;
    read(j, "delta", delta, "hls_settings");
    h.delta = delta;
  }
  read(j, "dw_box", h.dw_box, "hls_settings");
  read(j, "t0", h.t_grid.t0, "hls_settings");
  read(j, "ratio", h.t_grid.ratio, "hls_settings");
  read(j, "steps", h.t_grid.steps, "hls_settings");
  read(j, "refresh_steps", h.refresh_steps, "hls_settings");
  read(j, "hessian_limit", h.hessian_limit, "hls_settings");
  if (j.contains("freeze") || j.contains("freeze_k")) {
    FreezeSpec spec;
    std::string policy = "trailing_k";
    if (j.contains("freeze")) read(j, "freeze", policy, "hls_settings");
    spec.policy = parse_freeze_policy(policy);
    read(j, "freeze_k", spec.k, "hls_settings");
    cfg.freeze = spec;
  }
}

void parse_ga(const json& j, GaParams& g) {
  reject_unknown(j, "ga",
                 {"population", "generations", "offspring", "p_c", "p_m", "eta_c", "eta_m"});
  read(j, "population", g.population, "ga");
  read(j, "generations", g.generations, "ga");
  read(j, "offspring", g.offspring, "ga");
  read(j, "p_c", g.p_c, "ga");
  read(j, "p_m", g.p_m, "ga");
  read(j, "eta_c", g.eta_c, "ga");
  read(j, "eta_m", g.eta_m, "ga");
}

}  // namespace

std::filesystem::path default_mnist_dir() { return HLSGA_DEFAULT_MNIST_DIR; }

GroupScheme parse_group_scheme(std::string_view name) {
  if (name == "single") return GroupScheme::kSingle;
  if (name == "hidden_output") return GroupScheme::kHiddenOutput;
  if (name == "per_layer") return GroupScheme::kPerLayer;
  throw ConfigError("groups must be single, hidden_output or per_layer (got '" +
                    std::string(name) + "')");
}

FreezePolicy parse_freeze_policy(std::string_view name) {
  if (name == "all") return FreezePolicy::kAll;
  if (name == "last_layer") return FreezePolicy::kLastLayer;
  if (name == "trailing_k") return FreezePolicy::kTrailingK;
  throw ConfigError("freeze must be all, last_layer or trailing_k (got '" + std::string(name) +
                    "')");
}

void RunConfig::validate() const {
  if (n_train == 0 || n_val == 0 || n_test == 0) throw ConfigError("splits: every part needs >= 1 row");
  if (pool_factor == 0) throw ConfigError("pool_factor must be >= 1");
  if (arch.size() > 3) throw ConfigError("arch: at most 3 hidden layers");
  for (std::size_t n : arch) {
    if (n == 0) throw ConfigError("arch: hidden layer sizes must be >= 1");
  }
  if (method != "ga" && method != "grid" && method != "random") {
    throw ConfigError("method must be ga, grid or random (got '" + method + "')");
  }
  if (budget == 0) throw ConfigError("budget must be >= 1");
  if (dataset.kind == DatasetKind::kCifar && dataset.cifar_batches.empty()) {
    throw ConfigError("dataset.cifar_batches must list at least one batch file");
  }
  if (dataset.kind == DatasetKind::kSynth &&
      (dataset.synth_n == 0 || dataset.synth_d == 0 || dataset.synth_classes == 0 ||
       !(dataset.synth_separation > 0.0))) {
    throw ConfigError("dataset.synth: n, d, classes and separation must be positive");
  }
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
  trainer.validate();
  hls_settings.validate();
  ga.validate();
}

RunConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, "config",
                 {"dataset", "splits", "pool_factor", "arch", "method", "budget", "hls", "groups",
                  "trainer", "hls_settings", "ga", "seed", "out_dir", "init_model"});
  RunConfig cfg;
  if (j.contains("dataset")) parse_dataset(j.at("dataset"), cfg.dataset);
  if (j.contains("splits")) {
    const json& s = j.at("splits");
    reject_unknown(s, "splits", {"train", "val", "test"});
    read(s, "train", cfg.n_train, "splits");
    read(s, "val", cfg.n_val, "splits");
    read(s, "test", cfg.n_test, "splits");
  }
  read(j, "pool_factor", cfg.pool_factor, "config");
  read(j, "arch", cfg.arch, "config");
  read(j, "method", cfg.method, "config");
  read(j, "budget", cfg.budget, "config");
  read(j, "hls", cfg.hls, "config");
  if (j.contains("groups")) {
    std::string g;
    read(j, "groups", g, "config");
    cfg.groups = parse_group_scheme(g);
  }
  if (j.contains("trainer")) parse_trainer(j.at("trainer"), cfg.trainer);
  if (j.contains("hls_settings")) parse_hls(j.at("hls_settings"), cfg);
  if (j.contains("ga")) parse_ga(j.at("ga"), cfg.ga);
  read(j, "seed", cfg.seed, "config");
  std::string path;
  if (j.contains("out_dir")) {
    read(j, "out_dir", path, "config");
    cfg.out_dir = path;
  }
  if (j.contains("init_model") && !j.at("init_model").is_null()) {
    read(j, "init_model", path, "config");
    cfg.init_model = path;
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

DatasetSplits load_splits(const RunConfig& cfg) {
  LabeledSet source;
  switch (cfg.dataset.kind) {
    case DatasetKind::kMnist:
      source = load_idx(cfg.dataset.images, cfg.dataset.labels);
      break;
    case DatasetKind::kCifar:
      source = load_cifar10(cfg.dataset.cifar_batches);
      break;
    case DatasetKind::kSynth:
      source = synth_gaussians(cfg.dataset.synth_n, cfg.dataset.synth_d, cfg.dataset.synth_classes,
                               cfg.dataset.synth_separation,
                               derive_seed(cfg.seed, SeedStream::kSynth, 0));
      break;
  }
  if (cfg.pool_factor > 1) {
    const std::size_t side = isqrt_exact(source.dim());
    if (side == 0) {
      throw ConfigError("pool_factor > 1 needs square images; this dataset has dimension " +
                        std::to_string(source.dim()));
    }
    source = downsample(source, side, cfg.pool_factor);
  }
  return make_splits(source, cfg.n_train, cfg.n_val, cfg.n_test,
                     derive_seed(cfg.seed, SeedStream::kSplit, 0));
}

}  // namespace hlsga::cli
