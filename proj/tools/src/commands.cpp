#include "hlsga_cli/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "hlsga/checks.hpp"
#include "hlsga/csv.hpp"
#include "hlsga/errors.hpp"
#include "hlsga/rng.hpp"
#include "hlsga/serialize.hpp"

namespace hlsga::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// Outputs are staged in memory and written only after every computation
// succeeded; each file goes through a temporary name and a rename.
class OutputSet {
 public:
  void add(std::string name, std::string content) { files_[std::move(name)] = std::move(content); }

  void commit(const fs::path& dir) const {
    fs::create_directories(dir);
    for (const auto& [name, content] : files_) {
      const fs::path target = dir / name;
      const fs::path tmp = dir / (name + ".tmp");
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out << content;
        if (!out) throw IoError("write failed for " + tmp.string());
      }
      fs::rename(tmp, target);
    }
  }

 private:
  std::map<std::string, std::string> files_;
};

const char* group_name(GroupScheme g) {
  switch (g) {
    case GroupScheme::kSingle: return "single";
    case GroupScheme::kHiddenOutput: return "hidden_output";
    case GroupScheme::kPerLayer: return "per_layer";
  }
  return "?";
}

const char* freeze_name(FreezePolicy f) {
  switch (f) {
    case FreezePolicy::kAll: return "all";
    case FreezePolicy::kLastLayer: return "last_layer";
    case FreezePolicy::kTrailingK: return "trailing_k";
  }
  return "?";
}

// JSON has no infinity; diverged fitness values are written as null.
ordered_json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

HlsConfig hls_for(const RunConfig& cfg, FreezePolicy fallback) {
  HlsConfig h = cfg.hls_settings;
  h.freeze = cfg.freeze.value_or(FreezeSpec{fallback, 0});
  h.grad_tol = cfg.trainer.grad_tol;
  return h;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void cmd_finetune(const RunConfig& cfg, std::ostream& log) {
  const DatasetSplits splits = load_splits(cfg);
  const Architecture arch{splits.train.dim(), cfg.arch,
                          static_cast<std::size_t>(splits.train.num_classes)};
  arch.validate();
  const RegGroups groups = make_groups(arch, cfg.groups);
  const Vector lambda0(groups.num_groups, 0.0);

  Model base;
  TrainReport report;
  if (cfg.init_model) {
    base = model_from_json(read_file(*cfg.init_model));
    if (!(base.arch == arch)) {
      throw ConfigError("init_model architecture " + base.arch.describe() +
                        " does not match the configured " + arch.describe());
    }
  } else {
    base = train(arch, groups, lambda0, splits.train, cfg.trainer,
                 derive_seed(cfg.seed, SeedStream::kInit, 0), &report);
  }

  const HlsConfig hcfg = hls_for(cfg, FreezePolicy::kAll);
  const ModelFinetune tuned = finetune(base, groups, lambda0, splits, hcfg, cfg.trainer, cfg.seed);
  const DescentDirection& dir = tuned.outcome.direction;
  const LineSearchResult& ls = tuned.outcome.search;
  const CurvePoint& star = ls.curve[ls.star_index];
  if (dir.stationarity_warning) {
    log << "warning: base model is not stationary (||grad_w f||_inf = "
        << format_g9(dir.stationarity) << ")\n";
  }

  ordered_json s;
  s["command"] = "finetune";
  s["seed"] = cfg.seed;
  s["arch"] = arch.describe();
  s["groups"] = group_name(cfg.groups);
  s["freeze"] = freeze_name(hcfg.freeze.policy);
  s["lambda0"] = lambda0;
  s["lambda_star"] = tuned.lambda;
  s["t_star"] = ls.t_star;
  s["base_val_loss"] = ls.curve.front().val_loss;
  s["tuned_val_loss"] = star.val_loss;
  s["base_val_acc"] = accuracy(base, splits.val);
  s["tuned_val_acc"] = accuracy(tuned.model, splits.val);
  s["base_test_acc"] = accuracy(base, splits.test);
  s["tuned_test_acc"] = accuracy(tuned.model, splits.test);
  s["train"] = {{"loaded", cfg.init_model.has_value()},
                {"converged", report.converged},
                {"epochs", report.epochs_run},
                {"grad_inf", report.grad_inf}};
  s["direction"] = {{"lp_status", std::string(to_string(dir.lp_status))},
                    {"usable", dir.usable},
                    {"lp_iterations", dir.lp_iterations},
                    {"d_lambda", dir.d_lambda},
                    {"directional_derivative", dir.directional_derivative},
                    {"delta", dir.delta},
                    {"stationarity", dir.stationarity},
                    {"stationarity_warning", dir.stationarity_warning},
                    {"hessian_asymmetry", dir.hessian_asymmetry},
                    {"constraint_violation", dir.constraint_violation}};

  std::ostringstream curve;
  write_curve_csv(curve, ls.curve);
  OutputSet out;
  out.add("curve.csv", curve.str());
  out.add("summary.json", s.dump(2) + "\n");
  out.add("model.json", model_to_json(tuned.model) + "\n");
  out.commit(cfg.out_dir);

  log << "val loss " << format_g9(ls.curve.front().val_loss) << " -> " << format_g9(star.val_loss)
      << " at t* = " << format_g9(ls.t_star) << "\n";
}

void cmd_search(const RunConfig& cfg, std::ostream& log) {
  const DatasetSplits splits = load_splits(cfg);
  EvalSettings settings;
  settings.train = cfg.trainer;
  settings.hls = hls_for(cfg, FreezePolicy::kLastLayer);
  settings.use_hls = cfg.hls;
  settings.groups = cfg.groups;

  SearchResult result;
  if (cfg.method == "ga") {
    result = micro_ga(splits, settings, cfg.ga, cfg.seed);
  } else if (cfg.method == "grid") {
    result = grid_search(splits, settings, cfg.budget, cfg.seed);
  } else {
    result = random_search(splits, settings, cfg.budget, cfg.seed);
  }
  audit_trace(result.trace);

  const EvaluationRecord& best = result.trace.evaluations[result.trace.best_index];
  ordered_json s;
  s["command"] = "search";
  s["method"] = cfg.method;
  s["hls"] = cfg.hls;
  s["seed"] = cfg.seed;
  s["groups"] = group_name(cfg.groups);
  if (cfg.hls) s["freeze"] = freeze_name(settings.hls.freeze.policy);
  if (cfg.method == "ga") {
    s["ga"] = {{"population", cfg.ga.population}, {"generations", cfg.ga.generations},
               {"offspring", cfg.ga.offspring},   {"p_c", cfg.ga.p_c},
               {"p_m", cfg.ga.p_m},               {"eta_c", cfg.ga.eta_c},
               {"eta_m", cfg.ga.eta_m}};
  } else {
    s["budget"] = cfg.budget;
  }
  s["total_models"] = result.trace.total_models;
  s["best"] = {{"index", best.index},
               {"bits", best.genome.bit_string()},
               {"log10_lambda", best.genome.log10_lambda},
               {"arch", best.arch},
               {"lambda_eff", best.lambda_eff},
               {"t_star", best.t_star},
               {"val_loss", number(best.fitness)},
               {"val_acc", best.val_acc},
               {"test_acc", best.test_acc}};
  s["final_best_val_loss"] = number(result.trace.per_generation_best.back());

  OutputSet out;
  std::ostringstream trace;
  write_trace_csv(trace, result.trace);
  out.add("trace.csv", trace.str());
  if (cfg.method == "ga") {
    std::ostringstream gen;
    write_gen_best_csv(gen, result.trace);
    out.add("gen_best.csv", gen.str());
  }
  out.add("summary.json", s.dump(2) + "\n");
  if (!result.best.diverged) out.add("model.json", model_to_json(result.best.model) + "\n");
  out.commit(cfg.out_dir);

  log << cfg.method << (cfg.hls ? " + hls" : "") << ": " << result.trace.total_models
      << " models, best " << best.arch << " val loss " << format_g9(best.fitness) << " val acc "
      << format_g9(best.val_acc) << " test acc " << format_g9(best.test_acc) << "\n";
}

bool cmd_oracles(std::uint64_t seed, std::ostream& log) {
  bool all = true;
  for (const CheckResult& r : run_oracle_suite(seed)) {
    log << (r.passed ? "PASS  " : "FAIL  ") << r.name << "  " << r.detail << "\n";
    all = all && r.passed;
  }
  return all;
}

void cmd_data_synth(const RunConfig& cfg, std::ostream& log) {
  const DatasetConfig& d = cfg.dataset;
  const LabeledSet set = synth_gaussians(d.synth_n, d.synth_d, d.synth_classes,
                                         d.synth_separation,
                                         derive_seed(cfg.seed, SeedStream::kSynth, 0));
  // write_idx goes straight to disk, so stage in a scratch directory first.
  const fs::path stage = cfg.out_dir / ".synth.tmp";
  fs::create_directories(stage);
  write_idx(set, stage / "images-idx3-ubyte", stage / "labels-idx1-ubyte");
  OutputSet out;
  out.add("images-idx3-ubyte", read_file(stage / "images-idx3-ubyte"));
  out.add("labels-idx1-ubyte", read_file(stage / "labels-idx1-ubyte"));
  fs::remove_all(stage);
  out.commit(cfg.out_dir);
  log << "wrote " << set.size() << " rows of dimension " << set.dim() << " with "
      << set.num_classes << " classes to " << cfg.out_dir.string() << "\n";
}

}  // namespace hlsga::cli
