#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hlsga/errors.hpp"
#include "hlsga/serialize.hpp"
#include "hlsga_cli/commands.hpp"
#include "hlsga_cli/config.hpp"
#include "test_util.hpp"

namespace hlsga::cli {
namespace {

namespace fs = std::filesystem;
using hlsga::testing::TempDir;
using nlohmann::json;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json small_config(const fs::path& out) {
  return json{{"dataset", {{"kind", "synth"}, {"synth", {{"n", 300}, {"d", 8}, {"classes", 3}, {"separation", 3.0}}}}},
              {"splits", {{"train", 120}, {"val", 80}, {"test", 100}}},
              {"pool_factor", 1},
              {"arch", {6, 5}},
              {"trainer", {{"epochs", 20}, {"learning_rate", 0.01}, {"batch_size", 32}}},
              {"seed", 3},
              {"out_dir", out.string()}};
}

RunConfig config_from(const json& j) { return parse_config(j.dump()); }

int run_tool(const std::string& args) {
  const std::string cmd = std::string(HLSGA_TOOL_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Config, DefaultsAndOverrides) {
  const RunConfig d = parse_config("{}");
  EXPECT_EQ(d.dataset.kind, DatasetKind::kMnist);
  EXPECT_EQ(d.method, "ga");
  EXPECT_EQ(d.budget, 40u);
  EXPECT_FALSE(d.freeze.has_value());
  EXPECT_EQ(d.ga.population, 10u);
  const RunConfig c = parse_config(
      R"({"method": "grid", "budget": 16, "hls": true, "groups": "hidden_output",
          "hls_settings": {"delta": 0, "freeze": "trailing_k", "freeze_k": 7, "steps": 5},
          "ga": {"population": 6}})");
  EXPECT_EQ(c.method, "grid");
  EXPECT_EQ(c.budget, 16u);
  EXPECT_TRUE(c.hls);
  EXPECT_EQ(c.groups, GroupScheme::kHiddenOutput);
  ASSERT_TRUE(c.freeze.has_value());
  EXPECT_EQ(c.freeze->policy, FreezePolicy::kTrailingK);
  EXPECT_EQ(c.freeze->k, 7u);
  EXPECT_EQ(c.hls_settings.delta, 0.0);
  EXPECT_EQ(c.hls_settings.t_grid.steps, 5u);
  EXPECT_EQ(c.ga.population, 6u);
}

TEST(Config, RejectsUnknownKeysTypesAndRanges) {
  EXPECT_THROW(parse_config(R"({"lr": 0.1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"trainer": {"eps": 1e-8}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"budget": "forty"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"method": "anneal"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"hls_settings": {"delta": -1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"groups": "per_neuron"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"arch": [1, 2, 3, 4]})"), ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/run.json"), Error);
  EXPECT_EQ(parse_freeze_policy("last_layer"), FreezePolicy::kLastLayer);
  EXPECT_THROW(parse_freeze_policy("none"), ConfigError);
}

TEST(Config, SplitsAreSeededAndDisjoint) {
  TempDir dir("cli_splits");
  const RunConfig cfg = config_from(small_config(dir.path()));
  const DatasetSplits a = load_splits(cfg);
  const DatasetSplits b = load_splits(cfg);
  EXPECT_EQ(a.train_index, b.train_index);
  EXPECT_EQ(a.train.features, b.train.features);
  EXPECT_EQ(a.train.size(), 120u);
  EXPECT_EQ(a.val.size(), 80u);
  EXPECT_EQ(a.test.size(), 100u);
  RunConfig other = cfg;
  other.seed = 4;
  EXPECT_NE(load_splits(other).train_index, a.train_index);
}

TEST(Finetune, PerLayerGroupsWriteAllOutputs) {
  TempDir dir("cli_ft");
  json j = small_config(dir / "out");
  j["groups"] = "per_layer";
  std::ostringstream log;
  cmd_finetune(config_from(j), log);
  for (const char* f : {"curve.csv", "summary.json", "model.json"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
  const json s = json::parse(slurp(dir / "out" / "summary.json"));
  EXPECT_EQ(s["command"], "finetune");
  EXPECT_EQ(s["groups"], "per_layer");
  EXPECT_EQ(s["freeze"], "all");
  ASSERT_EQ(s["lambda_star"].size(), 3u);
  for (const auto& v : s["lambda_star"]) EXPECT_GE(v.get<double>(), 0.0);
  EXPECT_LE(s["tuned_val_loss"].get<double>(), s["base_val_loss"].get<double>());
  const Model m = model_from_json(slurp(dir / "out" / "model.json"));
  EXPECT_EQ(m.arch, (Architecture{8, {6, 5}, 3}));

  std::ifstream curve(dir / "out" / "curve.csv");
  std::string line;
  std::size_t rows = 0;
  while (std::getline(curve, line)) ++rows;
  // Header plus t = 0 and the 20 default grid steps.
  EXPECT_EQ(rows, 22u);
}

TEST(Finetune, ByteIdenticalReruns) {
  TempDir dir("cli_det");
  std::ostringstream log;
  cmd_finetune(config_from(small_config(dir / "a")), log);
  cmd_finetune(config_from(small_config(dir / "b")), log);
  for (const char* f : {"curve.csv", "summary.json", "model.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
}

TEST(Finetune, InitModelSkipsTraining) {
  TempDir dir("cli_init");
  std::ostringstream log;
  cmd_finetune(config_from(small_config(dir / "first")), log);
  json j = small_config(dir / "second");
  j["init_model"] = (dir / "first" / "model.json").string();
  cmd_finetune(config_from(j), log);
  const json s = json::parse(slurp(dir / "second" / "summary.json"));
  EXPECT_TRUE(s["train"]["loaded"].get<bool>());
  j["init_model"] = (dir / "missing.json").string();
  j["out_dir"] = (dir / "third").string();
  EXPECT_THROW(cmd_finetune(config_from(j), log), Error);
  EXPECT_FALSE(fs::exists(dir / "third"));
}

TEST(Finetune, MissingDatasetLeavesNoOutputs) {
  TempDir dir("cli_missing");
  json j = small_config(dir / "out");
  j["dataset"] = {{"kind", "mnist"}, {"images", (dir / "nope-images").string()},
                  {"labels", (dir / "nope-labels").string()}};
  std::ostringstream log;
  EXPECT_THROW(cmd_finetune(config_from(j), log), IoError);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Search, GaWritesTraceAndMonotoneBest) {
  TempDir dir("cli_ga");
  json j = small_config(dir / "out");
  j["arch"] = json::array();
  j["ga"] = {{"population", 4}, {"generations", 3}};
  std::ostringstream log;
  cmd_search(config_from(j), log);
  const json s = json::parse(slurp(dir / "out" / "summary.json"));
  EXPECT_EQ(s["total_models"], 10);
  EXPECT_EQ(s["method"], "ga");
  EXPECT_FALSE(s.contains("freeze"));
  std::ifstream gen(dir / "out" / "gen_best.csv");
  std::string line;
  std::getline(gen, line);
  double prev = std::numeric_limits<double>::infinity();
  int rows = 0;
  while (std::getline(gen, line)) {
    const double v = std::stod(line.substr(line.find(',') + 1));
    EXPECT_LE(v, prev);
    prev = v;
    ++rows;
  }
  EXPECT_EQ(rows, 4);
  // CSV values carry 9 significant digits.
  EXPECT_NEAR(prev, s["final_best_val_loss"].get<double>(), 1e-8 * prev);
}

TEST(Search, RandomWithHlsIsDeterministic) {
  TempDir dir("cli_rand");
  std::ostringstream log;
  for (const char* sub : {"a", "b"}) {
    json j = small_config(dir / sub);
    j["method"] = "random";
    j["budget"] = 4;
    j["hls"] = true;
    cmd_search(config_from(j), log);
  }
  for (const char* f : {"trace.csv", "summary.json", "model.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir / "a" / "gen_best.csv"));
  const json s = json::parse(slurp(dir / "a" / "summary.json"));
  EXPECT_EQ(s["freeze"], "last_layer");
  EXPECT_EQ(s["budget"], 4);
}

TEST(Search, GridTraceGenomesIgnoreSeed) {
  TempDir dir("cli_grid");
  std::ostringstream log;
  std::vector<std::vector<std::string>> genomes;
  for (int seed : {1, 2}) {
    json j = small_config(dir / std::to_string(seed));
    j["method"] = "grid";
    j["budget"] = 8;
    j["seed"] = seed;
    cmd_search(config_from(j), log);
    std::ifstream trace(dir / std::to_string(seed) / "trace.csv");
    std::string line;
    std::getline(trace, line);
    std::vector<std::string> rows;
    while (std::getline(trace, line)) {
      // index,generation,bits,log10_lambda,...
      std::size_t pos = 0;
      for (int k = 0; k < 4; ++k) pos = line.find(',', pos) + 1;
      rows.push_back(line.substr(0, pos));
    }
    genomes.push_back(rows);
  }
  ASSERT_EQ(genomes[0].size(), 8u);
  EXPECT_EQ(genomes[0], genomes[1]);
}

TEST(DataSynth, WritesLoadableIdx) {
  TempDir dir("cli_synth");
  std::ostringstream log;
  cmd_data_synth(config_from(small_config(dir / "data")), log);
  const LabeledSet s = load_idx(dir / "data" / "images-idx3-ubyte", dir / "data" / "labels-idx1-ubyte");
  EXPECT_EQ(s.size(), 300u);
  EXPECT_EQ(s.dim(), 8u);
  EXPECT_EQ(s.num_classes, 3);
  EXPECT_FALSE(fs::exists(dir / "data" / ".synth.tmp"));
}

TEST(Oracles, AllChecksPass) {
  std::ostringstream log;
  EXPECT_TRUE(cmd_oracles(0, log)) << log.str();
}

TEST(Binary, ExitCodes) {
  TempDir dir("cli_bin");
  const fs::path cfg = dir / "bad.json";
  std::ofstream(cfg) << R"({"hls_settings": {"delta": -1}})";
  EXPECT_EQ(run_tool("oracles --config " + cfg.string()), 2);
  EXPECT_EQ(run_tool("oracles --seed 5"), 0);
  EXPECT_NE(run_tool("finetune --config " + (dir / "missing.json").string() + " --out " +
                     (dir / "out").string()),
            0);
  EXPECT_FALSE(fs::exists(dir / "out"));
  EXPECT_NE(run_tool("search --method anneal"), 0);
  EXPECT_NE(run_tool(""), 0);

  const fs::path good = dir / "good.json";
  std::ofstream(good) << small_config(dir / "ignored").dump();
  EXPECT_EQ(run_tool("search --config " + good.string() + " --method random --budget 2 --hls=false --out " +
                     (dir / "flags").string()),
            0);
  const json s = json::parse(slurp(dir / "flags" / "summary.json"));
  EXPECT_EQ(s["method"], "random");
  EXPECT_EQ(s["budget"], 2);
  EXPECT_FALSE(s["hls"].get<bool>());
  EXPECT_FALSE(fs::exists(dir / "ignored"));
}

}  // namespace
}  // namespace hlsga::cli
