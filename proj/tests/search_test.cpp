#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "hlsga/errors.hpp"
#include "hlsga/search.hpp"
#include "test_util.hpp"

namespace hlsga {
namespace {

constexpr Bounds kBox{-6.0, 0.0};

ArchBits from_string(const std::string& s) {
  ArchBits b;
  for (std::size_t i = 0; i < s.size(); ++i) b[i] = s[i] == '1';
  return b;
}

TEST(Genome, DecodeExamples) {
  // L = 2 (bits "10"), n1 = 5 ("0101"), n2 = 0, n3 = 7 (ignored).
  const ArchBits bits = from_string("10010100000111");
  EXPECT_EQ(bits, encode_arch(2, 5, 0, 7));
  EXPECT_EQ(decode_hidden(bits), (std::vector<std::size_t>{5}));
  EXPECT_EQ(decode_hidden(encode_arch(0, 9, 9, 9)), (std::vector<std::size_t>{}));
  EXPECT_EQ(decode_hidden(encode_arch(3, 15, 1, 15)), (std::vector<std::size_t>{15, 1, 15}));
  EXPECT_EQ(decode_hidden(encode_arch(3, 0, 0, 0)), (std::vector<std::size_t>{}));
  const Genome g{encode_arch(2, 3, 4), -2.0};
  EXPECT_EQ(g.bit_string(), "10001101000000");
  EXPECT_DOUBLE_EQ(g.lambda(), 1e-2);
  EXPECT_EQ(decode(g, 49, 10), (Architecture{49, {3, 4}, 10}));
  EXPECT_THROW(encode_arch(4, 1), DomainError);
  EXPECT_THROW(encode_arch(1, 16), DomainError);
}

TEST(Genome, EncodeDecodeRoundTripOverAllArchitectures) {
  for (std::size_t l = 0; l <= 3; ++l) {
    for (std::size_t n = 1; n <= 15; ++n) {
      const auto hidden = decode_hidden(encode_arch(l, n, n, n));
      EXPECT_EQ(hidden, std::vector<std::size_t>(l, n));
    }
  }
}

TEST(Sbx, ChildrenPreserveMeanAndSpreadByBeta) {
  Rng rng(1);
  for (int trial = 0; trial < 10000; ++trial) {
    const double a = testing::uniform(rng, -6, 0);
    const double b = testing::uniform(rng, -6, 0);
    const double eta = testing::uniform(rng, 0, 30);
    double u = uniform01(rng);
    if (u == 0.0) u = 0.5;
    const auto [c1, c2] = sbx_children(a, b, eta, u);
    EXPECT_NEAR(c1 + c2, a + b, 1e-12);
    EXPECT_NEAR(std::abs(c1 - c2), sbx_beta(u, eta) * std::abs(a - b), 1e-9);
    const auto [k1, k2] = sbx_crossover(a, b, eta, kBox, rng);
    EXPECT_GE(k1, kBox.lo);
    EXPECT_LE(k1, kBox.hi);
    EXPECT_GE(k2, kBox.lo);
    EXPECT_LE(k2, kBox.hi);
  }
  const auto [same1, same2] = sbx_children(-3.0, -3.0, 15.0, 0.9);
  EXPECT_DOUBLE_EQ(same1, -3.0);
  EXPECT_DOUBLE_EQ(same2, -3.0);
}

TEST(Sbx, BetaDistributionMatchesDensity) {
  // P(beta <= b) = b^(eta+1) / 2 for b <= 1 and 1 - b^-(eta+1) / 2 above.
  Rng rng(2);
  const double eta = 15.0;
  const int n = 20000;
  int below_half = 0;
  int below_one = 0;
  int below_1_05 = 0;
  for (int i = 0; i < n; ++i) {
    double u = uniform01(rng);
    if (u == 0.0) continue;
    const double beta = sbx_beta(u, eta);
    below_half += beta <= std::pow(0.5, 1.0 / 16.0);
    below_one += beta <= 1.0;
    below_1_05 += beta <= 1.05;
  }
  EXPECT_NEAR(below_half / double(n), 0.25, 0.015);
  EXPECT_NEAR(below_one / double(n), 0.5, 0.015);
  EXPECT_NEAR(below_1_05 / double(n), 1.0 - 0.5 * std::pow(1.05, -16.0), 0.015);
}

TEST(PolyMutation, BoundedMonotoneAndCentred) {
  Rng rng(3);
  for (int trial = 0; trial < 10000; ++trial) {
    const double x = testing::uniform(rng, -6, 0);
    const double u = uniform01(rng);
    const double y = poly_mutation_draw(x, 20.0, kBox, u);
    EXPECT_GE(y, kBox.lo);
    EXPECT_LE(y, kBox.hi);
    EXPECT_LE(std::abs(y - x), kBox.hi - kBox.lo);
    if (u + 0.01 < 1.0) EXPECT_GE(poly_mutation_draw(x, 20.0, kBox, u + 0.01), y);
  }
  EXPECT_DOUBLE_EQ(poly_mutation_draw(-3.0, 20.0, kBox, 0.5), -3.0);
  EXPECT_DOUBLE_EQ(poly_mutation_draw(-3.0, 20.0, kBox, 0.0), -6.0);
  // Symmetric draws shift by equal amounts in opposite directions.
  EXPECT_NEAR(poly_mutation_draw(-3.0, 20.0, kBox, 0.2) + poly_mutation_draw(-3.0, 20.0, kBox, 0.8),
              -6.0, 1e-12);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) sum += poly_mutation(-3.0, 20.0, kBox, rng) + 3.0;
  EXPECT_NEAR(sum / 10000.0, 0.0, 0.01);
}

TEST(ArchOperators, CrossoverSwapsSuffix) {
  const ArchBits zeros;
  const ArchBits ones = ~zeros;
  for (std::size_t cut = 1; cut < kArchBits; ++cut) {
    const auto [c1, c2] = arch_crossover_at(zeros, ones, cut);
    for (std::size_t i = 0; i < kArchBits; ++i) {
      EXPECT_EQ(c1[i], i >= cut);
      EXPECT_EQ(c2[i], i < cut);
    }
  }
  EXPECT_THROW(arch_crossover_at(zeros, ones, 0), DomainError);
  EXPECT_THROW(arch_crossover_at(zeros, ones, 14), DomainError);

  Rng rng(4);
  std::vector<int> hits(kArchBits, 0);
  const int n = 13000;
  for (int i = 0; i < n; ++i) {
    const auto [c1, c2] = arch_crossover(zeros, ones, rng);
    EXPECT_EQ(c1 ^ c2, ones);
    std::size_t cut = 0;
    while (!c1[cut]) ++cut;
    ++hits[cut];
  }
  EXPECT_EQ(hits[0], 0);
  for (std::size_t cut = 1; cut < kArchBits; ++cut) EXPECT_NEAR(hits[cut], n / 13, 150) << cut;
}

TEST(ArchOperators, MutationFlipRate) {
  Rng rng(5);
  const ArchBits start = encode_arch(2, 7, 9);
  for (double p : {0.0, 0.1, 0.5, 1.0}) {
    std::size_t flips = 0;
    const int n = 5000;
    for (int i = 0; i < n; ++i) flips += (arch_mutation(start, p, rng) ^ start).count();
    EXPECT_NEAR(flips / double(n * kArchBits), p, 0.01) << p;
  }
}

TEST(Sbx, CentreDrawReturnsParents) {
  EXPECT_DOUBLE_EQ(sbx_beta(0.5, 15.0), 1.0);
  const auto [c1, c2] = sbx_children(-4.5, -1.25, 15.0, 0.5);
  EXPECT_DOUBLE_EQ(c1, -4.5);
  EXPECT_DOUBLE_EQ(c2, -1.25);
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto [e1, e2] = sbx_crossover(-2.0, -2.0, 15.0, kBox, rng);
    EXPECT_DOUBLE_EQ(e1, -2.0);
    EXPECT_DOUBLE_EQ(e2, -2.0);
  }
}

TEST(PolyMutation, MidpointMeanWithinTwoPercent) {
  Rng rng(12);
  double sum = 0.0;
  for (int i = 0; i < 10000; ++i) sum += poly_mutation(-3.0, 20.0, kBox, rng);
  EXPECT_NEAR(sum / 10000.0, -3.0, 0.02 * 3.0);
  for (int i = 0; i < 10000; ++i) EXPECT_GE(poly_mutation(kBox.lo, 20.0, kBox, rng), kBox.lo);
}

TEST(ArchOperators, CrossoverPreservesBitMultisets) {
  Rng rng(13);
  for (int trial = 0; trial < 10000; ++trial) {
    const ArchBits a(rng());
    const ArchBits b(rng());
    const auto [c1, c2] = arch_crossover(a, b, rng);
    for (std::size_t i = 0; i < kArchBits; ++i) EXPECT_EQ(c1[i] + c2[i], a[i] + b[i]);
    const auto [s1, s2] = arch_crossover(a, a, rng);
    EXPECT_EQ(s1, a);
    EXPECT_EQ(s2, a);
  }
  // cut = 2: the 12-bit suffixes are exchanged.
  const auto [c1, c2] = arch_crossover_at(from_string("00000000000000"), from_string("11111111111111"), 2);
  EXPECT_EQ(c1, from_string("00111111111111"));
  EXPECT_EQ(c2, from_string("11000000000000"));
}

TEST(ArchOperators, MutationExtremesAndMeanFlips) {
  Rng rng(14);
  const ArchBits start = from_string("10110011100010");
  EXPECT_EQ(arch_mutation(start, 0.0, rng), start);
  EXPECT_EQ(arch_mutation(start, 1.0, rng), ~start);
  std::size_t flips = 0;
  for (int i = 0; i < 10000; ++i) flips += (arch_mutation(start, 0.1, rng) ^ start).count();
  EXPECT_NEAR(flips / 10000.0, 1.4, 0.1);
}

TEST(Evaluate, SeparableDataAnyOneLayerGenomeIsPerfect) {
  const LabeledSet all = synth_gaussians(400, 6, 3, 10.0, 21);
  const DatasetSplits splits = make_splits(all, 200, 100, 100, 21);
  EvalSettings s;
  s.train.learning_rate = 0.02;
  s.train.epochs = 1000;
  s.train.batch_size = 32;
  s.train.grad_tol = 1e-4;
  for (std::size_t n : {1u, 3u, 8u, 15u}) {
    const Individual ind = evaluate(Genome{encode_arch(1, n), -6.0}, splits, s, n);
    EXPECT_EQ(ind.val_acc, 1.0) << n;
  }
}

TEST(GridSearch, GenomeList) {
  const auto g40 = grid_genomes(40);
  ASSERT_EQ(g40.size(), 40u);
  std::set<std::pair<std::string, double>> seen;
  std::set<std::vector<std::size_t>> archs;
  std::set<double> decays;
  for (const Genome& g : g40) {
    seen.insert({g.bit_string(), g.log10_lambda});
    archs.insert(decode_hidden(g.bits));
    decays.insert(g.log10_lambda);
  }
  EXPECT_EQ(seen.size(), 40u);
  EXPECT_EQ(archs, (std::set<std::vector<std::size_t>>{{4}, {8}, {12}, {15}, {4, 4}, {8, 8},
                                                         {12, 12}, {15, 15}}));
  EXPECT_EQ(decays, (std::set<double>{-5, -4, -3, -2, -1}));
  const auto g16 = grid_genomes(16);
  std::set<double> two;
  for (const Genome& g : g16) two.insert(g.log10_lambda);
  EXPECT_EQ(two, (std::set<double>{-5, -1}));
  const auto g8 = grid_genomes(8);
  for (const Genome& g : g8) EXPECT_EQ(g.log10_lambda, -3.0);
  EXPECT_THROW(grid_genomes(12), ConfigError);
  EXPECT_THROW(grid_genomes(0), ConfigError);
}

TEST(RandomSearch, GenomeDistribution) {
  const auto genomes = random_genomes(10000, 7);
  double mean = 0.0;
  std::vector<int> ones(kArchBits, 0);
  for (const Genome& g : genomes) {
    EXPECT_GE(g.log10_lambda, kLogLambdaMin);
    EXPECT_LT(g.log10_lambda, kLogLambdaMax);
    mean += g.log10_lambda;
    for (std::size_t i = 0; i < kArchBits; ++i) ones[i] += g.bits[i];
  }
  EXPECT_NEAR(mean / 10000.0, -3.0, 0.07);
  for (int c : ones) EXPECT_NEAR(c / 10000.0, 0.5, 0.02);
  const auto again = random_genomes(10000, 7);
  for (std::size_t i = 0; i < genomes.size(); ++i) {
    EXPECT_EQ(genomes[i].bits, again[i].bits);
    EXPECT_EQ(genomes[i].log10_lambda, again[i].log10_lambda);
  }
  EXPECT_THROW(random_genomes(0, 1), ConfigError);
}

DatasetSplits small_splits(std::uint64_t seed) {
  const LabeledSet all = synth_gaussians(300, 6, 3, 2.5, seed);
  return make_splits(all, 120, 80, 100, seed);
}

EvalSettings small_settings(bool hls) {
  EvalSettings s;
  s.train.learning_rate = 0.01;
  s.train.epochs = 15;
  s.train.batch_size = 32;
  s.use_hls = hls;
  s.hls.freeze = {FreezePolicy::kLastLayer, 0};
  return s;
}

void expect_well_formed(const SearchResult& r, std::size_t models) {
  EXPECT_EQ(r.trace.total_models, models);
  ASSERT_EQ(r.trace.evaluations.size(), models);
  for (std::size_t k = 0; k < models; ++k) EXPECT_EQ(r.trace.evaluations[k].index, k);
  for (std::size_t k = 1; k < r.trace.per_generation_best.size(); ++k) {
    EXPECT_LE(r.trace.per_generation_best[k], r.trace.per_generation_best[k - 1]);
  }
  EXPECT_NO_THROW(audit_trace(r.trace));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : r.trace.evaluations) best = std::min(best, e.fitness);
  EXPECT_EQ(r.best.fitness, best);
  EXPECT_EQ(r.trace.evaluations[r.trace.best_index].fitness, best);
  EXPECT_EQ(r.trace.per_generation_best.back(), best);
}

TEST(MicroGa, FortyModelsMonotoneBestAndAudited) {
  const DatasetSplits splits = small_splits(1);
  const SearchResult r = micro_ga(splits, small_settings(false), GaParams{}, 3);
  expect_well_formed(r, 40);
  ASSERT_EQ(r.trace.per_generation_best.size(), 16u);
  ASSERT_EQ(r.trace.decision_tick.size(), 16u);
  std::vector<int> per_gen(16, 0);
  for (const auto& e : r.trace.evaluations) ++per_gen[e.generation];
  EXPECT_EQ(per_gen[0], 10);
  for (std::size_t g = 1; g < 16; ++g) EXPECT_EQ(per_gen[g], 2);
  EXPECT_EQ(r.best_test_acc, test_accuracy(r.best, splits.test));

  const SearchResult again = micro_ga(splits, small_settings(false), GaParams{}, 3);
  std::ostringstream a, b;
  write_trace_csv(a, r.trace);
  write_trace_csv(b, again.trace);
  EXPECT_EQ(a.str(), b.str());
}

TEST(MicroGa, SmallerBudgets) {
  const DatasetSplits splits = small_splits(2);
  GaParams params;
  params.population = 4;
  params.generations = 3;
  params.offspring = 3;
  expect_well_formed(micro_ga(splits, small_settings(true), params, 5), 13);
  params.offspring = 5;
  EXPECT_THROW(micro_ga(splits, small_settings(false), params, 5), ConfigError);
}

TEST(AuditTrace, DetectsLeakageAndRegressions) {
  const DatasetSplits splits = small_splits(3);
  GaParams params;
  params.population = 3;
  params.generations = 2;
  const SearchResult r = micro_ga(splits, small_settings(false), params, 1);
  SearchTrace leaked = r.trace;
  leaked.evaluations.back().test_tick = leaked.decision_tick[leaked.evaluations.back().generation];
  EXPECT_THROW(audit_trace(leaked), ConsistencyError);
  SearchTrace worse = r.trace;
  worse.per_generation_best.back() = worse.per_generation_best.front() + 1.0;
  EXPECT_THROW(audit_trace(worse), ConsistencyError);
}

TEST(BatchSearch, FineTuningNeverHurtsPairedEvaluations) {
  // Same genomes, same training seeds: the line search includes t = 0.
  const DatasetSplits splits = small_splits(4);
  for (bool grid : {false, true}) {
    const SearchResult plain = grid ? grid_search(splits, small_settings(false), 8, 9)
                                    : random_search(splits, small_settings(false), 6, 9);
    const SearchResult tuned = grid ? grid_search(splits, small_settings(true), 8, 9)
                                    : random_search(splits, small_settings(true), 6, 9);
    expect_well_formed(plain, grid ? 8 : 6);
    expect_well_formed(tuned, grid ? 8 : 6);
    for (std::size_t k = 0; k < plain.trace.evaluations.size(); ++k) {
      const auto& p = plain.trace.evaluations[k];
      const auto& t = tuned.trace.evaluations[k];
      EXPECT_EQ(p.genome.bit_string(), t.genome.bit_string());
      EXPECT_LE(t.fitness, p.fitness);
      EXPECT_TRUE(t.hls_used || t.diverged);
      EXPECT_FALSE(p.hls_used);
      for (double v : t.lambda_eff) EXPECT_GE(v, 0.0);
    }
    EXPECT_LE(tuned.best.fitness, plain.best.fitness);
  }
}

TEST(BatchSearch, GridGenomesDoNotDependOnSeed) {
  const DatasetSplits splits = small_splits(5);
  const SearchResult a = grid_search(splits, small_settings(false), 8, 1);
  const SearchResult b = grid_search(splits, small_settings(false), 8, 2);
  for (std::size_t k = 0; k < 8; ++k) {
    EXPECT_EQ(a.trace.evaluations[k].genome.bit_string(), b.trace.evaluations[k].genome.bit_string());
    EXPECT_EQ(a.trace.evaluations[k].genome.log10_lambda, b.trace.evaluations[k].genome.log10_lambda);
  }
}

TEST(Evaluate, FineTunedIndividualAdoptsLambdaStar) {
  const DatasetSplits splits = small_splits(8);
  Rng rng(15);
  for (int k = 0; k < 6; ++k) {
    const Genome g{encode_arch(1 + uniform_index(rng, 2), 3 + uniform_index(rng, 8),
                               3 + uniform_index(rng, 8)),
                   testing::uniform(rng, -6.0, 0.0)};
    const Individual plain = evaluate(g, splits, small_settings(false), 40 + k);
    EXPECT_EQ(plain.genome.log10_lambda, g.log10_lambda);
    const Individual tuned = evaluate(g, splits, small_settings(true), 40 + k);
    EXPECT_EQ(tuned.genome.bits, g.bits);
    ASSERT_EQ(tuned.lambda_eff.size(), 1u);
    const double expected = tuned.lambda_eff[0] > 0.0
                                ? std::clamp(std::log10(tuned.lambda_eff[0]), kLogLambdaMin, kLogLambdaMax)
                                : kLogLambdaMin;
    EXPECT_DOUBLE_EQ(tuned.genome.log10_lambda, expected);
  }
}

TEST(Evaluate, DivergedIndividualsScoreInfinity) {
  const DatasetSplits splits = small_splits(6);
  EvalSettings s = small_settings(false);
  s.train.learning_rate = 1e300;
  const Individual ind = evaluate(Genome{encode_arch(1, 4), 0.0}, splits, s, 1);
  EXPECT_TRUE(ind.diverged);
  EXPECT_TRUE(std::isinf(ind.fitness));
  EXPECT_EQ(test_accuracy(ind, splits.test), 0.0);
}

TEST(TraceCsv, Headers) {
  const DatasetSplits splits = small_splits(7);
  const SearchResult r = random_search(splits, small_settings(false), 2, 1);
  std::ostringstream trace;
  write_trace_csv(trace, r.trace);
  const std::string text = trace.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "index,generation,bits,log10_lambda,arch,fitness,val_acc,test_acc,hls_used,t_star,"
            "lambda_eff,diverged");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  std::ostringstream best;
  write_gen_best_csv(best, r.trace);
  const std::string best_text = best.str();
  EXPECT_EQ(best_text.substr(0, best_text.find('\n')), "generation,best_val_loss");
}

}  // namespace
}  // namespace hlsga
