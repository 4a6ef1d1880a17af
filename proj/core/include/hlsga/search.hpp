#pragma once

#include <bitset>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hlsga/datasets.hpp"
#include "hlsga/hls.hpp"
#include "hlsga/mlp.hpp"
#include "hlsga/rng.hpp"

namespace hlsga {

constexpr std::size_t kArchBits = 14;
constexpr double kLogLambdaMin = -6.0;
constexpr double kLogLambdaMax = 0.0;

/// Architecture bit string, index 0 first. Layout (each field MSB first):
///   [0, 2)   hidden layer count L in 0..3
///   [2, 6)   neurons of layer 1 in 0..15
///   [6, 10)  neurons of layer 2
///   [10, 14) neurons of layer 3
/// Only the first L neuron fields are read; zero fields are dropped.
using ArchBits = std::bitset<kArchBits>;

struct Genome {
  ArchBits bits;
  double log10_lambda = -3.0;

  double lambda() const;
  std::string bit_string() const;  // bit 0 first
};

ArchBits encode_arch(std::size_t layers, std::size_t n1, std::size_t n2 = 0, std::size_t n3 = 0);
std::vector<std::size_t> decode_hidden(const ArchBits& bits);
Architecture decode(const Genome& genome, std::size_t input_dim, std::size_t output_dim);

struct Bounds {
  double lo;
  double hi;
};

/// SBX spread factor for a uniform draw u.
double sbx_beta(double u, double eta);
/// Unclipped SBX children for a given draw; they always sum to a + b.
std::pair<double, double> sbx_children(double a, double b, double eta, double u);
std::pair<double, double> sbx_crossover(double a, double b, double eta, Bounds bounds, Rng& rng);

/// Polynomial mutation for a given draw, clipped to bounds.
double poly_mutation_draw(double x, double eta, Bounds bounds, double u);
double poly_mutation(double x, double eta, Bounds bounds, Rng& rng);

/// One-point crossover: children swap everything from `cut` (1..13) on.
std::pair<ArchBits, ArchBits> arch_crossover_at(const ArchBits& a, const ArchBits& b,
                                                std::size_t cut);
std::pair<ArchBits, ArchBits> arch_crossover(const ArchBits& a, const ArchBits& b, Rng& rng);
/// Flips every bit independently with probability p_bit.
ArchBits arch_mutation(const ArchBits& bits, double p_bit, Rng& rng);

Genome random_genome(Rng& rng);

struct EvalSettings {
  TrainConfig train;
  HlsConfig hls;
  bool use_hls = false;
  GroupScheme groups = GroupScheme::kSingle;
};

struct Individual {
  Genome genome;
  Model model;
  double fitness = 0.0;  // validation cross-entropy; +inf if training diverged
  double val_acc = 0.0;
  Vector lambda_eff;     // weight decay after fine-tuning
  double t_star = 0.0;
  bool hls_used = false;
  bool diverged = false;
  std::size_t eval_index = 0;
};

/// decode -> train -> (optional) fine-tune -> score on the validation set.
/// After fine-tuning the returned genome carries log10 of the mean lambda*,
/// clipped to [kLogLambdaMin, kLogLambdaMax]. The test split is never
/// touched here.
Individual evaluate(const Genome& genome, const DatasetSplits& splits,
                    const EvalSettings& settings, std::uint64_t train_seed);

/// Report-only metric; 0 for diverged individuals.
double test_accuracy(const Individual& ind, const LabeledSet& test);

struct EvaluationRecord {
  std::size_t index = 0;
  std::size_t generation = 0;
  Genome genome;
  std::string arch;
  double fitness = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
  bool hls_used = false;
  double t_star = 0.0;
  Vector lambda_eff;
  bool diverged = false;
  std::uint64_t test_tick = 0;  // logical time test_acc was written
};

struct SearchTrace {
  std::vector<EvaluationRecord> evaluations;
  /// Best fitness in the population after each generation (GA), or best so
  /// far after each evaluation (grid / random).
  std::vector<double> per_generation_best;
  /// Logical time of each generation's selection/replacement decision.
  std::vector<std::uint64_t> decision_tick;
  std::size_t total_models = 0;
  std::size_t best_index = 0;  // into evaluations
};

struct SearchResult {
  SearchTrace trace;
  Individual best;
  double best_test_acc = 0.0;
};

struct GaParams {
  std::size_t population = 10;
  std::size_t generations = 15;
  std::size_t offspring = 2;
  double p_c = 0.9;
  double p_m = 0.1;
  double eta_c = 15.0;
  double eta_m = 20.0;

  void validate() const;
};

SearchResult micro_ga(const DatasetSplits& splits, const EvalSettings& settings,
                      const GaParams& params, std::uint64_t seed);

/// Fixed grid: L in {1, 2} x width in {4, 8, 12, 15} (same width in every
/// layer) x budget/8 log-spaced weight decays over [1e-5, 1e-1]. The budget
/// must be a positive multiple of 8; 40 gives decades 1e-5 .. 1e-1.
std::vector<Genome> grid_genomes(std::size_t budget);
SearchResult grid_search(const DatasetSplits& splits, const EvalSettings& settings,
                         std::size_t budget, std::uint64_t seed);

std::vector<Genome> random_genomes(std::size_t budget, std::uint64_t seed);
SearchResult random_search(const DatasetSplits& splits, const EvalSettings& settings,
                           std::size_t budget, std::uint64_t seed);

/// Throws if test accuracy was recorded before its generation's decision.
void audit_trace(const SearchTrace& trace);

void write_trace_csv(std::ostream& out, const SearchTrace& trace);
void write_gen_best_csv(std::ostream& out, const SearchTrace& trace);

}  // namespace hlsga
