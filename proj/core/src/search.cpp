#include "hlsga/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "hlsga/csv.hpp"
#include "hlsga/errors.hpp"

namespace hlsga {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr Bounds kLogLambdaBounds{kLogLambdaMin, kLogLambdaMax};

std::size_t read_field(const ArchBits& bits, std::size_t start, std::size_t width) {
  std::size_t v = 0;
  for (std::size_t k = 0; k < width; ++k) v = (v << 1) | (bits[start + k] ? 1u : 0u);
  return v;
}

void write_field(ArchBits& bits, std::size_t start, std::size_t width, std::size_t value) {
  for (std::size_t k = 0; k < width; ++k) bits[start + k] = (value >> (width - 1 - k)) & 1u;
}

// Shared bookkeeping for the three drivers.
class TraceBuilder {
 public:
  TraceBuilder(const DatasetSplits& splits, const EvalSettings& settings, std::uint64_t seed)
      : splits_(splits), settings_(settings), seed_(seed) {}

  Individual evaluate_next(const Genome& g, std::size_t generation) {
    const std::size_t index = trace_.total_models++;
    Individual ind = evaluate(g, splits_, settings_, derive_seed(seed_, SeedStream::kInit, index));
    ind.eval_index = index;
    EvaluationRecord rec;
    rec.index = index;
    rec.generation = generation;
    rec.genome = g;
    rec.arch = ind.model.arch.describe();
    rec.fitness = ind.fitness;
    rec.val_acc = ind.val_acc;
    rec.test_acc = std::numeric_limits<double>::quiet_NaN();
    rec.hls_used = ind.hls_used;
    rec.t_star = ind.t_star;
    rec.lambda_eff = ind.lambda_eff;
    rec.diverged = ind.diverged;
    trace_.evaluations.push_back(std::move(rec));
    return ind;
  }

  void decide(std::size_t generation) {
    if (trace_.decision_tick.size() <= generation) trace_.decision_tick.resize(generation + 1, 0);
    trace_.decision_tick[generation] = ++clock_;
  }

  void report_test(const Individual& ind) {
    EvaluationRecord& rec = trace_.evaluations[ind.eval_index];
    rec.test_acc = test_accuracy(ind, splits_.test);
    rec.test_tick = ++clock_;
  }

  void note_best(double fitness) { trace_.per_generation_best.push_back(fitness); }

  SearchResult finish(Individual best) {
    trace_.best_index = best.eval_index;
    SearchResult out;
    out.best_test_acc = trace_.evaluations[best.eval_index].test_acc;
    out.best = std::move(best);
    out.trace = std::move(trace_);
    return out;
  }

  SearchTrace& trace() { return trace_; }

 private:
  const DatasetSplits& splits_;
  const EvalSettings& settings_;
  std::uint64_t seed_;
  SearchTrace trace_;
  std::uint64_t clock_ = 0;
};

// Evaluates a fixed list of genomes (grid and random search share this).
SearchResult run_batch(const DatasetSplits& splits, const EvalSettings& settings,
                       const std::vector<Genome>& genomes, std::uint64_t seed) {
  TraceBuilder tb(splits, settings, seed);
  std::vector<Individual> evaluated;
  evaluated.reserve(genomes.size());
  double best = kInf;
  std::size_t best_pos = 0;
  for (const Genome& g : genomes) {
    evaluated.push_back(tb.evaluate_next(g, 0));
    if (evaluated.back().fitness < best || evaluated.size() == 1) {
      best = std::min(best, evaluated.back().fitness);
      best_pos = evaluated.size() - 1;
    }
    tb.note_best(best);
  }
  tb.decide(0);
  for (const Individual& ind : evaluated) tb.report_test(ind);
  return tb.finish(std::move(evaluated[best_pos]));
}

}  // namespace

double Genome::lambda() const { return std::pow(10.0, log10_lambda); }

std::string Genome::bit_string() const {
  std::string s(kArchBits, '0');
  for (std::size_t i = 0; i < kArchBits; ++i) s[i] = bits[i] ? '1' : '0';
  return s;
}

ArchBits encode_arch(std::size_t layers, std::size_t n1, std::size_t n2, std::size_t n3) {
  if (layers > 3 || n1 > 15 || n2 > 15 || n3 > 15) throw DomainError("encode_arch: field out of range");
  ArchBits bits;
  write_field(bits, 0, 2, layers);
  write_field(bits, 2, 4, n1);
  write_field(bits, 6, 4, n2);
  write_field(bits, 10, 4, n3);
  return bits;
}

std::vector<std::size_t> decode_hidden(const ArchBits& bits) {
  const std::size_t layers = read_field(bits, 0, 2);
  std::vector<std::size_t> hidden;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t n = read_field(bits, 2 + 4 * l, 4);
    if (n > 0) hidden.push_back(n);
  }
  return hidden;
}

Architecture decode(const Genome& genome, std::size_t input_dim, std::size_t output_dim) {
  Architecture arch{input_dim, decode_hidden(genome.bits), output_dim};
  arch.validate();
  return arch;
}

double sbx_beta(double u, double eta) {
  if (u <= 0.5) return std::pow(2.0 * u, 1.0 / (eta + 1.0));
  return std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta + 1.0));
}

std::pair<double, double> sbx_children(double a, double b, double eta, double u) {
  const double beta = sbx_beta(u, eta);
  return {0.5 * ((1.0 + beta) * a + (1.0 - beta) * b), 0.5 * ((1.0 - beta) * a + (1.0 + beta) * b)};
}

std::pair<double, double> sbx_crossover(double a, double b, double eta, Bounds bounds, Rng& rng) {
  // u in (0, 1): u = 1 would make the spread factor infinite.
  double u = uniform01(rng);
  while (u >= 1.0 || u <= 0.0) u = uniform01(rng);
  auto [c1, c2] = sbx_children(a, b, eta, u);
  return {std::clamp(c1, bounds.lo, bounds.hi), std::clamp(c2, bounds.lo, bounds.hi)};
}

double poly_mutation_draw(double x, double eta, Bounds bounds, double u) {
  const double e = 1.0 / (eta + 1.0);
  const double delta = u < 0.5 ? std::pow(2.0 * u, e) - 1.0 : 1.0 - std::pow(2.0 * (1.0 - u), e);
  return std::clamp(x + delta * (bounds.hi - bounds.lo), bounds.lo, bounds.hi);
}

double poly_mutation(double x, double eta, Bounds bounds, Rng& rng) {
  return poly_mutation_draw(x, eta, bounds, uniform01(rng));
}

std::pair<ArchBits, ArchBits> arch_crossover_at(const ArchBits& a, const ArchBits& b,
                                                std::size_t cut) {
  if (cut < 1 || cut >= kArchBits) throw DomainError("arch_crossover: cut must lie in 1..13");
  ArchBits c1 = a;
  ArchBits c2 = b;
  for (std::size_t i = cut; i < kArchBits; ++i) {
    c1[i] = b[i];
    c2[i] = a[i];
  }
  return {c1, c2};
}

std::pair<ArchBits, ArchBits> arch_crossover(const ArchBits& a, const ArchBits& b, Rng& rng) {
  return arch_crossover_at(a, b, 1 + uniform_index(rng, kArchBits - 1));
}

ArchBits arch_mutation(const ArchBits& bits, double p_bit, Rng& rng) {
  ArchBits out = bits;
  for (std::size_t i = 0; i < kArchBits; ++i) {
    if (uniform01(rng) < p_bit) out.flip(i);
  }
  return out;
}

Genome random_genome(Rng& rng) {
  Genome g;
  for (std::size_t i = 0; i < kArchBits; ++i) g.bits[i] = uniform_index(rng, 2) == 1;
  g.log10_lambda = kLogLambdaMin + (kLogLambdaMax - kLogLambdaMin) * uniform01(rng);
  return g;
}

Individual evaluate(const Genome& genome, const DatasetSplits& splits,
                    const EvalSettings& settings, std::uint64_t train_seed) {
  Individual ind;
  ind.genome = genome;
  const Architecture arch =
      decode(genome, splits.train.dim(), static_cast<std::size_t>(splits.train.num_classes));
  const RegGroups groups = make_groups(arch, settings.groups);
  const Vector lambda(groups.num_groups, genome.lambda());
  ind.lambda_eff = lambda;
  ind.model = zero_model(arch);
  try {
    ind.model = train(arch, groups, lambda, splits.train, settings.train, train_seed);
  } catch (const TrainingError&) {
    ind.diverged = true;
    ind.fitness = kInf;
    return ind;
  }
  ind.fitness = avg_cross_entropy(ind.model, splits.val);
  ind.val_acc = accuracy(ind.model, splits.val);
  if (settings.use_hls) {
    ind.hls_used = true;
    HlsConfig cfg = settings.hls;
    cfg.grad_tol = settings.train.grad_tol;
    const ModelFinetune tuned =
        finetune(ind.model, groups, lambda, splits, cfg, settings.train, train_seed);
    const CurvePoint& star = tuned.outcome.search.curve[tuned.outcome.search.star_index];
    ind.model = tuned.model;
    ind.lambda_eff = tuned.lambda;
    ind.t_star = tuned.outcome.search.t_star;
    ind.fitness = star.val_loss;
    ind.val_acc = star.val_acc;
    // The individual adopts lambda*: offspring inherit the fine-tuned decay.
    // Several groups share the genome's single value through their mean.
    double mean = 0.0;
    for (double v : tuned.lambda) mean += v / static_cast<double>(tuned.lambda.size());
    const double log_mean = mean > 0.0 ? std::log10(mean) : kLogLambdaMin;
    ind.genome.log10_lambda = std::clamp(log_mean, kLogLambdaMin, kLogLambdaMax);
  }
  return ind;
}

double test_accuracy(const Individual& ind, const LabeledSet& test) {
  if (ind.diverged) return 0.0;
  return accuracy(ind.model, test);
}

void GaParams::validate() const {
  if (population < 2) throw ConfigError("ga: population must be >= 2");
  if (offspring < 1 || offspring > population) throw ConfigError("ga: offspring must lie in 1..population");
  if (!(p_c >= 0.0 && p_c <= 1.0) || !(p_m >= 0.0 && p_m <= 1.0)) {
    throw ConfigError("ga: probabilities must lie in [0, 1]");
  }
  if (!(eta_c >= 0.0) || !(eta_m >= 0.0)) throw ConfigError("ga: distribution indices must be >= 0");
}

SearchResult micro_ga(const DatasetSplits& splits, const EvalSettings& settings,
                      const GaParams& params, std::uint64_t seed) {
  params.validate();
  Rng ga_rng = make_rng(seed, SeedStream::kGa);
  Rng real_rng = make_rng(seed, SeedStream::kSbx);
  TraceBuilder tb(splits, settings, seed);

  std::vector<Individual> pop;
  pop.reserve(params.population);
  for (std::size_t i = 0; i < params.population; ++i) {
    Genome g = random_genome(ga_rng);
    pop.push_back(tb.evaluate_next(g, 0));
  }
  tb.decide(0);
  for (const Individual& ind : pop) tb.report_test(ind);

  auto best_of = [&pop]() {
    return std::min_element(pop.begin(), pop.end(), [](const Individual& a, const Individual& b) {
      return a.fitness < b.fitness;
    });
  };
  tb.note_best(best_of()->fitness);

  auto tournament = [&]() -> const Individual& {
    const std::size_t i = uniform_index(ga_rng, pop.size());
    std::size_t j = uniform_index(ga_rng, pop.size() - 1);
    if (j >= i) ++j;
    return pop[j].fitness < pop[i].fitness ? pop[j] : pop[i];
  };

  for (std::size_t gen = 1; gen <= params.generations; ++gen) {
    std::vector<Genome> children;
    while (children.size() < params.offspring) {
      const Genome pa = tournament().genome;
      const Genome pb = tournament().genome;
      Genome c1 = pa;
      Genome c2 = pb;
      if (uniform01(ga_rng) < params.p_c) {
        std::tie(c1.bits, c2.bits) = arch_crossover(pa.bits, pb.bits, ga_rng);
        std::tie(c1.log10_lambda, c2.log10_lambda) =
            sbx_crossover(pa.log10_lambda, pb.log10_lambda, params.eta_c, kLogLambdaBounds, real_rng);
      }
      for (Genome* c : {&c1, &c2}) {
        c->bits = arch_mutation(c->bits, params.p_m, ga_rng);
        if (uniform01(ga_rng) < params.p_m) {
          c->log10_lambda = poly_mutation(c->log10_lambda, params.eta_m, kLogLambdaBounds, real_rng);
        }
      }
      children.push_back(c1);
      if (children.size() < params.offspring) children.push_back(c2);
    }

    std::vector<Individual> offspring;
    for (const Genome& g : children) offspring.push_back(tb.evaluate_next(g, gen));

    // Steady-state replacement: best child first, each replaces the current
    // worst member only when strictly better.
    std::vector<std::size_t> order(offspring.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return offspring[a].fitness < offspring[b].fitness;
    });
    std::vector<Individual> reported;
    for (std::size_t k : order) {
      auto worst = std::max_element(pop.begin(), pop.end(), [](const Individual& a, const Individual& b) {
        return a.fitness < b.fitness;
      });
      reported.push_back(offspring[k]);
      if (offspring[k].fitness < worst->fitness) *worst = std::move(offspring[k]);
    }
    tb.decide(gen);
    for (const Individual& ind : reported) tb.report_test(ind);
    tb.note_best(best_of()->fitness);
  }

  return tb.finish(*best_of());
}

std::vector<Genome> grid_genomes(std::size_t budget) {
  constexpr std::size_t kWidths[] = {4, 8, 12, 15};
  constexpr std::size_t kArchCount = 8;
  if (budget == 0 || budget % kArchCount != 0) {
    throw ConfigError("grid search budget must be a positive multiple of 8 (got " +
                      std::to_string(budget) + ")");
  }
  const std::size_t decays = budget / kArchCount;
  std::vector<double> logs;
  for (std::size_t k = 0; k < decays; ++k) {
    logs.push_back(decays == 1 ? -3.0 : -5.0 + 4.0 * static_cast<double>(k) / static_cast<double>(decays - 1));
  }
  std::vector<Genome> out;
  for (std::size_t layers = 1; layers <= 2; ++layers) {
    for (std::size_t width : kWidths) {
      const ArchBits bits = encode_arch(layers, width, layers == 2 ? width : 0);
      for (double l : logs) out.push_back(Genome{bits, l});
    }
  }
  return out;
}

SearchResult grid_search(const DatasetSplits& splits, const EvalSettings& settings,
                         std::size_t budget, std::uint64_t seed) {
  return run_batch(splits, settings, grid_genomes(budget), seed);
}

std::vector<Genome> random_genomes(std::size_t budget, std::uint64_t seed) {
  if (budget == 0) throw ConfigError("random search budget must be >= 1");
  Rng rng = make_rng(seed, SeedStream::kRandomSearch);
  std::vector<Genome> out;
  for (std::size_t i = 0; i < budget; ++i) out.push_back(random_genome(rng));
  return out;
}

SearchResult random_search(const DatasetSplits& splits, const EvalSettings& settings,
                           std::size_t budget, std::uint64_t seed) {
  return run_batch(splits, settings, random_genomes(budget, seed), seed);
}

void audit_trace(const SearchTrace& trace) {
  for (const EvaluationRecord& rec : trace.evaluations) {
    if (rec.generation >= trace.decision_tick.size()) {
      throw ConsistencyError("trace: generation without a recorded decision");
    }
    if (rec.test_tick <= trace.decision_tick[rec.generation]) {
      throw ConsistencyError("trace: test accuracy of evaluation " + std::to_string(rec.index) +
                             " was recorded before its generation's decision");
    }
  }
  for (std::size_t k = 1; k < trace.per_generation_best.size(); ++k) {
    if (trace.per_generation_best[k] > trace.per_generation_best[k - 1]) {
      throw ConsistencyError("trace: best fitness increased at step " + std::to_string(k));
    }
  }
}

void write_trace_csv(std::ostream& out, const SearchTrace& trace) {
  out << "index,generation,bits,log10_lambda,arch,fitness,val_acc,test_acc,hls_used,t_star,"
         "lambda_eff,diverged\n";
  for (const EvaluationRecord& r : trace.evaluations) {
    std::string lambdas;
    for (std::size_t g = 0; g < r.lambda_eff.size(); ++g) {
      lambdas += (g ? ";" : "") + format_g9(r.lambda_eff[g]);
    }
    out << r.index << ',' << r.generation << ',' << r.genome.bit_string() << ','
        << format_g9(r.genome.log10_lambda) << ',' << r.arch << ',' << format_g9(r.fitness) << ','
        << format_g9(r.val_acc) << ',' << format_g9(r.test_acc) << ',' << (r.hls_used ? 1 : 0)
        << ',' << format_g9(r.t_star) << ',' << lambdas << ',' << (r.diverged ? 1 : 0) << '\n';
  }
}

void write_gen_best_csv(std::ostream& out, const SearchTrace& trace) {
  out << "generation,best_val_loss\n";
  for (std::size_t g = 0; g < trace.per_generation_best.size(); ++g) {
    out << g << ',' << format_g9(trace.per_generation_best[g]) << '\n';
  }
}

}  // namespace hlsga
