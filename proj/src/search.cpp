#include "tsgp/search.hpp"

#include "tsgp/error.hpp"
#include "tsgp/parallel.hpp"
#include "tsgp/semantics.hpp"

namespace tsgp {

void SearchConfig::validate() const {
  if (!(sd_desired >= 0.0)) throw Error(ErrorCode::kPrecondition, "sd_desired must be >= 0");
  if (pop_size < 1 || generations < 0 || tournament_size < 1 || resample_limit < 0) {
    throw Error(ErrorCode::kPrecondition, "search sizes out of range");
  }
  if (max_len < 2 || max_depth < 0 || !(temperature > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "sampling limits out of range");
  }
  if (init_depth_min < 0 || init_depth_max < init_depth_min || init_depth_max > max_depth) {
    throw Error(ErrorCode::kPrecondition, "initial depth range out of range");
  }
}

ExprTree transformer_variation(const ModelParams& model, const ExprTree& parent,
                               const SearchConfig& config, Rng& rng) {
  SampleOptions opts{config.temperature, config.max_depth, config.max_len};
  for (int attempt = 0; attempt <= config.resample_limit; ++attempt) {
    ExprTree child = sample_offspring(model, parent, config.sd_desired, rng, opts);
    if (!(child == parent)) return child;
  }
  return parent;
}

RunTrace run_tsgp(const ModelParams& model, const SplitData& data, const SearchConfig& config,
                  Rng& rng, const GenerationObserver& observer) {
  config.validate();
  if (data.x_train.cols() != model.vocab.n_vars()) {
    throw Error(ErrorCode::kPrecondition, "model vocabulary has " +
                                              std::to_string(model.vocab.n_vars()) +
                                              " variables, data has " +
                                              std::to_string(data.x_train.cols()));
  }
  RunTrace trace;
  trace.method = "tsgp";
  const PrimitiveSet prims{model.vocab.n_vars()};

  std::vector<Individual> pop = evaluate_population(
      ramped_half_and_half(config.pop_size, config.init_depth_min, config.init_depth_max, prims,
                           rng),
      data.x_train, data.y_train, config.threads);

  Individual best = pop.front();
  auto record = [&](int gen) {
    for (const Individual& ind : pop) {
      if (ind.fitness < best.fitness) best = ind;
    }
    trace.generations.push_back({gen, best.fitness, best.tree.size()});
    if (observer) observer(gen, pop);
  };
  record(0);

  for (int gen = 1; gen <= config.generations; ++gen) {
    // Parents are drawn sequentially; sampling runs on per-offspring streams
    // so the result does not depend on the thread count.
    std::vector<const Individual*> parents(config.pop_size);
    for (auto& p : parents) p = &tournament_select(pop, config.tournament_size, rng);
    const std::uint64_t gen_seed = rng();

    std::vector<ExprTree> children(config.pop_size);
    parallel_for(config.pop_size, config.threads, [&](std::size_t i) {
      Rng local(derive_seed(gen_seed, i));
      children[i] = transformer_variation(model, parents[i]->tree, config, local);
    });
    if (config.log_variations) {
      for (int i = 0; i < config.pop_size; ++i) {
        trace.variations.push_back(
            make_variation_record(gen, parents[i]->tree, children[i], data.x_test));
      }
    }
    pop = evaluate_population(std::move(children), data.x_train, data.y_train, config.threads);
    record(gen);
  }

  trace.best_size = best.tree.size();
  trace.best_expression = to_text(best.tree);
  trace.best_test_rmse =
      data.x_test.rows() > 0 ? rmse(data.y_test, evaluate(best.tree, data.x_test)) : best.fitness;
  return trace;
}

}  // namespace tsgp
