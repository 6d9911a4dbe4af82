#pragma once

#include "tsgp/run.hpp"
#include "tsgp/sampler.hpp"
#include "tsgp/stdgp.hpp"

namespace tsgp {

struct SearchConfig {
  double sd_desired = 0.1;
  int pop_size = 100;
  int generations = 50;
  int tournament_size = 5;
  int max_len = 100;
  int max_depth = 17;
  /// Extra draws when the model returns its parent unchanged.
  int resample_limit = 3;
  int init_depth_min = 2;
  int init_depth_max = 5;
  double temperature = 1.0;
  bool log_variations = true;
  int threads = 1;

  void validate() const;
};

/// Offspring for `parent`, redrawn up to resample_limit times while it is
/// token-identical to the parent.
ExprTree transformer_variation(const ModelParams& model, const ExprTree& parent,
                               const SearchConfig& config, Rng& rng);

/// Generational loop with the transformer as the only variation operator.
RunTrace run_tsgp(const ModelParams& model, const SplitData& data, const SearchConfig& config,
                  Rng& rng, const GenerationObserver& observer = {});

}  // namespace tsgp
