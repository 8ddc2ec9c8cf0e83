#ifndef WGCS_PIPELINE_HPP
#define WGCS_PIPELINE_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "data.hpp"
#include "json_util.hpp"
#include "nn.hpp"
#include "sampler.hpp"
#include "wgan.hpp"

namespace wgcs {

/// Network shape as written in configs: {"hidden": [...], "output_activation": {...}}.
/// Input and output dimensions come from the data.
inline nn::NetworkSpec resolve_network(const json& shape, std::size_t input_dim, std::size_t output_dim,
                                       std::size_t sample_size) {
  require_known_keys(shape, {"hidden", "output_activation"}, "network shape");
  json full = shape;
  full["input_dim"] = input_dim;
  full["output_dim"] = output_dim;
  return nn::spec_from_json(full, sample_size);
}

inline json network_shape(const std::vector<std::size_t>& widths, const json& output_activation = {{"kind", "identity"}}) {
  json hidden = json::array();
  for (auto w : widths) hidden.push_back({{"width", w}, {"activation", "relu"}});
  return {{"hidden", hidden}, {"output_activation", output_activation}};
}

struct FittedSampler {
  sampler::ConditionalSampler sampler;
  nn::Network critic;
  wgan::TrainReport report;
  json metadata;
};

inline json checkpoint_metadata(const wgan::TrainConfig& cfg, const Standardization& stats, std::int64_t step) {
  return {{"seed", cfg.seed},
          {"step", step},
          {"train_config_digest", digest(wgan::train_config_to_json(cfg))},
          {"noise_dim", cfg.noise_dim},
          {"standardization", standardization_to_json(stats)}};
}

/// Trains on `raw` (standardizing first unless told otherwise) and wraps the
/// generator into a sampler that answers in original units.
inline FittedSampler fit_sampler(const PairedDataset& raw, const nn::NetworkSpec& generator_spec,
                                 const nn::NetworkSpec& critic_spec, const wgan::TrainConfig& cfg,
                                 bool standardize_data = true) {
  raw.validate();
  Standardization stats{ColumnStats::identity(raw.x_dim()), ColumnStats::identity(raw.y_dim())};
  PairedDataset train_data = raw;
  if (standardize_data) std::tie(train_data, stats) = standardize(raw);
  auto state = wgan::train_state(std::move(train_data), generator_spec, critic_spec, cfg);
  json md = checkpoint_metadata(cfg, stats, state.step);
  sampler::ConditionalSampler s(state.generator, cfg.noise_dim, stats, cfg.seed);
  return {std::move(s), std::move(state.critic), std::move(state.report), std::move(md)};
}

inline json sampler_checkpoint(const FittedSampler& f) {
  return nn::save_checkpoint(f.sampler.generator().spec, f.sampler.generator().params, f.metadata);
}

}  // namespace wgcs

#endif  // WGCS_PIPELINE_HPP
