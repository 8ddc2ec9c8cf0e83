#ifndef WGCS_CLI_HPP
#define WGCS_CLI_HPP

// Subcommands behind the `wgcs` executable. Each command takes a JSON config
// plus the global overrides and writes its artifacts atomically into the
// output directory. Relative paths inside a config resolve against the
// directory of the config file.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bench.hpp"
#include "data.hpp"
#include "error.hpp"
#include "json_util.hpp"
#include "metrics.hpp"
#include "nn.hpp"
#include "pipeline.hpp"
#include "sampler.hpp"
#include "synth.hpp"
#include "wgan.hpp"

namespace wgcs::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

struct Options {
  json config = json::object();
  fs::path base_dir = ".";  // for relative paths in the config
  std::optional<std::uint64_t> seed;
  fs::path out = ".";
  bool paper_scale = false;
};

inline Options options_from_file(const fs::path& config_path) {
  Options o;
  o.config = read_json_file(config_path);
  if (!o.config.is_object()) throw ConfigError(config_path.string() + ": config must be a JSON object");
  o.base_dir = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
  return o;
}

namespace detail {

inline fs::path resolve(const Options& o, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : o.base_dir / path;
}

inline std::uint64_t effective_seed(const Options& o) {
  if (o.seed) return *o.seed;
  return get_or<std::uint64_t>(o.config, "seed", 0);
}

inline void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

/// Resolved config with the seed override applied, as recorded in sidecars.
inline json resolved_config(const Options& o) {
  json c = o.config;
  c["seed"] = effective_seed(o);
  return c;
}

inline json sidecar(const std::string& command, const Options& o, const std::vector<std::string>& outputs) {
  const json c = resolved_config(o);
  return {{"command", command}, {"config", c}, {"config_digest", digest(c)}, {"seed", effective_seed(o)},
          {"outputs", outputs}};
}

inline nn::NetworkSpec network_from_config(const json& shape, std::size_t in, std::size_t out, std::size_t n,
                                           bool is_generator) {
  if (shape.is_string()) {
    if (shape.get<std::string>() != "auto") throw ConfigError("network must be a shape object or \"auto\"");
    const auto sizes = wgan::size_networks(n, out);
    const std::size_t w = is_generator ? sizes.generator_width : sizes.critic_width;
    const std::size_t depth = is_generator ? sizes.generator_depth : sizes.critic_depth;
    const json act = is_generator ? json{{"kind", "clip"}, {"bound", "log_n"}} : json{{"kind", "identity"}};
    return resolve_network(network_shape(std::vector<std::size_t>(depth, w), act), in, out, n);
  }
  return resolve_network(shape, in, out, n);
}

inline json default_generator_shape() { return network_shape({64}, {{"kind", "clip"}, {"bound", "log_n"}}); }
inline json default_critic_shape() { return network_shape({64, 32}); }

inline std::vector<std::string> string_list(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<std::string>>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// gen-data

/// Synthetic: {"model", "n", "sigma", "d", "seed"}. Passthrough: {"csv",
/// "response", "one_hot"}. Writes data.csv and the data.json sidecar.
inline PairedDataset cmd_gen_data(const Options& o) {
  const json& c = o.config;
  require_known_keys(c, {"model", "n", "sigma", "d", "seed", "csv", "response", "one_hot"}, "gen-data config");
  const std::uint64_t seed = detail::effective_seed(o);
  PairedDataset data;
  json source;
  if (c.contains("csv")) {
    if (c.contains("model")) throw ConfigError("gen-data takes either 'model' or 'csv', not both");
    const fs::path path = detail::resolve(o, c.at("csv").get<std::string>());
    if (!fs::exists(path)) throw ConfigError("dataset not found: " + path.string());
    const Table t = read_table(path);
    const auto response = detail::string_list(c, "response");
    const auto one_hot = detail::string_list(c, "one_hot");
    data = response.empty() && one_hot.empty() ? dataset_from_table(t) : dataset_from_named_table(t, response, one_hot);
    source = {{"csv", path.filename().string()}, {"response", response}, {"one_hot", one_hot}};
  } else {
    if (!c.contains("model")) throw ConfigError("gen-data config needs 'model' or 'csv'");
    const auto kind = synth::model_from_string(c.at("model").get<std::string>());
    const auto n = get_or<Eigen::Index>(c, "n", 5000);
    synth::SynthModel model{kind, get_or(c, "sigma", 0.1), 0};
    model.d = kind == synth::ModelKind::two_moon ? 2 : get_or<Eigen::Index>(c, "d", synth::active_dims(kind));
    if (n < 1) throw ConfigError("n must be >= 1");
    model.validate();
    data = synth::generate(model, n, seed);
    source = {{"model", synth::to_string(kind)}, {"n", n}, {"d", model.d}};
    if (kind == synth::ModelKind::two_moon) source["sigma"] = model.sigma;
  }
  const std::string csv = dataset_to_csv(data);
  const auto stats = standardize(data).second;
  json side = detail::sidecar("gen-data", o, {"data.csv"});
  side["source"] = source;
  side["rows"] = data.size();
  side["x_dim"] = data.x_dim();
  side["y_dim"] = data.y_dim();
  side["standardization"] = standardization_to_json(stats);
  side["data_digest"] = digest(json(csv));
  fs::create_directories(o.out);
  write_file_atomic(o.out / "data.csv", csv);
  detail::write_json(o.out / "data.json", side);
  return data;
}

// ---------------------------------------------------------------------------
// train

/// {"data", "generator", "critic", "train", "standardize", "seed"}. Writes
/// checkpoint.json, train_report.csv and the train.json sidecar.
inline json cmd_train(const Options& o) {
  const json& c = o.config;
  require_known_keys(c, {"data", "generator", "critic", "train", "standardize", "seed"}, "train config");
  if (!c.contains("data")) throw ConfigError("train config needs 'data'");
  const PairedDataset data = read_dataset_csv(detail::resolve(o, c.at("data").get<std::string>()));
  wgan::TrainConfig tc = wgan::train_config_from_json(c.value("train", json::object()));
  tc.seed = detail::effective_seed(o);
  const auto n = static_cast<std::size_t>(data.size());
  const auto d = static_cast<std::size_t>(data.x_dim());
  const auto q = static_cast<std::size_t>(data.y_dim());
  const auto gspec = detail::network_from_config(c.value("generator", detail::default_generator_shape()),
                                                 static_cast<std::size_t>(tc.noise_dim) + d, q, n, true);
  const auto cspec = detail::network_from_config(c.value("critic", detail::default_critic_shape()), d + q, 1, n, false);
  const auto fit = fit_sampler(data, gspec, cspec, tc, get_or(c, "standardize", true));
  const json ck = sampler_checkpoint(fit);
  fs::create_directories(o.out);
  write_file_atomic(o.out / "checkpoint.json", ck.dump() + "\n");
  write_file_atomic(o.out / "train_report.csv", fit.report.to_csv());
  json side = detail::sidecar("train", o, {"checkpoint.json", "train_report.csv"});
  side["train_config"] = wgan::train_config_to_json(tc);
  side["generator"] = nn::spec_to_json(gspec);
  side["critic"] = nn::spec_to_json(cspec);
  detail::write_json(o.out / "train.json", side);
  return ck;
}

// ---------------------------------------------------------------------------
// estimate

inline sampler::ConditionalSampler load_sampler(const Options& o, const json& c) {
  if (!c.contains("checkpoint")) throw ConfigError("config needs 'checkpoint'");
  const fs::path path = detail::resolve(o, c.at("checkpoint").get<std::string>());
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  auto s = sampler::ConditionalSampler::from_checkpoint(nn::load_checkpoint(read_json_file(path)));
  if (o.seed || c.contains("seed"))
    return {s.generator(), s.noise_dim(), s.standardization(), detail::effective_seed(o)};
  return s;
}

/// {"checkpoint", "queries", "draws", "levels", "nominal", "seed"}; a null
/// nominal disables intervals. Writes estimates.csv and estimates.json.
inline sampler::EstimateReport cmd_estimate(const Options& o) {
  const json& c = o.config;
  require_known_keys(c, {"checkpoint", "queries", "draws", "levels", "nominal", "seed"}, "estimate config");
  const auto s = load_sampler(o, c);
  if (!c.contains("queries")) throw ConfigError("estimate config needs 'queries'");
  const PairedDataset q = read_dataset_csv(detail::resolve(o, c.at("queries").get<std::string>()), false);
  if (q.x_dim() != s.x_dim())
    throw ConfigError("queries have " + std::to_string(q.x_dim()) + " predictors, checkpoint expects " +
                      std::to_string(s.x_dim()));
  sampler::EstimateRequest req;
  req.draws = get_or(c, "draws", sampler::kDefaultDraws);
  req.levels = get_or(c, "levels", std::vector<double>{});
  if (c.contains("nominal")) {
    req.nominal = c.at("nominal").is_null() ? std::nullopt : std::optional<double>(c.at("nominal").get<double>());
  }
  if (req.draws < 1) throw ConfigError("draws must be >= 1");
  for (double p : req.levels)
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("quantile levels must lie in (0, 1)");
  if (req.nominal && !(*req.nominal > 0.0 && *req.nominal < 1.0)) throw ConfigError("nominal must lie in (0, 1)");
  const auto rep = sampler::estimate(s, q.x, req);
  fs::create_directories(o.out);
  write_file_atomic(o.out / "estimates.csv", rep.to_csv());
  json side = detail::sidecar("estimate", o, {"estimates.csv"});
  side["sampler_seed"] = s.base_seed();
  detail::write_json(o.out / "estimates.json", side);
  return rep;
}

// ---------------------------------------------------------------------------
// eval

/// {"checkpoint", "model", "d", "sigma", "test_size", "draws", "nominal",
/// "metrics", "test_data", "seed"}. Metrics: mse_mean, mse_sd (regression
/// models), coverage (model draws or test_data), w1 (two_moon, per class).
/// Writes eval.json.
inline json cmd_eval(const Options& o) {
  const json& c = o.config;
  require_known_keys(c,
                     {"checkpoint", "model", "d", "sigma", "test_size", "draws", "nominal", "metrics", "test_data",
                      "seed"},
                     "eval config");
  const auto s = load_sampler(o, c);
  const std::uint64_t seed = detail::effective_seed(o);
  const auto K = get_or<Eigen::Index>(c, "test_size", 200);
  const auto J = get_or<Eigen::Index>(c, "draws", 2000);
  const double nominal = get_or(c, "nominal", 0.9);
  auto wanted = detail::string_list(c, "metrics");
  if (K < 1 || J < 2) throw ConfigError("eval needs test_size >= 1 and draws >= 2");
  if (!(nominal > 0.0 && nominal < 1.0)) throw ConfigError("nominal must lie in (0, 1)");

  std::optional<synth::SynthModel> model;
  if (c.contains("model")) {
    const auto kind = synth::model_from_string(c.at("model").get<std::string>());
    model = synth::SynthModel{kind, get_or(c, "sigma", 0.1), kind == synth::ModelKind::two_moon ? 2 : get_or<Eigen::Index>(c, "d", s.x_dim())};
    model->validate();
    if (model->d != s.x_dim()) throw ConfigError("model dimension does not match the checkpoint");
  }
  if (wanted.empty()) {
    if (model && model->kind == synth::ModelKind::two_moon) wanted = {"w1"};
    else if (model) wanted = {"mse_mean", "mse_sd", "coverage"};
    else wanted = {"coverage"};
  }

  json records = json::array();
  Rng rng = make_rng(seed, "eval");
  for (const auto& m : wanted) {
    if (m == "mse_mean" || m == "mse_sd") {
      if (!model || model->kind == synth::ModelKind::two_moon) throw ConfigError(m + " needs a regression model (m1, m2, m3)");
      Rng xr = make_rng(seed, "eval.test_x");
      const Matrix x = synth::sample_predictors(K, model->d, xr);
      Matrix est(K, 1);
      Matrix truth(K, 1);
      for (Eigen::Index k = 0; k < K; ++k) {
        const Matrix draws = s.sample(x.row(k), J, static_cast<std::uint64_t>(k));
        const auto t = synth::true_conditional_stats(model->kind, x.row(k));
        est(k, 0) = m == "mse_mean" ? sampler::sample_mean(draws)(0) : sampler::sample_sd(draws)(0);
        truth(k, 0) = m == "mse_mean" ? t.mean : t.sd;
      }
      records.push_back(metrics::to_json({m, metrics::mse(est, truth), K, seed}));
    } else if (m == "coverage") {
      PairedDataset held;
      if (c.contains("test_data")) {
        held = read_dataset_csv(detail::resolve(o, c.at("test_data").get<std::string>()));
        if (held.x_dim() != s.x_dim() || held.y_dim() != s.y_dim()) throw ConfigError("test_data dimensions do not match the checkpoint");
      } else if (model) {
        held = synth::generate(*model, model->kind == synth::ModelKind::two_moon ? K + (K % 2) : K, derive_seed(seed, "eval.held_out"));
      } else {
        throw ConfigError("coverage needs 'model' or 'test_data'");
      }
      Matrix lo(held.size(), held.y_dim());
      Matrix hi(held.size(), held.y_dim());
      for (Eigen::Index i = 0; i < held.size(); ++i) {
        const auto iv = sampler::prediction_interval(s, held.x.row(i), J, nominal, static_cast<std::uint64_t>(i));
        lo.row(i) = iv.lo;
        hi.row(i) = iv.hi;
      }
      records.push_back(metrics::to_json({"coverage", metrics::interval_coverage(lo, hi, held.y), held.size(), seed}));
    } else if (m == "w1") {
      if (!model || model->kind != synth::ModelKind::two_moon) throw ConfigError("w1 is defined for the two_moon model");
      for (int cls = 1; cls <= 2; ++cls) {
        const Matrix truth = synth::sample_two_moon(cls, K, model->sigma, rng);
        const Matrix fake = s.sample(synth::two_moon_onehot(cls), K, static_cast<std::uint64_t>(cls));
        records.push_back(metrics::to_json({"w1_class_" + std::to_string(cls), metrics::exact_w1(fake, truth), K, seed}));
      }
    } else {
      throw ConfigError("unknown metric '" + m + "'");
    }
  }
  json out = {{"config_digest", digest(detail::resolved_config(o))}, {"seed", seed}, {"records", records}};
  fs::create_directories(o.out);
  detail::write_json(o.out / "eval.json", out);
  return out;
}

// ---------------------------------------------------------------------------
// bench

/// Bench config (see bench_config_from_json). Writes bench.json, bench.csv
/// and bench_table.txt.
inline bench::BenchReport cmd_bench(const Options& o) {
  json c = o.config;
  c.erase("seed");
  bench::BenchConfig cfg = bench::bench_config_from_json(c);
  cfg.seed = detail::effective_seed(o);
  if (o.paper_scale) cfg.apply_paper_scale();
  const auto rep = bench::run_bench(cfg);
  fs::create_directories(o.out);
  detail::write_json(o.out / "bench.json", rep.to_json());
  write_file_atomic(o.out / "bench.csv", rep.to_csv());
  write_file_atomic(o.out / "bench_table.txt", rep.to_table());
  return rep;
}

// ---------------------------------------------------------------------------

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"gen-data", "train", "estimate", "eval", "bench"};
  return names;
}

/// Runs one command and maps failures to exit codes: configuration and
/// validation problems give 2, everything else 1. Diagnostics go to `err`.
inline int run_command(const std::string& command, const Options& o, std::ostream& err) {
  try {
    if (command == "gen-data") cmd_gen_data(o);
    else if (command == "train") cmd_train(o);
    else if (command == "estimate") cmd_estimate(o);
    else if (command == "eval") cmd_eval(o);
    else if (command == "bench") cmd_bench(o);
    else throw ConfigError("unknown command '" + command + "'");
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "wgcs " << command << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const LoadError& e) {
    err << "wgcs " << command << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const ContractError& e) {
    err << "wgcs " << command << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const json::exception& e) {
    err << "wgcs " << command << ": invalid config value: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TrainingDiverged& e) {
    err << "wgcs " << command << ": " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "wgcs " << command << ": " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace wgcs::cli

#endif  // WGCS_CLI_HPP
