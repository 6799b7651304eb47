// Command-line front end: MonoScore scoring, SAE training, evaluation, data
// generation, and the pairwise-vs-linear scaling benchmark.
//
// Exit codes: 0 success, 2 usage/config/I-O error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "monosema/bench.hpp"
#include "monosema/data_io.hpp"
#include "monosema/errors.hpp"
#include "monosema/metrics.hpp"
#include "monosema/monoscore.hpp"
#include "monosema/sae.hpp"

namespace {

using namespace monosema;

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("MONOSEMA_THREADS")) {
    const int parsed = std::atoi(env);
    if (parsed > 0) return parsed;
  }
  return 1;
}

std::string sibling_with_extension(const std::string& path, const char* ext) {
  std::filesystem::path p(path);
  p.replace_extension(ext);
  return p.string();
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct ScoreArgs {
  std::string features, activations, algo, out;
  double epsilon_den = 1e-12;
  std::size_t pair_block = 256;
  int threads = 0;
};

void run_score(const ScoreArgs& args) {
  if (args.algo != "pairwise" && args.algo != "linear") {
    throw ConfigError("--algo must be pairwise or linear");
  }
  const int threads = resolve_threads(args.threads);
  const FeatureMatrix features = read_features(args.features);
  const ActivationMatrix activations(read_activations_raw(args.activations), false);
  MonoScoreConfig cfg;
  cfg.epsilon_den = args.epsilon_den;
  cfg.pair_block = args.pair_block;
  const LatentScores scores =
      args.algo == "pairwise" ? monoscore_pairwise(features, activations, cfg, threads)
                              : monoscore_linear(features, activations, cfg, threads);
  write_scores_csv(args.out, scores);
  ScoreMeta meta{args.algo,        features.n_samples(), activations.n_latents(),
                 features.dim(),   cfg.epsilon_den,      threads};
  write_scores_json(sibling_with_extension(args.out, ".json"), scores, meta);
}

struct TrainArgs {
  std::string features, arch = "topk", out_dir;
  TrainConfig cfg;
};

void write_train_outputs(const std::filesystem::path& dir, const TrainConfig& cfg,
                         const TrainResult& result, std::size_t n_samples,
                         std::size_t dim) {
  std::filesystem::create_directories(dir);
  save_checkpoint((dir / "checkpoint.saem").string(), result.model,
                  train_config_json(cfg));

  std::ofstream losses(dir / "losses.csv");
  if (!losses) throw IoError("cannot write losses.csv");
  losses << "epoch,recon,sparsity,mono,wall_seconds\n";
  for (std::size_t e = 0; e < result.report.epochs.size(); ++e) {
    const auto& s = result.report.epochs[e];
    losses << e << ',' << s.recon << ',' << s.sparsity << ',' << s.mono << ','
           << s.wall_seconds << '\n';
  }

  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& s : result.report.epochs) {
    epochs.push_back({{"recon", s.recon},
                      {"sparsity", s.sparsity},
                      {"mono", s.mono},
                      {"wall_seconds", s.wall_seconds}});
  }
  nlohmann::json j{
      {"config", nlohmann::json::parse(train_config_json(cfg))},
      {"n_samples", n_samples},
      {"dim", dim},
      {"epochs", epochs},
      {"final_r2", result.report.final_r2},
      {"final_mean_monoscore", result.report.final_mean_monoscore},
      {"dead_latents", result.report.dead_latents},
      {"aborted", result.report.aborted},
      {"abort_reason", result.report.abort_reason},
  };
  std::ofstream report(dir / "train_report.json");
  if (!report) throw IoError("cannot write train_report.json");
  report << j.dump(2) << '\n';
}

int run_train(const TrainArgs& args) {
  TrainConfig cfg = args.cfg;
  cfg.arch = parse_arch(args.arch);
  cfg.validate();
  const FeatureMatrix features = read_features(args.features);
  const TrainResult result = train(features, cfg);
  write_train_outputs(args.out_dir, cfg, result, features.n_samples(), features.dim());
  if (result.report.aborted) {
    std::cerr << "error: training aborted: " << result.report.abort_reason << '\n';
    return 3;
  }
  return 0;
}

struct EvalArgs {
  std::string checkpoint, features, labels, metrics = "r2,monoscore,curve", out_dir;
  std::size_t batch_size = 1024;
  double epsilon_den = 1e-12;
  int threads = 0;
};

void run_eval(const EvalArgs& args) {
  bool want_r2 = false, want_monoscore = false, want_purity = false, want_curve = false;
  for (const auto& m : split_csv_list(args.metrics)) {
    if (m == "r2") {
      want_r2 = true;
    } else if (m == "monoscore") {
      want_monoscore = true;
    } else if (m == "purity") {
      want_purity = true;
    } else if (m == "curve") {
      want_curve = true;
    } else {
      throw ConfigError("unknown metric '" + m + "' (expected r2,monoscore,purity,curve)");
    }
  }
  if (want_purity && args.labels.empty()) {
    throw ConfigError("purity requires --labels");
  }

  const Checkpoint cp = load_checkpoint(args.checkpoint);
  const FeatureMatrix features = read_features(args.features);
  const std::size_t n = features.n_samples();
  std::vector<std::int64_t> labels;
  if (want_purity) {
    labels = read_labels(args.labels);
    if (labels.size() != n) {
      throw ConfigError("label count does not match feature rows");
    }
  }

  // One batched pass produces activations for every requested metric.
  Matrix activations(cp.model.n_latents, n, 0.0);
  R2Accumulator r2(features.dim());
  const std::size_t batch = std::max<std::size_t>(args.batch_size, 1);
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t count = std::min(batch, n - start);
    Matrix x(count, features.dim());
    for (std::size_t i = 0; i < count; ++i) {
      auto src = features.row(start + i);
      std::copy(src.begin(), src.end(), x.row(i).begin());
    }
    const Matrix a = encode(cp.model, x);
    if (want_r2) r2.update(x, decode(cp.model, a));
    for (std::size_t k = 0; k < cp.model.n_latents; ++k) {
      for (std::size_t i = 0; i < count; ++i) activations(k, start + i) = a(k, i);
    }
  }

  std::filesystem::create_directories(args.out_dir);
  const std::filesystem::path dir(args.out_dir);
  nlohmann::json report{{"checkpoint", args.checkpoint},
                        {"features", args.features},
                        {"n_samples", n},
                        {"model_config", nlohmann::json::parse(
                                             cp.config_json.empty() ? "{}" : cp.config_json)}};
  std::vector<std::pair<std::string, double>> summary;

  if (want_r2) {
    const R2Result r = r2.finalize();
    for (std::size_t j : r.excluded) {
      std::cerr << "warning: dimension " << j
                << " has zero target variance; excluded from mean R^2\n";
    }
    report["r2"] = {{"mean", r.mean},
                    {"per_dim", r.per_dim},
                    {"excluded_dims", r.excluded}};
    summary.emplace_back("r2_mean", r.mean);
  }

  LatentScores scores;
  if (want_monoscore || want_curve) {
    MonoScoreConfig cfg;
    cfg.epsilon_den = args.epsilon_den;
    scores = monoscore_linear(features, ActivationMatrix(activations, false), cfg,
                              resolve_threads(args.threads));
  }
  if (want_monoscore) {
    write_scores_csv((dir / "monoscore.csv").string(), scores);
    std::size_t active = 0;
    for (auto f : scores.active) active += f;
    report["monoscore"] = {{"mean_active", mean_active_score(scores)},
                           {"active_latents", active},
                           {"scores", scores.scores}};
    summary.emplace_back("monoscore_mean_active", mean_active_score(scores));
    summary.emplace_back("monoscore_active_latents", static_cast<double>(active));
  }
  if (want_curve) {
    write_curve_csv((dir / "monoscore_curve.csv").string(), monoscore_curve(scores));
  }
  if (want_purity) {
    const PurityReport purity = class_purity(ActivationMatrix(activations, false), labels);
    write_purity_csv((dir / "purity.csv").string(), purity);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : purity.rows) {
      rows.push_back({{"latent", r.latent},
                      {"dominant_class", r.dominant_class},
                      {"n_active", r.n_active},
                      {"binary", r.binary},
                      {"weighted", r.weighted}});
    }
    report["purity"] = {{"mean_binary", purity.mean_binary},
                        {"mean_weighted", purity.mean_weighted},
                        {"active_latents", purity.active_latents},
                        {"per_latent", rows}};
    summary.emplace_back("purity_binary_mean", purity.mean_binary);
    summary.emplace_back("purity_weighted_mean", purity.mean_weighted);
  }

  std::ofstream sum_csv(dir / "eval_summary.csv");
  if (!sum_csv) throw IoError("cannot write eval_summary.csv");
  sum_csv << "metric,value\n";
  for (const auto& [name, value] : summary) sum_csv << name << ',' << value << '\n';

  std::ofstream rep(dir / "eval_report.json");
  if (!rep) throw IoError("cannot write eval_report.json");
  rep << report.dump(2) << '\n';
}

struct BenchArgs {
  std::string sizes, out;
  BenchConfig cfg;
  int threads_flag = 0;
};

void run_bench_cmd(const BenchArgs& args) {
  BenchConfig cfg = args.cfg;
  for (const auto& tok : split_csv_list(args.sizes)) {
    std::size_t n = 0;
    try {
      n = std::stoull(tok);
    } catch (const std::exception&) {
      throw ConfigError("unparseable size '" + tok + "'");
    }
    if (n < 2 || (n & (n - 1)) != 0) {
      throw ConfigError("bench sizes must be powers of two >= 2, got " + tok);
    }
    cfg.sizes.push_back(n);
  }
  cfg.threads = resolve_threads(args.threads_flag);
  const BenchResult result = run_bench(cfg);
  write_bench_csv(args.out, result);
  write_bench_json(sibling_with_extension(args.out, ".json"), result);
  write_bench_svg(sibling_with_extension(args.out, ".svg"), result);
  for (const auto& [name, slope] : result.slopes) {
    std::cout << name << " log-log slope: " << slope << '\n';
  }
}

struct GenArgs {
  SyntheticSpec spec;
  std::string out_features, out_labels, out_indicator;
};

void run_gen(const GenArgs& args) {
  const SyntheticData data = generate_synthetic(args.spec);
  write_features(args.out_features, data.features.data());
  if (!args.out_labels.empty()) write_labels(args.out_labels, data.labels);
  if (!args.out_indicator.empty()) {
    write_activations(args.out_indicator, indicator_activations(args.spec, data.labels));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MonoScore scoring, SAE training, and scaling benchmarks"};
  app.require_subcommand(1);

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "score activations against embeddings");
  score_cmd->add_option("--features", score.features, "feature file (MFEA)")->required();
  score_cmd->add_option("--activations", score.activations, "activation file (MACT)")
      ->required();
  score_cmd->add_option("--algo", score.algo, "pairwise|linear")->required();
  score_cmd->add_option("--out", score.out, "output CSV path (JSON written alongside)")
      ->required();
  score_cmd->add_option("--epsilon-den", score.epsilon_den, "inactive threshold");
  score_cmd->add_option("--pair-block", score.pair_block, "pairwise inner block size");
  score_cmd->add_option("--threads", score.threads, "worker count (0 = env or 1)");

  TrainArgs train_args;
  train_args.cfg.n_latents = 128;
  train_args.cfg.k_active = 4;
  train_args.cfg.epochs = 10;
  train_args.cfg.batch_size = 256;
  auto* train_cmd = app.add_subcommand("train", "train a sparse autoencoder");
  train_cmd->add_option("--features", train_args.features, "feature file")->required();
  train_cmd->add_option("--arch", train_args.arch, "topk|batchtopk|relu|jumprelu");
  train_cmd->add_option("--latents", train_args.cfg.n_latents, "dictionary size");
  train_cmd->add_option("--k", train_args.cfg.k_active, "active latents (topk family)");
  train_cmd->add_option("--l1", train_args.cfg.l1_coeff, "vanilla L1 coefficient");
  train_cmd->add_option("--jump-coeff", train_args.cfg.jump_sparsity_coeff,
                        "jumprelu sparsity coefficient");
  train_cmd->add_option("--bandwidth", train_args.cfg.bandwidth,
                        "jumprelu pseudo-derivative width");
  train_cmd->add_option("--lambda-mono", train_args.cfg.lambda_mono,
                        "monosemanticity loss weight");
  train_cmd->add_option("--lr", train_args.cfg.lr, "Adam learning rate");
  train_cmd->add_option("--adam-eps", train_args.cfg.adam_eps, "Adam epsilon");
  train_cmd->add_option("--clip-norm", train_args.cfg.clip_norm,
                        "global gradient norm clip (0 disables)");
  train_cmd->add_option("--epochs", train_args.cfg.epochs, "training epochs");
  train_cmd->add_option("--batch-size", train_args.cfg.batch_size, "batch size");
  train_cmd->add_option("--seed", train_args.cfg.seed, "RNG seed");
  train_cmd->add_option("--dead-threshold", train_args.cfg.dead_threshold_examples,
                        "dead-latent threshold in examples (0 = 10x batch)");
  train_cmd->add_flag("--tied", train_args.cfg.tied, "tie decoder to encoder transpose");
  train_cmd->add_option("--out-dir", train_args.out_dir, "output directory")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--features", eval.features, "feature file")->required();
  eval_cmd->add_option("--labels", eval.labels, "label file (purity)");
  eval_cmd->add_option("--metrics", eval.metrics, "subset of r2,monoscore,purity,curve");
  eval_cmd->add_option("--batch-size", eval.batch_size, "encode batch size");
  eval_cmd->add_option("--epsilon-den", eval.epsilon_den, "inactive threshold");
  eval_cmd->add_option("--threads", eval.threads, "worker count (0 = env or 1)");
  eval_cmd->add_option("--out-dir", eval.out_dir, "output directory")->required();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "pairwise vs linear scaling benchmark");
  bench_cmd->add_option("--sizes", bench.sizes, "comma-separated powers of two")
      ->required();
  bench_cmd->add_option("--dim", bench.cfg.dim, "embedding dim");
  bench_cmd->add_option("--latents", bench.cfg.n_latents, "latent count");
  bench_cmd->add_option("--reps", bench.cfg.reps, "timed repetitions (median)");
  bench_cmd->add_option("--pairwise-cutoff", bench.cfg.pairwise_cutoff,
                        "skip pairwise above this N");
  bench_cmd->add_option("--threads", bench.threads_flag,
                        "worker count for the sharded-linear series");
  bench_cmd->add_option("--seed", bench.cfg.seed, "RNG seed");
  bench_cmd->add_option("--epsilon-den", bench.cfg.score_cfg.epsilon_den,
                        "inactive threshold");
  bench_cmd->add_option("--pair-block", bench.cfg.score_cfg.pair_block,
                        "pairwise inner block size");
  bench_cmd->add_option("--out", bench.out, "output CSV path (JSON/SVG alongside)")
      ->required();

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate synthetic clustered features");
  gen_cmd->add_option("--clusters", gen.spec.n_clusters, "cluster count");
  gen_cmd->add_option("--per-cluster", gen.spec.samples_per_cluster, "samples per cluster");
  gen_cmd->add_option("--dim", gen.spec.dim, "embedding dim");
  gen_cmd->add_option("--noise", gen.spec.within_cluster_noise,
                      "per-coordinate Gaussian sigma");
  gen_cmd->add_option("--seed", gen.spec.seed, "RNG seed");
  gen_cmd->add_option("--out-features", gen.out_features, "feature file path")->required();
  gen_cmd->add_option("--out-labels", gen.out_labels, "label file path");
  gen_cmd->add_option("--out-indicator", gen.out_indicator,
                      "ground-truth indicator activation file path");

  int train_rc = 0;
  score_cmd->callback([&] { run_score(score); });
  train_cmd->callback([&] { train_rc = run_train(train_args); });
  eval_cmd->callback([&] { run_eval(eval); });
  bench_cmd->callback([&] { run_bench_cmd(bench); });
  gen_cmd->callback([&] { run_gen(gen); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const MonosemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return train_rc;
}
