// Command-line surface: single-run training, evaluation, the fusion/skip
// experiment matrix, synthetic data generation and gradient checking.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "mvf/config.hpp"
#include "mvf/gradcheck.hpp"
#include "mvf/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;    // usage / config errors
constexpr int kExitRuntime = 2;  // runtime failures

mvf::ExperimentConfig load_base_config(const std::string& config_path) {
  if (config_path.empty()) return mvf::ExperimentConfig::defaults();
  return mvf::load_config_file(config_path);
}

void apply_fusion_overrides(mvf::ExperimentConfig& cfg, const std::string& type,
                            const std::string& agg, const std::string& depth,
                            int skip_examined, int skip_auxiliary) {
  if (!type.empty()) cfg.fusion.fusion_type = mvf::fusion_type_from_string(type);
  if (!agg.empty()) cfg.fusion.aggregation = mvf::aggregation_from_string(agg);
  if (!depth.empty()) cfg.fusion.depth = mvf::depth_from_string(depth);
  if (skip_examined >= 0) cfg.fusion.skip.examined = skip_examined != 0;
  if (skip_auxiliary >= 0) cfg.fusion.skip.auxiliary = skip_auxiliary != 0;
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(csv);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_gradcheck(const mvf::GradCheckReport& report) {
  for (const auto& g : report.groups)
    std::printf("  %-28s max rel error %.3e  (%ld values)\n", g.name.c_str(),
                g.max_rel_error, g.checked);
  std::printf("tolerance %.1e -> %s\n", report.tolerance,
              report.passed ? "PASS" : "FAIL");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-view fusion network experiments"};
  app.require_subcommand(1);

  std::string config_path, output_dir, manifest, fusion_type, aggregation, depth;
  int skip_examined = -1, skip_auxiliary = -1;
  bool force = false;
  uint64_t seed_flag = 0;
  bool seed_set = false;

  // --- defaults ---
  auto* cmd_defaults = app.add_subcommand("defaults", "Print the default config JSON");
  std::string defaults_out;
  cmd_defaults->add_option("-o,--out", defaults_out, "Write to a file instead of stdout");

  // --- train ---
  auto* cmd_train = app.add_subcommand("train", "Train one experiment");
  cmd_train->add_option("-c,--config", config_path, "Experiment config JSON");
  cmd_train->add_option("-o,--output", output_dir, "Output directory override");
  cmd_train->add_option("--fusion-type", fusion_type, "PreF|EF|MF|LF|PostF");
  cmd_train->add_option("--aggregation", aggregation, "average|concatenate");
  cmd_train->add_option("--depth", depth, "18|34");
  cmd_train->add_option("--skip-examined", skip_examined, "0|1");
  cmd_train->add_option("--skip-auxiliary", skip_auxiliary, "0|1");
  auto* seed_opt = cmd_train->add_option("--seed", seed_flag, "Training seed override");
  cmd_train->add_flag("--force", force, "Overwrite an existing output directory");

  // --- eval ---
  auto* cmd_eval = app.add_subcommand("eval", "Evaluate a trained run directory");
  std::string run_dir;
  cmd_eval->add_option("run_dir", run_dir, "Run directory with config.lock.json")
      ->required();
  cmd_eval->add_option("--manifest", manifest, "Evaluate on a different manifest");

  // --- matrix ---
  auto* cmd_matrix = app.add_subcommand("matrix", "Run the experiment matrix");
  std::string types_csv, aggs_csv, skips_csv, depths_csv, seeds_csv;
  int workers = 1;
  cmd_matrix->add_option("-c,--config", config_path, "Base config JSON");
  cmd_matrix->add_option("-o,--output", output_dir, "Matrix output directory");
  cmd_matrix->add_option("--fusion-types", types_csv,
                         "Comma list, e.g. PreF,EF,MF,LF,PostF");
  cmd_matrix->add_option("--aggregations", aggs_csv, "Comma list, e.g. average,concatenate");
  cmd_matrix->add_option("--skips", skips_csv,
                         "Comma list of none|examined|both");
  cmd_matrix->add_option("--depths", depths_csv, "Comma list, e.g. 18,34");
  cmd_matrix->add_option("--seeds", seeds_csv, "Comma list of replicate seeds");
  cmd_matrix->add_option("--workers", workers, "Parallel runs")->check(CLI::Range(1, 64));
  cmd_matrix->add_flag("--force", force, "Overwrite an existing output directory");

  // --- gradcheck ---
  auto* cmd_gradcheck = app.add_subcommand("gradcheck", "Finite-difference checks");
  std::string scope = "end_to_end_toy";
  uint64_t gc_seed = 11;
  cmd_gradcheck->add_option("--scope", scope, "fusion|loss|end_to_end_toy")
      ->check(CLI::IsMember({"fusion", "loss", "end_to_end_toy"}));
  cmd_gradcheck->add_option("--seed", gc_seed, "RNG seed");

  // --- synth ---
  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  mvf::SynthSpec synth;
  std::string synth_out;
  cmd_synth->add_option("-o,--out", synth_out, "Output directory")->required();
  cmd_synth->add_option("--n-cases", synth.n_cases, "Number of cases");
  cmd_synth->add_option("--image-size", synth.image_size, "Square edge in pixels");
  cmd_synth->add_option("--positive-rate", synth.positive_rate, "Class balance in (0,1)");
  cmd_synth->add_option("--scramble-seed", synth.view_scramble_seed,
                        "Per-view pixel scrambling seed");
  cmd_synth->add_option("--noise", synth.noise_level, "Gaussian noise level");
  cmd_synth->add_flag("--force", force, "Overwrite an existing output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_defaults) {
      const std::string text = mvf::to_json(mvf::ExperimentConfig::defaults()).dump(2) + "\n";
      if (defaults_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(defaults_out);
        out << text;
      }
      return kExitOk;
    }

    if (*cmd_train) {
      mvf::ExperimentConfig cfg = load_base_config(config_path);
      apply_fusion_overrides(cfg, fusion_type, aggregation, depth, skip_examined,
                             skip_auxiliary);
      if (!output_dir.empty()) cfg.output_dir = output_dir;
      seed_set = seed_opt->count() > 0;
      const uint64_t seed = seed_set ? seed_flag : cfg.train.seed;
      cfg.validate();
      const mvf::RunResult r = mvf::run_train(cfg, seed, cfg.output_dir, force);
      std::printf("run complete: best epoch %d, macro-F1 %.4f, AUC %s, params %lld\n",
                  r.best_epoch, r.best.macro_f1,
                  r.best.auc_roc ? std::to_string(*r.best.auc_roc).c_str() : "n/a",
                  r.param_count);
      std::printf("artifacts in %s\n", r.run_dir.c_str());
      return kExitOk;
    }

    if (*cmd_eval) {
      const std::optional<std::string> override_manifest =
          manifest.empty() ? std::nullopt : std::optional<std::string>(manifest);
      const mvf::MetricsReport report = mvf::run_eval(run_dir, override_manifest);
      std::cout << mvf::report_to_json(report).dump(2) << "\n";
      return kExitOk;
    }

    if (*cmd_matrix) {
      mvf::ExperimentConfig base = load_base_config(config_path);
      if (!output_dir.empty()) base.output_dir = output_dir;
      mvf::MatrixAxes axes;
      for (const auto& t : split_list(types_csv))
        axes.fusion_types.push_back(mvf::fusion_type_from_string(t));
      for (const auto& a : split_list(aggs_csv))
        axes.aggregations.push_back(mvf::aggregation_from_string(a));
      for (const auto& s : split_list(skips_csv)) {
        if (s == "none") axes.skips.push_back({false, false});
        else if (s == "examined") axes.skips.push_back({true, false});
        else if (s == "both") axes.skips.push_back({true, true});
        else throw mvf::ConfigError("--skips: expected none|examined|both, got '" + s + "'");
      }
      for (const auto& d : split_list(depths_csv))
        axes.depths.push_back(mvf::depth_from_string(d));
      if (!seeds_csv.empty()) {
        base.seeds.clear();
        for (const auto& s : split_list(seeds_csv)) base.seeds.push_back(std::stoull(s));
      }
      base.validate();
      const auto rows = mvf::run_matrix(base, axes, workers, force);
      std::cout << mvf::render_summary_table(rows);
      int failed = 0;
      for (const auto& r : rows)
        if (r.failed) {
          ++failed;
          std::fprintf(stderr, "failed: %s (%s)\n", r.run_dir.c_str(), r.error.c_str());
        }
      std::printf("results: %s/results.csv (%zu runs, %d failed)\n",
                  base.output_dir.c_str(), rows.size(), failed);
      return failed == 0 ? kExitOk : kExitRuntime;
    }

    if (*cmd_gradcheck) {
      mvf::GradCheckReport report;
      if (scope == "loss") report = mvf::gradcheck_loss(gc_seed);
      else if (scope == "fusion") report = mvf::gradcheck_fusion(gc_seed);
      else report = mvf::gradcheck_end_to_end_toy(gc_seed);
      std::printf("gradcheck scope=%s\n", scope.c_str());
      print_gradcheck(report);
      return report.passed ? kExitOk : kExitRuntime;
    }

    if (*cmd_synth) {
      mvf::run_synth(synth, synth_out, force);
      std::printf("wrote %d cases (%d images) to %s\n", synth.n_cases,
                  2 * synth.n_cases, synth_out.c_str());
      return kExitOk;
    }
  } catch (const mvf::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitUsage;
  } catch (const mvf::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
