#include "mvf/runner.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "mvf/checkpoint.hpp"

namespace fs = std::filesystem;

namespace mvf {

namespace {

void ensure_fresh_dir(const std::string& dir, bool force) {
  const fs::path p(dir);
  if (fs::exists(p)) {
    if (!force)
      throw ConfigError(dir + " already exists; pass --force to overwrite");
    fs::remove_all(p);
  }
  fs::create_directories(p);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw DataError(path + ": cannot write");
  out << text;
}

std::string csv_header() {
  return "fusion_type,aggregation,skip_examined,skip_auxiliary,depth,seed,"
         "macro_f1,auc_roc,params,wall_time_s,status\n";
}

std::string csv_row(const RunResult& r) {
  std::ostringstream os;
  os << to_string(r.fusion.fusion_type) << "," << to_string(r.fusion.aggregation)
     << "," << (r.fusion.skip.examined ? 1 : 0) << ","
     << (r.fusion.skip.auxiliary ? 1 : 0) << "," << to_string(r.fusion.depth)
     << "," << r.seed << ",";
  if (r.failed) {
    os << ",,," << r.wall_time_s << ",failed\n";
    return os.str();
  }
  os.precision(17);
  os << r.best.macro_f1 << ",";
  if (r.best.auc_roc) os << *r.best.auc_roc;
  os << "," << r.param_count << "," << r.wall_time_s << ",ok\n";
  return os.str();
}

}  // namespace

Json report_to_json(const MetricsReport& r) {
  Json j;
  j["macro_f1"] = r.macro_f1;
  if (r.auc_roc) j["auc_roc"] = *r.auc_roc;
  else j["auc_roc"] = nullptr;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  j["confusion"] = r.confusion;
  j["n_cases"] = r.n_cases;
  return j;
}

std::string history_to_jsonl(const TrainingHistory& history) {
  // Wall time stays out of this file so reruns are byte-identical.
  std::string out;
  for (const auto& rec : history.records) {
    Json j;
    j["epoch"] = rec.epoch;
    j["lr"] = rec.lr;
    j["train_loss"] = rec.train_loss;
    j["macro_f1"] = rec.eval.macro_f1;
    if (rec.eval.auc_roc) j["auc_roc"] = *rec.eval.auc_roc;
    else j["auc_roc"] = nullptr;
    out += j.dump();
    out += "\n";
  }
  return out;
}

PreparedDataset load_prepared_dataset(const DataConfig& data, int image_size) {
  data.validate();
  std::vector<IpsilateralCase> cases;
  if (data.manifest) {
    cases = load_manifest(*data.manifest, image_size, data.examined_view);
  } else {
    cases = generate_synthetic(*data.synthetic);
    if (data.examined_view == View::MLO) swap_roles(cases);
  }

  std::vector<IpsilateralCase> train, test;
  const bool preassigned =
      !cases.empty() && cases.front().split != Split::Unassigned;
  if (preassigned) {
    for (auto& c : cases)
      (c.split == Split::Train ? train : test).push_back(std::move(c));
    if (train.empty() || test.empty())
      throw DataError("manifest split column produced an empty partition");
  } else {
    auto [tr, te] = stratified_split(cases, data.train_fraction, data.split_seed);
    train = std::move(tr);
    test = std::move(te);
  }
  return prepare_dataset(train, test, image_size, data.zero_auxiliary);
}

RunResult run_train(const ExperimentConfig& cfg, uint64_t seed,
                    const std::string& run_dir, bool force) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  ensure_fresh_dir(run_dir, force);

  ExperimentConfig resolved = cfg;
  resolved.train.seed = seed;
  resolved.seeds = {seed};
  resolved.output_dir = run_dir;
  write_text(run_dir + "/config.lock.json", to_json(resolved).dump(2) + "\n");

  RunResult result;
  result.fusion = cfg.fusion;
  result.seed = seed;
  result.run_dir = run_dir;

  const PreparedDataset ds = load_prepared_dataset(cfg.data, cfg.train.image_size);
  FusionModel<float> model(cfg.fusion, BackboneSpec::from_depth(cfg.fusion.depth, 1),
                           seed);
  result.param_count = model.count_parameters();

  TrainConfig train_cfg = resolved.train;
  TrainResult tr = train_model(model, ds, train_cfg);

  write_text(run_dir + "/history.jsonl", history_to_jsonl(tr.history));
  restore_snapshot(model, tr.best_state);
  save_model(model, run_dir + "/checkpoint.bin");

  result.best = tr.best_metrics;
  result.final_epoch = tr.final_metrics;
  result.best_epoch = tr.history.best_epoch;
  result.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  Json metrics;
  metrics["best_epoch"] = tr.history.best_epoch;
  metrics["best"] = report_to_json(tr.best_metrics);
  metrics["final_epoch"] = report_to_json(tr.final_metrics);
  metrics["param_count"] = result.param_count;
  write_text(run_dir + "/metrics.json", metrics.dump(2) + "\n");
  write_results_csv(run_dir + "/results.csv", {result});
  return result;
}

std::vector<RunResult> run_matrix(const ExperimentConfig& base,
                                  const MatrixAxes& axes, int workers,
                                  bool force) {
  const auto fusion_types = axes.fusion_types.empty()
                                ? std::vector<FusionType>{base.fusion.fusion_type}
                                : axes.fusion_types;
  const auto aggregations =
      axes.aggregations.empty()
          ? std::vector<AggregationKind>{base.fusion.aggregation}
          : axes.aggregations;
  const auto skips = axes.skips.empty() ? std::vector<SkipFlags>{base.fusion.skip}
                                        : axes.skips;
  const auto depths = axes.depths.empty() ? std::vector<Depth>{base.fusion.depth}
                                          : axes.depths;

  struct Job {
    ExperimentConfig cfg;
    uint64_t seed;
    std::string run_dir;
  };
  std::vector<Job> jobs;
  for (const auto ft : fusion_types)
    for (const auto agg : aggregations)
      for (const auto skip : skips)
        for (const auto depth : depths)
          for (const auto seed : base.seeds) {
            ExperimentConfig cfg = base;
            cfg.fusion = {ft, agg, skip, depth};
            std::ostringstream name;
            name << to_string(ft) << "_" << to_string(agg) << "_sE"
                 << (skip.examined ? 1 : 0) << "_sA" << (skip.auxiliary ? 1 : 0)
                 << "_d" << to_string(depth) << "_seed" << seed;
            jobs.push_back({std::move(cfg), seed, base.output_dir + "/" + name.str()});
          }

  ensure_fresh_dir(base.output_dir, force);
  std::vector<RunResult> results(jobs.size());
  std::atomic<size_t> next{0};
  const int n_workers = std::max(1, workers);

  const auto worker = [&]() {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        results[i] = run_train(jobs[i].cfg, jobs[i].seed, jobs[i].run_dir, true);
      } catch (const std::exception& e) {
        RunResult r;
        r.fusion = jobs[i].cfg.fusion;
        r.seed = jobs[i].seed;
        r.run_dir = jobs[i].run_dir;
        r.failed = true;
        r.error = e.what();
        results[i] = std::move(r);
      }
    }
  };

  std::vector<std::thread> threads;
  for (int t = 0; t < n_workers; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  write_results_csv(base.output_dir + "/results.csv", results);
  write_summary_csv(base.output_dir + "/summary.csv", results);
  return results;
}

void write_results_csv(const std::string& path, const std::vector<RunResult>& rows) {
  std::string text = csv_header();
  for (const auto& r : rows) text += csv_row(r);
  write_text(path, text);
}

namespace {

struct CellKey {
  std::string fusion_type, aggregation;
  int skip_e, skip_a;
  std::string depth;
  bool operator<(const CellKey& o) const {
    return std::tie(fusion_type, aggregation, skip_e, skip_a, depth) <
           std::tie(o.fusion_type, o.aggregation, o.skip_e, o.skip_a, o.depth);
  }
};

struct CellAgg {
  double f1_sum = 0.0, auc_sum = 0.0;
  int n = 0, n_auc = 0, failed = 0;
};

std::map<CellKey, CellAgg> aggregate_cells(const std::vector<RunResult>& rows) {
  std::map<CellKey, CellAgg> cells;
  for (const auto& r : rows) {
    const CellKey key{to_string(r.fusion.fusion_type), to_string(r.fusion.aggregation),
                      r.fusion.skip.examined ? 1 : 0, r.fusion.skip.auxiliary ? 1 : 0,
                      to_string(r.fusion.depth)};
    CellAgg& a = cells[key];
    if (r.failed) {
      ++a.failed;
      continue;
    }
    a.f1_sum += r.best.macro_f1;
    ++a.n;
    if (r.best.auc_roc) {
      a.auc_sum += *r.best.auc_roc;
      ++a.n_auc;
    }
  }
  return cells;
}

}  // namespace

void write_summary_csv(const std::string& path, const std::vector<RunResult>& rows) {
  std::ostringstream os;
  os << "fusion_type,aggregation,skip_examined,skip_auxiliary,depth,"
        "mean_macro_f1,mean_auc_roc,seeds,failed\n";
  os.precision(17);
  for (const auto& [key, a] : aggregate_cells(rows)) {
    os << key.fusion_type << "," << key.aggregation << "," << key.skip_e << ","
       << key.skip_a << "," << key.depth << ",";
    if (a.n > 0) os << a.f1_sum / a.n;
    os << ",";
    if (a.n_auc > 0) os << a.auc_sum / a.n_auc;
    os << "," << a.n << "," << a.failed << "\n";
  }
  write_text(path, os.str());
}

std::string render_summary_table(const std::vector<RunResult>& rows) {
  std::ostringstream os;
  os << "fusion  agg          skipE skipA depth   F1(%)   AUC(%)  seeds\n";
  for (const auto& [key, a] : aggregate_cells(rows)) {
    char line[160];
    if (a.n > 0) {
      std::snprintf(line, sizeof(line), "%-7s %-12s %-5d %-5d %-7s %6.2f  %6.2f  %d\n",
                    key.fusion_type.c_str(), key.aggregation.c_str(), key.skip_e,
                    key.skip_a, key.depth.c_str(), 100.0 * a.f1_sum / a.n,
                    a.n_auc > 0 ? 100.0 * a.auc_sum / a.n_auc : 0.0, a.n);
    } else {
      std::snprintf(line, sizeof(line), "%-7s %-12s %-5d %-5d %-7s %6s  %6s  failed=%d\n",
                    key.fusion_type.c_str(), key.aggregation.c_str(), key.skip_e,
                    key.skip_a, key.depth.c_str(), "-", "-", a.failed);
    }
    os << line;
  }
  return os.str();
}

void run_synth(const SynthSpec& spec, const std::string& out_dir, bool force) {
  spec.validate();
  ensure_fresh_dir(out_dir, force);
  write_dataset(generate_synthetic(spec), out_dir);
}

MetricsReport run_eval(const std::string& run_dir,
                       const std::optional<std::string>& manifest_override) {
  ExperimentConfig cfg = load_config_file(run_dir + "/config.lock.json");
  if (manifest_override) {
    cfg.data.manifest = *manifest_override;
    cfg.data.synthetic.reset();
  }
  const PreparedDataset ds = load_prepared_dataset(cfg.data, cfg.train.image_size);
  FusionModel<float> model(cfg.fusion, BackboneSpec::from_depth(cfg.fusion.depth, 1),
                           cfg.train.seed);
  load_model(model, run_dir + "/checkpoint.bin");
  const MetricsReport report = evaluate(model, ds.test, cfg.train.batch_cases);
  write_text(run_dir + "/metrics.eval.json", report_to_json(report).dump(2) + "\n");
  return report;
}

}  // namespace mvf
