#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agirisk/error.hpp"
#include "agirisk/experiment.hpp"
#include "agirisk/hash.hpp"
#include "agirisk/pipeline.hpp"
#include "agirisk/report.hpp"
#include "agirisk/synth.hpp"

namespace {

using namespace agirisk;

struct CliOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::int64_t seed = -1;  // >= 0 overrides the cohort seed
  int jobs = 1;
  bool desk_scale = false;
  bool am_pm = false;
  std::vector<std::string> extra_ledgers;
};

ExperimentConfig effective_config(const CliOptions& opts) {
  ExperimentConfig cfg;
  if (!opts.config_path.empty()) cfg = load_experiment_config(opts.config_path);
  if (opts.seed >= 0) cfg.cohort.seed = static_cast<std::uint64_t>(opts.seed);
  if (opts.desk_scale) cfg.apply_desk_scale();
  return cfg;
}

int cmd_synth(const CliOptions& opts) {
  const ExperimentConfig cfg = effective_config(opts);
  const SynthDataset dataset = generate_dataset(cfg.cohort);
  write_dataset(opts.out_dir, dataset,
                "config=" + hash_hex(cfg.config_hash()));

  std::int64_t n_true = 0, n_false = 0, n_nv = 0;
  for (const auto& a : dataset.log.alerts) {
    switch (a.status) {
      case AlertStatus::validated_true: ++n_true; break;
      case AlertStatus::validated_false: ++n_false; break;
      case AlertStatus::not_validated: ++n_nv; break;
    }
  }
  const auto total = static_cast<double>(dataset.log.alerts.size());
  std::printf("participants: %zu\n", dataset.participants.size());
  std::printf("episodes (ground truth): %zu\n", dataset.episodes.size());
  std::printf("alerts: %zu (true %.1f%%, false %.1f%%, not_validated %.1f%%)\n",
              dataset.log.alerts.size(), 100.0 * n_true / total,
              100.0 * n_false / total, 100.0 * n_nv / total);
  std::printf("events.log hash: %s\n",
              hash_hex(hash_file(opts.out_dir + "/events.log")).c_str());
  return 0;
}

int cmd_featurize(const CliOptions& opts) {
  const ExperimentConfig cfg = effective_config(opts);
  const EventLog log = read_event_log(opts.out_dir + "/events.log");
  const FeaturizeResult result = featurize(log, cfg.ranges);

  const std::string provenance = "config=" + hash_hex(cfg.config_hash());
  write_samples(opts.out_dir + "/samples.csv", result.samples, provenance);
  write_exclusions(opts.out_dir + "/exclusions.csv", result.exclusions,
                   provenance);

  std::int64_t n_pos = 0;
  for (const auto& s : result.samples) n_pos += s.label == kAgitation;
  if (result.samples.empty())
    std::fprintf(stderr, "warning: no samples produced (empty alert log?)\n");
  std::printf("samples: %zu (agitation %lld, no_agitation %lld)\n",
              result.samples.size(), static_cast<long long>(n_pos),
              static_cast<long long>(result.samples.size()) -
                  static_cast<long long>(n_pos));
  std::printf("exclusions: %zu\n", result.exclusions.size());
  std::printf("samples.csv hash: %s\n",
              hash_hex(hash_file(opts.out_dir + "/samples.csv")).c_str());
  return 0;
}

int cmd_experiment(const CliOptions& opts) {
  const ExperimentConfig cfg = effective_config(opts);
  const std::string sample_path = opts.out_dir + "/samples.csv";
  const std::vector<FeatureSample> samples = read_samples(sample_path);
  if (samples.empty())
    throw ConfigError("no samples in " + sample_path +
                      "; run featurize first");

  SweepOptions sweep;
  sweep.out_dir = opts.out_dir;
  sweep.jobs = std::max(1, opts.jobs);
  sweep.am_pm = opts.am_pm;
  const std::vector<RepetitionResult> results =
      run_experiment(samples, cfg, sweep);

  const int best = select_best(results);
  const auto combos = enumerate_grid(cfg.grid);
  std::printf("completed %zu repetition rows\n", results.size());
  std::printf("best combo by validation Youden's J: %s\n",
              combos[static_cast<size_t>(best)].id().c_str());
  std::printf("ledger: %s\nreport: %s\n",
              (opts.out_dir + "/ledger.csv").c_str(),
              (opts.out_dir + "/report.md").c_str());
  return 0;
}

int cmd_report(const CliOptions& opts) {
  LedgerContents merged = read_ledger(opts.out_dir + "/ledger.csv");
  for (const std::string& extra : opts.extra_ledgers) {
    LedgerContents more = read_ledger(extra);
    if (more.config_hash != merged.config_hash)
      throw ConfigError("refusing to merge ledger " + extra +
                        " (config hash " + more.config_hash +
                        " != " + merged.config_hash + ")");
    merged.rows.insert(merged.rows.end(), more.rows.begin(), more.rows.end());
    merged.warnings += more.warnings;
  }
  if (merged.rows.empty())
    throw ConfigError("ledger has no usable rows");
  write_report(opts.out_dir, merged.rows, merged.config_hash, merged.warnings,
               merged.seed_provenance);
  if (merged.warnings > 0)
    std::fprintf(stderr, "warnings: %d corrupt ledger row(s) skipped\n",
                 merged.warnings);
  std::printf("report: %s (warnings: %d)\n",
              (opts.out_dir + "/report.md").c_str(), merged.warnings);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agitation-risk detection pipeline on synthetic in-home "
               "monitoring data"};
  app.require_subcommand(1);

  CliOptions opts;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON config file");
    sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--seed", opts.seed, "cohort seed override");
    sub->add_option("--jobs", opts.jobs, "parallel worker count")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--desk-scale", opts.desk_scale,
                  "reduced grid and repetitions (CI-sized)");
    sub->add_flag("--am-pm", opts.am_pm,
                  "add the AM/PM time-of-day comparison");
  };

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  CLI::App* featurize =
      app.add_subcommand("featurize", "build labeled feature samples");
  CLI::App* experiment =
      app.add_subcommand("experiment", "run the grid-search experiment");
  CLI::App* report = app.add_subcommand("report", "regenerate report from the ledger");
  for (CLI::App* sub : {synth, featurize, experiment, report}) add_common(sub);
  report->add_option("--ledger", opts.extra_ledgers,
                     "additional ledger files to merge");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(opts);
    if (featurize->parsed()) return cmd_featurize(opts);
    if (experiment->parsed()) return cmd_experiment(opts);
    return cmd_report(opts);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
