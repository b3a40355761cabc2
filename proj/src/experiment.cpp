#include "agirisk/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "agirisk/error.hpp"
#include "agirisk/hash.hpp"
#include "agirisk/report.hpp"

namespace agirisk {
namespace {

using nlohmann::json;

constexpr std::uint64_t kTrainStream = 0x7472616e;  // "tran"
constexpr std::uint64_t kForestStream = 0x72666f72;  // "rfor"

struct SplitSamples {
  std::vector<const FeatureSample*> train, validation, test;
};

SplitSamples collect_split(const std::vector<FeatureSample>& samples,
                           const SplitAssignment& split) {
  const std::set<std::string> train_ids(split.train.begin(), split.train.end());
  const std::set<std::string> val_ids(split.validation.begin(),
                                      split.validation.end());
  SplitSamples out;
  for (const FeatureSample& s : samples) {
    if (train_ids.count(s.participant_id)) {
      out.train.push_back(&s);
    } else if (val_ids.count(s.participant_id)) {
      out.validation.push_back(&s);
    } else {
      out.test.push_back(&s);
    }
  }
  return out;
}

bool both_classes(const std::vector<const FeatureSample*>& samples) {
  bool pos = false, neg = false;
  for (const auto* s : samples) (s->label == kAgitation ? pos : neg) = true;
  return pos && neg;
}

std::vector<int> labels_of(const std::vector<const FeatureSample*>& samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto* s : samples) out.push_back(s->label);
  return out;
}

json grid_to_json(const GridSpec& g) {
  json j;
  j["batch"] = g.batch_sizes;
  j["epochs"] = g.epoch_counts;
  j["neurons"] = g.neuron_counts;
  j["layer_norm"] = g.layer_norm;
  j["class_weights"] = g.class_weights;
  std::vector<std::string> archs;
  for (auto a : g.architectures) archs.emplace_back(nn::architecture_name(a));
  j["architecture"] = archs;
  return j;
}

void grid_from_json(const json& j, GridSpec& g) {
  if (j.contains("batch")) g.batch_sizes = j["batch"].get<std::vector<int>>();
  if (j.contains("epochs"))
    g.epoch_counts = j["epochs"].get<std::vector<int>>();
  if (j.contains("neurons"))
    g.neuron_counts = j["neurons"].get<std::vector<int>>();
  if (j.contains("layer_norm"))
    g.layer_norm = j["layer_norm"].get<std::vector<bool>>();
  if (j.contains("class_weights"))
    g.class_weights = j["class_weights"].get<std::vector<bool>>();
  if (j.contains("architecture")) {
    g.architectures.clear();
    for (const auto& name : j["architecture"])
      g.architectures.push_back(
          nn::architecture_from_name(name.get<std::string>()));
  }
}

}  // namespace

SplitAssignment split_participants(const std::vector<std::string>& ids,
                                   int repetition) {
  const auto n = static_cast<int>(ids.size());
  if (n < 3) throw Error("split_participants: need at least 3 participants");
  std::vector<std::string> shuffled = ids;
  Rng rng(static_cast<std::uint64_t>(repetition));
  rng.shuffle(shuffled);

  int n_train = static_cast<int>(std::ceil(0.7 * n));
  const int n_test = static_cast<int>(std::ceil(0.1 * n));
  while (n_train > 1 && n - n_train - n_test < 1) --n_train;
  const int n_val = n - n_train - n_test;
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw Error("split_participants: split infeasible for n = " +
                std::to_string(n));

  SplitAssignment split;
  split.train.assign(shuffled.begin(), shuffled.begin() + n_train);
  split.validation.assign(shuffled.begin() + n_train,
                          shuffled.begin() + n_train + n_val);
  split.test.assign(shuffled.begin() + n_train + n_val, shuffled.end());
  return split;
}

std::size_t GridSpec::combination_count() const {
  return batch_sizes.size() * epoch_counts.size() * neuron_counts.size() *
         layer_norm.size() * class_weights.size() * architectures.size();
}

void GridSpec::validate() const {
  if (batch_sizes.empty() || epoch_counts.empty() || neuron_counts.empty() ||
      layer_norm.empty() || class_weights.empty() || architectures.empty())
    throw ConfigError("grid: every axis needs at least one value");
}

std::string GridCombo::id() const {
  return "b" + std::to_string(batch) + "-e" + std::to_string(epochs) + "-n" +
         std::to_string(neurons) + "-ln" + (layer_norm ? "1" : "0") + "-cw" +
         (class_weights ? "1" : "0") + "-" +
         std::string(nn::architecture_name(architecture));
}

std::vector<GridCombo> enumerate_grid(const GridSpec& spec) {
  spec.validate();
  std::vector<GridCombo> combos;
  combos.reserve(spec.combination_count());
  int index = 0;
  for (int batch : spec.batch_sizes)
    for (int epochs : spec.epoch_counts)
      for (int neurons : spec.neuron_counts)
        for (bool ln : spec.layer_norm)
          for (bool cw : spec.class_weights)
            for (nn::Architecture arch : spec.architectures) {
              GridCombo c;
              c.index = index++;
              c.batch = batch;
              c.epochs = epochs;
              c.neurons = neurons;
              c.layer_norm = ln;
              c.class_weights = cw;
              c.architecture = arch;
              combos.push_back(c);
            }
  return combos;
}

void ExperimentConfig::apply_desk_scale() {
  grid.batch_sizes = {32};
  grid.epoch_counts = {30, 60};
  grid.neuron_counts = {16, 32};
  grid.layer_norm = {false};
  grid.class_weights = {false, true};
  grid.architectures = {nn::Architecture::lstm, nn::Architecture::bilstm};
  repetitions = 3;
}

std::string ExperimentConfig::canonical_json() const {
  json j;
  j["cohort"]["participants"] = cohort.n_participants;
  j["cohort"]["days"] = cohort.days;
  j["cohort"]["seed"] = cohort.seed;
  j["cohort"]["label_mix"] = cohort.label_mix;
  j["cohort"]["target_true_episodes"] = cohort.target_true_episodes;
  j["cohort"]["slow_verification_fraction"] = cohort.slow_verification_fraction;
  j["cohort"]["signature"]["movement_multiplier"] =
      cohort.signature.movement_multiplier;
  j["cohort"]["signature"]["entropy_mix"] = cohort.signature.entropy_mix;
  j["cohort"]["signature"]["pulse_offset"] = cohort.signature.pulse_offset;
  j["cohort"]["signature"]["systolic_offset"] = cohort.signature.systolic_offset;
  j["cohort"]["signature"]["diastolic_offset"] =
      cohort.signature.diastolic_offset;
  j["cohort"]["signature"]["duration_hours"] = cohort.signature.duration_hours;
  j["ranges"]["pulse"] = {ranges.pulse.low, ranges.pulse.high};
  j["ranges"]["systolic"] = {ranges.systolic.low, ranges.systolic.high};
  j["ranges"]["diastolic"] = {ranges.diastolic.low, ranges.diastolic.high};
  j["grid"] = grid_to_json(grid);
  j["repetitions"] = repetitions;
  j["rf"]["enabled"] = rf_baseline;
  j["rf"]["trees"] = rf_trees;
  j["dropout"] = dropout;
  j["adam"]["learning_rate"] = learning_rate;
  j["adam"]["beta1"] = beta1;
  j["adam"]["beta2"] = beta2;
  j["adam"]["epsilon"] = epsilon;
  j["tz_offset_hours"] = tz_offset_hours;
  j["experiment_seed"] = experiment_seed;
  return j.dump();
}

std::uint64_t ExperimentConfig::config_hash() const {
  return fnv1a64(canonical_json());
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  ExperimentConfig cfg;
  try {
    if (j.contains("cohort")) {
      const auto& c = j["cohort"];
      if (c.contains("participants"))
        cfg.cohort.n_participants = c["participants"].get<int>();
      if (c.contains("days")) cfg.cohort.days = c["days"].get<int>();
      if (c.contains("seed")) cfg.cohort.seed = c["seed"].get<std::uint64_t>();
      if (c.contains("label_mix"))
        cfg.cohort.label_mix = c["label_mix"].get<std::array<double, 3>>();
      if (c.contains("target_true_episodes"))
        cfg.cohort.target_true_episodes = c["target_true_episodes"].get<int>();
      if (c.contains("slow_verification_fraction"))
        cfg.cohort.slow_verification_fraction =
            c["slow_verification_fraction"].get<double>();
      if (c.contains("signature")) {
        const auto& s = c["signature"];
        auto& sig = cfg.cohort.signature;
        if (s.contains("movement_multiplier"))
          sig.movement_multiplier = s["movement_multiplier"].get<double>();
        if (s.contains("entropy_mix"))
          sig.entropy_mix = s["entropy_mix"].get<double>();
        if (s.contains("pulse_offset"))
          sig.pulse_offset = s["pulse_offset"].get<double>();
        if (s.contains("systolic_offset"))
          sig.systolic_offset = s["systolic_offset"].get<double>();
        if (s.contains("diastolic_offset"))
          sig.diastolic_offset = s["diastolic_offset"].get<double>();
        if (s.contains("duration_hours"))
          sig.duration_hours = s["duration_hours"].get<int>();
      }
    }
    if (j.contains("ranges")) {
      const auto& r = j["ranges"];
      const auto load_range = [&](const char* name,
                                  VitalRanges::Interval& iv) {
        if (!r.contains(name)) return;
        const auto pair = r[name].get<std::array<double, 2>>();
        iv = VitalRanges::Interval{pair[0], pair[1]};
      };
      load_range("pulse", cfg.ranges.pulse);
      load_range("systolic", cfg.ranges.systolic);
      load_range("diastolic", cfg.ranges.diastolic);
    }
    if (j.contains("grid")) grid_from_json(j["grid"], cfg.grid);
    if (j.contains("repetitions"))
      cfg.repetitions = j["repetitions"].get<int>();
    if (j.contains("rf")) {
      if (j["rf"].contains("enabled"))
        cfg.rf_baseline = j["rf"]["enabled"].get<bool>();
      if (j["rf"].contains("trees")) cfg.rf_trees = j["rf"]["trees"].get<int>();
    }
    if (j.contains("dropout")) cfg.dropout = j["dropout"].get<double>();
    if (j.contains("adam")) {
      const auto& a = j["adam"];
      if (a.contains("learning_rate"))
        cfg.learning_rate = a["learning_rate"].get<double>();
      if (a.contains("beta1")) cfg.beta1 = a["beta1"].get<double>();
      if (a.contains("beta2")) cfg.beta2 = a["beta2"].get<double>();
      if (a.contains("epsilon")) cfg.epsilon = a["epsilon"].get<double>();
    }
    if (j.contains("tz_offset_hours"))
      cfg.tz_offset_hours = j["tz_offset_hours"].get<int>();
    if (j.contains("experiment_seed"))
      cfg.experiment_seed = j["experiment_seed"].get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigError("config field error in " + path + ": " + e.what());
  }
  if (cfg.repetitions < 1)
    throw ConfigError("config: repetitions must be >= 1");
  cfg.ranges.validate();
  cfg.grid.validate();
  return cfg;
}

std::string_view subset_name(Subset s) {
  switch (s) {
    case Subset::full: return "full";
    case Subset::am: return "am";
    default: return "pm";
  }
}

Subset subset_from_name(std::string_view name) {
  if (name == "full") return Subset::full;
  if (name == "am") return Subset::am;
  if (name == "pm") return Subset::pm;
  throw ParseError("unknown subset: '" + std::string(name) + "'");
}

std::vector<std::string> participant_ids(
    const std::vector<FeatureSample>& samples) {
  std::set<std::string> ids;
  for (const FeatureSample& s : samples) ids.insert(s.participant_id);
  return {ids.begin(), ids.end()};
}

namespace {

// Shared split/normalize/evaluate frame for both model families.
struct PreparedSplit {
  SplitSamples split;
  Normalizer norm;
  bool usable = false;
  std::string note;
};

PreparedSplit prepare_split(int repetition,
                            const std::vector<FeatureSample>& samples,
                            const std::vector<std::string>& ids) {
  PreparedSplit prep;
  const SplitAssignment assignment = split_participants(ids, repetition);
  prep.split = collect_split(samples, assignment);
  if (prep.split.train.empty()) {
    prep.note = "degenerate: empty training split";
    return prep;
  }
  if (!both_classes(prep.split.train)) {
    prep.note = "degenerate: single-class training split";
    return prep;
  }
  if (prep.split.validation.empty() || prep.split.test.empty()) {
    prep.note = "degenerate: empty evaluation split";
    return prep;
  }
  std::vector<FeatureSample> train_copy;
  train_copy.reserve(prep.split.train.size());
  for (const auto* s : prep.split.train) train_copy.push_back(*s);
  prep.norm = fit_normalizer(train_copy);
  prep.usable = true;
  return prep;
}

void flag_eval_degeneracy(RepetitionResult& result, const SplitSamples& split) {
  if (!both_classes(split.validation)) {
    result.degenerate = true;
    result.note = "degenerate: single-class validation split";
  }
  if (!both_classes(split.test)) {
    result.degenerate = true;
    result.note = result.note.empty()
                      ? "degenerate: single-class test split"
                      : result.note + "; single-class test split";
  }
}

}  // namespace

RepetitionResult run_repetition(const GridCombo& combo, int repetition,
                                const std::vector<FeatureSample>& samples,
                                const std::vector<std::string>& ids,
                                const ExperimentConfig& config, Subset subset) {
  const auto t0 = std::chrono::steady_clock::now();
  RepetitionResult result;
  result.combo_id = combo.id();
  result.combo_index = combo.index;
  result.repetition = repetition;
  result.subset = subset;

  const PreparedSplit prep = prepare_split(repetition, samples, ids);
  if (!prep.usable) {
    result.degenerate = true;
    result.note = prep.note;
    return result;
  }

  nn::TrainConfig train_cfg;
  train_cfg.architecture = combo.architecture;
  train_cfg.hidden = combo.neurons;
  train_cfg.batch = combo.batch;
  train_cfg.epochs = combo.epochs;
  train_cfg.dropout = config.dropout;
  train_cfg.layer_norm = combo.layer_norm;
  train_cfg.class_weights = combo.class_weights;
  train_cfg.learning_rate = config.learning_rate;
  train_cfg.beta1 = config.beta1;
  train_cfg.beta2 = config.beta2;
  train_cfg.epsilon = config.epsilon;
  train_cfg.seed = mix_seed({config.experiment_seed, kTrainStream,
                             static_cast<std::uint64_t>(combo.index),
                             static_cast<std::uint64_t>(repetition),
                             static_cast<std::uint64_t>(subset)});

  std::vector<Matrix> train_x;
  train_x.reserve(prep.split.train.size());
  for (const auto* s : prep.split.train)
    train_x.push_back(apply_normalizer(prep.norm, s->matrix));
  const std::vector<int> train_y = labels_of(prep.split.train);

  const nn::ModelParams params = nn::train(train_x, train_y, train_cfg);

  const auto eval_on = [&](const std::vector<const FeatureSample*>& part) {
    std::vector<int> preds, labels;
    std::vector<double> scores;
    preds.reserve(part.size());
    for (const auto* s : part) {
      const nn::Prediction p =
          nn::predict(apply_normalizer(prep.norm, s->matrix), params, train_cfg);
      preds.push_back(p.cls);
      scores.push_back(p.p_agitation);
      labels.push_back(s->label);
    }
    return evaluate(preds, scores, labels);
  };
  result.validation = eval_on(prep.split.validation);
  result.test = eval_on(prep.split.test);
  flag_eval_degeneracy(result, prep.split);

  result.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

RepetitionResult run_rf_repetition(int repetition,
                                   const std::vector<FeatureSample>& samples,
                                   const std::vector<std::string>& ids,
                                   const ExperimentConfig& config,
                                   Subset subset) {
  const auto t0 = std::chrono::steady_clock::now();
  RepetitionResult result;
  result.combo_id = "rf" + std::to_string(config.rf_trees);
  result.combo_index = -1;
  result.repetition = repetition;
  result.subset = subset;

  const PreparedSplit prep = prepare_split(repetition, samples, ids);
  if (!prep.usable) {
    result.degenerate = true;
    result.note = prep.note;
    return result;
  }

  const auto flatten = [&](const FeatureSample& s) {
    const Matrix normalized = apply_normalizer(prep.norm, s.matrix);
    Vector flat(normalized.size());
    Index idx = 0;
    for (Index r = 0; r < normalized.rows(); ++r)
      for (Index c = 0; c < normalized.cols(); ++c)
        flat[idx++] = normalized(r, c);
    return flat;
  };

  Matrix train_x(static_cast<Index>(prep.split.train.size()),
                 kNumTimesteps * kNumFeatures);
  for (size_t i = 0; i < prep.split.train.size(); ++i)
    train_x.row(static_cast<Index>(i)) = flatten(*prep.split.train[i]).transpose();
  const std::vector<int> train_y = labels_of(prep.split.train);

  ForestConfig forest_cfg;
  forest_cfg.n_trees = config.rf_trees;
  forest_cfg.seed = mix_seed({config.experiment_seed, kForestStream,
                              static_cast<std::uint64_t>(repetition),
                              static_cast<std::uint64_t>(subset)});
  const Forest forest = fit_forest(train_x, train_y, forest_cfg);

  const auto eval_on = [&](const std::vector<const FeatureSample*>& part) {
    std::vector<int> preds, labels;
    std::vector<double> scores;
    for (const auto* s : part) {
      const ForestPrediction p = predict_forest(forest, flatten(*s));
      preds.push_back(p.cls);
      scores.push_back(p.p_agitation);
      labels.push_back(s->label);
    }
    return evaluate(preds, scores, labels);
  };
  result.validation = eval_on(prep.split.validation);
  result.test = eval_on(prep.split.test);
  flag_eval_degeneracy(result, prep.split);

  result.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return result;
}

int select_best(const std::vector<RepetitionResult>& results) {
  struct Agg {
    double j_sum = 0.0;
    double recall_sum = 0.0;
    int n = 0;
  };
  std::map<int, Agg> by_combo;
  for (const RepetitionResult& r : results) {
    if (r.combo_index < 0 || r.subset != Subset::full || r.degenerate) continue;
    Agg& a = by_combo[r.combo_index];
    a.j_sum += r.validation.youden_j;
    a.recall_sum += r.validation.recall;
    ++a.n;
  }
  if (by_combo.empty())
    throw Error("select_best: no usable (non-degenerate) results");
  int best = -1;
  double best_j = 0.0, best_recall = 0.0;
  for (const auto& [index, a] : by_combo) {
    const double j = a.j_sum / a.n;
    const double recall = a.recall_sum / a.n;
    if (best < 0 || j > best_j ||
        (j == best_j && (recall > best_recall ||
                         (recall == best_recall && index < best)))) {
      best = index;
      best_j = j;
      best_recall = recall;
    }
  }
  return best;
}

std::pair<std::vector<FeatureSample>, std::vector<FeatureSample>>
ampm_partition(const std::vector<FeatureSample>& samples,
               int tz_offset_hours) {
  std::vector<FeatureSample> am, pm;
  for (const FeatureSample& s : samples) {
    if (local_hour_of_day(s.parent_raised_at, tz_offset_hours) < 12)
      am.push_back(s);
    else
      pm.push_back(s);
  }
  return {std::move(am), std::move(pm)};
}

namespace {

struct Job {
  GridCombo combo;  // combo.index == -1 marks the RF baseline
  int repetition = 0;
  Subset subset = Subset::full;
};

std::vector<RepetitionResult> run_jobs(
    const std::vector<Job>& jobs, const std::vector<FeatureSample>& full,
    const std::vector<FeatureSample>& am, const std::vector<FeatureSample>& pm,
    const std::vector<std::string>& ids, const ExperimentConfig& config,
    int n_threads, std::ofstream& ledger_append, std::ofstream& timings,
    std::mutex& io_mutex) {
  std::vector<RepetitionResult> results(jobs.size());
  std::atomic<size_t> next{0};
  const auto worker = [&] {
    for (;;) {
      const size_t k = next.fetch_add(1);
      if (k >= jobs.size()) return;
      const Job& job = jobs[k];
      const auto& samples = job.subset == Subset::full ? full
                            : job.subset == Subset::am ? am
                                                       : pm;
      RepetitionResult r;
      try {
        r = job.combo.index >= 0
                ? run_repetition(job.combo, job.repetition, samples, ids,
                                 config, job.subset)
                : run_rf_repetition(job.repetition, samples, ids, config,
                                    job.subset);
      } catch (const std::exception& e) {
        // A failed repetition is recorded as degenerate, never fatal to
        // the sweep.
        r.combo_id = job.combo.index >= 0
                         ? job.combo.id()
                         : "rf" + std::to_string(config.rf_trees);
        r.combo_index = job.combo.index;
        r.repetition = job.repetition;
        r.subset = job.subset;
        r.degenerate = true;
        r.note = std::string("degenerate: ") + e.what();
      }
      {
        std::lock_guard<std::mutex> lock(io_mutex);
        ledger_append << ledger_row(r) << '\n' << std::flush;
        timings << r.combo_id << ',' << subset_name(r.subset) << ','
                << r.repetition << ',' << r.duration_seconds << '\n'
                << std::flush;
      }
      results[k] = std::move(r);
    }
  };
  std::vector<std::thread> pool;
  const int t = std::max(1, n_threads);
  pool.reserve(static_cast<size_t>(t));
  for (int i = 0; i < t; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  return results;
}

}  // namespace

std::vector<RepetitionResult> run_experiment(
    const std::vector<FeatureSample>& samples, const ExperimentConfig& config,
    const SweepOptions& options) {
  config.grid.validate();
  if (samples.empty()) throw Error("run_experiment: no samples");
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(options.out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + options.out_dir);

  const std::string hash = hash_hex(config.config_hash());
  const std::string ledger_path = options.out_dir + "/ledger.csv";
  const std::string header =
      ledger_header(hash, config.cohort.seed, config.experiment_seed);

  // Resume: previously completed (combo, subset, repetition) rows stand.
  std::vector<RepetitionResult> done;
  if (fs::exists(ledger_path)) {
    LedgerContents existing = read_ledger(ledger_path);
    if (existing.config_hash != hash)
      throw ConfigError("ledger " + ledger_path +
                        " was written with config hash " +
                        existing.config_hash + ", current config is " + hash);
    done = std::move(existing.rows);
  }
  std::set<std::tuple<std::string, int, int>> completed;
  for (const RepetitionResult& r : done)
    completed.insert({r.combo_id, static_cast<int>(r.subset), r.repetition});

  const std::vector<GridCombo> combos = enumerate_grid(config.grid);
  const auto ids = participant_ids(samples);

  const auto make_jobs = [&](const std::vector<GridCombo>& cs, Subset subset) {
    std::vector<Job> jobs;
    for (const GridCombo& c : cs)
      for (int rep = 0; rep < config.repetitions; ++rep)
        if (!completed.count({c.id(), static_cast<int>(subset), rep}))
          jobs.push_back(Job{c, rep, subset});
    return jobs;
  };

  std::vector<Job> jobs = make_jobs(combos, Subset::full);
  if (config.rf_baseline) {
    GridCombo rf_marker;
    rf_marker.index = -1;
    for (int rep = 0; rep < config.repetitions; ++rep)
      if (!completed.count({"rf" + std::to_string(config.rf_trees),
                            static_cast<int>(Subset::full), rep}))
        jobs.push_back(Job{rf_marker, rep, Subset::full});
  }

  auto [am, pm] = options.am_pm
                      ? ampm_partition(samples, config.tz_offset_hours)
                      : std::pair<std::vector<FeatureSample>,
                                  std::vector<FeatureSample>>{};

  std::ofstream ledger_append(ledger_path, std::ios::app);
  if (!ledger_append) throw IoError("cannot append to ledger: " + ledger_path);
  if (done.empty()) ledger_append << header;
  std::ofstream timings(options.out_dir + "/timings.csv", std::ios::app);
  std::mutex io_mutex;

  std::vector<RepetitionResult> results =
      run_jobs(jobs, samples, am, pm, ids, config, options.jobs, ledger_append,
               timings, io_mutex);
  results.insert(results.end(), done.begin(), done.end());

  if (options.am_pm) {
    const int best = select_best(results);
    const GridCombo& best_combo = combos[static_cast<size_t>(best)];
    std::vector<Job> ampm_jobs = make_jobs({best_combo}, Subset::am);
    const auto pm_jobs = make_jobs({best_combo}, Subset::pm);
    ampm_jobs.insert(ampm_jobs.end(), pm_jobs.begin(), pm_jobs.end());
    std::vector<RepetitionResult> ampm_results =
        run_jobs(ampm_jobs, samples, am, pm, ids, config, options.jobs,
                 ledger_append, timings, io_mutex);
    results.insert(results.end(), ampm_results.begin(), ampm_results.end());
  }
  ledger_append.close();

  // Canonical rewrite keeps the persisted ledger byte-stable regardless of
  // scheduling order.
  write_ledger(ledger_path, header, results);
  const std::string seeds =
      "cohort_seed=" + std::to_string(config.cohort.seed) +
      " experiment_seed=" + std::to_string(config.experiment_seed);
  write_report(options.out_dir, results, hash, 0, seeds);
  sort_canonical(results);
  return results;
}

}  // namespace agirisk
