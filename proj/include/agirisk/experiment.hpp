#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "agirisk/forest.hpp"
#include "agirisk/lstm.hpp"
#include "agirisk/metrics.hpp"
#include "agirisk/pipeline.hpp"
#include "agirisk/synth.hpp"

namespace agirisk {

struct SplitAssignment {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

// Participant-level 70/20/10 split: shuffle with seed = repetition index,
// assign ceil(0.7 n) to train and ceil(0.1 n) to test, remainder to
// validation (46 -> 33/8/5). Throws Error when |ids| < 3.
SplitAssignment split_participants(const std::vector<std::string>& ids,
                                   int repetition);

struct GridSpec {
  std::vector<int> batch_sizes{8, 16, 32, 64};
  std::vector<int> epoch_counts{50, 100, 150, 200, 250, 300};
  std::vector<int> neuron_counts{25, 50, 100, 150, 200, 250};
  std::vector<bool> layer_norm{false, true};
  std::vector<bool> class_weights{false, true};
  std::vector<nn::Architecture> architectures{nn::Architecture::lstm,
                                              nn::Architecture::bilstm};

  std::size_t combination_count() const;
  void validate() const;  // throws ConfigError on an empty axis
};

struct GridCombo {
  int index = 0;
  int batch = 32;
  int epochs = 300;
  int neurons = 200;
  bool layer_norm = false;
  bool class_weights = false;
  nn::Architecture architecture = nn::Architecture::lstm;

  std::string id() const;  // e.g. "b32-e300-n200-ln0-cw0-lstm"
};

// Lexicographic product over the axes in declared order (batch slowest).
std::vector<GridCombo> enumerate_grid(const GridSpec& spec);

struct ExperimentConfig {
  CohortSpec cohort;
  VitalRanges ranges;
  GridSpec grid;
  int repetitions = 10;
  bool rf_baseline = true;
  int rf_trees = 100;
  double dropout = 0.4;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int tz_offset_hours = 0;
  std::uint64_t experiment_seed = 0;

  // CI-sized sweep: 16 combos, epochs <= 60, 3 repetitions.
  void apply_desk_scale();

  std::string canonical_json() const;
  std::uint64_t config_hash() const;
};

// Loads a JSON config; absent fields keep their defaults. Throws
// ConfigError / IoError.
ExperimentConfig load_experiment_config(const std::string& path);

enum class Subset : int { full = 0, am = 1, pm = 2 };
std::string_view subset_name(Subset s);
Subset subset_from_name(std::string_view name);

struct RepetitionResult {
  std::string combo_id;   // "rf100" for the forest baseline
  int combo_index = -1;   // -1 = RF baseline
  int repetition = 0;
  Subset subset = Subset::full;
  bool degenerate = false;
  std::string note;
  MetricsReport validation;
  MetricsReport test;
  double duration_seconds = 0.0;  // diagnostics only; never persisted
};

// Split -> fit normalizer on train -> train -> evaluate on validation and
// test. `ids` is the full participant universe (splits always cover it,
// whatever subset the samples are from).
RepetitionResult run_repetition(const GridCombo& combo, int repetition,
                                const std::vector<FeatureSample>& samples,
                                const std::vector<std::string>& ids,
                                const ExperimentConfig& config,
                                Subset subset = Subset::full);

RepetitionResult run_rf_repetition(int repetition,
                                   const std::vector<FeatureSample>& samples,
                                   const std::vector<std::string>& ids,
                                   const ExperimentConfig& config,
                                   Subset subset = Subset::full);

// Argmax of mean validation Youden's J across non-degenerate repetitions;
// ties break on higher mean recall, then the earlier combo index. RF rows
// and non-full subsets are ignored. Throws Error when nothing qualifies.
int select_best(const std::vector<RepetitionResult>& results);

// Membership decided by the parent alert's creation hour: [0,12) AM.
std::pair<std::vector<FeatureSample>, std::vector<FeatureSample>>
ampm_partition(const std::vector<FeatureSample>& samples,
               int tz_offset_hours = 0);

std::vector<std::string> participant_ids(
    const std::vector<FeatureSample>& samples);

struct SweepOptions {
  std::string out_dir;
  int jobs = 1;
  bool am_pm = false;
};

// Runs grid x repetitions plus the RF baseline, appending to a resumable
// ledger under out_dir; on completion rewrites the ledger in canonical
// order and emits the report and charts. With am_pm set, the selected
// combo is re-run on the AM-only and PM-only datasets.
std::vector<RepetitionResult> run_experiment(
    const std::vector<FeatureSample>& samples, const ExperimentConfig& config,
    const SweepOptions& options);

}  // namespace agirisk
