#pragma once

#include <string>
#include <vector>

#include "agirisk/experiment.hpp"

namespace agirisk {

// Ledger: one CSV row per repetition result, deterministic field
// formatting. Header lines carry the config hash and seed provenance;
// mixing ledgers with different config hashes is refused.
std::string ledger_row(const RepetitionResult& r);
std::string ledger_header(const std::string& config_hash,
                          std::uint64_t cohort_seed,
                          std::uint64_t experiment_seed);

struct LedgerContents {
  std::string config_hash;
  std::string seed_provenance;  // e.g. "cohort_seed=1 experiment_seed=0"
  std::vector<RepetitionResult> rows;
  int warnings = 0;  // corrupt rows skipped
};

LedgerContents read_ledger(const std::string& path);

// Canonical order: subset, combo index (RF last), repetition.
void sort_canonical(std::vector<RepetitionResult>& rows);

void write_ledger(const std::string& path, const std::string& header,
                  std::vector<RepetitionResult> rows);

struct MetricStats {
  double mean = 0.0;
  double sd = 0.0;  // population sd; a single repetition yields 0
  int n = 0;
};

struct ComboAggregate {
  std::string combo_id;
  int combo_index = -1;
  Subset subset = Subset::full;
  int repetitions = 0;
  int degenerate = 0;
  MetricStats val_accuracy, val_precision, val_recall, val_f1, val_auc,
      val_youden;
  MetricStats test_accuracy, test_precision, test_recall, test_f1, test_auc,
      test_youden;
  ConfusionMatrix pooled_validation;
  ConfusionMatrix pooled_test;
};

struct ExperimentReport {
  std::vector<ComboAggregate> combos;  // canonical order
  bool has_ampm = false;
};

// Per-combo mean +/- sd across non-degenerate repetitions plus pooled
// confusion matrices. Throws Error when every row is degenerate.
ExperimentReport aggregate_report(const std::vector<RepetitionResult>& rows);

// report.md plus charts/metrics.svg (and charts/ampm.svg when AM/PM rows
// are present), derived from ledger rows alone.
void write_report(const std::string& out_dir,
                  const std::vector<RepetitionResult>& rows,
                  const std::string& config_hash, int warnings = 0,
                  const std::string& seed_provenance = {});

}  // namespace agirisk
