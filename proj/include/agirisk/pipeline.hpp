#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "agirisk/core.hpp"
#include "agirisk/types.hpp"

namespace agirisk {

// Canonical 24-feature layout per timestep:
//   0-10   hourly event counts for the 11 channels
//   11-19  {min, max, mean} x {pulse, systolic, diastolic}, trailing 72 h
//   20-23  out-of-range counts, trailing 24 h: pulse_low, pulse_high,
//          bp_low, bp_high (systolic and diastolic pooled)
const std::array<std::string, kNumFeatures>& feature_layout();

struct LabeledAnchor {
  std::string participant_id;
  Timestamp anchor_hour = 0;  // truncated to the hour
  int label = kNoAgitation;
  std::string parent_alert_id;
  Timestamp parent_raised_at = 0;
};

struct FeatureSample {
  std::string participant_id;
  Timestamp anchor_hour = 0;
  Matrix matrix;  // 6 timesteps x 24 features; row 0 = anchor - 5 h
  int label = kNoAgitation;
  std::string parent_alert_id;
  Timestamp parent_raised_at = 0;
};

// Fallbacks for vital kinds a participant never reported.
struct ImputeValues {
  double pulse = 75.0;
  double systolic = 120.0;
  double diastolic = 75.0;
};

struct ParticipantStreams {
  std::vector<SensorEvent> events;   // sorted by timestamp
  std::vector<VitalReading> vitals;  // sorted by timestamp
};

struct EventLog {
  std::map<std::string, ParticipantStreams> streams;
  std::vector<AgitationAlert> alerts;
};

// Lines starting with '#' are provenance comments; readers skip them.
EventLog read_event_log(const std::string& path);
void write_event_log(const std::string& path, const EventLog& log,
                     const std::string& provenance = {});

// Counts per channel with timestamps in [hour, hour + 1 h).
Vector aggregate_hourly(const std::vector<SensorEvent>& events,
                        Timestamp hour);

// (min, max, mean) per vital kind over [hour - 72 h, hour); a kind with no
// readings in the window takes its imputation value for all three slots.
Vector physio_aggregates(const std::vector<VitalReading>& readings,
                         Timestamp hour, const ImputeValues& impute);

// Below-low / above-high counts over [hour - 24 h, hour); pulse separate,
// systolic and diastolic pooled.
Vector alert_counts(const std::vector<VitalReading>& readings, Timestamp hour,
                    const VitalRanges& ranges);

// Keeps validated alerts verified within 72 h (closed bound); drops
// non-validated alerts.
std::vector<AgitationAlert> filter_alerts(
    const std::vector<AgitationAlert>& alerts);

// Anchors at hours h-5 ... h where h = raised_at truncated to the hour.
std::array<LabeledAnchor, kNumTimesteps> expand_labels(
    const AgitationAlert& alert);

// Median per vital kind over the participant's readings; population
// defaults where a kind is absent.
ImputeValues participant_medians(const std::vector<VitalReading>& readings,
                                 const ImputeValues& population = {});

// Empty when the participant's stream covers [anchor - 77 h, anchor + 1 h);
// otherwise the exclusion reason.
std::optional<std::string> coverage_gap(const LabeledAnchor& anchor,
                                        const ParticipantStreams& streams);

FeatureSample build_sample(const LabeledAnchor& anchor,
                           const ParticipantStreams& streams,
                           const VitalRanges& ranges,
                           const ImputeValues& impute);

struct Exclusion {
  LabeledAnchor anchor;
  std::string reason;
};

struct FeaturizeResult {
  std::vector<FeatureSample> samples;  // ordered by (participant, anchor, alert)
  std::vector<Exclusion> exclusions;
};

// filter -> expand -> build over a whole event log. Normalization is not
// applied here; it is fitted per split at training time.
FeaturizeResult featurize(const EventLog& log, const VitalRanges& ranges);

// Per-feature min-max map fitted on training data only.
struct Normalizer {
  Vector feat_min;  // size 24
  Vector feat_max;
};

Normalizer fit_normalizer(const std::vector<FeatureSample>& train_samples);
Matrix apply_normalizer(const Normalizer& norm, const Matrix& sample);

void write_samples(const std::string& path,
                   const std::vector<FeatureSample>& samples,
                   const std::string& provenance = {});
std::vector<FeatureSample> read_samples(const std::string& path);
void write_exclusions(const std::string& path,
                      const std::vector<Exclusion>& exclusions,
                      const std::string& provenance = {});

}  // namespace agirisk
