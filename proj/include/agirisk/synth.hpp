#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "agirisk/core.hpp"
#include "agirisk/pipeline.hpp"
#include "agirisk/rng.hpp"
#include "agirisk/types.hpp"

namespace agirisk {

// Perturbation applied to a participant's stream over an episode. The
// vital offsets follow a triangular envelope peaking at twice the nominal
// offset at the episode midpoint.
struct EpisodeSignature {
  double movement_multiplier = 3.0;  // >= 1
  double entropy_mix = 0.5;          // room-choice blend toward uniform
  double pulse_offset = 25.0;        // bpm
  double systolic_offset = 20.0;     // mmHg
  double diastolic_offset = 12.0;    // mmHg
  int duration_hours = 6;            // >= 1; drawn in [duration_hours, +2]

  void validate() const;  // throws ConfigError
};

struct CohortSpec {
  int n_participants = 46;
  int days = 180;
  std::uint64_t seed = 1;
  // Alert label mix: validated_true, validated_false, not_validated.
  std::array<double, 3> label_mix = {0.157, 0.419, 0.424};
  // Cohort-wide target for injected (true) episodes; each participant gets
  // at least one.
  int target_true_episodes = 100;
  // Fraction of validated alerts whose verification takes > 3 days.
  double slow_verification_fraction = 0.10;

  // Age / MMSE moment targets.
  double age_mean = 82.5, age_sd = 7.2;
  int age_min = 61, age_max = 99;
  double mmse_mean = 23.8, mmse_sd = 3.6;
  int mmse_min = 15, mmse_max = 30;

  // Diagnosis weights (normalized internally) and male share within each
  // diagnosis, in the Diagnosis enumerator order.
  std::array<double, kNumDiagnoses> diagnosis_mix = {54, 4, 4, 9, 28};
  std::array<double, kNumDiagnoses> male_share = {39.0 / 54.0, 0.5, 0.5, 0.5,
                                                  22.0 / 29.0};

  EpisodeSignature signature;

  Timestamp start_time = 1556668800;  // 2019-05-01T00:00:00Z

  void validate() const;  // throws ConfigError
};

struct Episode {
  std::string participant_id;
  Timestamp start = 0;
  Timestamp end = 0;  // exclusive
  EpisodeSignature signature;
};

// Hour-of-day routine: event intensity and room preference per local hour,
// plus per-participant vital baselines. Drawn from cohort-level priors.
struct RoutineProfile {
  std::array<double, 24> hourly_rate;            // events per hour
  std::array<std::array<double, kNumChannels>, 24> room_probs;
  double stay_probability = 0.55;
  double pulse_base = 72.0;
  double systolic_base = 125.0;
  double diastolic_base = 78.0;
  int pulse_minute = 0;  // minute-of-hour of the scheduled pulse reading
};

std::vector<Participant> generate_cohort(const CohortSpec& spec);

RoutineProfile derive_routine(const Participant& participant,
                              const CohortSpec& spec);

// Baseline stream: time-inhomogeneous room-transition process plus
// scheduled vitals. Deterministic per (participant, spec.seed).
ParticipantStreams generate_event_stream(const Participant& participant,
                                         const CohortSpec& spec);

// Applies one episode's perturbation in place: extra movement with
// flattened room choice, elevated vitals, and a 10-minute pulse burst.
// Streams are re-sorted by the caller.
void apply_episode(ParticipantStreams& stream, const Episode& episode,
                   const RoutineProfile& profile, Rng& rng);

// Draws episode placements (evening-skewed) and perturbs the stream.
// The returned ground truth is for evaluation only.
std::pair<ParticipantStreams, std::vector<Episode>> inject_episodes(
    ParticipantStreams stream, const Participant& participant,
    const CohortSpec& spec);

// True alerts inside episodes, false / not-validated alerts well clear of
// them, hitting spec.label_mix; verification latency exceeds 3 days for
// spec.slow_verification_fraction of validated alerts.
std::vector<AgitationAlert> generate_alert_log(
    const std::vector<Episode>& episodes, const CohortSpec& spec);

struct SynthDataset {
  std::vector<Participant> participants;
  EventLog log;                   // streams + alert log (training path)
  std::vector<Episode> episodes;  // ground truth, evaluation only
};

SynthDataset generate_dataset(const CohortSpec& spec);

// events.log, cohort.meta, ground_truth.episodes under dir. The
// provenance string (config hash etc.) is embedded as a comment line.
void write_dataset(const std::string& dir, const SynthDataset& dataset,
                   const std::string& provenance = {});

std::vector<Participant> read_cohort_meta(const std::string& path);
std::vector<Episode> read_ground_truth(const std::string& path);

}  // namespace agirisk
