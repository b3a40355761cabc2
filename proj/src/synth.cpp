#include "agirisk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <tuple>

#include "agirisk/error.hpp"
#include "agirisk/hash.hpp"

namespace agirisk {
namespace {

constexpr std::uint64_t kCohortStream = 0x636f6872;   // "cohr"
constexpr std::uint64_t kRoutineStream = 0x726f7574;  // "rout"
constexpr std::uint64_t kMotionStream = 0x6d6f766d;   // "movm"
constexpr std::uint64_t kEpisodeStream = 0x65706973;  // "epis"
constexpr std::uint64_t kAlertStream = 0x616c7274;    // "alrt"

// Margins around an episode that false / not-validated alerts keep clear
// of, so their backward-looking feature windows stay episode-free.
constexpr Timestamp kPreEpisodeMargin = 8 * kSecondsPerHour;
constexpr Timestamp kPostEpisodeMargin = 74 * kSecondsPerHour;
// Earliest alert offset from stream start; covers the 77 h feature window.
constexpr int kLeadInDays = 4;

std::uint64_t participant_key(const std::string& pid) { return fnv1a64(pid); }

double round1(double v) { return std::round(v * 10.0) / 10.0; }

int draw_in_range(Rng& rng, double mean, double sd, int lo, int hi) {
  for (;;) {
    const int v = static_cast<int>(std::lround(rng.normal(mean, sd)));
    if (v >= lo && v <= hi) return v;
  }
}

int draw_categorical(Rng& rng, const double* weights, int n) {
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += weights[i];
  double u = rng.uniform() * total;
  for (int i = 0; i < n; ++i) {
    u -= weights[i];
    if (u < 0.0) return i;
  }
  return n - 1;
}

// Block templates for the 24 hour-of-day room preference profiles.
struct HourTemplate {
  double rate;
  std::array<double, kNumChannels> rooms;
};

// Channel order: back_door, bathroom, bedroom, dining_room, fridge_door,
// hallway, kitchen, living_room, entrance_door, microwave, study.
const HourTemplate& hour_template(int hour) {
  static const HourTemplate night{
      1.6, {0.00, 0.10, 0.85, 0.00, 0.00, 0.05, 0.00, 0.00, 0.00, 0.00, 0.00}};
  static const HourTemplate morning{
      8.0, {0.01, 0.25, 0.15, 0.04, 0.05, 0.15, 0.25, 0.04, 0.01, 0.05, 0.00}};
  static const HourTemplate midday{
      6.0, {0.02, 0.07, 0.02, 0.08, 0.05, 0.15, 0.20, 0.26, 0.02, 0.02, 0.11}};
  static const HourTemplate lunch{
      8.0, {0.01, 0.05, 0.01, 0.18, 0.10, 0.05, 0.35, 0.13, 0.01, 0.10, 0.01}};
  static const HourTemplate afternoon{
      6.0, {0.04, 0.08, 0.04, 0.07, 0.03, 0.10, 0.10, 0.35, 0.04, 0.01, 0.14}};
  static const HourTemplate evening{
      9.0, {0.01, 0.08, 0.04, 0.12, 0.08, 0.10, 0.22, 0.28, 0.01, 0.05, 0.01}};
  static const HourTemplate late{
      3.0, {0.00, 0.20, 0.45, 0.00, 0.02, 0.13, 0.02, 0.18, 0.00, 0.00, 0.00}};
  if (hour <= 5) return night;
  if (hour <= 8) return morning;
  if (hour <= 11) return midday;
  if (hour <= 13) return lunch;
  if (hour <= 17) return afternoon;
  if (hour <= 21) return evening;
  return late;
}

int draw_room(Rng& rng, const std::array<double, kNumChannels>& probs) {
  return draw_categorical(rng, probs.data(), kNumChannels);
}

// Triangular envelope: 1 at the episode edges, 2 at the midpoint.
double episode_envelope(const Episode& ep, Timestamp t) {
  const double mid = 0.5 * static_cast<double>(ep.start + ep.end);
  const double half = 0.5 * static_cast<double>(ep.end - ep.start);
  const double dist = std::abs(static_cast<double>(t) - mid);
  return 1.0 + std::max(0.0, 1.0 - dist / half);
}

std::string participant_id_for(int index, int n) {
  const int width = n >= 100 ? 3 : 2;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "p%0*d", width, index + 1);
  return buf;
}

}  // namespace

void EpisodeSignature::validate() const {
  if (duration_hours < 1)
    throw ConfigError("episode signature: duration must be >= 1 hour");
  if (movement_multiplier < 1.0)
    throw ConfigError("episode signature: movement multiplier must be >= 1");
  if (entropy_mix < 0.0 || entropy_mix > 1.0)
    throw ConfigError("episode signature: entropy mix must lie in [0, 1]");
}

void CohortSpec::validate() const {
  if (n_participants < 3)
    throw ConfigError("cohort: need at least 3 participants for splits");
  if (days < kLeadInDays + 2)
    throw ConfigError("cohort: observation span too short");
  const double mix_sum = label_mix[0] + label_mix[1] + label_mix[2];
  if (std::abs(mix_sum - 1.0) > 1e-9)
    throw ConfigError("cohort: label mix must sum to 1");
  if (label_mix[0] <= 0.0)
    throw ConfigError("cohort: true label share must be positive");
  // Zero disables injection entirely; otherwise every participant gets at
  // least one episode.
  if (target_true_episodes != 0 && target_true_episodes < n_participants)
    throw ConfigError("cohort: need at least one episode per participant");
  if (slow_verification_fraction < 0.0 || slow_verification_fraction > 1.0)
    throw ConfigError("cohort: slow verification fraction out of [0, 1]");
  signature.validate();
}

std::vector<Participant> generate_cohort(const CohortSpec& spec) {
  spec.validate();
  Rng rng(mix_seed({spec.seed, kCohortStream}));
  std::vector<Participant> cohort;
  cohort.reserve(static_cast<size_t>(spec.n_participants));
  for (int i = 0; i < spec.n_participants; ++i) {
    Participant p;
    p.participant_id = participant_id_for(i, spec.n_participants);
    p.age = draw_in_range(rng, spec.age_mean, spec.age_sd, spec.age_min,
                          spec.age_max);
    p.mmse = draw_in_range(rng, spec.mmse_mean, spec.mmse_sd, spec.mmse_min,
                           spec.mmse_max);
    p.diagnosis = static_cast<Diagnosis>(
        draw_categorical(rng, spec.diagnosis_mix.data(), kNumDiagnoses));
    p.sex = rng.bernoulli(spec.male_share[static_cast<size_t>(p.diagnosis)])
                ? Sex::male
                : Sex::female;
    cohort.push_back(std::move(p));
  }
  return cohort;
}

RoutineProfile derive_routine(const Participant& participant,
                              const CohortSpec& spec) {
  Rng rng(mix_seed(
      {spec.seed, kRoutineStream, participant_key(participant.participant_id)}));
  RoutineProfile profile;
  const double activity_scale = std::exp(rng.normal(0.0, 0.15));
  for (int h = 0; h < 24; ++h) {
    const HourTemplate& tpl = hour_template(h);
    profile.hourly_rate[static_cast<size_t>(h)] = tpl.rate * activity_scale;
    auto& probs = profile.room_probs[static_cast<size_t>(h)];
    double total = 0.0;
    for (int c = 0; c < kNumChannels; ++c) {
      const double jitter = std::exp(rng.normal(0.0, 0.2));
      probs[static_cast<size_t>(c)] = tpl.rooms[static_cast<size_t>(c)] * jitter;
      total += probs[static_cast<size_t>(c)];
    }
    for (double& p : probs) p /= total;
  }
  profile.stay_probability = rng.uniform(0.45, 0.65);
  profile.pulse_base = rng.normal(72.0, 5.0);
  profile.systolic_base = rng.normal(125.0, 8.0);
  profile.diastolic_base = rng.normal(78.0, 6.0);
  profile.pulse_minute = static_cast<int>(rng.uniform_int(0, 59));
  return profile;
}

ParticipantStreams generate_event_stream(const Participant& participant,
                                         const CohortSpec& spec) {
  const RoutineProfile profile = derive_routine(participant, spec);
  Rng rng(mix_seed(
      {spec.seed, kMotionStream, participant_key(participant.participant_id)}));
  ParticipantStreams stream;
  int room = static_cast<int>(Channel::bedroom);
  for (int day = 0; day < spec.days; ++day) {
    for (int hour = 0; hour < 24; ++hour) {
      const Timestamp hour_start =
          spec.start_time + day * kSecondsPerDay + hour * kSecondsPerHour;
      // Day rollover: the chain re-draws from the night profile, so the
      // room state cannot stay stranded in a daytime room overnight.
      if (hour == 0)
        room = draw_room(rng, profile.room_probs[0]);
      // Movement events: Poisson count, first-order room transitions.
      const int n_events =
          rng.poisson(profile.hourly_rate[static_cast<size_t>(hour)]);
      std::vector<Timestamp> times(static_cast<size_t>(n_events));
      for (auto& t : times)
        t = hour_start + rng.uniform_int(0, kSecondsPerHour - 1);
      std::sort(times.begin(), times.end());
      for (Timestamp t : times) {
        if (!rng.bernoulli(profile.stay_probability))
          room = draw_room(rng, profile.room_probs[static_cast<size_t>(hour)]);
        stream.events.push_back(
            SensorEvent{participant.participant_id, t,
                        static_cast<Channel>(room)});
      }
      // Scheduled hourly pulse reading.
      const Timestamp pulse_t =
          hour_start + profile.pulse_minute * kSecondsPerMinute;
      stream.vitals.push_back(VitalReading{
          participant.participant_id, pulse_t, VitalKind::pulse,
          std::max(30.0, round1(rng.normal(profile.pulse_base, 3.0)))});
    }
    // Blood pressure pairs, morning and evening.
    for (int slot : {8, 20}) {
      const Timestamp bp_t = spec.start_time + day * kSecondsPerDay +
                             slot * kSecondsPerHour +
                             rng.uniform_int(0, 29) * kSecondsPerMinute;
      stream.vitals.push_back(VitalReading{
          participant.participant_id, bp_t, VitalKind::systolic,
          std::max(60.0, round1(rng.normal(profile.systolic_base, 4.0)))});
      stream.vitals.push_back(VitalReading{
          participant.participant_id, bp_t, VitalKind::diastolic,
          std::max(40.0, round1(rng.normal(profile.diastolic_base, 3.0)))});
    }
  }
  std::stable_sort(stream.vitals.begin(), stream.vitals.end(),
                   [](const VitalReading& a, const VitalReading& b) {
                     return a.timestamp < b.timestamp;
                   });
  return stream;
}

void apply_episode(ParticipantStreams& stream, const Episode& episode,
                   const RoutineProfile& profile, Rng& rng) {
  const EpisodeSignature& sig = episode.signature;
  // Extra movement with partially flattened room choice.
  for (Timestamp hour = episode.start; hour < episode.end;
       hour += kSecondsPerHour) {
    const int hod = local_hour_of_day(hour);
    const double extra_rate = profile.hourly_rate[static_cast<size_t>(hod)] *
                              (sig.movement_multiplier - 1.0);
    const int n_extra = rng.poisson(extra_rate);
    for (int k = 0; k < n_extra; ++k) {
      const Timestamp t = hour + rng.uniform_int(0, kSecondsPerHour - 1);
      const int room =
          rng.bernoulli(sig.entropy_mix)
              ? static_cast<int>(rng.uniform_int(0, kNumChannels - 1))
              : draw_room(rng, profile.room_probs[static_cast<size_t>(hod)]);
      stream.events.push_back(SensorEvent{episode.participant_id, t,
                                          static_cast<Channel>(room)});
    }
  }
  // Elevate scheduled vitals inside the episode.
  for (VitalReading& v : stream.vitals) {
    if (v.timestamp < episode.start || v.timestamp >= episode.end) continue;
    const double env = episode_envelope(episode, v.timestamp);
    switch (v.kind) {
      case VitalKind::pulse: v.value = round1(v.value + env * sig.pulse_offset); break;
      case VitalKind::systolic:
        v.value = round1(v.value + env * sig.systolic_offset);
        break;
      case VitalKind::diastolic:
        v.value = round1(v.value + env * sig.diastolic_offset);
        break;
    }
  }
  // Ten-minute pulse burst for the duration of the episode.
  for (Timestamp t = episode.start + 5 * kSecondsPerMinute; t < episode.end;
       t += 10 * kSecondsPerMinute) {
    const double env = episode_envelope(episode, t);
    stream.vitals.push_back(VitalReading{
        episode.participant_id, t, VitalKind::pulse,
        std::max(30.0, round1(rng.normal(
                     profile.pulse_base + env * sig.pulse_offset, 4.0)))});
  }
  // One agitation-triggered blood pressure pair near the peak.
  const Timestamp peak = episode.start + (episode.end - episode.start) / 2;
  stream.vitals.push_back(VitalReading{
      episode.participant_id, peak, VitalKind::systolic,
      std::max(60.0, round1(rng.normal(
                   profile.systolic_base + 2.0 * sig.systolic_offset, 3.0)))});
  stream.vitals.push_back(VitalReading{
      episode.participant_id, peak, VitalKind::diastolic,
      std::max(40.0, round1(rng.normal(
                   profile.diastolic_base + 2.0 * sig.diastolic_offset, 3.0)))});
}

std::pair<ParticipantStreams, std::vector<Episode>> inject_episodes(
    ParticipantStreams stream, const Participant& participant,
    const CohortSpec& spec) {
  Rng rng(mix_seed(
      {spec.seed, kEpisodeStream, participant_key(participant.participant_id)}));
  const RoutineProfile profile = derive_routine(participant, spec);

  if (spec.target_true_episodes == 0) return {std::move(stream), {}};
  const double extra_rate =
      static_cast<double>(spec.target_true_episodes) / spec.n_participants -
      1.0;
  const int n_episodes = 1 + rng.poisson(std::max(0.0, extra_rate));

  // Evening-skewed placement (weight 2 for start hours 15-21),
  // non-overlapping with generous spacing.
  std::array<double, 24> hour_weights;
  for (int h = 0; h < 24; ++h)
    hour_weights[static_cast<size_t>(h)] = (h >= 15 && h <= 21) ? 2.0 : 1.0;
  std::vector<Episode> episodes;
  const Timestamp t_min = spec.start_time + kLeadInDays * kSecondsPerDay;
  const Timestamp t_max =
      spec.start_time + (spec.days - 1) * kSecondsPerDay;
  for (int k = 0; k < n_episodes; ++k) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const int day = static_cast<int>(
          rng.uniform_int(kLeadInDays, spec.days - 2));
      const int hour = draw_categorical(rng, hour_weights.data(), 24);
      const int duration =
          spec.signature.duration_hours +
          static_cast<int>(rng.uniform_int(0, 2));
      Episode ep;
      ep.participant_id = participant.participant_id;
      ep.start = spec.start_time + day * kSecondsPerDay +
                 hour * kSecondsPerHour;
      ep.end = ep.start + duration * kSecondsPerHour;
      ep.signature = spec.signature;
      ep.signature.duration_hours = duration;
      if (ep.start < t_min || ep.end > t_max) continue;
      bool clear = true;
      for (const Episode& other : episodes) {
        if (ep.start < other.end + kPostEpisodeMargin + kPreEpisodeMargin &&
            other.start < ep.end + kPostEpisodeMargin + kPreEpisodeMargin) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      episodes.push_back(std::move(ep));
      break;
    }
  }
  std::sort(episodes.begin(), episodes.end(),
            [](const Episode& a, const Episode& b) { return a.start < b.start; });

  for (const Episode& ep : episodes) apply_episode(stream, ep, profile, rng);
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const SensorEvent& a, const SensorEvent& b) {
                     return a.timestamp < b.timestamp;
                   });
  std::stable_sort(stream.vitals.begin(), stream.vitals.end(),
                   [](const VitalReading& a, const VitalReading& b) {
                     return a.timestamp < b.timestamp;
                   });
  return {std::move(stream), std::move(episodes)};
}

std::vector<AgitationAlert> generate_alert_log(
    const std::vector<Episode>& episodes, const CohortSpec& spec) {
  spec.validate();
  Rng rng(mix_seed({spec.seed, kAlertStream}));

  std::map<std::string, std::vector<const Episode*>> by_pid;
  for (const Episode& ep : episodes) by_pid[ep.participant_id].push_back(&ep);
  std::vector<std::string> pids;
  for (const auto& [pid, eps] : by_pid) pids.push_back(pid);
  if (pids.empty()) return {};

  const auto n_true = static_cast<std::int64_t>(episodes.size());
  const auto total = static_cast<std::int64_t>(
      std::llround(static_cast<double>(n_true) / spec.label_mix[0]));
  const auto n_false = static_cast<std::int64_t>(
      std::llround(static_cast<double>(total) * spec.label_mix[1]));
  const auto n_nv = std::max<std::int64_t>(0, total - n_true - n_false);

  const auto draw_latency = [&rng, &spec]() -> Timestamp {
    if (rng.bernoulli(spec.slow_verification_fraction))
      return rng.uniform_int(73 * kSecondsPerHour, 120 * kSecondsPerHour);
    return rng.uniform_int(1 * kSecondsPerHour, 70 * kSecondsPerHour);
  };

  std::vector<AgitationAlert> alerts;
  alerts.reserve(static_cast<size_t>(total));

  // One true alert in the final hour of each episode.
  for (const Episode& ep : episodes) {
    AgitationAlert a;
    a.participant_id = ep.participant_id;
    a.raised_at = ep.end - 30 * kSecondsPerMinute;
    a.status = AlertStatus::validated_true;
    a.validated_at = a.raised_at + draw_latency();
    alerts.push_back(std::move(a));
  }

  // False and not-validated alerts, round-robin over participants, placed
  // clear of every episode's influence window.
  const Timestamp t_min = spec.start_time + kLeadInDays * kSecondsPerDay;
  const Timestamp t_max = spec.start_time + (spec.days - 1) * kSecondsPerDay;
  const auto place_clear = [&](const std::string& pid) -> Timestamp {
    for (int attempt = 0; attempt < 4000; ++attempt) {
      const Timestamp t =
          hour_floor(rng.uniform_int(t_min, t_max)) + 15 * kSecondsPerMinute;
      bool clear = true;
      for (const Episode* ep : by_pid[pid]) {
        if (t >= ep->start - kPreEpisodeMargin &&
            t < ep->end + kPostEpisodeMargin) {
          clear = false;
          break;
        }
      }
      if (clear) return t;
    }
    throw Error("alert log: could not place a non-episode alert for " + pid);
  };

  for (std::int64_t k = 0; k < n_false + n_nv; ++k) {
    const std::string& pid = pids[static_cast<size_t>(k) % pids.size()];
    AgitationAlert a;
    a.participant_id = pid;
    a.raised_at = place_clear(pid);
    if (k < n_false) {
      a.status = AlertStatus::validated_false;
      a.validated_at = a.raised_at + draw_latency();
    } else {
      a.status = AlertStatus::not_validated;
    }
    alerts.push_back(std::move(a));
  }

  std::sort(alerts.begin(), alerts.end(),
            [](const AgitationAlert& a, const AgitationAlert& b) {
              return std::tie(a.participant_id, a.raised_at) <
                     std::tie(b.participant_id, b.raised_at);
            });
  for (size_t i = 0; i < alerts.size(); ++i) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "a%05zu", i + 1);
    alerts[i].alert_id = buf;
  }
  return alerts;
}

SynthDataset generate_dataset(const CohortSpec& spec) {
  spec.validate();
  SynthDataset ds;
  ds.participants = generate_cohort(spec);
  for (const Participant& p : ds.participants) {
    auto stream = generate_event_stream(p, spec);
    auto [perturbed, episodes] = inject_episodes(std::move(stream), p, spec);
    ds.log.streams[p.participant_id] = std::move(perturbed);
    ds.episodes.insert(ds.episodes.end(), episodes.begin(), episodes.end());
  }
  std::sort(ds.episodes.begin(), ds.episodes.end(),
            [](const Episode& a, const Episode& b) {
              return std::tie(a.participant_id, a.start) <
                     std::tie(b.participant_id, b.start);
            });
  ds.log.alerts = generate_alert_log(ds.episodes, spec);
  return ds;
}

void write_dataset(const std::string& dir, const SynthDataset& dataset,
                   const std::string& provenance) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory: " + dir);

  write_event_log(dir + "/events.log", dataset.log, provenance);

  std::ofstream meta(dir + "/cohort.meta", std::ios::trunc);
  if (!meta) throw IoError("cannot write cohort.meta in " + dir);
  if (!provenance.empty()) meta << "# " << provenance << '\n';
  meta << "participant_id,age,mmse,sex,diagnosis\n";
  for (const Participant& p : dataset.participants) {
    meta << p.participant_id << ',' << p.age << ',' << p.mmse << ','
         << sex_name(p.sex) << ',' << diagnosis_name(p.diagnosis) << '\n';
  }

  std::ofstream gt(dir + "/ground_truth.episodes", std::ios::trunc);
  if (!gt) throw IoError("cannot write ground_truth.episodes in " + dir);
  if (!provenance.empty()) gt << "# " << provenance << '\n';
  gt << "participant_id,start,end\n";
  for (const Episode& ep : dataset.episodes) {
    gt << ep.participant_id << ',' << format_timestamp(ep.start) << ','
       << format_timestamp(ep.end) << '\n';
  }
}

std::vector<Participant> read_cohort_meta(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open cohort meta: " + path);
  std::vector<Participant> cohort;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' ||
        line.rfind("participant_id", 0) == 0)
      continue;
    std::vector<std::string> f;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        f.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    }
    if (f.size() != 5) throw ParseError("cohort meta row needs 5 fields");
    Participant p;
    p.participant_id = f[0];
    p.age = std::stoi(f[1]);
    p.mmse = std::stoi(f[2]);
    p.sex = sex_from_name(f[3]);
    p.diagnosis = diagnosis_from_name(f[4]);
    cohort.push_back(std::move(p));
  }
  return cohort;
}

std::vector<Episode> read_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ground truth: " + path);
  std::vector<Episode> episodes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' ||
        line.rfind("participant_id", 0) == 0)
      continue;
    const size_t c1 = line.find(',');
    const size_t c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ParseError("ground truth row needs 3 fields");
    Episode ep;
    ep.participant_id = line.substr(0, c1);
    ep.start = parse_timestamp(line.substr(c1 + 1, c2 - c1 - 1));
    ep.end = parse_timestamp(line.substr(c2 + 1));
    episodes.push_back(std::move(ep));
  }
  return episodes;
}

}  // namespace agirisk
