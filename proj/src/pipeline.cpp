#include "agirisk/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <tuple>

#include "agirisk/error.hpp"

namespace agirisk {
namespace {

constexpr Timestamp kPhysioWindow = 72 * kSecondsPerHour;
constexpr Timestamp kAlertWindow = 24 * kSecondsPerHour;
constexpr Timestamp kVerifyLatencyLimit = 72 * kSecondsPerHour;

template <typename Rec>
auto window_range(const std::vector<Rec>& recs, Timestamp begin,
                  Timestamp end) {
  const auto lo = std::lower_bound(
      recs.begin(), recs.end(), begin,
      [](const Rec& r, Timestamp t) { return r.timestamp < t; });
  const auto hi = std::lower_bound(
      lo, recs.end(), end,
      [](const Rec& r, Timestamp t) { return r.timestamp < t; });
  return std::pair{lo, hi};
}

double median_of(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_double(const std::string& text, const char* what) {
  double v = 0.0;
  const char* first = text.data();
  auto [ptr, ec] = std::from_chars(first, first + text.size(), v);
  if (ec != std::errc{} || ptr != first + text.size())
    throw ParseError(std::string("malformed ") + what + ": '" + text + "'");
  return v;
}

}  // namespace

const std::array<std::string, kNumFeatures>& feature_layout() {
  static const std::array<std::string, kNumFeatures> names = [] {
    std::array<std::string, kNumFeatures> out;
    int idx = 0;
    for (Channel c : all_channels()) out[idx++] = std::string(channel_name(c));
    for (int k = 0; k < kNumVitalKinds; ++k) {
      const std::string kind(vital_kind_name(static_cast<VitalKind>(k)));
      out[idx++] = kind + "_min";
      out[idx++] = kind + "_max";
      out[idx++] = kind + "_mean";
    }
    out[idx++] = "pulse_low";
    out[idx++] = "pulse_high";
    out[idx++] = "bp_low";
    out[idx++] = "bp_high";
    return out;
  }();
  return names;
}

EventLog read_event_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open event log: " + path);
  EventLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    ParsedRecord rec = parse_event_record(line);
    if (auto* e = std::get_if<SensorEvent>(&rec)) {
      log.streams[e->participant_id].events.push_back(std::move(*e));
    } else if (auto* v = std::get_if<VitalReading>(&rec)) {
      log.streams[v->participant_id].vitals.push_back(std::move(*v));
    } else {
      log.alerts.push_back(std::move(std::get<AgitationAlert>(rec)));
    }
  }
  for (auto& [pid, streams] : log.streams) {
    std::stable_sort(streams.events.begin(), streams.events.end(),
                     [](const SensorEvent& a, const SensorEvent& b) {
                       return a.timestamp < b.timestamp;
                     });
    std::stable_sort(streams.vitals.begin(), streams.vitals.end(),
                     [](const VitalReading& a, const VitalReading& b) {
                       return a.timestamp < b.timestamp;
                     });
  }
  return log;
}

void write_event_log(const std::string& path, const EventLog& log,
                     const std::string& provenance) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open event log for writing: " + path);
  if (!provenance.empty()) out << "# " << provenance << '\n';
  // Alerts are grouped with their participant's stream, merged by time.
  std::map<std::string, std::vector<const AgitationAlert*>> alerts_by_pid;
  for (const auto& a : log.alerts)
    alerts_by_pid[a.participant_id].push_back(&a);

  for (const auto& [pid, streams] : log.streams) {
    std::vector<std::pair<Timestamp, std::string>> lines;
    lines.reserve(streams.events.size() + streams.vitals.size());
    for (const auto& e : streams.events)
      lines.emplace_back(e.timestamp, serialize_record(e));
    for (const auto& v : streams.vitals)
      lines.emplace_back(v.timestamp, serialize_record(v));
    if (auto it = alerts_by_pid.find(pid); it != alerts_by_pid.end())
      for (const auto* a : it->second)
        lines.emplace_back(a->raised_at, serialize_record(*a));
    std::stable_sort(lines.begin(), lines.end(),
                     [](const auto& a, const auto& b) {
                       return a.first < b.first;
                     });
    for (const auto& [ts, text] : lines) out << text << '\n';
  }
  if (!out) throw IoError("failed writing event log: " + path);
}

Vector aggregate_hourly(const std::vector<SensorEvent>& events,
                        Timestamp hour) {
  Vector counts = Vector::Zero(kNumChannels);
  const auto [lo, hi] = window_range(events, hour, hour + kSecondsPerHour);
  for (auto it = lo; it != hi; ++it) counts[channel_index(it->channel)] += 1.0;
  return counts;
}

Vector physio_aggregates(const std::vector<VitalReading>& readings,
                         Timestamp hour, const ImputeValues& impute) {
  const auto [lo, hi] = window_range(readings, hour - kPhysioWindow, hour);
  std::array<std::vector<double>, kNumVitalKinds> by_kind;
  for (auto it = lo; it != hi; ++it)
    by_kind[static_cast<size_t>(it->kind)].push_back(it->value);

  const std::array<double, kNumVitalKinds> fallback = {
      impute.pulse, impute.systolic, impute.diastolic};
  Vector out(kNumPhysioFeatures);
  for (int k = 0; k < kNumVitalKinds; ++k) {
    const auto& vals = by_kind[static_cast<size_t>(k)];
    if (vals.empty()) {
      out[3 * k] = out[3 * k + 1] = out[3 * k + 2] =
          fallback[static_cast<size_t>(k)];
      continue;
    }
    double lo_v = vals[0], hi_v = vals[0], sum = 0.0;
    for (double v : vals) {
      lo_v = std::min(lo_v, v);
      hi_v = std::max(hi_v, v);
      sum += v;
    }
    out[3 * k] = lo_v;
    out[3 * k + 1] = hi_v;
    out[3 * k + 2] = sum / static_cast<double>(vals.size());
  }
  return out;
}

Vector alert_counts(const std::vector<VitalReading>& readings, Timestamp hour,
                    const VitalRanges& ranges) {
  Vector out = Vector::Zero(kNumAlertFeatures);
  const auto [lo, hi] = window_range(readings, hour - kAlertWindow, hour);
  for (auto it = lo; it != hi; ++it) {
    const auto& iv = ranges.of(it->kind);
    const bool below = it->value < iv.low;
    const bool above = it->value > iv.high;
    if (!below && !above) continue;
    if (it->kind == VitalKind::pulse) {
      out[below ? 0 : 1] += 1.0;
    } else {
      out[below ? 2 : 3] += 1.0;
    }
  }
  return out;
}

std::vector<AgitationAlert> filter_alerts(
    const std::vector<AgitationAlert>& alerts) {
  std::vector<AgitationAlert> kept;
  for (const auto& a : alerts) {
    if (a.status == AlertStatus::not_validated) continue;
    if (!a.validated_at) continue;
    if (*a.validated_at - a.raised_at > kVerifyLatencyLimit) continue;
    kept.push_back(a);
  }
  return kept;
}

std::array<LabeledAnchor, kNumTimesteps> expand_labels(
    const AgitationAlert& alert) {
  const Timestamp h = hour_floor(alert.raised_at);
  const int label =
      alert.status == AlertStatus::validated_true ? kAgitation : kNoAgitation;
  std::array<LabeledAnchor, kNumTimesteps> anchors;
  for (int k = 0; k < kNumTimesteps; ++k) {
    anchors[static_cast<size_t>(k)] =
        LabeledAnchor{alert.participant_id,
                      h - (kNumTimesteps - 1 - k) * kSecondsPerHour, label,
                      alert.alert_id, alert.raised_at};
  }
  return anchors;
}

ImputeValues participant_medians(const std::vector<VitalReading>& readings,
                                 const ImputeValues& population) {
  std::array<std::vector<double>, kNumVitalKinds> by_kind;
  for (const auto& r : readings)
    by_kind[static_cast<size_t>(r.kind)].push_back(r.value);
  ImputeValues out = population;
  if (!by_kind[0].empty()) out.pulse = median_of(by_kind[0]);
  if (!by_kind[1].empty()) out.systolic = median_of(by_kind[1]);
  if (!by_kind[2].empty()) out.diastolic = median_of(by_kind[2]);
  return out;
}

std::optional<std::string> coverage_gap(const LabeledAnchor& anchor,
                                        const ParticipantStreams& streams) {
  if (streams.events.empty() && streams.vitals.empty())
    return "no stream data for participant";
  Timestamp first = std::numeric_limits<Timestamp>::max();
  Timestamp last = std::numeric_limits<Timestamp>::min();
  if (!streams.events.empty()) {
    first = std::min(first, streams.events.front().timestamp);
    last = std::max(last, streams.events.back().timestamp);
  }
  if (!streams.vitals.empty()) {
    first = std::min(first, streams.vitals.front().timestamp);
    last = std::max(last, streams.vitals.back().timestamp);
  }
  const Timestamp need_begin =
      anchor.anchor_hour - (kNumTimesteps - 1) * kSecondsPerHour - kPhysioWindow;
  const Timestamp need_end = anchor.anchor_hour + kSecondsPerHour;
  if (hour_floor(first) > need_begin)
    return "stream starts after required window begin " +
           format_timestamp(need_begin);
  if (hour_floor(last) + kSecondsPerHour < need_end)
    return "stream ends before required window end " +
           format_timestamp(need_end);
  return std::nullopt;
}

FeatureSample build_sample(const LabeledAnchor& anchor,
                           const ParticipantStreams& streams,
                           const VitalRanges& ranges,
                           const ImputeValues& impute) {
  FeatureSample sample;
  sample.participant_id = anchor.participant_id;
  sample.anchor_hour = anchor.anchor_hour;
  sample.label = anchor.label;
  sample.parent_alert_id = anchor.parent_alert_id;
  sample.parent_raised_at = anchor.parent_raised_at;
  sample.matrix = Matrix(kNumTimesteps, kNumFeatures);
  for (int t = 0; t < kNumTimesteps; ++t) {
    const Timestamp row_hour =
        anchor.anchor_hour - (kNumTimesteps - 1 - t) * kSecondsPerHour;
    sample.matrix.block(t, 0, 1, kNumChannels) =
        aggregate_hourly(streams.events, row_hour).transpose();
    sample.matrix.block(t, kNumChannels, 1, kNumPhysioFeatures) =
        physio_aggregates(streams.vitals, row_hour, impute).transpose();
    sample.matrix.block(t, kNumChannels + kNumPhysioFeatures, 1,
                        kNumAlertFeatures) =
        alert_counts(streams.vitals, row_hour, ranges).transpose();
  }
  return sample;
}

FeaturizeResult featurize(const EventLog& log, const VitalRanges& ranges) {
  ranges.validate();
  FeaturizeResult result;
  std::map<std::string, ImputeValues> imputes;
  for (const auto& [pid, streams] : log.streams)
    imputes[pid] = participant_medians(streams.vitals);

  static const ParticipantStreams kEmptyStreams;
  for (const AgitationAlert& alert : filter_alerts(log.alerts)) {
    const auto it = log.streams.find(alert.participant_id);
    const ParticipantStreams& streams =
        it != log.streams.end() ? it->second : kEmptyStreams;
    const ImputeValues impute =
        it != log.streams.end() ? imputes[alert.participant_id] : ImputeValues{};
    for (const LabeledAnchor& anchor : expand_labels(alert)) {
      if (auto gap = coverage_gap(anchor, streams)) {
        result.exclusions.push_back(Exclusion{anchor, *gap});
        continue;
      }
      result.samples.push_back(build_sample(anchor, streams, ranges, impute));
    }
  }
  std::stable_sort(result.samples.begin(), result.samples.end(),
                   [](const FeatureSample& a, const FeatureSample& b) {
                     return std::tie(a.participant_id, a.anchor_hour,
                                     a.parent_alert_id) <
                            std::tie(b.participant_id, b.anchor_hour,
                                     b.parent_alert_id);
                   });
  std::stable_sort(result.exclusions.begin(), result.exclusions.end(),
                   [](const Exclusion& a, const Exclusion& b) {
                     return std::tie(a.anchor.participant_id,
                                     a.anchor.anchor_hour,
                                     a.anchor.parent_alert_id) <
                            std::tie(b.anchor.participant_id,
                                     b.anchor.anchor_hour,
                                     b.anchor.parent_alert_id);
                   });
  return result;
}

Normalizer fit_normalizer(const std::vector<FeatureSample>& train_samples) {
  if (train_samples.empty())
    throw Error("fit_normalizer: empty training set");
  Normalizer norm;
  norm.feat_min =
      Vector::Constant(kNumFeatures, std::numeric_limits<double>::infinity());
  norm.feat_max =
      Vector::Constant(kNumFeatures, -std::numeric_limits<double>::infinity());
  for (const FeatureSample& s : train_samples) {
    norm.feat_min = norm.feat_min.cwiseMin(s.matrix.colwise().minCoeff().transpose());
    norm.feat_max = norm.feat_max.cwiseMax(s.matrix.colwise().maxCoeff().transpose());
  }
  return norm;
}

Matrix apply_normalizer(const Normalizer& norm, const Matrix& sample) {
  Matrix out(sample.rows(), sample.cols());
  for (Index c = 0; c < sample.cols(); ++c) {
    const double span = norm.feat_max[c] - norm.feat_min[c];
    if (span > 0.0) {
      out.col(c) = (sample.col(c).array() - norm.feat_min[c]) / span;
    } else {
      out.col(c).setZero();  // constant feature maps to 0
    }
  }
  return out;
}

void write_samples(const std::string& path,
                   const std::vector<FeatureSample>& samples,
                   const std::string& provenance) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open sample file for writing: " + path);
  out << "# agirisk-samples v1\n";
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "# layout:";
  const auto& layout = feature_layout();
  for (size_t i = 0; i < layout.size(); ++i)
    out << (i == 0 ? " " : ",") << layout[i];
  out << "\nparticipant_id,anchor,label,parent_alert_id,parent_raised_at,"
         "values[144 row-major]\n";
  for (const FeatureSample& s : samples) {
    out << s.participant_id << ',' << format_timestamp(s.anchor_hour) << ','
        << s.label << ',' << s.parent_alert_id << ','
        << format_timestamp(s.parent_raised_at);
    for (Index r = 0; r < s.matrix.rows(); ++r)
      for (Index c = 0; c < s.matrix.cols(); ++c)
        out << ',' << format_value(s.matrix(r, c));
    out << '\n';
  }
  if (!out) throw IoError("failed writing sample file: " + path);
}

std::vector<FeatureSample> read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open sample file: " + path);
  std::vector<FeatureSample> samples;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("participant_id", 0) == 0)
      continue;
    const auto fields = split_line(line);
    if (fields.size() != 5 + kNumTimesteps * kNumFeatures)
      throw ParseError("sample record has " + std::to_string(fields.size()) +
                       " fields, expected " +
                       std::to_string(5 + kNumTimesteps * kNumFeatures));
    FeatureSample s;
    s.participant_id = fields[0];
    s.anchor_hour = parse_timestamp(fields[1]);
    s.label = fields[2] == "1" ? kAgitation : kNoAgitation;
    s.parent_alert_id = fields[3];
    s.parent_raised_at = parse_timestamp(fields[4]);
    s.matrix = Matrix(kNumTimesteps, kNumFeatures);
    size_t idx = 5;
    for (int r = 0; r < kNumTimesteps; ++r)
      for (int c = 0; c < kNumFeatures; ++c)
        s.matrix(r, c) = parse_double(fields[idx++], "feature value");
    samples.push_back(std::move(s));
  }
  return samples;
}

void write_exclusions(const std::string& path,
                      const std::vector<Exclusion>& exclusions,
                      const std::string& provenance) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open exclusion log for writing: " + path);
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "participant_id,anchor,parent_alert_id,reason\n";
  for (const Exclusion& e : exclusions) {
    out << e.anchor.participant_id << ','
        << format_timestamp(e.anchor.anchor_hour) << ','
        << e.anchor.parent_alert_id << ',' << e.reason << '\n';
  }
  if (!out) throw IoError("failed writing exclusion log: " + path);
}

}  // namespace agirisk
