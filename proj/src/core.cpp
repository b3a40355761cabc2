#include "agirisk/core.hpp"

#include <charconv>
#include <cstdio>

#include "agirisk/error.hpp"

namespace agirisk {
namespace {

constexpr std::array<std::string_view, kNumChannels> kChannelNames = {
    "back_door",  "bathroom",    "bedroom",       "dining_room",
    "fridge_door", "hallway",    "kitchen",       "living_room",
    "entrance_door", "microwave", "study",
};

constexpr std::array<std::string_view, kNumVitalKinds> kVitalNames = {
    "pulse", "systolic", "diastolic"};

constexpr std::array<std::string_view, 3> kStatusNames = {
    "validated_true", "validated_false", "not_validated"};

constexpr std::array<std::string_view, kNumDiagnoses> kDiagnosisNames = {
    "alzheimers", "parkinsons", "frontotemporal", "vascular", "other"};

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_positive_value(std::string_view text, std::string_view line) {
  double value = 0.0;
  const char* first = text.data();
  auto [ptr, ec] = std::from_chars(first, first + text.size(), value);
  if (ec != std::errc{} || ptr != first + text.size())
    throw ParseError("malformed vital value '" + std::string(text) +
                     "' in record: " + std::string(line));
  if (!(value > 0.0))
    throw ParseError("non-positive vital value '" + std::string(text) +
                     "' in record: " + std::string(line));
  return value;
}

}  // namespace

std::string_view channel_name(Channel c) {
  return kChannelNames[static_cast<size_t>(c)];
}

Channel channel_from_name(std::string_view name) {
  for (size_t i = 0; i < kChannelNames.size(); ++i)
    if (kChannelNames[i] == name) return static_cast<Channel>(i);
  throw ParseError("unknown channel: '" + std::string(name) + "'");
}

const std::array<Channel, kNumChannels>& all_channels() {
  static const std::array<Channel, kNumChannels> channels = [] {
    std::array<Channel, kNumChannels> out{};
    for (int i = 0; i < kNumChannels; ++i) out[i] = static_cast<Channel>(i);
    return out;
  }();
  return channels;
}

std::string_view vital_kind_name(VitalKind k) {
  return kVitalNames[static_cast<size_t>(k)];
}

VitalKind vital_kind_from_name(std::string_view name) {
  for (size_t i = 0; i < kVitalNames.size(); ++i)
    if (kVitalNames[i] == name) return static_cast<VitalKind>(i);
  throw ParseError("unknown vital kind: '" + std::string(name) + "'");
}

const VitalRanges::Interval& VitalRanges::of(VitalKind k) const {
  switch (k) {
    case VitalKind::pulse: return pulse;
    case VitalKind::systolic: return systolic;
    default: return diastolic;
  }
}

void VitalRanges::validate() const {
  for (int i = 0; i < kNumVitalKinds; ++i) {
    const auto& iv = of(static_cast<VitalKind>(i));
    if (!(iv.low < iv.high))
      throw ConfigError("vital range low >= high for " +
                        std::string(vital_kind_name(static_cast<VitalKind>(i))));
  }
}

bool check_vital_range(const VitalReading& reading, const VitalRanges& ranges) {
  const auto& iv = ranges.of(reading.kind);
  return iv.low <= reading.value && reading.value <= iv.high;
}

std::string_view alert_status_name(AlertStatus s) {
  return kStatusNames[static_cast<size_t>(s)];
}

AlertStatus alert_status_from_name(std::string_view name) {
  for (size_t i = 0; i < kStatusNames.size(); ++i)
    if (kStatusNames[i] == name) return static_cast<AlertStatus>(i);
  throw ParseError("unknown alert status: '" + std::string(name) + "'");
}

void AgitationAlert::validate() const {
  const bool nv = status == AlertStatus::not_validated;
  if (nv != !validated_at.has_value())
    throw ParseError("alert " + alert_id +
                     ": validated_at must be absent iff status is not_validated");
  if (validated_at && *validated_at < raised_at)
    throw ParseError("alert " + alert_id + ": validated_at before raised_at");
}

std::string_view diagnosis_name(Diagnosis d) {
  return kDiagnosisNames[static_cast<size_t>(d)];
}

Diagnosis diagnosis_from_name(std::string_view name) {
  for (size_t i = 0; i < kDiagnosisNames.size(); ++i)
    if (kDiagnosisNames[i] == name) return static_cast<Diagnosis>(i);
  throw ParseError("unknown diagnosis: '" + std::string(name) + "'");
}

std::string_view sex_name(Sex s) { return s == Sex::male ? "male" : "female"; }

Sex sex_from_name(std::string_view name) {
  if (name == "male") return Sex::male;
  if (name == "female") return Sex::female;
  throw ParseError("unknown sex: '" + std::string(name) + "'");
}

std::string format_value(double v) {
  // Shortest form first; widen until the text round-trips exactly.
  char buf[32];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = 0.0;
    std::from_chars(buf, buf + std::char_traits<char>::length(buf), back);
    if (back == v) break;
  }
  return buf;
}

ParsedRecord parse_event_record(std::string_view line) {
  const auto fields = split_csv(line);
  if (fields.size() < 4)
    throw ParseError("record has fewer than 4 fields: " + std::string(line));
  const std::string_view pid = fields[0];
  if (pid.empty())
    throw ParseError("empty participant_id in record: " + std::string(line));
  const Timestamp ts = parse_timestamp(fields[1]);
  const std::string_view kind = fields[2];

  if (kind == "motion") {
    if (fields.size() != 4)
      throw ParseError("motion record needs 4 fields: " + std::string(line));
    return SensorEvent{std::string(pid), ts, channel_from_name(fields[3])};
  }
  if (kind == "vital") {
    if (fields.size() != 5)
      throw ParseError("vital record needs 5 fields: " + std::string(line));
    return VitalReading{std::string(pid), ts, vital_kind_from_name(fields[3]),
                        parse_positive_value(fields[4], line)};
  }
  if (kind == "alert") {
    if (fields.size() != 5 && fields.size() != 6)
      throw ParseError("alert record needs 5 or 6 fields: " +
                       std::string(line));
    AgitationAlert alert;
    alert.alert_id = std::string(fields[3]);
    alert.participant_id = std::string(pid);
    alert.raised_at = ts;
    alert.status = alert_status_from_name(fields[4]);
    if (fields.size() == 6) alert.validated_at = parse_timestamp(fields[5]);
    alert.validate();
    return alert;
  }
  throw ParseError("unknown record kind '" + std::string(kind) +
                   "' in record: " + std::string(line));
}

std::string serialize_record(const SensorEvent& e) {
  return e.participant_id + "," + format_timestamp(e.timestamp) + ",motion," +
         std::string(channel_name(e.channel));
}

std::string serialize_record(const VitalReading& r) {
  return r.participant_id + "," + format_timestamp(r.timestamp) + ",vital," +
         std::string(vital_kind_name(r.kind)) + "," + format_value(r.value);
}

std::string serialize_record(const AgitationAlert& a) {
  std::string out = a.participant_id + "," + format_timestamp(a.raised_at) +
                    ",alert," + a.alert_id + "," +
                    std::string(alert_status_name(a.status));
  if (a.validated_at) out += "," + format_timestamp(*a.validated_at);
  return out;
}

std::string serialize_record(const ParsedRecord& r) {
  return std::visit([](const auto& rec) { return serialize_record(rec); }, r);
}

}  // namespace agirisk
