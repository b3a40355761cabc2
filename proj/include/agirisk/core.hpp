#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "agirisk/timeutil.hpp"
#include "agirisk/types.hpp"

namespace agirisk {

// The 11 canonical location/appliance channels. Enumerator order fixes the
// feature indices 0-10 of the canonical feature layout.
enum class Channel : int {
  back_door = 0,
  bathroom,
  bedroom,
  dining_room,
  fridge_door,
  hallway,
  kitchen,
  living_room,
  entrance_door,
  microwave,
  study,
};

std::string_view channel_name(Channel c);
Channel channel_from_name(std::string_view name);  // throws ParseError
constexpr int channel_index(Channel c) { return static_cast<int>(c); }
const std::array<Channel, kNumChannels>& all_channels();

enum class VitalKind : int { pulse = 0, systolic, diastolic };
inline constexpr int kNumVitalKinds = 3;

std::string_view vital_kind_name(VitalKind k);
VitalKind vital_kind_from_name(std::string_view name);  // throws ParseError

struct SensorEvent {
  std::string participant_id;
  Timestamp timestamp = 0;
  Channel channel = Channel::back_door;
};

struct VitalReading {
  std::string participant_id;
  Timestamp timestamp = 0;
  VitalKind kind = VitalKind::pulse;
  double value = 0.0;  // > 0
};

// Closed interval [low, high] per vital kind.
struct VitalRanges {
  struct Interval {
    double low;
    double high;
  };
  // Defaults are typical adult telemonitoring thresholds; the source data
  // only says alerts come from "out of range" values.
  Interval pulse{50.0, 110.0};
  Interval systolic{90.0, 160.0};
  Interval diastolic{60.0, 100.0};

  const Interval& of(VitalKind k) const;
  void validate() const;  // throws ConfigError unless low < high everywhere
};

bool check_vital_range(const VitalReading& reading, const VitalRanges& ranges);

enum class AlertStatus : int { validated_true = 0, validated_false, not_validated };

std::string_view alert_status_name(AlertStatus s);
AlertStatus alert_status_from_name(std::string_view name);  // throws ParseError

struct AgitationAlert {
  std::string alert_id;
  std::string participant_id;
  Timestamp raised_at = 0;
  std::optional<Timestamp> validated_at;  // absent iff not_validated
  AlertStatus status = AlertStatus::not_validated;

  void validate() const;  // throws ParseError on invariant violation
};

enum class Diagnosis : int {
  alzheimers = 0,
  parkinsons,
  frontotemporal,
  vascular,
  other,
};
inline constexpr int kNumDiagnoses = 5;

std::string_view diagnosis_name(Diagnosis d);
Diagnosis diagnosis_from_name(std::string_view name);

enum class Sex : int { male = 0, female };

std::string_view sex_name(Sex s);
Sex sex_from_name(std::string_view name);

struct Participant {
  std::string participant_id;
  int age = 0;    // > 0
  int mmse = 0;   // 0..30
  Sex sex = Sex::female;
  Diagnosis diagnosis = Diagnosis::other;
};

// One line of the event log. Record kinds: motion, vital, alert.
//   pid,TS,motion,channel
//   pid,TS,vital,kind,value
//   pid,TS,alert,alert_id,status[,validated_at]
using ParsedRecord = std::variant<SensorEvent, VitalReading, AgitationAlert>;

ParsedRecord parse_event_record(std::string_view line);  // throws ParseError

std::string serialize_record(const SensorEvent& e);
std::string serialize_record(const VitalReading& r);
std::string serialize_record(const AgitationAlert& a);
std::string serialize_record(const ParsedRecord& r);

// Shortest decimal form that round-trips a double through parse.
std::string format_value(double v);

}  // namespace agirisk
