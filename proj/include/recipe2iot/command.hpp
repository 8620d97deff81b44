// Assembly of labeled spans into formal IoT command quadruples, How-value
// parsing, rule-based inference of missing What/Why slots, control-flow cue
// detection and corpus completeness reporting.
#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "recipe2iot/corpus.hpp"
#include "recipe2iot/lexicon.hpp"

namespace r2iot {

enum class HowKind { temperature, duration, power, setting, other };

std::string_view how_kind_name(HowKind kind);
std::optional<HowKind> parse_how_kind(std::string_view name);

struct HowValue {
  std::string raw;
  std::optional<double> quantity;
  std::optional<std::string> unit;  // canonical: celsius, fahrenheit,
                                    // gas-mark, second, minute, hour, watt
  HowKind kind = HowKind::other;

  friend bool operator==(const HowValue&, const HowValue&) = default;
};

/// Total parser for How span text: extracts a numeric quantity (integers,
/// decimals, fractions), canonicalizes the unit and classifies the kind.
/// Unparseable input comes back as kind=other with raw preserved.
HowValue parse_how(const std::string& raw);

enum class WhereSource { span, hint, none };

struct CommandProvenance {
  std::string sentence_id;  // recipe id plus sentence index
  std::string sentence_text;
  std::vector<SpanAnnotation> spans;  // every contributing span
  int n_where_in_sentence = 0;  // >1 flags the nearest-attachment convention
};

struct IoTCommand {
  std::string where;  // device class; empty only when where_source == none
  WhereSource where_source = WhereSource::none;
  std::optional<std::string> what;
  std::optional<std::string> why;
  std::optional<HowValue> how;
  bool complete = false;           // all four slots present
  std::set<std::string> inferred;  // subset of {"what","why"}
  CommandProvenance provenance;
};

struct InferenceRule {
  std::string device;  // device class or "*"
  HowKind how_kind = HowKind::other;
  std::string yields_what;
  std::string yields_why;
  int priority = 0;
};

/// `device<TAB>how_kind<TAB>what<TAB>why<TAB>priority` lines; '#' comments.
std::vector<InferenceRule> load_rules(std::istream& in);
std::vector<InferenceRule> load_rules_file(const std::string& path);

/// Built-in defaults for the common implicit cases: oven temperatures mean
/// "increase the temperature", durations mean "set the timer".
std::vector<InferenceRule> default_rules();

/// Builds one command per Where span, attaching every other span to the
/// nearest Where by token distance (ties toward the left). Sentences with
/// labels but no Where span fall back to the sentence's device hint, or
/// yield an incompleteness record (where_source = none).
std::vector<IoTCommand> assemble_commands(const Sentence& sentence,
                                          const std::vector<SpanAnnotation>& spans,
                                          const DeviceLexicon& lexicon);

/// Fills missing What/Why from the highest-priority rule matching
/// (where, how.kind); textual slots are never overwritten and `where` is
/// never modified. Without a match the command passes through unchanged.
IoTCommand infer_missing_slots(IoTCommand cmd,
                               const std::vector<InferenceRule>& rules);

enum class CueKind { while_condition, interval_loop, conditional };

std::string_view cue_kind_name(CueKind kind);

struct ControlCue {
  std::string keyword;
  CueKind kind = CueKind::conditional;
  std::size_t token_index = 0;
};

/// keyword -> cue kind; extensible at the call site.
using CueConfig = std::map<std::string, CueKind>;
const CueConfig& default_cues();  // until / intervals / if

/// One cue per keyword occurrence. Annotations only; no program synthesis.
std::vector<ControlCue> detect_control_cues(const Sentence& sentence,
                                            const CueConfig& cues = default_cues());

struct CompletenessRow {
  std::string device;  // "(none)" for commands with no device at all
  long total = 0;
  double text_complete = 0.0;      // fraction complete from text alone
  double inferred_complete = 0.0;  // fraction complete after inference
  std::array<double, 4> missing_rate{};  // per slot, indexed by SlotLabel
};

struct CompletenessReport {
  std::vector<CompletenessRow> rows;  // sorted by device name
};

CompletenessReport completeness_report(
    const std::vector<AnnotatedRecipe>& corpus,
    const std::vector<InferenceRule>& rules, const DeviceLexicon& lexicon);

/// JSON-lines serialization, schema version 1.
nlohmann::json command_to_json(const IoTCommand& cmd);

}  // namespace r2iot
