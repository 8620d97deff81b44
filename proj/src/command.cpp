#include "recipe2iot/command.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace r2iot {

namespace {

constexpr std::array<std::string_view, 5> kHowKindNames = {
    "temperature", "duration", "power", "setting", "other"};

}  // namespace

std::string_view how_kind_name(HowKind kind) {
  return kHowKindNames[static_cast<int>(kind)];
}

std::optional<HowKind> parse_how_kind(std::string_view name) {
  for (std::size_t i = 0; i < kHowKindNames.size(); ++i) {
    if (kHowKindNames[i] == name) return static_cast<HowKind>(i);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// How-value parsing
// ---------------------------------------------------------------------------

namespace {

// First number in the text: integer, decimal, fraction (1/2) or mixed
// fraction (1 1/2).
std::optional<double> scan_quantity(std::string_view s) {
  std::size_t i = 0;
  auto parse_number = [&](std::size_t& pos) -> std::optional<double> {
    if (pos >= s.size() || !is_ascii_digit(s[pos])) return std::nullopt;
    double value = 0.0;
    while (pos < s.size() && is_ascii_digit(s[pos])) {
      value = value * 10.0 + (s[pos] - '0');
      ++pos;
    }
    if (pos + 1 < s.size() && s[pos] == '.' && is_ascii_digit(s[pos + 1])) {
      ++pos;
      double scale = 0.1;
      while (pos < s.size() && is_ascii_digit(s[pos])) {
        value += (s[pos] - '0') * scale;
        scale *= 0.1;
        ++pos;
      }
    }
    return value;
  };
  auto skip_spaces = [&](std::size_t pos) {
    while (pos < s.size() && s[pos] == ' ') ++pos;
    return pos;
  };

  while (i < s.size() && !is_ascii_digit(s[i])) ++i;
  auto first = parse_number(i);
  if (!first) return std::nullopt;

  // Fraction directly attached: "1/2".
  std::size_t j = skip_spaces(i);
  if (j < s.size() && s[j] == '/') {
    std::size_t k = skip_spaces(j + 1);
    if (auto denom = parse_number(k); denom && *denom != 0.0) {
      return *first / *denom;
    }
    return first;
  }
  // Mixed fraction: "1 1/2".
  if (j > i && j < s.size() && is_ascii_digit(s[j])) {
    std::size_t k = j;
    if (auto num = parse_number(k)) {
      std::size_t slash = skip_spaces(k);
      if (slash < s.size() && s[slash] == '/') {
        std::size_t d = skip_spaces(slash + 1);
        if (auto denom = parse_number(d); denom && *denom != 0.0) {
          return *first + *num / *denom;
        }
      }
    }
  }
  return first;
}

struct UnitEntry {
  std::string_view word;
  std::string_view canonical;
  HowKind kind;
};

constexpr UnitEntry kUnits[] = {
    {"f", "fahrenheit", HowKind::temperature},
    {"fahrenheit", "fahrenheit", HowKind::temperature},
    {"fahrenheits", "fahrenheit", HowKind::temperature},
    {"c", "celsius", HowKind::temperature},
    {"celsius", "celsius", HowKind::temperature},
    {"centigrade", "celsius", HowKind::temperature},
    {"sec", "second", HowKind::duration},
    {"secs", "second", HowKind::duration},
    {"second", "second", HowKind::duration},
    {"seconds", "second", HowKind::duration},
    {"min", "minute", HowKind::duration},
    {"mins", "minute", HowKind::duration},
    {"minute", "minute", HowKind::duration},
    {"minutes", "minute", HowKind::duration},
    {"hr", "hour", HowKind::duration},
    {"hrs", "hour", HowKind::duration},
    {"hour", "hour", HowKind::duration},
    {"hours", "hour", HowKind::duration},
    {"w", "watt", HowKind::power},
    {"watt", "watt", HowKind::power},
    {"watts", "watt", HowKind::power},
};

const std::set<std::string_view> kSettingWords = {
    "high",    "low",     "medium", "max",  "maximum", "minimum",
    "full",    "warm",    "gentle", "broil", "simmer",  "defrost",
    "highest", "lowest"};

}  // namespace

HowValue parse_how(const std::string& raw) {
  HowValue value;
  value.raw = raw;
  if (trim(raw).empty()) return value;

  value.quantity = scan_quantity(raw);

  std::vector<std::string> words;
  for (const Token& tok : tokenize(to_lower(raw))) {
    if (!tok.text.empty() && is_ascii_alpha(tok.text[0])) {
      words.push_back(tok.text);
    }
  }

  bool degrees_marker = false;
  bool setting_word = false;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::string& w = words[i];
    if (w == "gas" && i + 1 < words.size() && words[i + 1] == "mark") {
      value.unit = "gas-mark";
      value.kind = HowKind::temperature;
      return value;
    }
    if (w == "degree" || w == "degrees" || w == "deg") degrees_marker = true;
    if (kSettingWords.count(w)) setting_word = true;
    if (!value.unit) {
      for (const UnitEntry& u : kUnits) {
        if (w == u.word) {
          value.unit = std::string(u.canonical);
          value.kind = u.kind;
          break;
        }
      }
    }
  }
  if (value.unit) return value;

  if (degrees_marker) {
    value.kind = HowKind::temperature;  // "350 degrees" with no unit word
  } else if (setting_word && !value.quantity) {
    value.kind = HowKind::setting;
  } else {
    value.kind = HowKind::other;
  }
  return value;
}

// ---------------------------------------------------------------------------
// Inference rules
// ---------------------------------------------------------------------------

std::vector<InferenceRule> load_rules(std::istream& in) {
  std::vector<InferenceRule> rules;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto cols = split(sv, '\t');
    if (cols.size() != 5) {
      std::ostringstream os;
      os << "rule line " << lineno
         << ": expected `device<TAB>how_kind<TAB>what<TAB>why<TAB>priority`";
      throw Error(os.str());
    }
    InferenceRule rule;
    rule.device = cols[0] == "*" ? "*" : to_lower(cols[0]);
    auto kind = parse_how_kind(cols[1]);
    if (!kind) {
      std::ostringstream os;
      os << "rule line " << lineno << ": unknown how kind '" << cols[1] << "'";
      throw Error(os.str());
    }
    rule.how_kind = *kind;
    rule.yields_what = cols[2];
    rule.yields_why = cols[3];
    try {
      rule.priority = std::stoi(cols[4]);
    } catch (const std::exception&) {
      std::ostringstream os;
      os << "rule line " << lineno << ": bad priority '" << cols[4] << "'";
      throw Error(os.str());
    }
    rules.push_back(std::move(rule));
  }
  return rules;
}

std::vector<InferenceRule> load_rules_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open rule file: " + path);
  return load_rules(in);
}

std::vector<InferenceRule> default_rules() {
  return {
      {"oven", HowKind::temperature, "temperature", "increase", 10},
      {"fridge", HowKind::duration, "timer", "set", 5},
      {"*", HowKind::duration, "timer", "set", 1},
  };
}

// ---------------------------------------------------------------------------
// Command assembly
// ---------------------------------------------------------------------------

namespace {

struct TokenSpan {
  SpanAnnotation span;
  std::size_t first_token = 0;
  std::size_t last_token = 0;  // inclusive
};

std::optional<TokenSpan> project_span(const Sentence& sentence,
                                      const SpanAnnotation& span) {
  std::optional<std::size_t> first, last;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    const Token& tok = sentence.tokens[i];
    if (tok.start < span.end && tok.end > span.start) {
      if (!first) first = i;
      last = i;
    }
  }
  if (!first) return std::nullopt;
  return TokenSpan{span, *first, *last};
}

std::size_t token_distance(const TokenSpan& a, const TokenSpan& b) {
  if (a.last_token < b.first_token) return b.first_token - a.last_token;
  if (b.last_token < a.first_token) return a.first_token - b.last_token;
  return 0;  // overlap
}

std::string span_text(const Sentence& sentence, const SpanAnnotation& span) {
  return sentence.text.substr(span.start, span.end - span.start);
}

// Device class of a Where span's text, via the lexicon when possible.
std::string device_class_of(const std::string& text,
                            const DeviceLexicon& lexicon) {
  std::string lower = to_lower(text);
  if (const std::string* cls = lexicon.class_of_term(lower)) return *cls;
  auto matches = match_devices(make_sentence(lower), lexicon);
  if (!matches.empty()) return matches.front().device_class;
  return lower;
}

}  // namespace

std::vector<IoTCommand> assemble_commands(const Sentence& sentence,
                                          const std::vector<SpanAnnotation>& spans,
                                          const DeviceLexicon& lexicon) {
  std::vector<TokenSpan> where_spans, other_spans;
  for (const SpanAnnotation& span : spans) {
    auto projected = project_span(sentence, span);
    if (!projected) continue;  // span covers no token
    if (span.label == SlotLabel::Where) {
      where_spans.push_back(*projected);
    } else {
      other_spans.push_back(*projected);
    }
  }
  auto by_start = [](const TokenSpan& a, const TokenSpan& b) {
    return a.first_token < b.first_token;
  };
  std::sort(where_spans.begin(), where_spans.end(), by_start);
  std::sort(other_spans.begin(), other_spans.end(), by_start);

  if (where_spans.empty() && other_spans.empty()) return {};

  std::vector<IoTCommand> commands;
  std::vector<std::vector<const TokenSpan*>> attached;

  if (where_spans.empty()) {
    IoTCommand cmd;
    if (sentence.device_hint && !sentence.device_hint->empty()) {
      cmd.where = to_lower(*sentence.device_hint);
      cmd.where_source = WhereSource::hint;
    }
    commands.push_back(std::move(cmd));
    attached.emplace_back();
    for (const TokenSpan& ts : other_spans) attached[0].push_back(&ts);
  } else {
    for (const TokenSpan& ws : where_spans) {
      IoTCommand cmd;
      cmd.where = device_class_of(span_text(sentence, ws.span), lexicon);
      cmd.where_source = WhereSource::span;
      cmd.provenance.spans.push_back(ws.span);
      commands.push_back(std::move(cmd));
      attached.emplace_back();
    }
    for (const TokenSpan& ts : other_spans) {
      std::size_t best = 0;
      std::size_t best_dist = token_distance(ts, where_spans[0]);
      for (std::size_t w = 1; w < where_spans.size(); ++w) {
        std::size_t d = token_distance(ts, where_spans[w]);
        if (d < best_dist) {  // ties stay with the leftmost Where
          best_dist = d;
          best = w;
        }
      }
      attached[best].push_back(&ts);
    }
  }

  for (std::size_t c = 0; c < commands.size(); ++c) {
    IoTCommand& cmd = commands[c];
    for (const TokenSpan* ts : attached[c]) {
      std::string text = span_text(sentence, ts->span);
      switch (ts->span.label) {
        case SlotLabel::What:
          if (!cmd.what) cmd.what = text;  // leftmost span wins the slot
          break;
        case SlotLabel::Why:
          if (!cmd.why) cmd.why = text;
          break;
        case SlotLabel::How:
          if (!cmd.how) cmd.how = parse_how(text);
          break;
        case SlotLabel::Where:
          break;
      }
      cmd.provenance.spans.push_back(ts->span);
    }
    std::sort(cmd.provenance.spans.begin(), cmd.provenance.spans.end(),
              [](const SpanAnnotation& a, const SpanAnnotation& b) {
                return std::tie(a.start, a.end) < std::tie(b.start, b.end);
              });
    cmd.provenance.sentence_id = sentence.recipe_id;
    cmd.provenance.sentence_text = sentence.text;
    cmd.provenance.n_where_in_sentence = static_cast<int>(where_spans.size());
    cmd.complete = !cmd.where.empty() && cmd.what.has_value() &&
                   cmd.why.has_value() && cmd.how.has_value();
  }
  return commands;
}

IoTCommand infer_missing_slots(IoTCommand cmd,
                               const std::vector<InferenceRule>& rules) {
  if (cmd.where.empty() || !cmd.how) return cmd;
  if (cmd.what && cmd.why) return cmd;  // already complete in those slots

  const InferenceRule* best = nullptr;
  for (const InferenceRule& rule : rules) {
    if (rule.how_kind != cmd.how->kind) continue;
    if (rule.device != "*" && rule.device != to_lower(cmd.where)) continue;
    if (!best || rule.priority > best->priority) best = &rule;
  }
  if (!best) return cmd;

  if (!cmd.what && !best->yields_what.empty()) {
    cmd.what = best->yields_what;
    cmd.inferred.insert("what");
  }
  if (!cmd.why && !best->yields_why.empty()) {
    cmd.why = best->yields_why;
    cmd.inferred.insert("why");
  }
  cmd.complete = !cmd.where.empty() && cmd.what.has_value() &&
                 cmd.why.has_value() && cmd.how.has_value();
  return cmd;
}

// ---------------------------------------------------------------------------
// Control cues
// ---------------------------------------------------------------------------

std::string_view cue_kind_name(CueKind kind) {
  switch (kind) {
    case CueKind::while_condition:
      return "while_condition";
    case CueKind::interval_loop:
      return "interval_loop";
    case CueKind::conditional:
      return "conditional";
  }
  return "conditional";
}

const CueConfig& default_cues() {
  static const CueConfig kCues = {
      {"until", CueKind::while_condition},
      {"intervals", CueKind::interval_loop},
      {"if", CueKind::conditional},
  };
  return kCues;
}

std::vector<ControlCue> detect_control_cues(const Sentence& sentence,
                                            const CueConfig& cues) {
  std::vector<ControlCue> found;
  for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
    std::string lower = to_lower(sentence.tokens[i].text);
    auto it = cues.find(lower);
    if (it != cues.end()) found.push_back({lower, it->second, i});
  }
  return found;
}

// ---------------------------------------------------------------------------
// Completeness report
// ---------------------------------------------------------------------------

CompletenessReport completeness_report(
    const std::vector<AnnotatedRecipe>& corpus,
    const std::vector<InferenceRule>& rules, const DeviceLexicon& lexicon) {
  if (corpus.empty()) throw Error("completeness report needs a nonempty corpus");

  struct Tally {
    long total = 0;
    long text_complete = 0;
    long inferred_complete = 0;
    std::array<long, 4> missing{};
  };
  std::map<std::string, Tally> tallies;
  std::vector<std::string> warnings;

  for (const AnnotatedRecipe& recipe : corpus) {
    for (std::size_t s = 0; s < recipe.sentences.size(); ++s) {
      auto spans = iob_to_spans(recipe.sentences[s], recipe.tags[s], &warnings);
      if (spans.empty()) continue;
      for (const IoTCommand& cmd :
           assemble_commands(recipe.sentences[s], spans, lexicon)) {
        Tally& tally =
            tallies[cmd.where.empty() ? std::string("(none)") : cmd.where];
        ++tally.total;
        if (cmd.complete) ++tally.text_complete;
        if (infer_missing_slots(cmd, rules).complete) {
          ++tally.inferred_complete;
        }
        if (cmd.where.empty()) ++tally.missing[static_cast<int>(SlotLabel::Where)];
        if (!cmd.what) ++tally.missing[static_cast<int>(SlotLabel::What)];
        if (!cmd.why) ++tally.missing[static_cast<int>(SlotLabel::Why)];
        if (!cmd.how) ++tally.missing[static_cast<int>(SlotLabel::How)];
      }
    }
  }

  CompletenessReport report;
  for (const auto& [device, tally] : tallies) {
    CompletenessRow row;
    row.device = device;
    row.total = tally.total;
    double n = static_cast<double>(tally.total);
    row.text_complete = tally.text_complete / n;
    row.inferred_complete = tally.inferred_complete / n;
    for (int i = 0; i < 4; ++i) row.missing_rate[i] = tally.missing[i] / n;
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSON output
// ---------------------------------------------------------------------------

nlohmann::json command_to_json(const IoTCommand& cmd) {
  using nlohmann::json;
  json spans = json::array();
  for (const SpanAnnotation& span : cmd.provenance.spans) {
    spans.push_back({{"start", span.start},
                     {"end", span.end},
                     {"label", std::string(slot_name(span.label))}});
  }
  json how = nullptr;
  if (cmd.how) {
    how = json{{"raw", cmd.how->raw},
               {"kind", std::string(how_kind_name(cmd.how->kind))}};
    how["quantity"] = cmd.how->quantity ? json(*cmd.how->quantity) : json(nullptr);
    how["unit"] = cmd.how->unit ? json(*cmd.how->unit) : json(nullptr);
  }
  const char* source = cmd.where_source == WhereSource::span
                           ? "span"
                           : (cmd.where_source == WhereSource::hint ? "hint"
                                                                    : "none");
  return json{
      {"schema", 1},
      {"sentence_id", cmd.provenance.sentence_id},
      {"sentence", cmd.provenance.sentence_text},
      {"where", cmd.where.empty() ? json(nullptr) : json(cmd.where)},
      {"where_source", source},
      {"what", cmd.what ? json(*cmd.what) : json(nullptr)},
      {"why", cmd.why ? json(*cmd.why) : json(nullptr)},
      {"how", std::move(how)},
      {"complete", cmd.complete},
      {"inferred", json(cmd.inferred)},
      {"spans", std::move(spans)},
      {"n_where_in_sentence", cmd.provenance.n_where_in_sentence},
  };
}

}  // namespace r2iot
