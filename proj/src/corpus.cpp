#include "recipe2iot/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "recipe2iot/rng.hpp"

namespace r2iot {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Labels and tags
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, 4> kSlotNames = {"Where", "What", "Why",
                                                        "How"};

constexpr std::array<std::string_view, kNumTags> kTagNames = {
    "O",     "B-Where", "I-Where", "B-What", "I-What",
    "B-Why", "I-Why",   "B-How",   "I-How"};

}  // namespace

std::string_view slot_name(SlotLabel label) {
  return kSlotNames[static_cast<int>(label)];
}

std::optional<SlotLabel> parse_slot_label(std::string_view name) {
  for (int i = 0; i < 4; ++i) {
    if (kSlotNames[i] == name) return static_cast<SlotLabel>(i);
  }
  return std::nullopt;
}

std::string_view tag_name(Tag tag) { return kTagNames[static_cast<int>(tag)]; }

std::optional<Tag> parse_tag(std::string_view name) {
  for (int i = 0; i < kNumTags; ++i) {
    if (kTagNames[i] == name) return static_cast<Tag>(i);
  }
  return std::nullopt;
}

SlotLabel tag_slot(Tag tag) {
  return static_cast<SlotLabel>((static_cast<int>(tag) - 1) / 2);
}

Tag begin_tag(SlotLabel label) {
  return static_cast<Tag>(static_cast<int>(label) * 2 + 1);
}

Tag inside_tag(SlotLabel label) {
  return static_cast<Tag>(static_cast<int>(label) * 2 + 2);
}

bool is_valid_iob(const TagSequence& tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (!is_inside(tags[i])) continue;
    if (i == 0) return false;
    Tag prev = tags[i - 1];
    if (prev == Tag::O || tag_slot(prev) != tag_slot(tags[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// RecipeQA ingestion
// ---------------------------------------------------------------------------

namespace {

std::string json_id_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  return {};
}

// Extracts one RawRecipe; returns an error message on failure.
std::optional<std::string> parse_record(const json& rec, std::size_t index,
                                        RawRecipe& out) {
  auto fail = [&](std::string_view what) {
    std::ostringstream os;
    os << "record " << index << ": " << what;
    return os.str();
  };
  if (!rec.is_object()) return fail("not a JSON object");

  if (rec.contains("id")) {
    out.id = json_id_to_string(rec.at("id"));
  } else if (rec.contains("recipe_id")) {
    out.id = json_id_to_string(rec.at("recipe_id"));
  }
  if (out.id.empty()) return fail("missing or empty id");

  if (rec.contains("title") && rec.at("title").is_string()) {
    out.title = rec.at("title").get<std::string>();
  }

  if (rec.contains("steps")) {
    const json& steps = rec.at("steps");
    if (!steps.is_array()) return fail("steps field is not an array");
    for (const json& s : steps) {
      if (!s.is_string()) return fail("non-string entry in steps");
      out.instructions.push_back(s.get<std::string>());
    }
  } else if (rec.contains("context")) {
    const json& ctx = rec.at("context");
    if (!ctx.is_array()) return fail("context field is not an array");
    for (const json& step : ctx) {
      if (!step.is_object() || !step.contains("body") ||
          !step.at("body").is_string()) {
        return fail("context entry without a body string");
      }
      out.instructions.push_back(step.at("body").get<std::string>());
    }
  } else {
    return fail("missing steps field");
  }
  return std::nullopt;
}

}  // namespace

IngestResult ingest_recipeqa(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(std::string("invalid JSON document: ") + e.what());
  }
  const json* records = &doc;
  if (doc.is_object() && doc.contains("data")) records = &doc.at("data");
  if (!records->is_array()) {
    throw Error("expected a JSON array of records (or an object with a "
                "\"data\" array)");
  }

  IngestResult result;
  std::unordered_map<std::string, std::size_t> seen;  // id -> recipes index
  for (std::size_t i = 0; i < records->size(); ++i) {
    RawRecipe recipe;
    if (auto err = parse_record((*records)[i], i, recipe)) {
      result.errors.push_back(*err);
      continue;
    }
    auto it = seen.find(recipe.id);
    if (it != seen.end()) {
      // RecipeQA repeats recipes across QA items; identical repeats are
      // deduplicated, conflicting ones reported.
      const RawRecipe& prev = result.recipes[it->second];
      if (prev.title != recipe.title ||
          prev.instructions != recipe.instructions) {
        std::ostringstream os;
        os << "record " << i << ": duplicate id '" << recipe.id
           << "' with conflicting content";
        result.errors.push_back(os.str());
      }
      continue;
    }
    seen.emplace(recipe.id, result.recipes.size());
    result.recipes.push_back(std::move(recipe));
  }
  return result;
}

IngestResult ingest_recipeqa_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open recipe file: " + path);
  return ingest_recipeqa(in);
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

AcronymTable load_acronyms(std::istream& in) {
  AcronymTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto cols = split(sv, '\t');
    if (cols.size() != 2 || cols[0].empty() || cols[1].empty()) {
      std::ostringstream os;
      os << "acronym table line " << lineno
         << ": expected `short<TAB>full`, got '" << sv << "'";
      throw Error(os.str());
    }
    table[to_lower(cols[0])] = std::string(trim(cols[1]));
  }
  return table;
}

AcronymTable load_acronyms_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open acronym table: " + path);
  return load_acronyms(in);
}

namespace {

// Decodes one UTF-8 codepoint starting at s[i]; advances i. Invalid bytes
// decode as U+FFFD and advance by one.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  unsigned char b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + len > s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    unsigned char b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += len;
  return cp;
}

// ASCII replacements for codepoints with a standard decomposition; anything
// non-ASCII and absent here is dropped.
const std::unordered_map<char32_t, std::string_view>& fold_table() {
  static const std::unordered_map<char32_t, std::string_view> table = {
      // Latin-1 letters
      {0xC0, "A"}, {0xC1, "A"}, {0xC2, "A"}, {0xC3, "A"}, {0xC4, "A"},
      {0xC5, "A"}, {0xC6, "AE"}, {0xC7, "C"}, {0xC8, "E"}, {0xC9, "E"},
      {0xCA, "E"}, {0xCB, "E"}, {0xCC, "I"}, {0xCD, "I"}, {0xCE, "I"},
      {0xCF, "I"}, {0xD0, "D"}, {0xD1, "N"}, {0xD2, "O"}, {0xD3, "O"},
      {0xD4, "O"}, {0xD5, "O"}, {0xD6, "O"}, {0xD8, "O"}, {0xD9, "U"},
      {0xDA, "U"}, {0xDB, "U"}, {0xDC, "U"}, {0xDD, "Y"}, {0xDE, "Th"},
      {0xDF, "ss"}, {0xE0, "a"}, {0xE1, "a"}, {0xE2, "a"}, {0xE3, "a"},
      {0xE4, "a"}, {0xE5, "a"}, {0xE6, "ae"}, {0xE7, "c"}, {0xE8, "e"},
      {0xE9, "e"}, {0xEA, "e"}, {0xEB, "e"}, {0xEC, "i"}, {0xED, "i"},
      {0xEE, "i"}, {0xEF, "i"}, {0xF0, "d"}, {0xF1, "n"}, {0xF2, "o"},
      {0xF3, "o"}, {0xF4, "o"}, {0xF5, "o"}, {0xF6, "o"}, {0xF8, "o"},
      {0xF9, "u"}, {0xFA, "u"}, {0xFB, "u"}, {0xFC, "u"}, {0xFD, "y"},
      {0xFF, "y"},
      // Common Latin Extended-A letters
      {0x100, "A"}, {0x101, "a"}, {0x102, "A"}, {0x103, "a"}, {0x104, "A"},
      {0x105, "a"}, {0x106, "C"}, {0x107, "c"}, {0x10C, "C"}, {0x10D, "c"},
      {0x10E, "D"}, {0x10F, "d"}, {0x110, "D"}, {0x111, "d"}, {0x112, "E"},
      {0x113, "e"}, {0x118, "E"}, {0x119, "e"}, {0x11A, "E"}, {0x11B, "e"},
      {0x11E, "G"}, {0x11F, "g"}, {0x12A, "I"}, {0x12B, "i"}, {0x130, "I"},
      {0x131, "i"}, {0x141, "L"}, {0x142, "l"}, {0x143, "N"}, {0x144, "n"},
      {0x147, "N"}, {0x148, "n"}, {0x14C, "O"}, {0x14D, "o"}, {0x152, "OE"},
      {0x153, "oe"}, {0x158, "R"}, {0x159, "r"}, {0x15A, "S"}, {0x15B, "s"},
      {0x15E, "S"}, {0x15F, "s"}, {0x160, "S"}, {0x161, "s"}, {0x16A, "U"},
      {0x16B, "u"}, {0x16E, "U"}, {0x16F, "u"}, {0x179, "Z"}, {0x17A, "z"},
      {0x17B, "Z"}, {0x17C, "z"}, {0x17D, "Z"}, {0x17E, "z"},
      // Punctuation and spaces
      {0xA0, " "}, {0x2000, " "}, {0x2001, " "}, {0x2002, " "}, {0x2003, " "},
      {0x2004, " "}, {0x2005, " "}, {0x2006, " "}, {0x2007, " "},
      {0x2008, " "}, {0x2009, " "}, {0x200A, " "}, {0x200B, ""},
      {0x2010, "-"}, {0x2011, "-"}, {0x2012, "-"}, {0x2013, "-"},
      {0x2014, "-"}, {0x2015, "-"}, {0x2018, "'"}, {0x2019, "'"},
      {0x201A, "'"}, {0x201B, "'"}, {0x201C, "\""}, {0x201D, "\""},
      {0x201E, "\""}, {0x201F, "\""}, {0x2022, " "}, {0x2026, "..."},
      {0x2032, "'"}, {0x2033, "\""}, {0x00B7, " "}, {0x00B0, " "},
      {0x00D7, "x"}, {0x00F7, "/"},
      // Vulgar fractions (space-padded so "4½" becomes "4 1/2")
      {0xBC, " 1/4 "}, {0xBD, " 1/2 "}, {0xBE, " 3/4 "}, {0x2150, " 1/7 "},
      {0x2151, " 1/9 "}, {0x2153, " 1/3 "}, {0x2154, " 2/3 "},
      {0x2155, " 1/5 "}, {0x2156, " 2/5 "}, {0x2157, " 3/5 "},
      {0x2158, " 4/5 "}, {0x2159, " 1/6 "}, {0x215A, " 5/6 "},
      {0x215B, " 1/8 "}, {0x215C, " 3/8 "}, {0x215D, " 5/8 "},
      {0x215E, " 7/8 "},
  };
  return table;
}

std::string ascii_fold(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    char32_t cp = decode_utf8(s, i);
    if (cp < 0x80) {
      char c = static_cast<char>(cp);
      if (c == 0x7F || (static_cast<unsigned char>(c) < 0x20 && !is_ascii_space(c)))
        continue;
      out += c;
      continue;
    }
    auto it = fold_table().find(cp);
    if (it != fold_table().end()) out += it->second;
  }
  return out;
}

bool is_emoticon(std::string_view t) {
  static const std::set<std::string_view> kLiterals = {
      "<3", "</3", "^_^", "^.^", "^-^", "-_-", "._.", "o_O", "O_o",
      "o_o", "O_O", "T_T", ";_;", "xD", "XD", "xd", "Dx", "D:",
      ":'(", ":')", ":'D", "=^.^="};
  if (kLiterals.count(t)) return true;
  if (t.size() < 2) return false;

  static constexpr std::string_view kEyes = ":;=8";
  static constexpr std::string_view kNose = "-o'^";
  static constexpr std::string_view kMouth = ")(][}{DPpObd3/\\|*@$";

  auto match_forward = [&](std::string_view u) {
    std::size_t i = 0;
    if (kEyes.find(u[i]) == std::string_view::npos) return false;
    ++i;
    if (i < u.size() && kNose.find(u[i]) != std::string_view::npos) ++i;
    if (i >= u.size()) return false;
    while (i < u.size() && kMouth.find(u[i]) != std::string_view::npos) ++i;
    return i == u.size();
  };
  auto match_reversed = [&](std::string_view u) {
    std::size_t i = 0;
    while (i < u.size() && kMouth.find(u[i]) != std::string_view::npos) ++i;
    if (i == 0) return false;
    if (i < u.size() && kNose.find(u[i]) != std::string_view::npos) ++i;
    return i + 1 == u.size() && kEyes.find(u[i]) != std::string_view::npos;
  };
  return match_forward(t) || match_reversed(t);
}

// Drops decorative characters and collapses runs of a repeated punctuation
// character ("!!!" -> "!").
std::string scrub_punctuation(std::string_view t) {
  static constexpr std::string_view kDropped = "`~^|\\_<>@#*";
  std::string out;
  out.reserve(t.size());
  for (char c : t) {
    if (kDropped.find(c) != std::string_view::npos) continue;
    if (!out.empty() && out.back() == c && !is_ascii_alpha(c) &&
        !is_ascii_digit(c)) {
      continue;
    }
    out += c;
  }
  return out;
}

}  // namespace

std::string normalize_text(std::string_view s, const AcronymTable& acronyms) {
  std::vector<std::string> out;
  for (const std::string& raw : split_whitespace(ascii_fold(s))) {
    if (is_emoticon(raw)) continue;
    std::string cleaned = scrub_punctuation(raw);
    if (cleaned.empty() || is_emoticon(cleaned)) continue;
    auto it = acronyms.find(to_lower(cleaned));
    if (it == acronyms.end()) {
      out.push_back(std::move(cleaned));
      continue;
    }
    // Full forms may be multi-word; they are scrubbed too so the result is
    // stable under repeated normalization.
    for (const std::string& word : split_whitespace(it->second)) {
      std::string w = scrub_punctuation(word);
      if (!w.empty()) out.push_back(std::move(w));
    }
  }
  return join(out, " ");
}

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < s.size()) {
    if (is_ascii_space(s[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    if (is_ascii_alpha(s[i])) {
      while (i < s.size() && is_ascii_alpha(s[i])) ++i;
    } else if (is_ascii_digit(s[i])) {
      while (i < s.size() && is_ascii_digit(s[i])) ++i;
    } else {
      ++i;  // punctuation: one character per token
    }
    Token tok;
    tok.text = std::string(s.substr(start, i - start));
    tok.start = start;
    tok.end = i;
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

Sentence make_sentence(std::string text, std::string recipe_id) {
  Sentence sentence;
  sentence.tokens = tokenize(text);
  sentence.text = std::move(text);
  sentence.recipe_id = std::move(recipe_id);
  return sentence;
}

// ---------------------------------------------------------------------------
// Span <-> IOB conversion
// ---------------------------------------------------------------------------

namespace {

void warn(std::vector<std::string>* sink, std::string message) {
  if (sink) {
    sink->push_back(std::move(message));
  } else {
    std::cerr << "warning: " << message << "\n";
  }
}

}  // namespace

TagSequence spans_to_iob(const Sentence& sentence,
                         std::vector<SpanAnnotation> spans,
                         std::vector<std::string>* warnings) {
  const auto& tokens = sentence.tokens;
  for (const SpanAnnotation& span : spans) {
    if (span.start >= span.end || span.end > sentence.text.size()) {
      std::ostringstream os;
      os << "invalid span [" << span.start << "," << span.end << ") for \""
         << sentence.text << "\"";
      throw Error(os.str());
    }
  }
  std::sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) {
    return std::tie(a.start, a.end, a.label) < std::tie(b.start, b.end, b.label);
  });

  TagSequence tags(tokens.size(), Tag::O);
  std::vector<bool> covered(tokens.size(), false);
  for (SpanAnnotation span : spans) {
    // Snap boundaries outward onto token boundaries.
    for (const Token& tok : tokens) {
      if (tok.start < span.start && span.start < tok.end) {
        std::ostringstream os;
        os << slot_name(span.label) << " span start " << span.start
           << " cuts token \"" << tok.text << "\"; snapped to " << tok.start;
        warn(warnings, os.str());
        span.start = tok.start;
      }
      if (tok.start < span.end && span.end < tok.end) {
        std::ostringstream os;
        os << slot_name(span.label) << " span end " << span.end
           << " cuts token \"" << tok.text << "\"; snapped to " << tok.end;
        warn(warnings, os.str());
        span.end = tok.end;
      }
    }
    bool first = true;
    bool any = false;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i].start < span.start || tokens[i].end > span.end) continue;
      any = true;
      if (covered[i]) {
        std::ostringstream os;
        os << "token \"" << tokens[i].text << "\" covered by overlapping "
           << "spans; keeping the earlier label " << tag_name(tags[i]);
        warn(warnings, os.str());
        first = true;  // a break in the run restarts B- tagging
        continue;
      }
      covered[i] = true;
      tags[i] = first ? begin_tag(span.label) : inside_tag(span.label);
      first = false;
    }
    if (!any) {
      std::ostringstream os;
      os << slot_name(span.label) << " span [" << span.start << "," << span.end
         << ") covers no token";
      warn(warnings, os.str());
    }
  }
  return tags;
}

std::vector<SpanAnnotation> iob_to_spans(const Sentence& sentence,
                                         const TagSequence& tags,
                                         std::vector<std::string>* warnings) {
  if (tags.size() != sentence.tokens.size()) {
    std::ostringstream os;
    os << "tag sequence length " << tags.size() << " != token count "
       << sentence.tokens.size();
    throw Error(os.str());
  }
  std::vector<SpanAnnotation> spans;
  std::optional<SlotLabel> open;
  std::size_t open_start = 0, open_end = 0;
  auto close = [&] {
    if (open) spans.push_back({open_start, open_end, *open});
    open.reset();
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    Tag t = tags[i];
    if (t == Tag::O) {
      close();
      continue;
    }
    SlotLabel slot = tag_slot(t);
    if (is_inside(t) && (!open || *open != slot)) {
      std::ostringstream os;
      os << "bare " << tag_name(t) << " at token " << i << " treated as "
         << tag_name(begin_tag(slot));
      warn(warnings, os.str());
      t = begin_tag(slot);
    }
    if (is_begin(t)) {
      close();
      open = slot;
      open_start = sentence.tokens[i].start;
    }
    open_end = sentence.tokens[i].end;
  }
  close();
  return spans;
}

// ---------------------------------------------------------------------------
// doccano JSONL
// ---------------------------------------------------------------------------

std::vector<DoccanoEntry> load_doccano(std::istream& in) {
  std::vector<DoccanoEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      std::ostringstream os;
      os << "line " << lineno << ": malformed JSON: " << e.what();
      throw Error(os.str());
    }
    if (!obj.is_object() || !obj.contains("text") ||
        !obj.at("text").is_string()) {
      std::ostringstream os;
      os << "line " << lineno << ": missing text field";
      throw Error(os.str());
    }
    DoccanoEntry entry;
    std::string text = obj.at("text").get<std::string>();

    const json* labels = nullptr;
    if (obj.contains("labels")) {
      labels = &obj.at("labels");
    } else if (obj.contains("label")) {  // newer doccano exports
      labels = &obj.at("label");
    }
    if (labels) {
      if (!labels->is_array()) {
        std::ostringstream os;
        os << "line " << lineno << ": labels field is not an array";
        throw Error(os.str());
      }
      for (const json& triple : *labels) {
        if (!triple.is_array() || triple.size() != 3 ||
            !triple[0].is_number() || !triple[1].is_number() ||
            !triple[2].is_string()) {
          std::ostringstream os;
          os << "line " << lineno << ": label entry is not [start, end, name]";
          throw Error(os.str());
        }
        auto start = triple[0].get<long long>();
        auto end = triple[1].get<long long>();
        std::string name = triple[2].get<std::string>();
        auto slot = parse_slot_label(name);
        if (!slot) {
          std::ostringstream os;
          os << "line " << lineno << ": unknown slot label '" << name << "'";
          throw Error(os.str());
        }
        if (start < 0 || end <= start ||
            static_cast<std::size_t>(end) > text.size()) {
          std::ostringstream os;
          os << "line " << lineno << ": span [" << start << "," << end
             << ") out of range for text of length " << text.size();
          throw Error(os.str());
        }
        entry.spans.push_back({static_cast<std::size_t>(start),
                               static_cast<std::size_t>(end), *slot});
      }
    }

    if (obj.contains("id")) entry.recipe_id = json_id_to_string(obj.at("id"));
    if (obj.contains("meta") && obj.at("meta").is_object()) {
      const json& meta = obj.at("meta");
      if (meta.contains("recipe_id"))
        entry.recipe_id = json_id_to_string(meta.at("recipe_id"));
      if (meta.contains("device") && meta.at("device").is_string())
        entry.device = meta.at("device").get<std::string>();
      if (meta.contains("fp") && meta.at("fp").is_boolean())
        entry.false_positive = meta.at("fp").get<bool>();
    }

    entry.sentence = make_sentence(std::move(text), entry.recipe_id);
    if (!entry.device.empty()) entry.sentence.device_hint = entry.device;
    entries.push_back(std::move(entry));
  }
  return entries;
}

std::vector<DoccanoEntry> load_doccano_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open doccano file: " + path);
  return load_doccano(in);
}

void emit_doccano(std::ostream& out, const std::vector<DoccanoEntry>& entries) {
  for (const DoccanoEntry& entry : entries) {
    json labels = json::array();
    for (const SpanAnnotation& span : entry.spans) {
      labels.push_back(
          {span.start, span.end, std::string(slot_name(span.label))});
    }
    json obj = {{"text", entry.sentence.text}, {"labels", std::move(labels)}};
    json meta = json::object();
    if (!entry.recipe_id.empty()) meta["recipe_id"] = entry.recipe_id;
    if (!entry.device.empty()) meta["device"] = entry.device;
    if (entry.false_positive) meta["fp"] = true;
    if (!meta.empty()) obj["meta"] = std::move(meta);
    out << obj.dump() << "\n";
  }
}

// ---------------------------------------------------------------------------
// CoNLL-style TSV
// ---------------------------------------------------------------------------

namespace {

struct ConllBuilder {
  std::vector<AnnotatedRecipe> recipes;
  AnnotatedRecipe current;
  bool in_marked_recipe = false;
  std::size_t anon_counter = 0;

  std::vector<Token> tokens;
  TagSequence tags;
  std::size_t sentence_first_line = 0;

  void flush_sentence(std::size_t lineno) {
    if (tokens.empty()) return;
    for (const Token& tok : tokens) {
      if (tok.head && *tok.head >= tokens.size()) {
        std::ostringstream os;
        os << "line " << sentence_first_line << ": head index " << *tok.head
           << " out of range for a " << tokens.size() << "-token sentence";
        throw Error(os.str());
      }
    }
    Sentence sentence;
    std::string text;
    for (Token& tok : tokens) {
      if (!text.empty()) text += ' ';
      tok.start = text.size();
      text += tok.text;
      tok.end = text.size();
    }
    sentence.text = std::move(text);
    sentence.tokens = std::move(tokens);
    tokens.clear();
    if (!in_marked_recipe) {
      AnnotatedRecipe recipe;
      recipe.id = "s" + std::to_string(anon_counter++);
      recipe.device = current.device;  // a leading `# device` applies to all
      sentence.recipe_id = recipe.id;
      if (!recipe.device.empty()) sentence.device_hint = recipe.device;
      recipe.sentences.push_back(std::move(sentence));
      recipe.tags.push_back(std::move(tags));
      recipes.push_back(std::move(recipe));
    } else {
      sentence.recipe_id = current.id;
      if (!current.device.empty()) sentence.device_hint = current.device;
      current.sentences.push_back(std::move(sentence));
      current.tags.push_back(std::move(tags));
    }
    tags.clear();
    (void)lineno;
  }

  void flush_recipe(std::size_t lineno) {
    flush_sentence(lineno);
    if (in_marked_recipe) {
      recipes.push_back(std::move(current));
      current = AnnotatedRecipe{};
    }
  }
};

}  // namespace

std::vector<AnnotatedRecipe> parse_conll(std::istream& in) {
  ConllBuilder builder;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string_view sv = line;
    if (trim(sv).empty()) {
      builder.flush_sentence(lineno);
      continue;
    }
    if (trim(sv).front() == '#') {
      std::string_view body = trim(sv).substr(1);
      auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;  // free-form comment
      std::string key = std::string(trim(body.substr(0, eq)));
      std::string value = std::string(trim(body.substr(eq + 1)));
      if (key == "id") {
        builder.flush_recipe(lineno);
        builder.in_marked_recipe = true;
        builder.current.id = value;
      } else if (key == "device") {
        builder.current.device = value;
      } else if (key == "fp") {
        builder.current.false_positive = (value == "true" || value == "1");
      }
      continue;
    }
    auto cols = split(sv, '\t');
    if (cols.size() != 5) {
      std::ostringstream os;
      os << "line " << lineno << ": expected 5 tab-separated columns, got "
         << cols.size();
      throw Error(os.str());
    }
    if (cols[0].empty()) {
      std::ostringstream os;
      os << "line " << lineno << ": empty token text";
      throw Error(os.str());
    }
    Token tok;
    tok.text = cols[0];
    if (cols[1] != "_") tok.lemma = cols[1];
    if (cols[2] != "_") tok.pos = cols[2];
    if (cols[3] != "_") {
      try {
        std::size_t pos = 0;
        unsigned long v = std::stoul(cols[3], &pos);
        if (pos != cols[3].size()) throw std::invalid_argument("trailing");
        tok.head = static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        std::ostringstream os;
        os << "line " << lineno << ": invalid head index '" << cols[3] << "'";
        throw Error(os.str());
      }
    }
    auto tag = parse_tag(cols[4]);
    if (!tag) {
      std::ostringstream os;
      os << "line " << lineno << ": invalid tag '" << cols[4] << "'";
      throw Error(os.str());
    }
    if (builder.tokens.empty()) builder.sentence_first_line = lineno;
    builder.tokens.push_back(std::move(tok));
    builder.tags.push_back(*tag);
  }
  builder.flush_recipe(lineno + 1);
  return builder.recipes;
}

std::vector<AnnotatedRecipe> parse_conll_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open CoNLL file: " + path);
  return parse_conll(in);
}

void emit_conll(std::ostream& out, const std::vector<AnnotatedRecipe>& recipes) {
  for (const AnnotatedRecipe& recipe : recipes) {
    out << "# id = " << recipe.id << "\n";
    if (!recipe.device.empty()) out << "# device = " << recipe.device << "\n";
    if (recipe.false_positive) out << "# fp = true\n";
    if (recipe.sentences.size() != recipe.tags.size()) {
      throw Error("recipe '" + recipe.id +
                  "': sentence and tag sequence counts differ");
    }
    for (std::size_t s = 0; s < recipe.sentences.size(); ++s) {
      const Sentence& sentence = recipe.sentences[s];
      const TagSequence& tags = recipe.tags[s];
      if (sentence.tokens.size() != tags.size()) {
        throw Error("recipe '" + recipe.id +
                    "': tag sequence length does not match token count");
      }
      for (std::size_t i = 0; i < sentence.tokens.size(); ++i) {
        const Token& tok = sentence.tokens[i];
        if (tok.text.find_first_of("\t\n") != std::string::npos) {
          throw Error("token text contains tab or newline");
        }
        out << tok.text << '\t' << (tok.lemma ? *tok.lemma : "_") << '\t'
            << (tok.pos ? *tok.pos : "_") << '\t';
        if (tok.head) {
          out << *tok.head;
        } else {
          out << '_';
        }
        out << '\t' << tag_name(tags[i]) << "\n";
      }
      out << "\n";
    }
  }
}

std::vector<std::pair<Sentence, TagSequence>> flatten(
    const std::vector<AnnotatedRecipe>& recipes) {
  std::vector<std::pair<Sentence, TagSequence>> flat;
  for (const AnnotatedRecipe& recipe : recipes) {
    for (std::size_t s = 0; s < recipe.sentences.size(); ++s) {
      flat.emplace_back(recipe.sentences[s], recipe.tags[s]);
    }
  }
  return flat;
}

// ---------------------------------------------------------------------------
// Stratified split
// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> largest_remainder_sizes(std::size_t n,
                                                 const std::vector<double>& ratios) {
  std::vector<std::size_t> sizes(ratios.size());
  std::vector<double> fractions(ratios.size());
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    double raw = ratios[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::size_t>(std::floor(raw));
    fractions[k] = raw - std::floor(raw);
    assigned += sizes[k];
  }
  std::vector<std::size_t> order(ratios.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return fractions[a] > fractions[b];
  });
  // The leftover after flooring is always smaller than the part count.
  for (std::size_t r = 0; r < n - assigned; ++r) sizes[order[r]]++;
  return sizes;
}

// One stratification dimension per tag plus one for the false-positive flag.
constexpr int kStrataDims = kNumTags + 1;

std::array<double, kStrataDims> recipe_counts(const AnnotatedRecipe& recipe,
                                              bool stratify_labels,
                                              bool balance_fp) {
  std::array<double, kStrataDims> counts{};
  if (stratify_labels) {
    for (const TagSequence& tags : recipe.tags) {
      for (Tag t : tags) counts[static_cast<int>(t)] += 1.0;
    }
  }
  if (balance_fp && recipe.false_positive) counts[kNumTags] = 1.0;
  return counts;
}

std::vector<std::vector<AnnotatedRecipe>> greedy_assign(
    const std::vector<AnnotatedRecipe>& recipes,
    const std::vector<std::size_t>& sizes, std::uint64_t seed,
    bool stratify_labels, bool balance_fp) {
  const std::size_t n = recipes.size();
  const std::size_t parts = sizes.size();

  std::vector<std::array<double, kStrataDims>> counts(n);
  std::array<double, kStrataDims> global{};
  for (std::size_t i = 0; i < n; ++i) {
    counts[i] = recipe_counts(recipes[i], stratify_labels, balance_fp);
    for (int d = 0; d < kStrataDims; ++d) global[d] += counts[i][d];
  }
  // Express counts as shares of each dimension's global mass so rare labels
  // carry the same weight as frequent ones (and as the O tag).
  std::vector<double> mass(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = 0; d < kStrataDims; ++d) {
      counts[i][d] = global[d] > 0.0 ? counts[i][d] / global[d] : 0.0;
      if (d < kNumTags && d != static_cast<int>(Tag::O)) mass[i] += counts[i][d];
    }
  }

  // Target share of every dimension is the part's size fraction.
  std::vector<std::array<double, kStrataDims>> target(parts);
  for (std::size_t k = 0; k < parts; ++k) {
    for (int d = 0; d < kStrataDims; ++d) {
      target[k][d] = global[d] > 0.0
                         ? static_cast<double>(sizes[k]) / static_cast<double>(n)
                         : 0.0;
    }
  }

  // Seeded shuffle breaks ties among equal-mass recipes; the stable sort
  // then orders heavy recipes first.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return mass[a] > mass[b];
  });

  std::vector<std::array<double, kStrataDims>> assigned(parts);
  for (auto& a : assigned) a.fill(0.0);
  std::vector<std::size_t> filled(parts, 0);
  std::vector<std::vector<std::size_t>> members(parts);

  for (std::size_t idx : order) {
    std::ptrdiff_t best = -1;
    double best_score = 0.0;
    std::size_t best_cap = 0;
    for (std::size_t k = 0; k < parts; ++k) {
      if (filled[k] >= sizes[k]) continue;
      double score = 0.0;
      for (int d = 0; d < kStrataDims; ++d) {
        score += counts[idx][d] * (target[k][d] - assigned[k][d]);
      }
      std::size_t cap = sizes[k] - filled[k];
      if (best < 0 || score > best_score ||
          (score == best_score && cap > best_cap)) {
        best = static_cast<std::ptrdiff_t>(k);
        best_score = score;
        best_cap = cap;
      }
    }
    members[static_cast<std::size_t>(best)].push_back(idx);
    filled[static_cast<std::size_t>(best)]++;
    for (int d = 0; d < kStrataDims; ++d) {
      assigned[static_cast<std::size_t>(best)][d] += counts[idx][d];
    }
  }

  std::vector<std::vector<AnnotatedRecipe>> result(parts);
  for (std::size_t k = 0; k < parts; ++k) {
    std::sort(members[k].begin(), members[k].end());
    for (std::size_t idx : members[k]) result[k].push_back(recipes[idx]);
  }
  return result;
}

}  // namespace

SplitResult stratified_split(const std::vector<AnnotatedRecipe>& recipes,
                             const SplitSpec& spec) {
  double sum = 0.0;
  for (double r : spec.ratios) {
    if (r <= 0.0 || r >= 1.0) throw Error("split ratios must lie in (0, 1)");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("split ratios must sum to 1");
  if (recipes.size() < 3) {
    throw Error("cannot split " + std::to_string(recipes.size()) +
                " recipes into 3 parts");
  }
  auto sizes = largest_remainder_sizes(
      recipes.size(), {spec.ratios[0], spec.ratios[1], spec.ratios[2]});
  auto parts = greedy_assign(recipes, sizes, spec.seed, spec.stratify_labels,
                             spec.balance_false_positives);
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

std::vector<std::vector<AnnotatedRecipe>> stratified_folds(
    const std::vector<AnnotatedRecipe>& recipes, int folds,
    std::uint64_t seed) {
  if (folds < 2) throw Error("need at least 2 folds");
  if (recipes.size() < static_cast<std::size_t>(folds)) {
    throw Error("cannot make " + std::to_string(folds) + " folds from " +
                std::to_string(recipes.size()) + " recipes");
  }
  std::vector<double> ratios(folds, 1.0 / folds);
  auto sizes = largest_remainder_sizes(recipes.size(), ratios);
  return greedy_assign(recipes, sizes, seed, true, true);
}

}  // namespace r2iot
