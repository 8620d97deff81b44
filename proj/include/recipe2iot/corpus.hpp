// Corpus data model: recipes, sentences, tokens, slot annotations and their
// IOB projection, plus the readers/writers and the stratified split.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "recipe2iot/util.hpp"

namespace r2iot {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

struct RawRecipe {
  std::string id;
  std::string title;
  std::vector<std::string> instructions;  // one entry per step, order kept
};

struct Token {
  std::string text;
  std::size_t start = 0;  // character offset into the sentence, inclusive
  std::size_t end = 0;    // exclusive
  std::optional<std::string> lemma;
  std::optional<std::string> pos;
  std::optional<std::size_t> head;  // token index; self-reference marks root
};

struct Sentence {
  std::string text;
  std::vector<Token> tokens;
  std::string recipe_id;
  std::optional<std::string> device_hint;  // device-class context, if known
};

/// The four slots of the command tuple. Nothing else is a slot.
enum class SlotLabel : std::uint8_t { Where, What, Why, How };

inline constexpr std::array<SlotLabel, 4> kSlotLabels = {
    SlotLabel::Where, SlotLabel::What, SlotLabel::Why, SlotLabel::How};

std::string_view slot_name(SlotLabel label);
std::optional<SlotLabel> parse_slot_label(std::string_view name);

/// Per-token IOB2 tags over the four slots; nine values in total. O sits at
/// index 0 so an untrained model's tie-break decodes to "no entity".
enum class Tag : std::uint8_t {
  O,
  BWhere,
  IWhere,
  BWhat,
  IWhat,
  BWhy,
  IWhy,
  BHow,
  IHow,
};

inline constexpr int kNumTags = 9;

std::string_view tag_name(Tag tag);
std::optional<Tag> parse_tag(std::string_view name);

inline bool is_begin(Tag t) { return static_cast<int>(t) % 2 == 1; }
inline bool is_inside(Tag t) { return t != Tag::O && static_cast<int>(t) % 2 == 0; }

/// Slot of a non-O tag. Must not be called with Tag::O.
SlotLabel tag_slot(Tag tag);
Tag begin_tag(SlotLabel label);
Tag inside_tag(SlotLabel label);

using TagSequence = std::vector<Tag>;

/// True iff every I-X is preceded by B-X or I-X of the same slot.
bool is_valid_iob(const TagSequence& tags);

struct SpanAnnotation {
  std::size_t start = 0;  // character offsets, end exclusive
  std::size_t end = 0;
  SlotLabel label = SlotLabel::Where;

  friend bool operator==(const SpanAnnotation&, const SpanAnnotation&) = default;
};

struct SplitSpec {
  std::array<double, 3> ratios = {0.70, 0.15, 0.15};
  std::uint64_t seed = 0;
  bool stratify_labels = true;
  bool balance_false_positives = true;
};

/// One recipe with its annotated sentences; the unit of the split.
struct AnnotatedRecipe {
  std::string id;
  std::string device;  // device-class context, empty if unknown
  bool false_positive = false;  // dictionary term present but zero annotations
  std::vector<Sentence> sentences;
  std::vector<TagSequence> tags;  // parallel to sentences
};

// ---------------------------------------------------------------------------
// Ingestion and text normalization
// ---------------------------------------------------------------------------

struct IngestResult {
  std::vector<RawRecipe> recipes;
  std::vector<std::string> errors;  // one entry per malformed record
};

/// Reads a RecipeQA-style JSON document (an array of records, or an object
/// with a "data" array). Records carry an id ("id" or "recipe_id"), a title
/// and ordered steps ("steps" as strings or "context" objects with "body");
/// image/QA fields are ignored. Malformed records are reported in
/// IngestResult::errors and skipped.
IngestResult ingest_recipeqa(std::istream& in);
IngestResult ingest_recipeqa_file(const std::string& path);

/// Case-insensitive whole-token acronym expansions; keys are lowercase.
using AcronymTable = std::unordered_map<std::string, std::string>;

/// Parses `short<TAB>full` lines; '#' starts a comment.
AcronymTable load_acronyms(std::istream& in);
AcronymTable load_acronyms_file(const std::string& path);

/// Folds text to ASCII (standard decompositions kept, the rest dropped),
/// expands whole-token acronyms, strips emoticons and decorative
/// punctuation, and collapses whitespace. Total and idempotent.
std::string normalize_text(std::string_view s, const AcronymTable& acronyms);

/// Rule-based tokenizer for normalized ASCII text: splits on whitespace,
/// emits maximal letter runs, maximal digit runs, and single punctuation
/// characters. Offsets index into the input string.
std::vector<Token> tokenize(std::string_view s);

/// Tokenizes `text` and wraps it into a Sentence.
Sentence make_sentence(std::string text, std::string recipe_id = {});

// ---------------------------------------------------------------------------
// Span <-> IOB conversion
// ---------------------------------------------------------------------------

/// Projects spans onto per-token IOB2 tags. Spans that cut through a token
/// are snapped outward to token boundaries; each repair appends a message to
/// `warnings` (or to stderr when warnings == nullptr, never silently).
TagSequence spans_to_iob(const Sentence& sentence,
                         std::vector<SpanAnnotation> spans,
                         std::vector<std::string>* warnings = nullptr);

/// Recovers maximal spans from tags. A bare I-X (no preceding B-X/I-X of the
/// same slot) is treated as B-X with a repair warning.
std::vector<SpanAnnotation> iob_to_spans(const Sentence& sentence,
                                         const TagSequence& tags,
                                         std::vector<std::string>* warnings = nullptr);

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

struct DoccanoEntry {
  Sentence sentence;
  std::vector<SpanAnnotation> spans;
  std::string recipe_id;  // from "id" / "meta.recipe_id" when present
  std::string device;     // from "meta.device" when present
  bool false_positive = false;
};

/// Reads doccano-style JSONL: one object per line with "text" and "labels"
/// ([start, end, label] triples). Unknown label names and malformed JSON are
/// hard errors naming the line number.
std::vector<DoccanoEntry> load_doccano(std::istream& in);
std::vector<DoccanoEntry> load_doccano_file(const std::string& path);
void emit_doccano(std::ostream& out, const std::vector<DoccanoEntry>& entries);

// CoNLL-style TSV, one token per line:
//   token<TAB>lemma<TAB>pos<TAB>head<TAB>tag
// with `_` for absent optional columns and a blank line between sentences.
// The head column is the 0-based token index within the sentence
// (self-reference marks the root). Comment lines `# key = value` carry
// recipe metadata (id, device, fp) and start a new recipe; files without
// them parse as one single-sentence recipe per sentence.
std::vector<AnnotatedRecipe> parse_conll(std::istream& in);
std::vector<AnnotatedRecipe> parse_conll_file(const std::string& path);
void emit_conll(std::ostream& out, const std::vector<AnnotatedRecipe>& recipes);

/// Flattens recipes to their annotated sentences.
std::vector<std::pair<Sentence, TagSequence>> flatten(
    const std::vector<AnnotatedRecipe>& recipes);

// ---------------------------------------------------------------------------
// Stratified split
// ---------------------------------------------------------------------------

struct SplitResult {
  std::vector<AnnotatedRecipe> train;
  std::vector<AnnotatedRecipe> valid;
  std::vector<AnnotatedRecipe> test;
};

/// Greedy stratified three-way partition at recipe granularity. Part sizes
/// come from largest-remainder rounding of the ratios; recipes are assigned
/// in descending order of labeled-token mass to the part with the largest
/// remaining per-label deficit. False-positive recipes count as their own
/// stratum when spec.balance_false_positives is set. Deterministic given
/// spec.seed.
SplitResult stratified_split(const std::vector<AnnotatedRecipe>& recipes,
                             const SplitSpec& spec);

/// K-way variant used for cross-validation folds; same algorithm with equal
/// ratios. Returns `folds` disjoint recipe groups.
std::vector<std::vector<AnnotatedRecipe>> stratified_folds(
    const std::vector<AnnotatedRecipe>& recipes, int folds, std::uint64_t seed);

}  // namespace r2iot
