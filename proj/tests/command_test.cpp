#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "recipe2iot/command.hpp"
#include "support/corpora.hpp"

using namespace r2iot;
using namespace r2iot::testing;

namespace {

DeviceLexicon kitchen_lexicon() {
  std::istringstream in(
      "oven\t_\toven,ovens\n"
      "fridge\t_\tfridge,refrigerator\n"
      "microwave\t_\tmicrowave\n");
  return load_lexicon(in);
}

}  // namespace

TEST_CASE("parse_how reads temperatures, durations and power") {
  HowValue temp = parse_how("400 degrees Fahrenheit");
  CHECK(temp.quantity == 400.0);
  CHECK(temp.unit == "fahrenheit");
  CHECK(temp.kind == HowKind::temperature);
  CHECK(temp.raw == "400 degrees Fahrenheit");

  HowValue duration = parse_how("40 minutes");
  CHECK(duration.quantity == 40.0);
  CHECK(duration.unit == "minute");
  CHECK(duration.kind == HowKind::duration);

  HowValue power = parse_how("1000 Watt");
  CHECK(power.quantity == 1000.0);
  CHECK(power.unit == "watt");
  CHECK(power.kind == HowKind::power);

  HowValue celsius = parse_how("200 degrees C");
  CHECK(celsius.quantity == 200.0);
  CHECK(celsius.unit == "celsius");
  CHECK(celsius.kind == HowKind::temperature);
}

TEST_CASE("parse_how covers fractions, settings, gas marks and fallbacks") {
  CHECK(parse_how("1/2 hour").quantity == 0.5);
  CHECK(parse_how("1 1/2 hours").quantity == 1.5);
  CHECK(parse_how("3.5 minutes").quantity == 3.5);

  HowValue gas = parse_how("gas mark 4");
  CHECK(gas.unit == "gas-mark");
  CHECK(gas.kind == HowKind::temperature);
  CHECK(gas.quantity == 4.0);

  HowValue setting = parse_how("high heat");
  CHECK(setting.kind == HowKind::setting);
  CHECK(!setting.quantity);
  CHECK(!setting.unit);

  HowValue degrees = parse_how("350 degrees");
  CHECK(degrees.kind == HowKind::temperature);
  CHECK(!degrees.unit);

  HowValue other = parse_how("until golden brown");
  CHECK(other.kind == HowKind::other);
  CHECK(other.raw == "until golden brown");
}

TEST_CASE("parse_how is total and preserves raw verbatim") {
  Rng rng(61);
  std::vector<std::string> inputs = {"", " ", "???", "12", "minutes",
                                     "very hot indeed"};
  for (int i = 0; i < 100; ++i) inputs.push_back(random_sentence(rng).text);
  for (const std::string& raw : inputs) {
    HowValue v = parse_how(raw);
    CHECK(v.raw == raw);
    if (v.kind == HowKind::temperature && v.unit) {
      CHECK((*v.unit == "celsius" || *v.unit == "fahrenheit" ||
             *v.unit == "gas-mark"));
    }
    if (v.kind == HowKind::duration && v.unit) {
      CHECK((*v.unit == "second" || *v.unit == "minute" || *v.unit == "hour"));
    }
  }
}

TEST_CASE("assemble_commands builds a full quadruple") {
  Sentence s = make_sentence(
      "Increase the temperature of the oven to 400 degrees Fahrenheit");
  std::vector<SpanAnnotation> spans = {
      {0, 8, SlotLabel::Why},
      {13, 24, SlotLabel::What},
      {32, 36, SlotLabel::Where},
      {40, 62, SlotLabel::How},
  };
  auto commands = assemble_commands(s, spans, kitchen_lexicon());
  REQUIRE(commands.size() == 1);
  const IoTCommand& cmd = commands[0];
  CHECK(cmd.where == "oven");
  CHECK(cmd.where_source == WhereSource::span);
  CHECK(cmd.what == "temperature");
  CHECK(cmd.why == "Increase");
  REQUIRE(cmd.how);
  CHECK(cmd.how->quantity == 400.0);
  CHECK(cmd.how->unit == "fahrenheit");
  CHECK(cmd.how->kind == HowKind::temperature);
  CHECK(cmd.complete);
  CHECK(cmd.inferred.empty());
  CHECK(cmd.provenance.spans.size() == 4);
  CHECK(cmd.provenance.n_where_in_sentence == 1);
}

TEST_CASE("device hint fills Where-less sentences") {
  Sentence s = make_sentence("bake for 40 minutes");
  s.device_hint = "oven";
  std::vector<SpanAnnotation> spans = {{9, 19, SlotLabel::How}};
  auto commands = assemble_commands(s, spans, kitchen_lexicon());
  REQUIRE(commands.size() == 1);
  CHECK(commands[0].where == "oven");
  CHECK(commands[0].where_source == WhereSource::hint);
  REQUIRE(commands[0].how);
  CHECK(commands[0].how->quantity == 40.0);
  CHECK(commands[0].how->unit == "minute");
  CHECK(!commands[0].complete);

  // Without a hint the record is an incompleteness marker.
  Sentence bare = make_sentence("bake for 40 minutes");
  auto none = assemble_commands(bare, spans, kitchen_lexicon());
  REQUIRE(none.size() == 1);
  CHECK(none[0].where.empty());
  CHECK(none[0].where_source == WhereSource::none);

  // No spans at all: no commands.
  CHECK(assemble_commands(bare, {}, kitchen_lexicon()).empty());
}

TEST_CASE("non-Where spans attach to the nearest Where") {
  Sentence s = make_sentence("warm the oven then chill in the fridge for 2 hours");
  // oven 9-13, fridge 32-38, "2 hours" 43-50.
  std::vector<SpanAnnotation> spans = {
      {9, 13, SlotLabel::Where},
      {32, 38, SlotLabel::Where},
      {43, 50, SlotLabel::How},
  };
  auto commands = assemble_commands(s, spans, kitchen_lexicon());
  REQUIRE(commands.size() == 2);
  CHECK(commands[0].where == "oven");
  CHECK(!commands[0].how);
  CHECK(commands[1].where == "fridge");
  REQUIRE(commands[1].how);
  CHECK(commands[1].how->quantity == 2.0);
  CHECK(commands[0].provenance.n_where_in_sentence == 2);

  // Every non-Where span lands on exactly one command.
  std::size_t attached = 0;
  for (const auto& cmd : commands) {
    for (const auto& span : cmd.provenance.spans) {
      attached += span.label != SlotLabel::Where;
    }
  }
  CHECK(attached == 1);
}

TEST_CASE("equidistant spans prefer the left Where") {
  Sentence s = make_sentence("oven x timer x fridge");
  // oven tok0 [0,4), timer tok2 [7,12), fridge tok4 [15,21): distance 2 both.
  std::vector<SpanAnnotation> spans = {
      {0, 4, SlotLabel::Where},
      {7, 12, SlotLabel::What},
      {15, 21, SlotLabel::Where},
  };
  auto commands = assemble_commands(s, spans, kitchen_lexicon());
  REQUIRE(commands.size() == 2);
  CHECK(commands[0].what == "timer");
  CHECK(!commands[1].what);
}

TEST_CASE("infer_missing_slots applies the oven temperature rule") {
  Sentence s = make_sentence("preheat the oven on 200 degrees C");
  // oven 12-16, "200 degrees C" 20-33.
  std::vector<SpanAnnotation> spans = {
      {12, 16, SlotLabel::Where},
      {20, 33, SlotLabel::How},
  };
  auto commands = assemble_commands(s, spans, kitchen_lexicon());
  REQUIRE(commands.size() == 1);
  CHECK(!commands[0].complete);

  IoTCommand inferred = infer_missing_slots(commands[0], default_rules());
  CHECK(inferred.what == "temperature");
  CHECK(inferred.why == "increase");
  CHECK(inferred.complete);
  CHECK(inferred.inferred == std::set<std::string>{"what", "why"});
  CHECK(inferred.where == "oven");
}

TEST_CASE("infer_missing_slots passes complete and unmatched commands through") {
  Sentence s = make_sentence(
      "Increase the temperature of the oven to 400 degrees Fahrenheit");
  std::vector<SpanAnnotation> spans = {
      {0, 8, SlotLabel::Why},
      {13, 24, SlotLabel::What},
      {32, 36, SlotLabel::Where},
      {40, 62, SlotLabel::How},
  };
  auto commands = assemble_commands(s, spans, kitchen_lexicon());
  IoTCommand out = infer_missing_slots(commands[0], default_rules());
  CHECK(out.what == "temperature");
  CHECK(out.why == "Increase");  // textual value untouched
  CHECK(out.inferred.empty());

  // fridge + kind-other has no matching rule.
  Sentence f = make_sentence("leave it in the fridge until set");
  std::vector<SpanAnnotation> fspans = {
      {16, 22, SlotLabel::Where},
      {23, 32, SlotLabel::How},
  };
  auto fcmd = assemble_commands(f, fspans, kitchen_lexicon());
  REQUIRE(fcmd.size() == 1);
  IoTCommand unchanged = infer_missing_slots(fcmd[0], default_rules());
  CHECK(!unchanged.complete);
  CHECK(unchanged.inferred.empty());
  CHECK(!unchanged.what);
}

TEST_CASE("rule priority picks the most specific rule") {
  std::istringstream rules_text(
      "*\tduration\ttimer\tset\t1\n"
      "fridge\tduration\tcooling timer\tset\t5\n");
  auto rules = load_rules(rules_text);
  IoTCommand cmd;
  cmd.where = "fridge";
  cmd.where_source = WhereSource::span;
  cmd.how = parse_how("2 hours");
  IoTCommand out = infer_missing_slots(cmd, rules);
  CHECK(out.what == "cooling timer");

  cmd.where = "microwave";
  IoTCommand wild = infer_missing_slots(cmd, rules);
  CHECK(wild.what == "timer");  // wildcard fallback
}

TEST_CASE("load_rules validates the format") {
  std::istringstream bad_kind("oven\theat\tx\ty\t1\n");
  CHECK_THROWS_WITH_AS(load_rules(bad_kind),
                       doctest::Contains("unknown how kind"), Error);
  std::istringstream bad_cols("oven\ttemperature\tx\t1\n");
  CHECK_THROWS_AS(load_rules(bad_cols), Error);
  std::istringstream bad_priority("oven\ttemperature\tx\ty\tz\n");
  CHECK_THROWS_AS(load_rules(bad_priority), Error);
}

TEST_CASE("detect_control_cues finds the three keyword kinds") {
  auto c1 = detect_control_cues(make_sentence("cook until golden brown"));
  REQUIRE(c1.size() == 1);
  CHECK(c1[0].keyword == "until");
  CHECK(c1[0].kind == CueKind::while_condition);
  CHECK(c1[0].token_index == 1);

  auto c2 = detect_control_cues(
      make_sentence("heat with 10 second intervals until melted"));
  REQUIRE(c2.size() == 2);
  CHECK(c2[0].keyword == "intervals");
  CHECK(c2[0].kind == CueKind::interval_loop);
  CHECK(c2[1].keyword == "until");

  auto c3 = detect_control_cues(
      make_sentence("if you have a 1000W, cook for 30 seconds"));
  REQUIRE(c3.size() == 1);
  CHECK(c3[0].keyword == "if");
  CHECK(c3[0].kind == CueKind::conditional);

  CHECK(detect_control_cues(make_sentence("just stir")).empty());
}

TEST_CASE("completeness_report tracks text and inferred completeness") {
  // Corpus A: every sentence carries all four spans.
  std::vector<AnnotatedRecipe> full;
  {
    AnnotatedRecipe r;
    r.id = "a";
    auto [s, tags] = toy_sentence("increase temperature oven 300 degrees");
    // toy tags: B-Why B-What B-Where O B-How -> adjust: "300" is O.
    r.sentences.push_back(s);
    r.tags.push_back(tags);
    full.push_back(std::move(r));
  }
  auto report_full =
      completeness_report(full, default_rules(), kitchen_lexicon());
  REQUIRE(report_full.rows.size() == 1);
  CHECK(report_full.rows[0].device == "oven");
  CHECK(report_full.rows[0].text_complete == doctest::Approx(1.0));
  CHECK(report_full.rows[0].inferred_complete == doctest::Approx(1.0));

  // Corpus B: Where+How only; text-incomplete, rule-completable.
  std::vector<AnnotatedRecipe> partial;
  {
    AnnotatedRecipe r;
    r.id = "b";
    Sentence s = make_sentence("oven at 200 degrees");
    r.tags.push_back({Tag::BWhere, Tag::O, Tag::BHow, Tag::IHow});
    r.sentences.push_back(std::move(s));
    partial.push_back(std::move(r));
  }
  auto report_partial =
      completeness_report(partial, default_rules(), kitchen_lexicon());
  REQUIRE(report_partial.rows.size() == 1);
  CHECK(report_partial.rows[0].text_complete == doctest::Approx(0.0));
  CHECK(report_partial.rows[0].inferred_complete == doctest::Approx(1.0));
  CHECK(report_partial.rows[0].missing_rate[static_cast<int>(SlotLabel::What)] ==
        doctest::Approx(1.0));
  CHECK(report_partial.rows[0].missing_rate[static_cast<int>(SlotLabel::How)] ==
        doctest::Approx(0.0));

  // Fractions are bounded and ordered.
  for (const auto& row : report_partial.rows) {
    CHECK(row.text_complete >= 0.0);
    CHECK(row.text_complete <= row.inferred_complete);
    CHECK(row.inferred_complete <= 1.0);
  }
}

TEST_CASE("assembly invariants hold on random annotated sentences") {
  Rng rng(71);
  auto lex = kitchen_lexicon();
  for (int trial = 0; trial < 500; ++trial) {
    Sentence s = random_sentence(rng);
    auto spans = random_aligned_spans(rng, s);
    auto commands = assemble_commands(s, spans, lex);

    std::size_t n_where = 0, n_other = 0;
    for (const auto& span : spans) {
      (span.label == SlotLabel::Where ? n_where : n_other)++;
    }
    if (spans.empty()) {
      CHECK(commands.empty());
      continue;
    }
    // One command per Where span; a single fallback record otherwise.
    CHECK(commands.size() == (n_where > 0 ? n_where : 1));

    std::size_t attached_other = 0;
    for (const IoTCommand& cmd : commands) {
      std::size_t own_where = 0;
      for (const auto& span : cmd.provenance.spans) {
        if (span.label == SlotLabel::Where) {
          ++own_where;
        } else {
          ++attached_other;
        }
      }
      if (cmd.where_source == WhereSource::span) CHECK(own_where == 1);
      CHECK(cmd.complete == (!cmd.where.empty() && cmd.what && cmd.why && cmd.how));
    }
    CHECK(attached_other == n_other);

    // Inference only ever fills what/why and never touches where or how.
    for (const IoTCommand& cmd : commands) {
      IoTCommand inferred = infer_missing_slots(cmd, default_rules());
      CHECK(inferred.where == cmd.where);
      CHECK(inferred.how == cmd.how);
      if (cmd.what) CHECK(inferred.what == cmd.what);
      if (cmd.why) CHECK(inferred.why == cmd.why);
      for (const std::string& slot : inferred.inferred) {
        CHECK((slot == "what" || slot == "why"));
      }
    }
  }
}

TEST_CASE("command JSON carries the schema and slots") {
  Sentence s = make_sentence("preheat the oven on 200 degrees C");
  s.recipe_id = "r1";
  std::vector<SpanAnnotation> spans = {
      {12, 16, SlotLabel::Where},
      {20, 33, SlotLabel::How},
  };
  auto commands = assemble_commands(s, spans, kitchen_lexicon());
  IoTCommand cmd = infer_missing_slots(commands[0], default_rules());
  nlohmann::json doc = command_to_json(cmd);
  CHECK(doc["schema"] == 1);
  CHECK(doc["where"] == "oven");
  CHECK(doc["where_source"] == "span");
  CHECK(doc["what"] == "temperature");
  CHECK(doc["why"] == "increase");
  CHECK(doc["how"]["quantity"] == 200.0);
  CHECK(doc["how"]["unit"] == "celsius");
  CHECK(doc["how"]["kind"] == "temperature");
  CHECK(doc["complete"] == true);
  CHECK(doc["inferred"].size() == 2);
  CHECK(doc["spans"].size() == 2);
}
