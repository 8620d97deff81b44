#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "recipe2iot/lexicon.hpp"
#include "recipe2iot/rng.hpp"

using namespace r2iot;

namespace {

DeviceLexicon lexicon_from(const std::string& text) {
  std::istringstream in(text);
  return load_lexicon(in);
}

EmbeddingTable embeddings_from(const std::string& text) {
  std::istringstream in(text);
  return load_embeddings(in);
}

}  // namespace

TEST_CASE("load_lexicon builds a hierarchy") {
  auto lex = lexicon_from(
      "oven\t_\toven,wall oven\n"
      "toaster oven\toven\ttoaster oven\n");
  CHECK(lex.classes().size() == 2);
  CHECK(lex.classes()[1].parent == "oven");
  CHECK(*lex.class_of_term("toaster oven") == "toaster oven");
  CHECK(lex.top_level("toaster oven") == "oven");
  CHECK(lex.contains_word("wall"));
  CHECK(lex.contains_word("oven"));
  CHECK(!lex.contains_word("fridge"));
}

TEST_CASE("load_lexicon rejects shared terms and cycles") {
  CHECK_THROWS_WITH_AS(
      lexicon_from("oven\t_\toven\nfridge\t_\tfridge,oven\n"),
      doctest::Contains("'oven'"), Error);

  CHECK_THROWS_WITH_AS(lexicon_from("a\tb\tx\nb\ta\ty\n"),
                       doctest::Contains("cycle"), Error);

  CHECK_THROWS_WITH_AS(lexicon_from("a\tmissing\tx\n"),
                       doctest::Contains("unknown parent"), Error);

  auto empty = lexicon_from("");
  CHECK(empty.empty());
  CHECK(match_devices(make_sentence("use the oven"), empty).empty());
}

TEST_CASE("load_lexicon deduplicates within a class and lowercases") {
  auto lex = lexicon_from("oven\t_\tOven,oven,Wall Oven\n");
  REQUIRE(lex.classes().size() == 1);
  CHECK(lex.classes()[0].terms ==
        std::vector<std::string>{"oven", "wall oven"});
}

TEST_CASE("emit_lexicon round-trips") {
  auto lex = lexicon_from(
      "oven\t_\toven,ovens\n"
      "toaster oven\toven\ttoaster oven\n");
  std::ostringstream out;
  emit_lexicon(out, lex);
  auto again = lexicon_from(out.str());
  std::ostringstream out2;
  emit_lexicon(out2, again);
  CHECK(out.str() == out2.str());
}

TEST_CASE("match_devices prefers the longest term") {
  auto lex = lexicon_from(
      "oven\t_\toven\n"
      "toaster oven\toven\ttoaster oven\n");
  auto matches = match_devices(make_sentence("put in the toaster oven"), lex);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].device_class == "toaster oven");
  CHECK(matches[0].token_begin == 3);
  CHECK(matches[0].token_end == 5);

  CHECK(match_devices(make_sentence("stir the batter"), lex).empty());

  auto caps = match_devices(make_sentence("Oven on"), lex);
  REQUIRE(caps.size() == 1);
  CHECK(caps[0].device_class == "oven");
}

TEST_CASE("match_devices output never overlaps") {
  auto lex = lexicon_from(
      "oven\t_\toven,toaster oven\n"
      "toaster\t_\ttoaster\n");
  auto matches =
      match_devices(make_sentence("toaster oven beside the toaster"), lex);
  REQUIRE(matches.size() == 2);
  CHECK(matches[0].device_class == "oven");  // owns "toaster oven"
  CHECK(matches[1].device_class == "toaster");
  for (std::size_t i = 1; i < matches.size(); ++i) {
    CHECK(matches[i - 1].token_end <= matches[i].token_begin);
  }
}

TEST_CASE("expand_with_embeddings ranks by cosine") {
  auto table = embeddings_from(
      "oven 1 0\n"
      "stove 0.9 0.1\n"
      "spoon 0 1\n");
  auto top = expand_with_embeddings(table, "oven", 1);
  REQUIRE(top.size() == 1);
  CHECK(top[0].first == "stove");
  // cos = 0.9 / sqrt(0.81 + 0.01) = 0.993884...
  CHECK(top[0].second == doctest::Approx(0.9938837347).epsilon(1e-9));

  auto all = expand_with_embeddings(table, "oven", 10);
  REQUIRE(all.size() == 2);  // k larger than vocabulary-1
  CHECK(all[0].first == "stove");
  CHECK(all[1].first == "spoon");
  CHECK(all[0].second >= all[1].second);
}

TEST_CASE("expand_with_embeddings edge cases") {
  auto lonely = embeddings_from("oven 1 0\n");
  CHECK(expand_with_embeddings(lonely, "oven", 1).empty());

  CHECK_THROWS_WITH_AS(expand_with_embeddings(lonely, "stove", 1),
                       doctest::Contains("not in embedding table"), Error);

  auto zero = embeddings_from("oven 0 0\nstove 1 0\n");
  CHECK_THROWS_WITH_AS(expand_with_embeddings(zero, "oven", 1),
                       doctest::Contains("zero vector"), Error);

  CHECK_THROWS_AS(embeddings_from("oven 1 0\nstove 1\n"), Error);
  CHECK_THROWS_AS(embeddings_from("oven 1 x\n"), Error);
  CHECK_THROWS_AS(embeddings_from("oven 1 0\noven 1 0\n"), Error);
}

TEST_CASE("expansion similarities are bounded and sorted") {
  Rng rng(41);
  std::ostringstream text;
  for (int w = 0; w < 40; ++w) {
    text << "w" << w;
    for (int d = 0; d < 5; ++d) text << ' ' << rng.uniform(-1.0, 1.0);
    text << "\n";
  }
  auto table = embeddings_from(text.str());
  auto ranked = expand_with_embeddings(table, "w0", 39);
  CHECK(ranked.size() == 39);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    CHECK(ranked[i].second <= 1.0 + 1e-12);
    CHECK(ranked[i].second >= -1.0 - 1e-12);
    if (i) CHECK(ranked[i - 1].second >= ranked[i].second);
  }
}

TEST_CASE("word2vec-style header line is accepted") {
  auto table = embeddings_from("2 3\noven 1 0 0\nstove 0 1 0\n");
  CHECK(table.dimension == 3);
  CHECK(table.vectors.size() == 2);
}
