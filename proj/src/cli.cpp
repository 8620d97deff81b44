#include "recipe2iot/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "recipe2iot/command.hpp"
#include "recipe2iot/config.hpp"
#include "recipe2iot/eval.hpp"

namespace r2iot {

namespace {

using nlohmann::json;

std::string format_double(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

std::string format_fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

void log_run(const std::string& subcommand, const PipelineConfig& cfg) {
  std::cerr << "[recipe2iot] " << subcommand
            << " config=" << cfg.to_json().dump() << "\n";
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open output file: " + path);
  return out;
}

DeviceLexicon load_lexicon_or_empty(const std::string& path,
                                    const char* purpose) {
  if (path.empty()) {
    std::cerr << "[recipe2iot] note: no lexicon given; " << purpose << "\n";
    return DeviceLexicon{};
  }
  return load_lexicon_file(path);
}

void apply_stopwords(PipelineConfig& cfg) {
  if (!cfg.stopwords_path.empty()) {
    cfg.features.stopwords = load_stopwords_file(cfg.stopwords_path);
  }
}

std::vector<InferenceRule> load_rules_or_default(const std::string& path) {
  return path.empty() ? default_rules() : load_rules_file(path);
}

// Groups doccano entries into recipes: consecutive entries sharing a
// nonempty recipe id form one recipe; unlabeled entries stand alone.
std::vector<AnnotatedRecipe> doccano_to_recipes(
    const std::vector<DoccanoEntry>& entries,
    std::vector<std::string>* warnings) {
  std::vector<AnnotatedRecipe> recipes;
  std::size_t anon = 0;
  for (const DoccanoEntry& entry : entries) {
    bool start_new = recipes.empty() || entry.recipe_id.empty() ||
                     recipes.back().id != entry.recipe_id;
    if (start_new) {
      AnnotatedRecipe recipe;
      recipe.id = entry.recipe_id.empty() ? "s" + std::to_string(anon++)
                                          : entry.recipe_id;
      recipe.device = entry.device;
      recipe.false_positive = entry.false_positive;
      recipes.push_back(std::move(recipe));
    }
    AnnotatedRecipe& recipe = recipes.back();
    Sentence sentence = entry.sentence;
    sentence.recipe_id = recipe.id;
    if (!recipe.device.empty()) sentence.device_hint = recipe.device;
    recipe.tags.push_back(spans_to_iob(sentence, entry.spans, warnings));
    recipe.sentences.push_back(std::move(sentence));
  }
  return recipes;
}

void print_score_report(std::ostream& out, const ScoreReport& report,
                        const std::string& format) {
  if (format == "tsv") {
    out << "label\tprecision\trecall\tf1\ttokens\tentities\n";
    for (SlotLabel label : kSlotLabels) {
      const LabelScore& s = report.per_label[static_cast<int>(label)];
      out << slot_name(label) << '\t' << format_fixed(s.precision) << '\t'
          << format_fixed(s.recall) << '\t' << format_fixed(s.f1) << '\t'
          << s.support_tokens << '\t' << s.support_entities << "\n";
    }
    out << "micro-avg\t" << format_fixed(report.micro.precision) << '\t'
        << format_fixed(report.micro.recall) << '\t'
        << format_fixed(report.micro.f1) << '\t'
        << report.micro.support_tokens << '\t'
        << report.micro.support_entities << "\n";
    out << "token-micro\t" << format_fixed(report.token_precision) << '\t'
        << format_fixed(report.token_recall) << '\t'
        << format_fixed(report.token_f1) << "\t\t\n";
    return;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-10s %9s %9s %9s %8s %9s\n", "label",
                "precision", "recall", "f1", "tokens", "entities");
  out << buf;
  for (SlotLabel label : kSlotLabels) {
    const LabelScore& s = report.per_label[static_cast<int>(label)];
    std::snprintf(buf, sizeof(buf), "%-10s %9.4f %9.4f %9.4f %8ld %9ld\n",
                  std::string(slot_name(label)).c_str(), s.precision, s.recall,
                  s.f1, s.support_tokens, s.support_entities);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "%-10s %9.4f %9.4f %9.4f %8ld %9ld\n",
                "micro-avg", report.micro.precision, report.micro.recall,
                report.micro.f1, report.micro.support_tokens,
                report.micro.support_entities);
  out << buf;
  std::snprintf(buf, sizeof(buf), "%-10s %9.4f %9.4f %9.4f\n", "token-micro",
                report.token_precision, report.token_recall, report.token_f1);
  out << buf;
}

std::vector<TagSequence> gold_tags_of(const std::vector<AnnotatedRecipe>& rs) {
  std::vector<TagSequence> tags;
  for (const auto& [sentence, t] : flatten(rs)) {
    (void)sentence;
    tags.push_back(t);
  }
  return tags;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_preprocess(const PipelineConfig& cfg, const std::string& in_path,
                   const std::string& out_path, const std::string& input_format,
                   const std::string& output_format, const std::string& device) {
  AcronymTable acronyms;
  if (!cfg.acronyms_path.empty()) {
    acronyms = load_acronyms_file(cfg.acronyms_path);
  }

  std::vector<AnnotatedRecipe> recipes;
  std::size_t anon = 0;
  auto add_recipe = [&](const std::string& id,
                        const std::vector<std::string>& steps) {
    AnnotatedRecipe recipe;
    recipe.id = id.empty() ? "s" + std::to_string(anon++) : id;
    recipe.device = device;
    for (const std::string& step : steps) {
      std::string normalized = normalize_text(step, acronyms);
      if (normalized.empty()) continue;
      Sentence sentence = make_sentence(std::move(normalized), recipe.id);
      if (!device.empty()) sentence.device_hint = device;
      recipe.tags.emplace_back(sentence.tokens.size(), Tag::O);
      recipe.sentences.push_back(std::move(sentence));
    }
    recipes.push_back(std::move(recipe));
  };

  if (input_format == "recipeqa") {
    IngestResult ingested = ingest_recipeqa_file(in_path);
    for (const std::string& err : ingested.errors) {
      std::cerr << "[recipe2iot] ingest: " << err << "\n";
    }
    for (const RawRecipe& raw : ingested.recipes) {
      add_recipe(raw.id, raw.instructions);
    }
    std::cerr << "[recipe2iot] ingested " << ingested.recipes.size()
              << " recipes (" << ingested.errors.size() << " errors)\n";
  } else {  // one instruction per line
    std::ifstream in(in_path);
    if (!in) throw Error("cannot open input file: " + in_path);
    std::string line;
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      add_recipe("", {line});
    }
  }

  auto out = open_output(out_path);
  if (output_format == "text") {
    for (const AnnotatedRecipe& recipe : recipes) {
      for (const Sentence& sentence : recipe.sentences) {
        out << sentence.text << "\n";
      }
    }
  } else {
    emit_conll(out, recipes);
  }
  return 0;
}

int cmd_convert(const std::string& from, const std::string& to,
                const std::string& in_path, const std::string& out_path) {
  if (from == to) throw Error("convert: --from and --to are the same format");
  std::vector<std::string> warnings;
  auto out = open_output(out_path);
  if (from == "doccano") {
    auto recipes = doccano_to_recipes(load_doccano_file(in_path), &warnings);
    emit_conll(out, recipes);
  } else {
    auto recipes = parse_conll_file(in_path);
    std::vector<DoccanoEntry> entries;
    for (const AnnotatedRecipe& recipe : recipes) {
      for (std::size_t s = 0; s < recipe.sentences.size(); ++s) {
        DoccanoEntry entry;
        entry.sentence = recipe.sentences[s];
        entry.spans = iob_to_spans(recipe.sentences[s], recipe.tags[s], &warnings);
        entry.recipe_id = recipe.id;
        entry.device = recipe.device;
        entry.false_positive = recipe.false_positive;
        entries.push_back(std::move(entry));
      }
    }
    emit_doccano(out, entries);
  }
  for (const std::string& w : warnings) {
    std::cerr << "[recipe2iot] warning: " << w << "\n";
  }
  return 0;
}

int cmd_split(const PipelineConfig& cfg, const std::string& in_path,
              const std::string& out_prefix) {
  auto recipes = parse_conll_file(in_path);
  SplitResult result = stratified_split(recipes, cfg.split);
  auto write = [&](const char* part, const std::vector<AnnotatedRecipe>& rs) {
    auto out = open_output(out_prefix + "." + part + ".conll");
    emit_conll(out, rs);
    std::cerr << "[recipe2iot] " << part << ": " << rs.size() << " recipes\n";
  };
  write("train", result.train);
  write("valid", result.valid);
  write("test", result.test);
  return 0;
}

int cmd_train(const PipelineConfig& cfg, const std::string& train_path,
              const std::string& model_path) {
  auto lexicon =
      load_lexicon_or_empty(cfg.lexicon_path, "in-dictionary features disabled");
  auto recipes = parse_conll_file(train_path);
  auto dataset = build_dataset(flatten(recipes), cfg.features, lexicon);
  std::cerr << "[recipe2iot] dataset: " << dataset.sequences.size()
            << " sentences, " << dataset.feature_names.size() << " features\n";
  CrfModel model = train(dataset, cfg.train);
  std::cerr << "[recipe2iot] trained in " << model.metadata.iterations
            << " iterations, objective "
            << format_double(model.metadata.final_objective) << "\n";
  save_model_file(model, model_path);
  return 0;
}

int cmd_tag(const std::string& model_path, const std::string& in_path,
            const std::string& out_path) {
  CrfModel model = load_model_file(model_path);
  Tagger tagger(model);
  auto recipes = parse_conll_file(in_path);
  for (AnnotatedRecipe& recipe : recipes) {
    for (std::size_t s = 0; s < recipe.sentences.size(); ++s) {
      recipe.tags[s] = tagger.tag(recipe.sentences[s]);
    }
  }
  auto out = open_output(out_path);
  emit_conll(out, recipes);
  return 0;
}

int cmd_eval(const PipelineConfig& cfg, const std::string& gold_path,
             const std::string& pred_path, const std::string& out_path) {
  auto gold = parse_conll_file(gold_path);
  auto pred = parse_conll_file(pred_path);
  ScoreReport report = entity_scores(gold_tags_of(gold), gold_tags_of(pred));
  if (out_path.empty()) {
    print_score_report(std::cout, report, cfg.report_format);
  } else {
    auto out = open_output(out_path);
    print_score_report(out, report, cfg.report_format);
  }
  return 0;
}

int cmd_search(const PipelineConfig& cfg, const std::string& in_path,
               int jobs, const std::string& out_config,
               const std::string& out_table) {
  auto lexicon =
      load_lexicon_or_empty(cfg.lexicon_path, "in-dictionary features disabled");
  auto recipes = parse_conll_file(in_path);
  SearchResult result = random_search(recipes, cfg.search, cfg.features,
                                      lexicon, cfg.train, jobs);

  std::ostringstream table;
  table << "index\tc1\tc2\tmin_freq\tmean_f1\tfolds\n";
  for (const CandidateResult& cand : result.table) {
    table << cand.index << '\t' << format_double(cand.c1) << '\t'
          << format_double(cand.c2) << '\t' << cand.min_freq << '\t';
    if (cand.failed) {
      table << "failed(" << cand.error << ")\t\n";
      continue;
    }
    table << format_fixed(cand.mean_f1) << '\t';
    for (std::size_t i = 0; i < cand.fold_f1.size(); ++i) {
      if (i) table << ',';
      table << format_fixed(cand.fold_f1[i]);
    }
    table << "\n";
  }
  if (out_table.empty()) {
    std::cout << table.str();
  } else {
    auto out = open_output(out_table);
    out << table.str();
  }

  const CandidateResult& best = result.table[result.best_index];
  std::cerr << "[recipe2iot] best candidate " << best.index
            << ": c1=" << format_double(best.c1)
            << " c2=" << format_double(best.c2)
            << " min_freq=" << best.min_freq
            << " mean_f1=" << format_fixed(best.mean_f1) << "\n";
  if (!out_config.empty()) {
    json doc = {
        {"train",
         {{"c1", result.best.c1},
          {"c2", result.best.c2},
          {"min_freq", result.best.min_freq},
          {"max_iterations", result.best.max_iterations},
          {"convergence_tol", result.best.convergence_tol},
          {"seed", result.best.seed}}},
        {"features", {{"min_freq", result.best.min_freq}}},
    };
    auto out = open_output(out_config);
    out << doc.dump(2) << "\n";
  }
  return 0;
}

int cmd_ablate(const PipelineConfig& cfg, const std::string& train_path,
               const std::string& valid_path) {
  auto lexicon =
      load_lexicon_or_empty(cfg.lexicon_path, "in-dictionary features disabled");
  auto train_recipes = parse_conll_file(train_path);
  auto valid_recipes = parse_conll_file(valid_path);
  auto rows =
      ablation(train_recipes, valid_recipes, cfg.features, lexicon, cfg.train);
  std::cout << "feature_set\twindow\thead\tvalid_micro_f1\n";
  for (const AblationRow& row : rows) {
    std::cout << row.feature_set << '\t' << row.window << '\t'
              << (row.use_head ? "yes" : "no") << '\t'
              << format_fixed(row.micro_f1) << "\n";
  }
  return 0;
}

int cmd_commands(const PipelineConfig& cfg, const std::string& in_path,
                 const std::string& out_path) {
  auto lexicon = load_lexicon_or_empty(
      cfg.lexicon_path, "device classes fall back to span text");
  auto rules = load_rules_or_default(cfg.rules_path);
  auto recipes = parse_conll_file(in_path);
  std::vector<std::string> warnings;
  auto out = open_output(out_path);
  for (const AnnotatedRecipe& recipe : recipes) {
    for (std::size_t s = 0; s < recipe.sentences.size(); ++s) {
      const Sentence& sentence = recipe.sentences[s];
      auto spans = iob_to_spans(sentence, recipe.tags[s], &warnings);
      if (spans.empty()) continue;
      auto cues = detect_control_cues(sentence);
      for (IoTCommand cmd : assemble_commands(sentence, spans, lexicon)) {
        cmd.provenance.sentence_id = recipe.id + ":" + std::to_string(s);
        cmd = infer_missing_slots(std::move(cmd), rules);
        json doc = command_to_json(cmd);
        json cue_list = json::array();
        for (const ControlCue& cue : cues) {
          cue_list.push_back({{"keyword", cue.keyword},
                              {"kind", std::string(cue_kind_name(cue.kind))},
                              {"token_index", cue.token_index}});
        }
        doc["control_cues"] = std::move(cue_list);
        out << doc.dump() << "\n";
      }
    }
  }
  for (const std::string& w : warnings) {
    std::cerr << "[recipe2iot] warning: " << w << "\n";
  }
  return 0;
}

int cmd_report(const PipelineConfig& cfg, const std::string& kind,
               const std::string& in_path, bool per_device,
               const std::string& out_path) {
  auto recipes = parse_conll_file(in_path);
  const bool tsv = cfg.report_format == "tsv";
  std::ostringstream text;
  char buf[200];
  if (kind == "distribution") {
    DistributionReport report = label_distribution(recipes, per_device);
    if (tsv) {
      text << "device\tlabel\tspans\tpercent\n";
    } else {
      std::snprintf(buf, sizeof(buf), "%-14s %-7s %8s %9s\n", "device",
                    "label", "spans", "percent");
      text << buf;
    }
    for (const DistributionRow& row : report.rows) {
      if (tsv) {
        text << row.device << '\t' << slot_name(row.label) << '\t' << row.count
             << '\t' << format_fixed(row.percent, 2) << "\n";
      } else {
        std::snprintf(buf, sizeof(buf), "%-14s %-7s %8ld %9.2f\n",
                      row.device.c_str(),
                      std::string(slot_name(row.label)).c_str(), row.count,
                      row.percent);
        text << buf;
      }
    }
    for (const auto& [device, total] : report.totals) {
      if (tsv) {
        text << device << "\tTOTAL\t" << total << "\t100.00\n";
      } else {
        std::snprintf(buf, sizeof(buf), "%-14s %-7s %8ld %9.2f\n",
                      device.c_str(), "TOTAL", total, 100.0);
        text << buf;
      }
    }
  } else if (kind == "completeness") {
    auto lexicon = load_lexicon_or_empty(
        cfg.lexicon_path, "device classes fall back to span text");
    auto rules = load_rules_or_default(cfg.rules_path);
    CompletenessReport report = completeness_report(recipes, rules, lexicon);
    if (tsv) {
      text << "device\tcommands\ttext_complete\tinferred_complete\t"
              "missing_where\tmissing_what\tmissing_why\tmissing_how\n";
    } else {
      std::snprintf(buf, sizeof(buf), "%-14s %9s %14s %18s %9s %9s %9s %9s\n",
                    "device", "commands", "text_complete", "inferred_complete",
                    "no_where", "no_what", "no_why", "no_how");
      text << buf;
    }
    for (const CompletenessRow& row : report.rows) {
      if (tsv) {
        text << row.device << '\t' << row.total << '\t'
             << format_fixed(row.text_complete) << '\t'
             << format_fixed(row.inferred_complete);
        for (double rate : row.missing_rate) text << '\t' << format_fixed(rate);
        text << "\n";
      } else {
        std::snprintf(buf, sizeof(buf),
                      "%-14s %9ld %14.4f %18.4f %9.4f %9.4f %9.4f %9.4f\n",
                      row.device.c_str(), row.total, row.text_complete,
                      row.inferred_complete, row.missing_rate[0],
                      row.missing_rate[1], row.missing_rate[2],
                      row.missing_rate[3]);
        text << buf;
      }
    }
  } else {
    throw Error("report kind must be 'distribution' or 'completeness'");
  }
  if (out_path.empty()) {
    std::cout << text.str();
  } else {
    auto out = open_output(out_path);
    out << text.str();
  }
  return 0;
}

int cmd_agreement(const std::vector<std::string>& files) {
  if (files.size() < 2) {
    throw Error("agreement needs at least two annotation files");
  }
  std::vector<std::vector<DoccanoEntry>> annotators;
  for (const std::string& path : files) {
    annotators.push_back(load_doccano_file(path));
  }
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < annotators.size(); ++i) {
    for (std::size_t j = i + 1; j < annotators.size(); ++j) {
      double f1 = agreement_f1(annotators[i], annotators[j]);
      std::cout << files[i] << '\t' << files[j] << '\t' << format_fixed(f1)
                << "\n";
      sum += f1;
      ++pairs;
    }
  }
  std::cout << "mean\t\t" << format_fixed(sum / pairs) << "\n";
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Argument wiring
// ---------------------------------------------------------------------------

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"recipe2iot: parse cooking-recipe instructions into IoT "
               "command tuples (Where, What, Why, How)"};
  app.require_subcommand(1);

  PipelineConfig defaults;
  std::string config_path;
  std::string in_path, out_path, gold_path, pred_path;
  std::string model_path, train_path, valid_path, out_prefix;
  std::string input_format = "recipeqa", output_format = "conll";
  std::string from_format, to_format, device, report_kind;
  std::string out_config, out_table;
  std::string lexicon_path, acronyms_path, stopwords_path, rules_path;
  std::string ratios_str, report_format;
  std::vector<std::string> agreement_files;
  bool per_device = false, no_stratify = false, no_fp_balance = false;
  bool no_head = false;
  int window = -1, min_freq = -1, max_iterations = -1;
  int n_candidates = -1, folds = -1, jobs = 0;
  double c1 = -1.0, c2 = -1.0, tol = -1.0;
  long long seed = -1;

  auto add_common = [&](CLI::App* sub, bool with_lexicon = false) {
    sub->add_option("--config", config_path, "pipeline config file (JSON)");
    sub->add_option("--seed", seed, "random seed");
    if (with_lexicon) {
      sub->add_option("--lexicon", lexicon_path, "device lexicon TSV");
    }
  };

  auto* preprocess = app.add_subcommand(
      "preprocess", "normalize and tokenize raw recipe text");
  add_common(preprocess);
  preprocess->add_option("--in", in_path, "input file")->required();
  preprocess->add_option("--out", out_path, "output file")->required();
  preprocess->add_option("--input-format", input_format,
                         "recipeqa (JSON) or text (one step per line)")
      ->check(CLI::IsMember({"recipeqa", "text"}));
  preprocess->add_option("--output-format", output_format, "conll or text")
      ->check(CLI::IsMember({"conll", "text"}));
  preprocess->add_option("--acronyms", acronyms_path, "acronym table TSV");
  preprocess->add_option("--device", device,
                         "device-class context for all recipes");

  auto* convert = app.add_subcommand("convert",
                                     "convert between doccano JSONL and CoNLL");
  add_common(convert);
  convert->add_option("--from", from_format)->required()
      ->check(CLI::IsMember({"doccano", "conll"}));
  convert->add_option("--to", to_format)->required()
      ->check(CLI::IsMember({"doccano", "conll"}));
  convert->add_option("--in", in_path)->required();
  convert->add_option("--out", out_path)->required();

  auto* split_cmd = app.add_subcommand("split",
                                   "stratified train/valid/test partition");
  add_common(split_cmd);
  split_cmd->add_option("--in", in_path)->required();
  split_cmd->add_option("--out-prefix", out_prefix)->required();
  split_cmd->add_option("--ratios", ratios_str, "e.g. 0.7,0.15,0.15");
  split_cmd->add_flag("--no-stratify", no_stratify);
  split_cmd->add_flag("--no-fp-balance", no_fp_balance);

  auto* train_cmd = app.add_subcommand("train", "train a CRF labeler");
  add_common(train_cmd, true);
  train_cmd->add_option("--train", train_path, "training CoNLL file")->required();
  train_cmd->add_option("--out", model_path, "output model file")->required();
  train_cmd->add_option("--stopwords", stopwords_path);
  train_cmd->add_option("--window", window)->check(CLI::Range(0, 3));
  train_cmd->add_flag("--no-head", no_head, "drop head-token features");
  train_cmd->add_option("--min-freq", min_freq);
  train_cmd->add_option("--c1", c1, "L1 strength");
  train_cmd->add_option("--c2", c2, "L2 strength");
  train_cmd->add_option("--max-iterations", max_iterations);
  train_cmd->add_option("--tol", tol, "relative objective tolerance");

  auto* tag_cmd = app.add_subcommand("tag", "decode tags with a trained model");
  add_common(tag_cmd);
  tag_cmd->add_option("--model", model_path)->required();
  tag_cmd->add_option("--in", in_path)->required();
  tag_cmd->add_option("--out", out_path)->required();

  auto* eval_cmd = app.add_subcommand("eval", "entity-level P/R/F1 report");
  add_common(eval_cmd);
  eval_cmd->add_option("--gold", gold_path)->required();
  eval_cmd->add_option("--pred", pred_path)->required();
  eval_cmd->add_option("--out", out_path);
  eval_cmd->add_option("--report-format", report_format)
      ->check(CLI::IsMember({"text", "tsv"}));

  auto* search = app.add_subcommand(
      "search", "random hyperparameter search with cross-validation");
  add_common(search, true);
  search->add_option("--in", in_path, "train+valid CoNLL file")->required();
  search->add_option("--stopwords", stopwords_path);
  search->add_option("--n", n_candidates, "number of candidates");
  search->add_option("--folds", folds);
  search->add_option("--jobs", jobs, "parallel candidate evaluations");
  search->add_option("--max-iterations", max_iterations);
  search->add_option("--tol", tol);
  search->add_option("--out-config", out_config, "write best config JSON");
  search->add_option("--out-table", out_table, "write results table TSV");

  auto* ablate = app.add_subcommand("ablate", "feature-group ablation");
  add_common(ablate, true);
  ablate->add_option("--train", train_path)->required();
  ablate->add_option("--valid", valid_path)->required();
  ablate->add_option("--stopwords", stopwords_path);
  ablate->add_option("--min-freq", min_freq);
  ablate->add_option("--c1", c1);
  ablate->add_option("--c2", c2);
  ablate->add_option("--max-iterations", max_iterations);
  ablate->add_option("--tol", tol);

  auto* commands = app.add_subcommand(
      "commands", "assemble IoT command JSONL from tagged sentences");
  add_common(commands, true);
  commands->add_option("--in", in_path, "tagged CoNLL file")->required();
  commands->add_option("--out", out_path)->required();
  commands->add_option("--rules", rules_path, "inference rule TSV");

  auto* report = app.add_subcommand("report",
                                    "corpus distribution / completeness");
  add_common(report, true);
  report->add_option("--kind", report_kind)->required()
      ->check(CLI::IsMember({"distribution", "completeness"}));
  report->add_option("--in", in_path)->required();
  report->add_option("--out", out_path);
  report->add_flag("--per-device", per_device);
  report->add_option("--rules", rules_path);
  report->add_option("--report-format", report_format)
      ->check(CLI::IsMember({"text", "tsv"}));

  auto* agreement = app.add_subcommand(
      "agreement", "pairwise inter-annotator entity F1 (doccano JSONL)");
  add_common(agreement);
  agreement->add_option("files", agreement_files, "two or more annotation files")
      ->expected(-2);

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("recipe2iot");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    // Config file first, then explicit flags override.
    PipelineConfig cfg = config_path.empty()
                             ? PipelineConfig{}
                             : PipelineConfig::load_file(config_path);
    CLI::App* sub = app.get_subcommands().front();
    auto given = [&](const char* name) {
      return sub->get_option_no_throw(name) != nullptr &&
             sub->count(name) > 0;
    };

    if (given("--lexicon")) cfg.lexicon_path = lexicon_path;
    if (given("--acronyms")) cfg.acronyms_path = acronyms_path;
    if (given("--stopwords")) cfg.stopwords_path = stopwords_path;
    if (given("--rules")) cfg.rules_path = rules_path;
    if (given("--window")) cfg.features.window = window;
    if (given("--no-head")) cfg.features.use_head = false;
    if (given("--min-freq")) {
      cfg.features.min_freq = min_freq;
      cfg.train.min_freq = min_freq;
    }
    if (given("--c1")) cfg.train.c1 = c1;
    if (given("--c2")) cfg.train.c2 = c2;
    if (given("--max-iterations")) {
      cfg.train.max_iterations = max_iterations;
    }
    if (given("--tol")) cfg.train.convergence_tol = tol;
    if (given("--seed")) {
      cfg.train.seed = static_cast<std::uint64_t>(seed);
      cfg.split.seed = static_cast<std::uint64_t>(seed);
      cfg.search.seed = static_cast<std::uint64_t>(seed);
    }
    if (given("--ratios")) {
      auto parts = split_whitespace(join(split(ratios_str, ','), " "));
      if (parts.size() != 3) throw Error("--ratios needs three numbers");
      for (int i = 0; i < 3; ++i) cfg.split.ratios[i] = std::stod(parts[i]);
    }
    if (no_stratify) cfg.split.stratify_labels = false;
    if (no_fp_balance) cfg.split.balance_false_positives = false;
    if (given("--n")) cfg.search.n_candidates = n_candidates;
    if (given("--folds")) cfg.search.folds = folds;
    if (given("--report-format")) cfg.report_format = report_format;
    apply_stopwords(cfg);

    log_run(sub->get_name(), cfg);

    if (sub == preprocess) {
      return cmd_preprocess(cfg, in_path, out_path, input_format,
                            output_format, device);
    }
    if (sub == convert) return cmd_convert(from_format, to_format, in_path, out_path);
    if (sub == split_cmd) return cmd_split(cfg, in_path, out_prefix);
    if (sub == train_cmd) return cmd_train(cfg, train_path, model_path);
    if (sub == tag_cmd) return cmd_tag(model_path, in_path, out_path);
    if (sub == eval_cmd) return cmd_eval(cfg, gold_path, pred_path, out_path);
    if (sub == search) {
      int n_jobs = jobs > 0 ? jobs
                            : static_cast<int>(std::max(
                                  1u, std::thread::hardware_concurrency()));
      return cmd_search(cfg, in_path, n_jobs, out_config, out_table);
    }
    if (sub == ablate) return cmd_ablate(cfg, train_path, valid_path);
    if (sub == commands) return cmd_commands(cfg, in_path, out_path);
    if (sub == report) {
      return cmd_report(cfg, report_kind, in_path, per_device, out_path);
    }
    if (sub == agreement) return cmd_agreement(agreement_files);
    throw Error("unhandled subcommand");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int run_cli(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace r2iot
