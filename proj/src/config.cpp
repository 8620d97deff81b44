#include "recipe2iot/config.hpp"

#include <fstream>

namespace r2iot {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    bool known = false;
    for (const char* a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw Error("config: unknown key '" + key + "' in " + where);
    }
  }
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw Error("config: top level must be an object");
  check_keys(doc, {"paths", "features", "train", "split", "search",
                   "report_format"},
             "top level");
  PipelineConfig cfg;

  if (doc.contains("paths")) {
    const json& paths = doc.at("paths");
    check_keys(paths, {"lexicon", "acronyms", "stopwords", "rules", "model"},
               "paths");
    if (paths.contains("lexicon")) cfg.lexicon_path = paths.at("lexicon");
    if (paths.contains("acronyms")) cfg.acronyms_path = paths.at("acronyms");
    if (paths.contains("stopwords")) cfg.stopwords_path = paths.at("stopwords");
    if (paths.contains("rules")) cfg.rules_path = paths.at("rules");
    if (paths.contains("model")) cfg.model_path = paths.at("model");
  }

  if (doc.contains("features")) {
    const json& f = doc.at("features");
    check_keys(f, {"window", "use_head", "min_freq"}, "features");
    if (f.contains("window")) cfg.features.window = f.at("window");
    if (f.contains("use_head")) cfg.features.use_head = f.at("use_head");
    if (f.contains("min_freq")) cfg.features.min_freq = f.at("min_freq");
  }

  if (doc.contains("train")) {
    const json& t = doc.at("train");
    check_keys(t, {"c1", "c2", "min_freq", "max_iterations", "convergence_tol",
                   "seed"},
               "train");
    if (t.contains("c1")) cfg.train.c1 = t.at("c1");
    if (t.contains("c2")) cfg.train.c2 = t.at("c2");
    if (t.contains("min_freq")) cfg.train.min_freq = t.at("min_freq");
    if (t.contains("max_iterations")) cfg.train.max_iterations = t.at("max_iterations");
    if (t.contains("convergence_tol")) cfg.train.convergence_tol = t.at("convergence_tol");
    if (t.contains("seed")) cfg.train.seed = t.at("seed");
  }

  if (doc.contains("split")) {
    const json& s = doc.at("split");
    check_keys(s, {"ratios", "seed", "stratify_labels",
                   "balance_false_positives"},
               "split");
    if (s.contains("ratios")) {
      const json& r = s.at("ratios");
      if (!r.is_array() || r.size() != 3) {
        throw Error("config: split.ratios must be an array of 3 numbers");
      }
      for (int i = 0; i < 3; ++i) cfg.split.ratios[i] = r[i];
    }
    if (s.contains("seed")) cfg.split.seed = s.at("seed");
    if (s.contains("stratify_labels")) cfg.split.stratify_labels = s.at("stratify_labels");
    if (s.contains("balance_false_positives")) {
      cfg.split.balance_false_positives = s.at("balance_false_positives");
    }
  }

  if (doc.contains("search")) {
    const json& s = doc.at("search");
    check_keys(s, {"c1_range", "c2_range", "min_freq_choices", "n_candidates",
                   "folds", "seed"},
               "search");
    auto read_range = [&](const char* key, std::array<double, 2>& dest) {
      if (!s.contains(key)) return;
      const json& r = s.at(key);
      if (!r.is_array() || r.size() != 2) {
        throw Error(std::string("config: search.") + key +
                    " must be [low, high]");
      }
      dest[0] = r[0];
      dest[1] = r[1];
    };
    read_range("c1_range", cfg.search.c1_range);
    read_range("c2_range", cfg.search.c2_range);
    if (s.contains("min_freq_choices")) {
      cfg.search.min_freq_choices =
          s.at("min_freq_choices").get<std::vector<int>>();
    }
    if (s.contains("n_candidates")) cfg.search.n_candidates = s.at("n_candidates");
    if (s.contains("folds")) cfg.search.folds = s.at("folds");
    if (s.contains("seed")) cfg.search.seed = s.at("seed");
  }

  if (doc.contains("report_format")) {
    cfg.report_format = doc.at("report_format");
    if (cfg.report_format != "text" && cfg.report_format != "tsv") {
      throw Error("config: report_format must be 'text' or 'tsv'");
    }
  }
  return cfg;
}

PipelineConfig PipelineConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config file " + path + ": " + e.what());
  }
  return from_json(doc);
}

json PipelineConfig::to_json() const {
  return json{
      {"paths",
       {{"lexicon", lexicon_path},
        {"acronyms", acronyms_path},
        {"stopwords", stopwords_path},
        {"rules", rules_path},
        {"model", model_path}}},
      {"features",
       {{"window", features.window},
        {"use_head", features.use_head},
        {"min_freq", features.min_freq},
        {"n_stopwords", features.stopwords.size()}}},
      {"train",
       {{"c1", train.c1},
        {"c2", train.c2},
        {"min_freq", train.min_freq},
        {"max_iterations", train.max_iterations},
        {"convergence_tol", train.convergence_tol},
        {"seed", train.seed}}},
      {"split",
       {{"ratios", split.ratios},
        {"seed", split.seed},
        {"stratify_labels", split.stratify_labels},
        {"balance_false_positives", split.balance_false_positives}}},
      {"search",
       {{"c1_range", search.c1_range},
        {"c2_range", search.c2_range},
        {"min_freq_choices", search.min_freq_choices},
        {"n_candidates", search.n_candidates},
        {"folds", search.folds},
        {"seed", search.seed}}},
      {"report_format", report_format},
  };
}

}  // namespace r2iot
