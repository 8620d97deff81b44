#include "recipe2iot/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "recipe2iot/rng.hpp"

namespace r2iot {

std::vector<Entity> extract_entities(const TagSequence& tags) {
  std::vector<Entity> entities;
  std::optional<SlotLabel> open;
  std::size_t start = 0;
  auto close = [&](std::size_t end) {
    if (open) entities.push_back({*open, start, end});
    open.reset();
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    Tag t = tags[i];
    if (t == Tag::O) {
      close(i);
      continue;
    }
    SlotLabel slot = tag_slot(t);
    if (is_begin(t) || !open || *open != slot) {
      close(i);
      open = slot;
      start = i;
    }
  }
  close(tags.size());
  return entities;
}

namespace {

void finalize(LabelScore& s) {
  s.precision = (s.tp + s.fp) > 0 ? static_cast<double>(s.tp) / (s.tp + s.fp) : 0.0;
  s.recall = (s.tp + s.fn) > 0 ? static_cast<double>(s.tp) / (s.tp + s.fn) : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
}

}  // namespace

ScoreReport entity_scores(const std::vector<TagSequence>& gold,
                          const std::vector<TagSequence>& pred) {
  if (gold.size() != pred.size()) {
    throw Error("gold/pred sequence counts differ: " +
                std::to_string(gold.size()) + " vs " +
                std::to_string(pred.size()));
  }
  ScoreReport report;
  long token_tp = 0, token_fp = 0, token_fn = 0;

  for (std::size_t s = 0; s < gold.size(); ++s) {
    if (gold[s].size() != pred[s].size()) {
      std::ostringstream os;
      os << "sequence " << s << ": gold has " << gold[s].size()
         << " tokens but pred has " << pred[s].size();
      throw Error(os.str());
    }
    auto gold_entities = extract_entities(gold[s]);
    auto pred_entities = extract_entities(pred[s]);

    std::vector<bool> matched(gold_entities.size(), false);
    for (const Entity& p : pred_entities) {
      auto& ls = report.per_label[static_cast<int>(p.label)];
      bool hit = false;
      for (std::size_t g = 0; g < gold_entities.size(); ++g) {
        if (!matched[g] && gold_entities[g] == p) {
          matched[g] = true;
          hit = true;
          break;
        }
      }
      if (hit) {
        ++ls.tp;
      } else {
        ++ls.fp;
      }
    }
    for (std::size_t g = 0; g < gold_entities.size(); ++g) {
      auto& ls = report.per_label[static_cast<int>(gold_entities[g].label)];
      ++ls.support_entities;
      ls.support_tokens +=
          static_cast<long>(gold_entities[g].end - gold_entities[g].begin);
      if (!matched[g]) ++ls.fn;
    }

    // Token-level secondary counts over non-O tags.
    for (std::size_t t = 0; t < gold[s].size(); ++t) {
      bool g_lab = gold[s][t] != Tag::O;
      bool p_lab = pred[s][t] != Tag::O;
      if (g_lab && p_lab && gold[s][t] == pred[s][t]) {
        ++token_tp;
      } else {
        if (p_lab) ++token_fp;
        if (g_lab) ++token_fn;
      }
    }
  }

  for (auto& ls : report.per_label) {
    finalize(ls);
    report.micro.tp += ls.tp;
    report.micro.fp += ls.fp;
    report.micro.fn += ls.fn;
    report.micro.support_tokens += ls.support_tokens;
    report.micro.support_entities += ls.support_entities;
  }
  finalize(report.micro);

  report.token_precision =
      (token_tp + token_fp) > 0 ? static_cast<double>(token_tp) / (token_tp + token_fp) : 0.0;
  report.token_recall =
      (token_tp + token_fn) > 0 ? static_cast<double>(token_tp) / (token_tp + token_fn) : 0.0;
  report.token_f1 = (report.token_precision + report.token_recall) > 0.0
                        ? 2.0 * report.token_precision * report.token_recall /
                              (report.token_precision + report.token_recall)
                        : 0.0;
  return report;
}

// ---------------------------------------------------------------------------
// Random search
// ---------------------------------------------------------------------------

namespace {

// Trains on `train` and returns micro entity F1 on `test`.
double train_and_score(const std::vector<AnnotatedRecipe>& train,
                       const std::vector<AnnotatedRecipe>& test,
                       const FeatureConfig& cfg, const DeviceLexicon& lexicon,
                       const TrainConfig& train_cfg) {
  CrfModel model = r2iot::train(build_dataset(flatten(train), cfg, lexicon),
                                train_cfg);
  Tagger tagger(model);
  std::vector<TagSequence> gold, pred;
  for (const auto& [sentence, tags] : flatten(test)) {
    gold.push_back(tags);
    pred.push_back(tagger.tag(sentence));
  }
  return entity_scores(gold, pred).micro.f1;
}

}  // namespace

SearchResult random_search(const std::vector<AnnotatedRecipe>& train_valid,
                           const SearchSpace& space,
                           const FeatureConfig& cfg_base,
                           const DeviceLexicon& lexicon,
                           const TrainConfig& train_base, int jobs) {
  if (train_valid.empty()) throw Error("random search needs a nonempty corpus");
  if (space.n_candidates < 1) throw Error("n_candidates must be >= 1");
  if (space.folds < 2) throw Error("folds must be >= 2");
  if (space.c1_range[0] <= 0.0 || space.c1_range[0] > space.c1_range[1] ||
      space.c2_range[0] <= 0.0 || space.c2_range[0] > space.c2_range[1]) {
    throw Error("search ranges must be positive and ordered");
  }
  if (space.min_freq_choices.empty()) {
    throw Error("min_freq_choices must be nonempty");
  }

  // All candidates are drawn up front, in index order, from one generator.
  Rng rng(space.seed);
  std::vector<CandidateResult> table(space.n_candidates);
  for (int i = 0; i < space.n_candidates; ++i) {
    table[i].index = i;
    table[i].c1 = rng.log_uniform(space.c1_range[0], space.c1_range[1]);
    table[i].c2 = rng.log_uniform(space.c2_range[0], space.c2_range[1]);
    table[i].min_freq = space.min_freq_choices[rng.next_index(
        space.min_freq_choices.size())];
  }

  const auto folds = stratified_folds(train_valid, space.folds, space.seed);

  auto evaluate_candidate = [&](CandidateResult& cand) {
    FeatureConfig cfg = cfg_base;
    cfg.min_freq = cand.min_freq;
    TrainConfig tc = train_base;
    tc.c1 = cand.c1;
    tc.c2 = cand.c2;
    tc.min_freq = cand.min_freq;
    tc.seed = space.seed;
    try {
      double sum = 0.0;
      for (std::size_t held = 0; held < folds.size(); ++held) {
        std::vector<AnnotatedRecipe> train_part;
        for (std::size_t k = 0; k < folds.size(); ++k) {
          if (k == held) continue;
          train_part.insert(train_part.end(), folds[k].begin(), folds[k].end());
        }
        double f1 = train_and_score(train_part, folds[held], cfg, lexicon, tc);
        cand.fold_f1.push_back(f1);
        sum += f1;
      }
      cand.mean_f1 = sum / static_cast<double>(folds.size());
    } catch (const std::exception& e) {
      cand.failed = true;
      cand.error = e.what();
      cand.mean_f1 = -std::numeric_limits<double>::infinity();
      cand.fold_f1.clear();
    }
  };

  if (jobs <= 1 || space.n_candidates == 1) {
    for (auto& cand : table) evaluate_candidate(cand);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      while (true) {
        int i = next.fetch_add(1);
        if (i >= space.n_candidates) return;
        evaluate_candidate(table[static_cast<std::size_t>(i)]);
      }
    };
    std::vector<std::thread> pool;
    int n_threads = std::min(jobs, space.n_candidates);
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  int best = -1;
  for (int i = 0; i < space.n_candidates; ++i) {
    if (table[i].failed) continue;
    if (best < 0 || table[i].mean_f1 > table[best].mean_f1) best = i;
  }
  if (best < 0) throw Error("all random-search candidates failed");

  SearchResult result;
  result.best = train_base;
  result.best.c1 = table[best].c1;
  result.best.c2 = table[best].c2;
  result.best.min_freq = table[best].min_freq;
  result.best.seed = space.seed;
  result.best_index = best;
  result.table = std::move(table);
  return result;
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

std::vector<AblationRow> ablation(const std::vector<AnnotatedRecipe>& train,
                                  const std::vector<AnnotatedRecipe>& valid,
                                  const FeatureConfig& cfg_base,
                                  const DeviceLexicon& lexicon,
                                  const TrainConfig& train_cfg) {
  if (train.empty() || valid.empty()) throw Error("ablation needs data");
  struct Config {
    const char* name;
    int window;
    bool head;
  };
  static constexpr Config kConfigs[] = {
      {"full", 3, true},      {"-head", 3, false},    {"-window3", 2, false},
      {"-window2", 1, false}, {"-window1", 0, false},
  };
  std::vector<AblationRow> rows;
  for (const Config& c : kConfigs) {
    FeatureConfig cfg = cfg_base;
    cfg.window = c.window;
    cfg.use_head = c.head;
    AblationRow row;
    row.feature_set = c.name;
    row.window = c.window;
    row.use_head = c.head;
    row.micro_f1 = train_and_score(train, valid, cfg, lexicon, train_cfg);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Agreement and distributions
// ---------------------------------------------------------------------------

double agreement_f1(const std::vector<DoccanoEntry>& a,
                    const std::vector<DoccanoEntry>& b) {
  if (a.size() != b.size()) {
    throw Error("annotators cover different sentence counts: " +
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  // Align by sentence text; repeated texts pair up in order of occurrence.
  std::map<std::string, std::vector<std::size_t>> b_by_text;
  for (std::size_t i = b.size(); i-- > 0;) {
    b_by_text[b[i].sentence.text].push_back(i);
  }
  std::vector<TagSequence> gold, pred;
  std::vector<std::string> warnings;
  for (const DoccanoEntry& ea : a) {
    auto it = b_by_text.find(ea.sentence.text);
    if (it == b_by_text.end() || it->second.empty()) {
      throw Error("sentence not annotated by both: \"" + ea.sentence.text +
                  "\"");
    }
    const DoccanoEntry& eb = b[it->second.back()];
    it->second.pop_back();
    gold.push_back(spans_to_iob(ea.sentence, ea.spans, &warnings));
    pred.push_back(spans_to_iob(eb.sentence, eb.spans, &warnings));
  }
  return entity_scores(gold, pred).micro.f1;
}

DistributionReport label_distribution(
    const std::vector<AnnotatedRecipe>& corpus, bool per_device) {
  if (corpus.empty()) throw Error("label distribution needs a nonempty corpus");
  std::map<std::string, std::array<long, 4>> counts;
  std::vector<std::string> warnings;
  for (const AnnotatedRecipe& recipe : corpus) {
    std::string device =
        per_device ? (recipe.device.empty() ? "all" : recipe.device) : "all";
    auto& slot_counts = counts[device];
    for (std::size_t s = 0; s < recipe.tags.size(); ++s) {
      for (const Entity& e : extract_entities(recipe.tags[s])) {
        ++slot_counts[static_cast<int>(e.label)];
      }
    }
  }

  DistributionReport report;
  for (const auto& [device, slot_counts] : counts) {
    long total = 0;
    for (long c : slot_counts) total += c;
    report.totals.emplace_back(device, total);
    for (SlotLabel label : kSlotLabels) {
      DistributionRow row;
      row.device = device;
      row.label = label;
      row.count = slot_counts[static_cast<int>(label)];
      row.percent =
          total > 0 ? 100.0 * static_cast<double>(row.count) / total : 0.0;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace r2iot
