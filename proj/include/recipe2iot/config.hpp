// Shared pipeline configuration file (JSON); flags override file values.
#pragma once

#include <string>

#include <json.hpp>

#include "recipe2iot/corpus.hpp"
#include "recipe2iot/crf.hpp"
#include "recipe2iot/eval.hpp"
#include "recipe2iot/features.hpp"

namespace r2iot {

struct PipelineConfig {
  // Paths; a subcommand validates only the paths it actually uses.
  std::string lexicon_path;
  std::string acronyms_path;
  std::string stopwords_path;
  std::string rules_path;
  std::string model_path;

  FeatureConfig features;
  TrainConfig train;
  SplitSpec split;
  SearchSpace search;
  std::string report_format = "text";  // "text" or "tsv"

  /// Rejects unknown keys at every level.
  static PipelineConfig from_json(const nlohmann::json& doc);
  static PipelineConfig load_file(const std::string& path);

  /// Snapshot for run logging; stopword sets are summarized by size.
  nlohmann::json to_json() const;
};

}  // namespace r2iot
