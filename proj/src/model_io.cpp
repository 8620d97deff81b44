// Versioned line-oriented model container. Weights are written as C99 hex
// floats so save/load round-trips bit-exactly while staying diffable text.
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "recipe2iot/crf.hpp"

namespace r2iot {

namespace {

constexpr std::string_view kMagic = "recipe2iot-crf";
constexpr int kVersion = 1;

std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw Error("model file: bad number '" + s + "'");
  }
  return v;
}

long long parse_int(const std::string& s) {
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') {
    throw Error("model file: bad integer '" + s + "'");
  }
  return v;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::string next(std::string_view what) {
    std::string line;
    if (!std::getline(in_, line)) {
      throw Error("model file truncated: expected " + std::string(what));
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  // `key value` line with a fixed expected key.
  std::string field(std::string_view key) {
    std::string line = next(key);
    auto space = line.find(' ');
    if (space == std::string::npos || line.substr(0, space) != key) {
      throw Error("model file: expected '" + std::string(key) +
                  " ...', got '" + line + "'");
    }
    return line.substr(space + 1);
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_model(const CrfModel& model, std::ostream& out) {
  const CrfMetadata& meta = model.metadata;
  out << kMagic << ' ' << kVersion << "\n";
  out << "window " << meta.window << "\n";
  out << "use_head " << (meta.use_head ? 1 : 0) << "\n";
  out << "min_freq " << meta.min_freq << "\n";
  out << "c1 " << hex_double(meta.c1) << "\n";
  out << "c2 " << hex_double(meta.c2) << "\n";
  out << "seed " << meta.seed << "\n";
  out << "optimizer " << meta.optimizer << "\n";
  out << "iterations " << meta.iterations << "\n";
  out << "final_objective " << hex_double(meta.final_objective) << "\n";

  auto write_list = [&](std::string_view name,
                        const std::vector<std::string>& items) {
    out << name << ' ' << items.size() << "\n";
    for (const std::string& item : items) {
      if (item.find('\n') != std::string::npos) {
        throw Error("cannot serialize a name containing a newline");
      }
      out << item << "\n";
    }
  };
  write_list("labels", model.labels);
  write_list("features", model.feature_names);
  write_list("dictwords", meta.dictionary_words);
  write_list("stopwords", meta.stopwords);

  const int L = model.num_labels();
  std::size_t nonzero = 0;
  for (double wgt : model.state_weights) {
    if (wgt != 0.0) ++nonzero;
  }
  out << "state " << nonzero << "\n";
  for (int f = 0; f < model.num_features(); ++f) {
    for (int y = 0; y < L; ++y) {
      double wgt = model.state_weight(f, y);
      if (wgt != 0.0) out << f << ' ' << y << ' ' << hex_double(wgt) << "\n";
    }
  }
  nonzero = 0;
  for (double wgt : model.transition_weights) {
    if (wgt != 0.0) ++nonzero;
  }
  out << "transitions " << nonzero << "\n";
  for (int a = 0; a < L; ++a) {
    for (int b = 0; b < L; ++b) {
      double wgt = model.transition_weight(a, b);
      if (wgt != 0.0) out << a << ' ' << b << ' ' << hex_double(wgt) << "\n";
    }
  }
  out << "end\n";
  if (!out) throw Error("write failure while saving model");
}

void save_model_file(const CrfModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open model file for writing: " + path);
  save_model(model, out);
}

CrfModel load_model(std::istream& in) {
  LineReader reader(in);

  std::string header = reader.next("header");
  {
    std::istringstream hs(header);
    std::string magic;
    int version = 0;
    hs >> magic >> version;
    if (magic != kMagic) throw Error("not a recipe2iot model file");
    if (version != kVersion) {
      throw Error("unsupported model version " + std::to_string(version));
    }
  }

  CrfMetadata meta;
  meta.window = static_cast<int>(parse_int(reader.field("window")));
  meta.use_head = parse_int(reader.field("use_head")) != 0;
  meta.min_freq = static_cast<int>(parse_int(reader.field("min_freq")));
  meta.c1 = parse_double(reader.field("c1"));
  meta.c2 = parse_double(reader.field("c2"));
  meta.seed = static_cast<std::uint64_t>(parse_int(reader.field("seed")));
  meta.optimizer = reader.field("optimizer");
  meta.iterations = static_cast<int>(parse_int(reader.field("iterations")));
  meta.final_objective = parse_double(reader.field("final_objective"));

  auto read_list = [&](std::string_view name) {
    long long count = parse_int(reader.field(name));
    if (count < 0) throw Error("model file: negative list size");
    std::vector<std::string> items;
    items.reserve(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) items.push_back(reader.next(name));
    return items;
  };
  std::vector<std::string> labels = read_list("labels");
  std::vector<std::string> features = read_list("features");
  meta.dictionary_words = read_list("dictwords");
  meta.stopwords = read_list("stopwords");

  CrfModel model = make_model(std::move(labels), std::move(features));
  model.metadata = std::move(meta);
  const int L = model.num_labels();

  auto read_weights = [&](std::string_view name, std::vector<double>& dest,
                          int rows) {
    long long count = parse_int(reader.field(name));
    for (long long i = 0; i < count; ++i) {
      std::istringstream ls(reader.next(name));
      long long a = -1, b = -1;
      std::string hex;
      ls >> a >> b >> hex;
      if (ls.fail() || a < 0 || a >= rows || b < 0 || b >= L) {
        throw Error("model file: bad " + std::string(name) + " entry");
      }
      dest[static_cast<std::size_t>(a) * L + static_cast<std::size_t>(b)] =
          parse_double(hex);
    }
  };
  read_weights("state", model.state_weights, model.num_features());
  read_weights("transitions", model.transition_weights, L);

  if (reader.next("end marker") != "end") {
    throw Error("model file corrupted: missing end marker");
  }
  for (double wgt : model.state_weights) {
    if (!std::isfinite(wgt)) throw Error("model file: non-finite weight");
  }
  for (double wgt : model.transition_weights) {
    if (!std::isfinite(wgt)) throw Error("model file: non-finite weight");
  }
  return model;
}

CrfModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path);
  return load_model(in);
}

}  // namespace r2iot
