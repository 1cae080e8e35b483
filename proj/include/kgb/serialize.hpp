#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgb/boosting.hpp"
#include "kgb/data.hpp"
#include "kgb/errors.hpp"
#include "kgb/posterior.hpp"
#include "kgb/tree.hpp"

namespace kgb {

using Json = nlohmann::ordered_json;

inline Json to_json(const FeatureQuantizer& q) {
  Json j;
  j["thresholds"] = q.thresholds;
  return j;
}

inline FeatureQuantizer quantizer_from_json(const Json& j) {
  FeatureQuantizer q;
  q.thresholds = j.at("thresholds").get<std::vector<std::vector<double>>>();
  for (const auto& cuts : q.thresholds) {
    for (std::size_t i = 1; i < cuts.size(); ++i) {
      if (cuts[i] <= cuts[i - 1]) throw ParseError("quantizer thresholds must be increasing");
    }
  }
  return q;
}

inline Json to_json(const TreeStructure& t) {
  Json splits = Json::array();
  for (const auto& s : t.splits) {
    splits.push_back(Json{{"feature", s.feature}, {"bin", s.bin}});
  }
  return splits;
}

inline TreeStructure structure_from_json(const Json& j) {
  TreeStructure t;
  for (const auto& s : j) {
    t.splits.push_back(SplitCandidate{s.at("feature").get<int>(), s.at("bin").get<int>()});
  }
  return t;
}

inline Json to_json(const FittedTree& t) {
  Json j;
  j["splits"] = to_json(t.structure);
  j["leaf_values"] = t.leaf_values;
  return j;
}

inline Json to_json(const BoostConfig& cfg) {
  Json j;
  j["learning_rate"] = cfg.learning_rate;
  j["regularization"] = cfg.regularization;
  j["iterations"] = cfg.iterations;
  j["depth"] = cfg.depth;
  j["bins"] = cfg.bins;
  j["random_strength"] = cfg.random_strength;
  j["seed"] = cfg.seed;
  return j;
}

inline BoostConfig config_from_json(const Json& j) {
  BoostConfig cfg;
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.regularization = j.at("regularization").get<double>();
  cfg.iterations = j.at("iterations").get<int>();
  cfg.depth = j.at("depth").get<int>();
  cfg.bins = j.at("bins").get<int>();
  cfg.random_strength = j.at("random_strength").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

inline Json to_json(const BoostedModel& model) {
  Json j;
  j["config"] = to_json(model.config);
  j["quantizer"] = to_json(model.quantizer);
  Json trees = Json::array();
  for (const auto& t : model.trees) {
    Json tree;
    tree["splits"] = to_json(t.structure);
    tree["leaf_values"] = t.leaf_values;
    tree["coefficient"] = t.coefficient;
    trees.push_back(std::move(tree));
  }
  j["trees"] = std::move(trees);
  return j;
}

inline BoostedModel model_from_json(const Json& j) {
  BoostedModel model;
  model.config = config_from_json(j.at("config"));
  model.quantizer = quantizer_from_json(j.at("quantizer"));
  for (const auto& t : j.at("trees")) {
    BoostedTree tree;
    tree.structure = structure_from_json(t.at("splits"));
    tree.leaf_values = t.at("leaf_values").get<std::vector<double>>();
    tree.coefficient = t.at("coefficient").get<double>();
    model.trees.push_back(std::move(tree));
  }
  return model;
}

inline Json to_json(const PosteriorSample& sample) {
  Json j;
  j["sigma"] = sample.sigma;
  j["delta"] = sample.delta;
  Json prior;
  prior["scale"] = sample.prior.scale;
  Json trees = Json::array();
  for (const auto& t : sample.prior.trees) {
    Json tree;
    tree["splits"] = to_json(t.structure);
    tree["leaf_values"] = t.leaf_values;
    trees.push_back(std::move(tree));
  }
  prior["trees"] = std::move(trees);
  j["prior"] = std::move(prior);
  j["boosted"] = to_json(sample.boosted);
  return j;
}

inline PosteriorSample posterior_from_json(const Json& j) {
  PosteriorSample sample;
  sample.sigma = j.at("sigma").get<double>();
  sample.delta = j.at("delta").get<double>();
  sample.prior.scale = j.at("prior").at("scale").get<double>();
  for (const auto& t : j.at("prior").at("trees")) {
    PriorTree tree;
    tree.structure = structure_from_json(t.at("splits"));
    tree.leaf_values = t.at("leaf_values").get<std::vector<double>>();
    sample.prior.trees.push_back(std::move(tree));
  }
  sample.boosted = model_from_json(j.at("boosted"));
  return sample;
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  out << j.dump(2) << '\n';
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  Json j;
  in >> j;
  return j;
}

// FNV-1a over the canonical JSON text; stable across platforms.
inline std::string config_hash(const Json& j) {
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace kgb
