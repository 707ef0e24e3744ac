#include "floodline/model_io.hpp"

#include <charconv>

#include "floodline/errors.hpp"
#include "floodline/io.hpp"

namespace floodline::ml {

using nlohmann::json;

namespace {

std::string num(double v) { return io::fmt_double(v); }

double parse_num(const json& j) {
  const auto s = j.get<std::string>();
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw InputError("bad decimal '" + s + "' in model file");
  return v;
}

json opt_num(const std::optional<double>& v) { return v ? json(num(*v)) : json(nullptr); }

json num_array(const std::vector<double>& values) {
  json a = json::array();
  for (double v : values) a.push_back(num(v));
  return a;
}

std::vector<double> parse_array(const json& a) {
  std::vector<double> out;
  for (const auto& v : a) out.push_back(parse_num(v));
  return out;
}

}  // namespace

json hyperparams_to_json(const Hyperparams& h) {
  json j;
  j["algo"] = std::string(to_string(h.algo));
  j["n_trees"] = h.n_trees;
  j["max_depth"] = h.max_depth ? json(*h.max_depth) : json(nullptr);
  j["min_samples_leaf"] = h.min_samples_leaf;
  j["feature_subset"] = h.feature_subset;
  j["learning_rate"] = num(h.learning_rate);
  return j;
}

Hyperparams hyperparams_from_json(const json& j) {
  Hyperparams h;
  h.algo = parse_algo(j.at("algo").get<std::string>());
  h.n_trees = j.at("n_trees").get<int>();
  if (!j.at("max_depth").is_null()) h.max_depth = j.at("max_depth").get<int>();
  h.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  h.feature_subset = j.at("feature_subset").get<int>();
  h.learning_rate = parse_num(j.at("learning_rate"));
  return h;
}

json model_to_json(const EnsembleModel& model, const ModelReport& report) {
  json doc;
  doc["format"] = "floodline-model/1";
  doc["algo"] = std::string(to_string(model.hyper.algo));
  doc["hyperparameters"] = hyperparams_to_json(model.hyper);
  doc["outlier_config"] = model.outlier.label();
  doc["base_prediction"] = num(model.base_prediction);
  doc["stream_key"] = std::to_string(model.stream_key);
  doc["scaler"] = {{"median", num_array(model.scaler.median())}, {"iqr", num_array(model.scaler.iqr())}};

  json trees = json::array();
  for (const auto& tree : model.trees) {
    json nodes = json::array();
    for (const auto& n : tree.nodes()) {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", num(n.threshold)},
                       {"left", n.left},
                       {"right", n.right},
                       {"value", num(n.value)},
                       {"gain", num(n.gain)},
                       {"samples", n.samples}});
    }
    trees.push_back(std::move(nodes));
  }
  doc["trees"] = std::move(trees);

  json rep;
  rep["aoi_id"] = report.aoi_id;
  rep["workflow"] = std::string(to_string(report.workflow));
  rep["n_train"] = report.n_train;
  rep["rmse_m"] = num(report.rmse_m);
  rep["rmse_pct"] = opt_num(report.rmse_pct);
  rep["r2"] = opt_num(report.r2);
  rep["r2_cv"] = opt_num(report.r2_cv);
  rep["gap"] = opt_num(report.gap);
  rep["selected"] = report.selected;
  rep["gate_passed"] = report.gate_passed;
  rep["n_predicted"] = report.n_predicted;
  rep["n_clamped"] = report.n_clamped;
  doc["report"] = std::move(rep);

  const auto imp = model.importance();
  doc["feature_importances"] = num_array(imp.weights);
  return doc;
}

EnsembleModel model_from_json(const json& doc) {
  try {
    EnsembleModel m;
    m.hyper = hyperparams_from_json(doc.at("hyperparameters"));
    m.outlier = OutlierConfig::parse(doc.at("outlier_config").get<std::string>());
    m.base_prediction = parse_num(doc.at("base_prediction"));
    m.stream_key = std::stoull(doc.at("stream_key").get<std::string>());
    m.scaler = RobustScaler(parse_array(doc.at("scaler").at("median")), parse_array(doc.at("scaler").at("iqr")));
    for (const auto& t : doc.at("trees")) {
      std::vector<TreeNode> nodes;
      for (const auto& n : t) {
        TreeNode node;
        node.feature = n.at("feature").get<int>();
        node.threshold = parse_num(n.at("threshold"));
        node.left = n.at("left").get<int>();
        node.right = n.at("right").get<int>();
        node.value = parse_num(n.at("value"));
        node.gain = parse_num(n.at("gain"));
        node.samples = n.at("samples").get<std::uint32_t>();
        nodes.push_back(node);
      }
      m.trees.emplace_back(std::move(nodes));
    }
    return m;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const std::string& path, const EnsembleModel& model, const ModelReport& report) {
  io::write_atomic(path, model_to_json(model, report).dump(1) + "\n");
}

EnsembleModel load_model(const std::string& path) {
  try {
    return model_from_json(json::parse(io::read_file(path)));
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
}

}  // namespace floodline::ml
