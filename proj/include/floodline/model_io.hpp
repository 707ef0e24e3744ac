#pragma once

#include <string>

#include <json.hpp>

#include "floodline/ensemble.hpp"
#include "floodline/workflow.hpp"

namespace floodline::ml {

/// Model document: algorithm, hyperparameters, scaler state, every tree as a
/// node list, stream key and the training report. Real numbers are stored as
/// decimal strings with 17 significant digits so they round-trip exactly.
nlohmann::json model_to_json(const EnsembleModel& model, const ModelReport& report);
EnsembleModel model_from_json(const nlohmann::json& doc);

nlohmann::json hyperparams_to_json(const Hyperparams& h);
Hyperparams hyperparams_from_json(const nlohmann::json& j);

void save_model(const std::string& path, const EnsembleModel& model, const ModelReport& report);
EnsembleModel load_model(const std::string& path);

}  // namespace floodline::ml
