#pragma once

#include <json.hpp>

#include "fairlens/fairness.hpp"
#include "fairlens/nn.hpp"

namespace fairlens {

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

nlohmann::json fairness_report_to_json(const FairnessReport& rep);
FairnessReport fairness_report_from_json(const nlohmann::json& j);

nlohmann::json combined_classifier_to_json(const CombinedClassifier& clf);
CombinedClassifier combined_classifier_from_json(const nlohmann::json& j);

nlohmann::json group_thresholds_to_json(const GroupThresholds& t);
GroupThresholds group_thresholds_from_json(const nlohmann::json& j);

/// Doubles that may be infinite are stored as the strings "inf" / "-inf"
/// (JSON has no literal for them).
nlohmann::json json_double(double v);
double double_from_json(const nlohmann::json& j);

void write_json_atomic(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json(const std::string& path);

}  // namespace fairlens
