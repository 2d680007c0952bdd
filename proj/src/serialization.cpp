#include "fairlens/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace fairlens {

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    return nlohmann::json{{"method", to_string(cfg.method)},
                          {"lambda", cfg.lambda},
                          {"epochs", cfg.epochs},
                          {"learning_rate", cfg.learning_rate},
                          {"batch_size", cfg.batch_size},
                          {"seed", cfg.seed},
                          {"hidden_widths", cfg.hidden_widths},
                          {"lr_drop_patience", cfg.lr_drop_patience}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.method = train_method_from_string(j.at("method").get<std::string>());
    cfg.lambda = j.value("lambda", cfg.lambda);
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("hidden_widths")) cfg.hidden_widths = j["hidden_widths"].get<std::vector<int>>();
    cfg.lr_drop_patience = j.value("lr_drop_patience", cfg.lr_drop_patience);
    return cfg;
}

nlohmann::json fairness_report_to_json(const FairnessReport& rep) {
    return nlohmann::json{{"accuracy", rep.accuracy},
                          {"ddp", rep.ddp},
                          {"positive_rate_s0", rep.positive_rate_s0},
                          {"positive_rate_s1", rep.positive_rate_s1},
                          {"split", to_string(rep.split)},
                          {"n_group0", rep.n_group0},
                          {"n_group1", rep.n_group1}};
}

FairnessReport fairness_report_from_json(const nlohmann::json& j) {
    FairnessReport rep;
    rep.accuracy = j.at("accuracy").get<double>();
    rep.ddp = j.at("ddp").get<double>();
    rep.positive_rate_s0 = j.at("positive_rate_s0").get<double>();
    rep.positive_rate_s1 = j.at("positive_rate_s1").get<double>();
    rep.split = split_from_string(j.at("split").get<std::string>());
    rep.n_group0 = j.at("n_group0").get<std::size_t>();
    rep.n_group1 = j.at("n_group1").get<std::size_t>();
    return rep;
}

nlohmann::json combined_classifier_to_json(const CombinedClassifier& clf) {
    return nlohmann::json{{"a1", clf.a1}, {"a2", clf.a2}, {"constraint", clf.constraint}};
}

CombinedClassifier combined_classifier_from_json(const nlohmann::json& j) {
    CombinedClassifier clf;
    clf.a1 = j.at("a1").get<double>();
    clf.a2 = j.at("a2").get<double>();
    clf.constraint = j.at("constraint").get<double>();
    return clf;
}

nlohmann::json group_thresholds_to_json(const GroupThresholds& t) {
    return nlohmann::json{{"t0", json_double(t.t0)}, {"t1", json_double(t.t1)}};
}

GroupThresholds group_thresholds_from_json(const nlohmann::json& j) {
    GroupThresholds t;
    t.t0 = double_from_json(j.at("t0"));
    t.t1 = double_from_json(j.at("t1"));
    return t;
}

nlohmann::json json_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return nullptr;
    return v;
}

double double_from_json(const nlohmann::json& j) {
    if (j.is_null()) return std::nan("");
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw SchemaError("unexpected string where a number was expected: '" + s + "'");
    }
    return j.get<double>();
}

void write_json_atomic(const nlohmann::json& j, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write '" + tmp + "'");
        out << j.dump(2) << '\n';
        if (!out) throw IoError("write failed for '" + tmp + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("'" + path + "': " + e.what());
    }
    return j;
}

}  // namespace fairlens
