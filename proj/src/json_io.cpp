#include "levyband/json_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace levyband {

namespace {

double number_or_inf(const nlohmann::json& v) {
    // Non-finite values are serialized as null.
    return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
}

double require_number(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw Error(ErrorKind::ConfigError, std::string("missing key '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_number()) throw Error(ErrorKind::ConfigError, std::string("key '") + key + "' must be a number");
    return v.get<double>();
}

double optional_number(const nlohmann::json& j, const char* key, double fallback) {
    return j.contains(key) ? require_number(j, key) : fallback;
}

}  // namespace

ModelConfig parse_model_config(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorKind::ConfigError, "model config must be a JSON object");
    static const std::set<std::string> known{"mu",     "sigma", "jump_rate", "jump_scale", "discount",
                                             "target", "C",     "c",         "D",          "d"};
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.count(key)) throw Error(ErrorKind::ConfigError, "unknown key '" + key + "'");
    }
    ModelConfig cfg;
    cfg.model.mu = optional_number(j, "mu", 0.0);
    cfg.model.sigma = require_number(j, "sigma");
    cfg.model.jump_rate = optional_number(j, "jump_rate", 1.0);
    cfg.model.jump_scale = require_number(j, "jump_scale");
    cfg.model.discount = require_number(j, "discount");
    cfg.model.target = optional_number(j, "target", 0.0);
    cfg.costs.fixed_up = require_number(j, "C");
    cfg.costs.prop_up = optional_number(j, "c", 0.0);
    cfg.costs.fixed_down = require_number(j, "D");
    cfg.costs.prop_down = optional_number(j, "d", 0.0);
    validate_model(cfg.model, cfg.costs);
    return cfg;
}

ModelConfig load_model_config(const std::string& path) { return parse_model_config(read_json_file(path)); }

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    return {{"mu", cfg.model.mu},
            {"sigma", cfg.model.sigma},
            {"jump_rate", cfg.model.jump_rate},
            {"jump_scale", cfg.model.jump_scale},
            {"discount", cfg.model.discount},
            {"target", cfg.model.target},
            {"C", cfg.costs.fixed_up},
            {"c", cfg.costs.prop_up},
            {"D", cfg.costs.fixed_down},
            {"d", cfg.costs.prop_down}};
}

nlohmann::json report_to_json(const VerificationReport& report) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : report.checks) {
        checks.push_back({{"name", c.name},
                          {"passed", c.passed},
                          {"worst", c.worst},
                          {"location", c.location},
                          {"tolerance", c.tolerance}});
    }
    return {{"all_passed", report.all_passed()}, {"checks", checks}};
}

VerificationReport report_from_json(const nlohmann::json& j) {
    VerificationReport r;
    try {
        for (const auto& c : j.at("checks")) {
            CheckResult cr;
            cr.name = c.at("name").get<std::string>();
            cr.passed = c.at("passed").get<bool>();
            cr.worst = number_or_inf(c.at("worst"));
            cr.location = number_or_inf(c.at("location"));
            cr.tolerance = number_or_inf(c.at("tolerance"));
            r.checks.push_back(cr);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("malformed report: ") + e.what());
    }
    return r;
}

nlohmann::json solution_to_json(const SolveResult& result) {
    nlohmann::json j;
    j["status"] = std::string(to_string(result.status));
    j["residual_inf"] = result.diagnostics.residual_inf;
    j["iterations"] = result.diagnostics.iterations;
    j["alpha_equals_beta"] = result.diagnostics.alpha_equals_beta;
    if (!result.diagnostics.message.empty()) j["message"] = result.diagnostics.message;
    if (result.cand) {
        const auto& c = *result.cand;
        j["a"] = c.bands().a;
        j["alpha"] = c.bands().alpha;
        j["beta"] = c.bands().beta;
        j["b"] = c.bands().b;
        j["L1"] = c.L()[0];
        j["L2"] = c.L()[1];
        j["L3"] = c.L()[2];
        j["K1"] = c.K().K1;
        j["K2"] = c.K().K2;
        j["K3"] = c.K().K3;
        j["c1"] = c.c()[0];
        j["c2"] = c.c()[1];
        j["c3"] = c.c()[2];
        j["zeta"] = c.zeta();
    }
    j["report"] = report_to_json(result.report);
    return j;
}

SolutionFile parse_solution(const nlohmann::json& j) {
    SolutionFile s;
    s.bands = {require_number(j, "a"), require_number(j, "alpha"), require_number(j, "beta"), require_number(j, "b")};
    // A plain band file (no L) is accepted for the analysis commands.
    if (j.contains("L1")) s.L = {require_number(j, "L1"), require_number(j, "L2"), require_number(j, "L3")};
    if (j.contains("report")) s.report = report_from_json(j.at("report"));
    return s;
}

SolutionFile load_solution(const std::string& path) { return parse_solution(read_json_file(path)); }

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorKind::ConfigError, "'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::ConfigError, "cannot write '" + path + "'");
    out << text;
    if (!out) throw Error(ErrorKind::ConfigError, "write to '" + path + "' failed");
}

}  // namespace levyband
