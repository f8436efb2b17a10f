#pragma once

#include <array>
#include <optional>
#include <string>

#include <json.hpp>

#include "levyband/band_solver.hpp"
#include "levyband/model.hpp"

namespace levyband {

struct ModelConfig {
    ModelParams model;
    CostParams costs;
};

/// Keys: mu, sigma, jump_rate, jump_scale, discount, target, C, c, D, d.
/// sigma, jump_scale, discount, C and D are required; unknown keys are rejected.
ModelConfig parse_model_config(const nlohmann::json& j);
ModelConfig load_model_config(const std::string& path);
nlohmann::json model_config_to_json(const ModelConfig& cfg);

nlohmann::json report_to_json(const VerificationReport& report);
VerificationReport report_from_json(const nlohmann::json& j);

/// {a, alpha, beta, b, L1, L2, L3, K1, K2, K3, c1, c2, c3, zeta, status, residual_inf, report}.
nlohmann::json solution_to_json(const SolveResult& result);

struct SolutionFile {
    BandPolicy bands;
    std::array<double, 3> L{};
    std::optional<VerificationReport> report;
};

SolutionFile parse_solution(const nlohmann::json& j);
SolutionFile load_solution(const std::string& path);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace levyband
