#pragma once

#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "manipulant/errors.hpp"

namespace manipulant {

/// Minimal strict TOML subset: [section] headers, key = value pairs,
/// # comments. Values: strings, integers, floats, booleans, flat arrays.
/// Errors carry 1-based line numbers.
struct TomlValue {
    std::variant<std::string, double, long long, bool, std::vector<TomlValue>> v;
    int line = 0;

    bool is_string() const { return std::holds_alternative<std::string>(v); }
    bool is_number() const {
        return std::holds_alternative<double>(v) || std::holds_alternative<long long>(v);
    }
    bool is_bool() const { return std::holds_alternative<bool>(v); }
    bool is_array() const { return std::holds_alternative<std::vector<TomlValue>>(v); }

    std::string as_string() const;
    double as_double() const;
    long long as_int() const;
    bool as_bool() const;
    std::vector<double> as_double_array() const;
    std::vector<std::string> as_string_array() const;
};

struct TomlDocument {
    // section -> key -> value; top-level keys live in section ""
    std::map<std::string, std::map<std::string, TomlValue>> sections;
};

TomlDocument parse_toml(const std::string& text);
TomlDocument parse_toml_file(const std::string& path);

/// Resolved pipeline configuration. Every knob mirrors a documented default;
/// unknown sections or keys are rejected with their line number.
struct PipelineConfig {
    // [robot]
    std::string robot_model = "models/arm7.json";
    std::string arm = "right";  // arm used for single-arm analysis

    // [ingest]
    int frames_per_action = 20;
    int workers = 4;

    // [analysis]
    std::string kind = "velocity";  // velocity | force
    std::string jacobian = "positional";  // positional (3xn) | full (6xn)
    std::vector<std::string> actions;  // empty = task default
    double swivel_hint = 0.2;

    // [gmm]
    std::optional<int> components;  // default: 5 (screwing) or 3 (carrying)
    int max_em_iter = 100;
    double em_tol = 1e-7;
    double cov_reg = 1e-6;
    unsigned long long seed = 0;

    // [controller]
    double k_m = 5.0;
    double k_x = 10.0;
    double dt = 1e-3;
    double switch_time = 1.0;
    double damping = 1e-4;
    double duration = 3.0;
    double divergence_factor = 2.0;
    std::string initial_mode = "manipulability_first";
    std::optional<std::vector<double>> q0;
    std::optional<std::vector<double>> target_position;

    // [report]
    int ellipse_stride = 250;

    static PipelineConfig from_toml(const TomlDocument& doc);
    static PipelineConfig from_file(const std::string& path);

    /// Resolved configuration echoed into artifacts for provenance.
    nlohmann::json to_json() const;
};

}  // namespace manipulant
