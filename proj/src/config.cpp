#include "manipulant/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace manipulant {

namespace {

[[noreturn]] void fail(const std::string& msg, int line) { throw ParseError(msg, line); }

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

// strips a trailing comment that is not inside a string literal
std::string strip_comment(const std::string& s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_string = !in_string;
        if (s[i] == '#' && !in_string) return s.substr(0, i);
    }
    return s;
}

TomlValue parse_scalar(const std::string& raw, int line);

TomlValue parse_value(const std::string& raw, int line) {
    const std::string s = trim(raw);
    if (s.empty()) fail("missing value", line);
    if (s.front() == '[') {
        if (s.back() != ']') fail("unterminated array", line);
        std::vector<TomlValue> items;
        std::string inner = s.substr(1, s.size() - 2);
        std::string cur;
        bool in_string = false;
        for (char c : inner) {
            if (c == '"') in_string = !in_string;
            if (c == ',' && !in_string) {
                if (!trim(cur).empty()) items.push_back(parse_scalar(trim(cur), line));
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!trim(cur).empty()) items.push_back(parse_scalar(trim(cur), line));
        TomlValue v;
        v.v = std::move(items);
        v.line = line;
        return v;
    }
    return parse_scalar(s, line);
}

TomlValue parse_scalar(const std::string& s, int line) {
    TomlValue v;
    v.line = line;
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        v.v = s.substr(1, s.size() - 2);
        return v;
    }
    if (s == "true" || s == "false") {
        v.v = (s == "true");
        return v;
    }
    // integer, then float
    {
        std::size_t pos = 0;
        try {
            if (s.find_first_of(".eE") == std::string::npos) {
                const long long i = std::stoll(s, &pos);
                if (pos == s.size()) {
                    v.v = i;
                    return v;
                }
            }
        } catch (...) {
        }
    }
    {
        std::size_t pos = 0;
        try {
            const double d = std::stod(s, &pos);
            if (pos == s.size()) {
                v.v = d;
                return v;
            }
        } catch (...) {
        }
    }
    fail("cannot parse value '" + s + "'", line);
}

}  // namespace

std::string TomlValue::as_string() const {
    if (!is_string()) fail("expected a string", line);
    return std::get<std::string>(v);
}

double TomlValue::as_double() const {
    if (std::holds_alternative<double>(v)) return std::get<double>(v);
    if (std::holds_alternative<long long>(v)) {
        return static_cast<double>(std::get<long long>(v));
    }
    fail("expected a number", line);
}

long long TomlValue::as_int() const {
    if (std::holds_alternative<long long>(v)) return std::get<long long>(v);
    fail("expected an integer", line);
}

bool TomlValue::as_bool() const {
    if (!is_bool()) fail("expected a boolean", line);
    return std::get<bool>(v);
}

std::vector<double> TomlValue::as_double_array() const {
    if (!is_array()) fail("expected an array", line);
    std::vector<double> out;
    for (const TomlValue& item : std::get<std::vector<TomlValue>>(v)) {
        out.push_back(item.as_double());
    }
    return out;
}

std::vector<std::string> TomlValue::as_string_array() const {
    if (!is_array()) fail("expected an array of strings", line);
    std::vector<std::string> out;
    for (const TomlValue& item : std::get<std::vector<TomlValue>>(v)) {
        out.push_back(item.as_string());
    }
    return out;
}

TomlDocument parse_toml(const std::string& text) {
    TomlDocument doc;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("unterminated section header", line_no);
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail("empty section name", line_no);
            doc.sections[section];
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value", line_no);
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) fail("empty key", line_no);
        if (doc.sections[section].count(key)) fail("duplicate key '" + key + "'", line_no);
        doc.sections[section][key] = parse_value(line.substr(eq + 1), line_no);
    }
    return doc;
}

TomlDocument parse_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str());
}

namespace {

class SectionReader {
public:
    SectionReader(const TomlDocument& doc, const std::string& name) {
        auto it = doc.sections.find(name);
        if (it != doc.sections.end()) entries_ = &it->second;
    }

    const TomlValue* get(const std::string& key) {
        if (!entries_) return nullptr;
        used_.push_back(key);
        auto it = entries_->find(key);
        return it == entries_->end() ? nullptr : &it->second;
    }

    void reject_unknown(const std::string& section) const {
        if (!entries_) return;
        for (const auto& [key, value] : *entries_) {
            if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
                fail("unknown key '" + key + "' in [" + section + "]", value.line);
            }
        }
    }

private:
    const std::map<std::string, TomlValue>* entries_ = nullptr;
    std::vector<std::string> used_;
};

}  // namespace

PipelineConfig PipelineConfig::from_toml(const TomlDocument& doc) {
    static const std::vector<std::string> known_sections{
        "", "robot", "ingest", "analysis", "gmm", "controller", "report"};
    for (const auto& [name, entries] : doc.sections) {
        if (std::find(known_sections.begin(), known_sections.end(), name) ==
            known_sections.end()) {
            const int line = entries.empty() ? 0 : entries.begin()->second.line;
            fail("unknown section [" + name + "]", line);
        }
        if (name.empty() && !entries.empty()) {
            fail("top-level keys are not allowed", entries.begin()->second.line);
        }
    }

    PipelineConfig cfg;
    SectionReader robot(doc, "robot");
    if (const TomlValue* v = robot.get("model")) cfg.robot_model = v->as_string();
    if (const TomlValue* v = robot.get("arm")) cfg.arm = v->as_string();
    robot.reject_unknown("robot");
    if (cfg.arm != "left" && cfg.arm != "right") {
        throw ParseError("robot.arm must be 'left' or 'right'");
    }

    SectionReader ingest(doc, "ingest");
    if (const TomlValue* v = ingest.get("frames_per_action")) {
        cfg.frames_per_action = static_cast<int>(v->as_int());
    }
    if (const TomlValue* v = ingest.get("workers")) cfg.workers = static_cast<int>(v->as_int());
    ingest.reject_unknown("ingest");

    SectionReader analysis(doc, "analysis");
    if (const TomlValue* v = analysis.get("kind")) cfg.kind = v->as_string();
    if (const TomlValue* v = analysis.get("jacobian")) cfg.jacobian = v->as_string();
    if (const TomlValue* v = analysis.get("actions")) cfg.actions = v->as_string_array();
    if (const TomlValue* v = analysis.get("swivel_hint")) cfg.swivel_hint = v->as_double();
    analysis.reject_unknown("analysis");
    if (cfg.kind != "velocity" && cfg.kind != "force") {
        throw ParseError("analysis.kind must be 'velocity' or 'force'");
    }
    if (cfg.jacobian != "positional" && cfg.jacobian != "full") {
        throw ParseError("analysis.jacobian must be 'positional' or 'full'");
    }

    SectionReader gmm(doc, "gmm");
    if (const TomlValue* v = gmm.get("components")) {
        cfg.components = static_cast<int>(v->as_int());
    }
    if (const TomlValue* v = gmm.get("max_em_iter")) {
        cfg.max_em_iter = static_cast<int>(v->as_int());
    }
    if (const TomlValue* v = gmm.get("tol")) cfg.em_tol = v->as_double();
    if (const TomlValue* v = gmm.get("cov_reg")) cfg.cov_reg = v->as_double();
    if (const TomlValue* v = gmm.get("seed")) {
        cfg.seed = static_cast<unsigned long long>(v->as_int());
    }
    gmm.reject_unknown("gmm");

    SectionReader ctrl(doc, "controller");
    if (const TomlValue* v = ctrl.get("k_m")) cfg.k_m = v->as_double();
    if (const TomlValue* v = ctrl.get("k_x")) cfg.k_x = v->as_double();
    if (const TomlValue* v = ctrl.get("dt")) cfg.dt = v->as_double();
    if (const TomlValue* v = ctrl.get("switch_time")) cfg.switch_time = v->as_double();
    if (const TomlValue* v = ctrl.get("damping")) cfg.damping = v->as_double();
    if (const TomlValue* v = ctrl.get("duration")) cfg.duration = v->as_double();
    if (const TomlValue* v = ctrl.get("divergence_factor")) {
        cfg.divergence_factor = v->as_double();
    }
    if (const TomlValue* v = ctrl.get("initial_mode")) cfg.initial_mode = v->as_string();
    if (const TomlValue* v = ctrl.get("q0")) cfg.q0 = v->as_double_array();
    if (const TomlValue* v = ctrl.get("target_position")) {
        cfg.target_position = v->as_double_array();
    }
    ctrl.reject_unknown("controller");

    SectionReader report(doc, "report");
    if (const TomlValue* v = report.get("ellipse_stride")) {
        cfg.ellipse_stride = static_cast<int>(v->as_int());
    }
    report.reject_unknown("report");
    return cfg;
}

PipelineConfig PipelineConfig::from_file(const std::string& path) {
    return from_toml(parse_toml_file(path));
}

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json j{
        {"robot", {{"model", robot_model}, {"arm", arm}}},
        {"ingest", {{"frames_per_action", frames_per_action}, {"workers", workers}}},
        {"analysis",
         {{"kind", kind},
          {"jacobian", jacobian},
          {"actions", actions},
          {"swivel_hint", swivel_hint}}},
        {"gmm",
         {{"max_em_iter", max_em_iter},
          {"tol", em_tol},
          {"cov_reg", cov_reg},
          {"seed", seed}}},
        {"controller",
         {{"k_m", k_m},
          {"k_x", k_x},
          {"dt", dt},
          {"switch_time", switch_time},
          {"damping", damping},
          {"duration", duration},
          {"divergence_factor", divergence_factor},
          {"initial_mode", initial_mode}}},
        {"report", {{"ellipse_stride", ellipse_stride}}},
    };
    if (components) j["gmm"]["components"] = *components;
    if (q0) j["controller"]["q0"] = *q0;
    if (target_position) j["controller"]["target_position"] = *target_position;
    return j;
}

}  // namespace manipulant
