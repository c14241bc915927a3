#include "manipulant/serialization.hpp"

#include <fstream>
#include <sstream>

namespace manipulant {

namespace {

std::ifstream open_in(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open " + file.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw Error("cannot write " + file.string());
    return out;
}

Eigen::Vector3d vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Quaterniond quat_from_json(const json& j) {
    if (!j.is_array() || j.size() != 4) throw ParseError("expected a quaternion [w,x,y,z]");
    Eigen::Quaterniond q(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
                         j[3].get<double>());
    if (std::abs(q.norm() - 1.0) > 1e-8) throw ParseError("quaternion not unit norm");
    return q.normalized();
}

json quat_to_json(const Eigen::Quaterniond& q) {
    return json::array({q.w(), q.x(), q.y(), q.z()});
}

}  // namespace

json spd_to_json(const SpdMatrix& m) {
    const int d = m.dim();
    json upper = json::array();
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) upper.push_back(m(i, j));
    return json{{"dim", d}, {"upper_triangular_row_major", std::move(upper)}};
}

SpdMatrix spd_from_json(const json& j) {
    const int d = j.at("dim").get<int>();
    const auto& upper = j.at("upper_triangular_row_major");
    if (static_cast<int>(upper.size()) != d * (d + 1) / 2) {
        throw ParseError("spd matrix: wrong upper-triangle length");
    }
    Eigen::MatrixXd m(d, d);
    int k = 0;
    for (int i = 0; i < d; ++i)
        for (int c = i; c < d; ++c) {
            m(i, c) = m(c, i) = upper[k++].get<double>();
        }
    return SpdMatrix(m);
}

json covariance_to_json(const SpdCovariance& c) {
    const Eigen::MatrixXd m = c.matricized();
    json flat = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
    return json{{"dim", c.dim()}, {"matricized", std::move(flat)}};
}

SpdCovariance covariance_from_json(const json& j) {
    const int d = j.at("dim").get<int>();
    const int v = sym_vec_dim(d);
    const auto& flat = j.at("matricized");
    if (static_cast<int>(flat.size()) != v * v) {
        throw ParseError("covariance: wrong matricized length");
    }
    Eigen::MatrixXd m(v, v);
    int k = 0;
    for (int i = 0; i < v; ++i)
        for (int c = 0; c < v; ++c) m(i, c) = flat[k++].get<double>();
    // base is carried separately by the owning document; identity placeholder
    return SpdCovariance::from_matricized(0.5 * (m + m.transpose()), SpdMatrix::identity(d));
}

json pose_to_json(const Pose& p) {
    return json{{"pos", vec3_to_json(p.translation())},
                {"quat", quat_to_json(Eigen::Quaterniond(p.linear()))}};
}

Pose pose_from_json(const json& j) {
    Pose p = Pose::Identity();
    p.translation() = vec3_from_json(j.at("pos"));
    p.linear() = quat_from_json(j.at("quat")).toRotationMatrix();
    return p;
}

std::string content_hash(const std::string& bytes) {
    unsigned long long h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << "fnv1a64:" << std::hex << h;
    return os.str();
}

std::string content_hash_of_files(const std::vector<std::filesystem::path>& files) {
    std::vector<std::filesystem::path> sorted = files;
    std::sort(sorted.begin(), sorted.end());
    std::string all;
    for (const auto& f : sorted) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw ParseError("cannot open " + f.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        all += f.filename().string();
        all += '\0';
        all += ss.str();
    }
    return content_hash(all);
}

RobotDescription load_robot(const std::filesystem::path& file) {
    std::ifstream in = open_in(file);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("robot file " + file.string() + ": " + e.what());
    }
    std::vector<RevoluteJoint> joints;
    for (const json& joint : j.at("joints")) {
        RevoluteJoint rj;
        rj.axis = vec3_from_json(joint.at("axis"));
        rj.offset = vec3_from_json(joint.at("offset"));
        joints.push_back(rj);
    }
    Pose base = j.contains("base_pose") ? pose_from_json(j["base_pose"]) : Pose::Identity();
    Pose end = j.contains("end_offset") ? pose_from_json(j["end_offset"]) : Pose::Identity();
    RobotDescription out{
        KinematicChain(std::move(joints), base, end, j.value("name", std::string())),
        JointConfig(), {0, 1, 2}};
    out.rest_config = Eigen::VectorXd::Zero(out.chain.dof());
    if (j.contains("rest_config")) {
        const auto& rc = j["rest_config"];
        if (static_cast<int>(rc.size()) != out.chain.dof()) {
            throw ParseError("robot file: rest_config length mismatch");
        }
        for (int i = 0; i < out.chain.dof(); ++i) out.rest_config[i] = rc[i].get<double>();
    }
    if (j.contains("task_rows")) {
        out.task_rows.clear();
        for (const json& r : j["task_rows"]) out.task_rows.push_back(r.get<int>());
    }
    return out;
}

json robot_to_json(const KinematicChain& chain, const JointConfig& rest_config,
                   const std::vector<int>& task_rows) {
    json joints = json::array();
    for (const RevoluteJoint& rj : chain.joints()) {
        joints.push_back(json{{"axis", vec3_to_json(rj.axis)},
                              {"offset", vec3_to_json(rj.offset)}});
    }
    json rest = json::array();
    for (int i = 0; i < rest_config.size(); ++i) rest.push_back(rest_config[i]);
    return json{{"name", chain.name()},
                {"joints", std::move(joints)},
                {"base_pose", pose_to_json(chain.base_pose())},
                {"end_offset", pose_to_json(chain.end_offset())},
                {"rest_config", std::move(rest)},
                {"task_rows", task_rows}};
}

namespace {

json anthropometry_to_json(const Anthropometry& a) {
    return json{{"upper_arm_length", a.upper_arm_length},
                {"forearm_length", a.forearm_length},
                {"hand_length", a.hand_length},
                {"shoulder_width", a.shoulder_width},
                {"shoulder_drop", a.shoulder_drop},
                {"neck_height", a.neck_height}};
}

Anthropometry anthropometry_from_json(const json& j) {
    Anthropometry a;
    a.upper_arm_length = j.value("upper_arm_length", a.upper_arm_length);
    a.forearm_length = j.value("forearm_length", a.forearm_length);
    a.hand_length = j.value("hand_length", a.hand_length);
    a.shoulder_width = j.value("shoulder_width", a.shoulder_width);
    a.shoulder_drop = j.value("shoulder_drop", a.shoulder_drop);
    a.neck_height = j.value("neck_height", a.neck_height);
    return a;
}

}  // namespace

void write_trial(const std::filesystem::path& file, const TrialRecording& trial,
                 const json& generator) {
    std::ofstream out = open_out(file);
    json header{{"participant_id", trial.participant_id},
                {"task", to_string(trial.task)},
                {"sample_rate", trial.sample_rate},
                {"anthropometry", anthropometry_to_json(trial.anthropometry)}};
    if (!generator.is_null()) header["generator"] = generator;
    out << header.dump() << '\n';
    for (const Frame& f : trial.frames) {
        json line{{"t", f.t},
                  {"lw_pos", vec3_to_json(f.left_wrist.translation())},
                  {"lw_quat", quat_to_json(Eigen::Quaterniond(f.left_wrist.linear()))},
                  {"rw_pos", vec3_to_json(f.right_wrist.translation())},
                  {"rw_quat", quat_to_json(Eigen::Quaterniond(f.right_wrist.linear()))},
                  {"label", f.label}};
        if (f.neck_world) line["neck_pos"] = vec3_to_json(*f.neck_world);
        const auto put_joints = [&line](const char* key,
                                        const std::optional<Eigen::VectorXd>& q) {
            if (!q) return;
            json arr = json::array();
            for (int i = 0; i < q->size(); ++i) arr.push_back((*q)[i]);
            line[key] = std::move(arr);
        };
        put_joints("q_l", f.joints_left);
        put_joints("q_r", f.joints_right);
        out << line.dump() << '\n';
    }
}

TrialRecording read_trial(const std::filesystem::path& file) {
    std::ifstream in = open_in(file);
    std::string line;
    int line_no = 0;
    TrialRecording trial;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(file.string() + ": " + e.what(), line_no);
        }
        if (!have_header) {
            trial.participant_id = j.at("participant_id").get<std::string>();
            trial.task = task_from_string(j.at("task").get<std::string>());
            trial.sample_rate = j.at("sample_rate").get<double>();
            if (j.contains("anthropometry")) {
                trial.anthropometry = anthropometry_from_json(j["anthropometry"]);
            }
            have_header = true;
            continue;
        }
        Frame f;
        try {
            f.t = j.at("t").get<double>();
            f.left_wrist = Eigen::Translation3d(vec3_from_json(j.at("lw_pos"))) *
                           quat_from_json(j.at("lw_quat"));
            f.right_wrist = Eigen::Translation3d(vec3_from_json(j.at("rw_pos"))) *
                            quat_from_json(j.at("rw_quat"));
            const json& label = j.at("label");
            if (label.is_array()) {
                std::vector<std::string> annotators;
                for (const json& l : label) annotators.push_back(l.get<std::string>());
                f.label = fuse_annotator_labels(annotators);
            } else {
                f.label = label.get<std::string>();
            }
            if (j.contains("neck_pos")) f.neck_world = vec3_from_json(j["neck_pos"]);
            const auto get_joints = [&j](const char* key) -> std::optional<Eigen::VectorXd> {
                if (!j.contains(key)) return std::nullopt;
                const auto& arr = j[key];
                Eigen::VectorXd q(arr.size());
                for (std::size_t i = 0; i < arr.size(); ++i) q[i] = arr[i].get<double>();
                return q;
            };
            f.joints_left = get_joints("q_l");
            f.joints_right = get_joints("q_r");
        } catch (const json::exception& e) {
            throw ParseError(file.string() + ": " + e.what(), line_no);
        }
        trial.frames.push_back(std::move(f));
    }
    if (!have_header) throw ParseError(file.string() + ": missing header line", 1);
    trial.validate();
    return trial;
}

void write_ellipsoids(const std::filesystem::path& file,
                      const std::vector<EllipsoidRecord>& records, const json& provenance,
                      const std::string& task) {
    std::ofstream out = open_out(file);
    out << json{{"artifact", "ellipsoids"}, {"task", task}, {"provenance", provenance}}.dump()
        << '\n';
    for (const EllipsoidRecord& r : records) {
        out << json{{"t", r.t},        {"u", r.u},
                    {"trial", r.trial}, {"timestep", r.timestep},
                    {"action", r.action}, {"frame_tag", r.frame_tag},
                    {"kind", r.kind},  {"spd", spd_to_json(r.spd)}}
                   .dump()
            << '\n';
    }
}

json read_jsonl_header(const std::filesystem::path& file) {
    std::ifstream in = open_in(file);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(file.string() + ": " + e.what(), 1);
        }
        if (!j.contains("artifact")) throw ParseError(file.string() + ": missing header", 1);
        return j;
    }
    throw ParseError(file.string() + ": empty file", 1);
}

std::vector<EllipsoidRecord> read_ellipsoids(const std::filesystem::path& file) {
    std::ifstream in = open_in(file);
    std::vector<EllipsoidRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(file.string() + ": " + e.what(), line_no);
        }
        if (j.contains("artifact")) continue;  // header
        out.push_back(EllipsoidRecord{j.at("t").get<double>(), j.at("u").get<double>(),
                                      j.at("trial").get<int>(), j.at("timestep").get<int>(),
                                      j.at("action").get<std::string>(),
                                      j.at("frame_tag").get<std::string>(),
                                      j.at("kind").get<std::string>(),
                                      spd_from_json(j.at("spd"))});
    }
    return out;
}

void write_profile(const std::filesystem::path& file, const ManipulabilityProfile& profile,
                   const json& provenance) {
    json steps = json::array();
    for (const ProfileTimestep& ts : profile.timesteps) {
        json std_axis = json::array();
        for (int i = 0; i < ts.per_axis_std.size(); ++i) std_axis.push_back(ts.per_axis_std[i]);
        steps.push_back(json{{"u", ts.u},
                             {"mean", spd_to_json(ts.mean)},
                             {"covariance", covariance_to_json(ts.covariance)},
                             {"per_axis_std", std::move(std_axis)},
                             {"det", ts.det},
                             {"cond", ts.cond},
                             {"n_samples", ts.n_samples}});
    }
    std::ofstream out = open_out(file);
    out << json{{"type", "manipulability_profile"},
                {"timesteps", std::move(steps)},
                {"provenance", provenance}}
               .dump(2)
        << '\n';
}

namespace {

json parse_document(const std::filesystem::path& file) {
    std::ifstream in = open_in(file);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
}

}  // namespace

ManipulabilityProfile read_profile(const std::filesystem::path& file) {
    const json j = parse_document(file);
    if (j.value("type", "") != "manipulability_profile") {
        throw ParseError(file.string() + ": not a manipulability_profile document");
    }
    ManipulabilityProfile profile;
    for (const json& ts : j.at("timesteps")) {
        const SpdMatrix mean = spd_from_json(ts.at("mean"));
        SpdCovariance cov = covariance_from_json(ts.at("covariance"));
        cov = SpdCovariance::from_matricized(cov.matricized(), mean);
        Eigen::VectorXd std_axis(mean.dim());
        for (int i = 0; i < mean.dim(); ++i) std_axis[i] = ts.at("per_axis_std")[i].get<double>();
        profile.timesteps.push_back(ProfileTimestep{ts.at("u").get<double>(), mean, cov, std_axis,
                                                    ts.at("det").get<double>(),
                                                    ts.at("cond").get<double>(),
                                                    ts.at("n_samples").get<int>()});
    }
    return profile;
}

void write_gmm(const std::filesystem::path& file, const SpdGmm& gmm, const json& provenance) {
    json comps = json::array();
    for (const SpdGmmComponent& c : gmm.components) {
        json cov = json::array();
        for (Eigen::Index i = 0; i < c.tangent_covariance.rows(); ++i)
            for (Eigen::Index k = 0; k < c.tangent_covariance.cols(); ++k)
                cov.push_back(c.tangent_covariance(i, k));
        comps.push_back(json{{"weight", c.weight},
                             {"time_mean", c.time_mean},
                             {"time_var", c.time_var},
                             {"center", spd_to_json(c.center)},
                             {"tangent_covariance", std::move(cov)}});
    }
    std::ofstream out = open_out(file);
    out << json{{"type", "spd_gmm"}, {"components", std::move(comps)},
                {"provenance", provenance}}
               .dump(2)
        << '\n';
}

SpdGmm read_gmm(const std::filesystem::path& file) {
    const json j = parse_document(file);
    if (j.value("type", "") != "spd_gmm") {
        throw ParseError(file.string() + ": not an spd_gmm document");
    }
    SpdGmm gmm;
    for (const json& c : j.at("components")) {
        SpdGmmComponent comp{c.at("weight").get<double>(), c.at("time_mean").get<double>(),
                             c.at("time_var").get<double>(), spd_from_json(c.at("center")),
                             Eigen::MatrixXd()};
        const int v = sym_vec_dim(comp.center.dim());
        const auto& cov = c.at("tangent_covariance");
        if (static_cast<int>(cov.size()) != v * v) {
            throw ParseError(file.string() + ": tangent covariance length mismatch");
        }
        comp.tangent_covariance.resize(v, v);
        int k = 0;
        for (int i = 0; i < v; ++i)
            for (int q = 0; q < v; ++q) comp.tangent_covariance(i, q) = cov[k++].get<double>();
        gmm.components.push_back(std::move(comp));
    }
    gmm.validate();
    return gmm;
}

ProfileSource load_profile_source(const std::filesystem::path& file) {
    const json j = parse_document(file);
    const std::string type = j.value("type", "");
    if (type == "spd_gmm") {
        const SpdGmm gmm = read_gmm(file);
        return [gmm](double t) { return retrieve_profile(gmm, std::clamp(t, 0.0, 1.0)); };
    }
    if (type == "manipulability_profile") {
        const ManipulabilityProfile profile = read_profile(file);
        if (profile.timesteps.empty()) throw ParseError("empty profile document");
        return [profile](double u) {
            u = std::clamp(u, 0.0, 1.0);
            const auto& ts = profile.timesteps;
            if (u <= ts.front().u) return ts.front().mean;
            if (u >= ts.back().u) return ts.back().mean;
            for (std::size_t i = 1; i < ts.size(); ++i) {
                if (u <= ts[i].u) {
                    const double span = ts[i].u - ts[i - 1].u;
                    const double s = span > 0 ? (u - ts[i - 1].u) / span : 1.0;
                    return geodesic(ts[i - 1].mean, ts[i].mean, s);
                }
            }
            return ts.back().mean;
        };
    }
    if (type == "constant") {
        const SpdMatrix m = spd_from_json(j.at("spd"));
        return [m](double) { return m; };
    }
    throw ParseError(file.string() + ": unknown profile document type '" + type + "'");
}

void write_run_log(const std::filesystem::path& file, const TrackingLog& log,
                   const json& provenance) {
    std::ofstream out = open_out(file);
    out << json{{"artifact", "run_log"},
                {"provenance", provenance},
                {"diverged", log.diverged},
                {"divergence_message", log.divergence_message}}
               .dump()
        << '\n';
    for (const SimStep& s : log.steps) {
        json q = json::array(), x = json::array();
        for (int i = 0; i < s.q.size(); ++i) q.push_back(s.q[i]);
        for (int i = 0; i < s.x.size(); ++i) x.push_back(s.x[i]);
        out << json{{"t", s.t},
                    {"q", std::move(q)},
                    {"x", std::move(x)},
                    {"spd_distance", s.spd_dist},
                    {"pos_error", s.pos_error},
                    {"mode", to_string(s.mode)},
                    {"M", spd_to_json(SpdMatrix(s.current_m))},
                    {"M_hat", spd_to_json(SpdMatrix(s.target_m))}}
                   .dump()
            << '\n';
    }
}

TrackingLog read_run_log(const std::filesystem::path& file) {
    std::ifstream in = open_in(file);
    TrackingLog log;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(file.string() + ": " + e.what(), line_no);
        }
        if (j.contains("artifact")) {
            log.diverged = j.value("diverged", false);
            log.divergence_message = j.value("divergence_message", "");
            continue;
        }
        SimStep s;
        s.t = j.at("t").get<double>();
        const auto& q = j.at("q");
        s.q.resize(q.size());
        for (std::size_t i = 0; i < q.size(); ++i) s.q[i] = q[i].get<double>();
        const auto& x = j.at("x");
        s.x.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) s.x[i] = x[i].get<double>();
        s.spd_dist = j.at("spd_distance").get<double>();
        s.pos_error = j.at("pos_error").get<double>();
        s.mode = priority_mode_from_string(j.at("mode").get<std::string>());
        if (j.contains("M")) s.current_m = spd_from_json(j["M"]).matrix();
        if (j.contains("M_hat")) s.target_m = spd_from_json(j["M_hat"]).matrix();
        log.steps.push_back(std::move(s));
    }
    return log;
}

}  // namespace manipulant
