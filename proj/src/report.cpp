#include "manipulant/report.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <sstream>

namespace manipulant {

namespace {

std::ofstream open_out(const std::filesystem::path& file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file);
    if (!out) throw Error("cannot write " + file.string());
    return out;
}

struct Viewport {
    double x0, y0, w, h;        // SVG box
    double dx0, dx1, dy0, dy1;  // data range

    double px(double x) const { return x0 + (x - dx0) / (dx1 - dx0) * w; }
    double py(double y) const { return y0 + h - (y - dy0) / (dy1 - dy0) * h; }
};

void axes(std::ostream& out, const Viewport& v, const std::string& title) {
    out << "<rect x='" << v.x0 << "' y='" << v.y0 << "' width='" << v.w << "' height='" << v.h
        << "' fill='none' stroke='#888'/>\n";
    out << "<text x='" << v.x0 + v.w / 2 << "' y='" << v.y0 - 6
        << "' text-anchor='middle' font-size='12'>" << title << "</text>\n";
    std::ostringstream lo, hi;
    lo.precision(3);
    hi.precision(3);
    lo << v.dy0;
    hi << v.dy1;
    out << "<text x='" << v.x0 - 4 << "' y='" << v.y0 + v.h
        << "' text-anchor='end' font-size='9'>" << lo.str() << "</text>\n";
    out << "<text x='" << v.x0 - 4 << "' y='" << v.y0 + 8 << "' text-anchor='end' font-size='9'>"
        << hi.str() << "</text>\n";
}

void polyline(std::ostream& out, const Viewport& v, const std::vector<double>& xs,
              const std::vector<double>& ys, const std::string& stroke) {
    out << "<polyline fill='none' stroke='" << stroke << "' stroke-width='1.2' points='";
    for (std::size_t i = 0; i < xs.size(); ++i) {
        out << v.px(xs[i]) << "," << v.py(ys[i]) << " ";
    }
    out << "'/>\n";
}

void ellipse_path(std::ostream& out, const Viewport& v, const Eigen::Matrix2d& m, double cx,
                  double cy, double scale, const std::string& stroke, bool dashed) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(m);
    const double a = std::sqrt(std::max(eig.eigenvalues()[1], 0.0)) * scale;
    const double b = std::sqrt(std::max(eig.eigenvalues()[0], 0.0)) * scale;
    const Eigen::Vector2d dir = eig.eigenvectors().col(1);
    const double angle = std::atan2(dir.y(), dir.x()) * 180.0 / M_PI;
    const double px = v.px(cx), py = v.py(cy);
    // y axis points down in SVG, so the rotation flips sign
    out << "<ellipse cx='" << px << "' cy='" << py << "' rx='" << a * v.w / (v.dx1 - v.dx0)
        << "' ry='" << b * v.w / (v.dx1 - v.dx0) << "' transform='rotate(" << -angle << " " << px
        << " " << py << ")' fill='none' stroke='" << stroke << "' stroke-width='1'"
        << (dashed ? " stroke-dasharray='4 3'" : "") << "/>\n";
}

}  // namespace

void write_error_csv(const std::filesystem::path& file, const TrackingLog& log,
                     const nlohmann::json& provenance) {
    std::ofstream out = open_out(file);
    out << "# provenance: " << provenance.dump() << "\n";
    out << "t,spd_distance,pos_error,mode\n";
    for (const SimStep& s : log.steps) {
        out << s.t << "," << s.spd_dist << "," << s.pos_error << "," << to_string(s.mode) << "\n";
    }
}

void write_error_svg(const std::filesystem::path& file, const TrackingLog& log,
                     const nlohmann::json& provenance) {
    if (log.steps.empty()) throw Error("write_error_svg: empty log");
    std::vector<double> ts, dm, dx;
    for (const SimStep& s : log.steps) {
        ts.push_back(s.t);
        dm.push_back(s.spd_dist);
        dx.push_back(s.pos_error);
    }
    const double t1 = ts.back();
    const double max_dm = *std::max_element(dm.begin(), dm.end());
    const double max_dx = *std::max_element(dx.begin(), dx.end());

    std::ofstream out = open_out(file);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='640' height='300' "
           "viewBox='0 0 640 300'>\n";
    out << "<!-- provenance: " << provenance.dump() << " -->\n";
    Viewport vm{50, 30, 250, 230, 0, t1, 0, std::max(max_dm, 1e-12)};
    Viewport vx{360, 30, 250, 230, 0, t1, 0, std::max(max_dx, 1e-12)};
    axes(out, vm, "manipulability distance");
    axes(out, vx, "position error [m]");
    polyline(out, vm, ts, dm, "#1f6fb2");
    polyline(out, vx, ts, dx, "#b23a1f");
    // mark priority switches
    for (std::size_t i = 1; i < log.steps.size(); ++i) {
        if (log.steps[i].mode != log.steps[i - 1].mode) {
            for (const Viewport& v : {vm, vx}) {
                out << "<line x1='" << v.px(log.steps[i].t) << "' y1='" << v.y0 << "' x2='"
                    << v.px(log.steps[i].t) << "' y2='" << v.y0 + v.h
                    << "' stroke='#444' stroke-dasharray='2 2'/>\n";
            }
        }
    }
    out << "</svg>\n";
}

void write_ellipse_svg(const std::filesystem::path& file, const TrackingLog& log, int stride,
                       const nlohmann::json& provenance) {
    if (log.steps.empty()) throw Error("write_ellipse_svg: empty log");
    if (stride < 1) stride = 1;
    const int dim = static_cast<int>(log.steps.front().current_m.rows());
    const std::vector<std::pair<int, int>> planes =
        dim >= 3 ? std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 0}}
                 : std::vector<std::pair<int, int>>{{0, 1}};
    static const char* names[] = {"x", "y", "z"};

    double max_len = 1e-9;
    for (const SimStep& s : log.steps) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.current_m, Eigen::EigenvaluesOnly);
        max_len = std::max(max_len, std::sqrt(std::max(eig.eigenvalues().maxCoeff(), 0.0)));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig2(s.target_m, Eigen::EigenvaluesOnly);
        max_len = std::max(max_len, std::sqrt(std::max(eig2.eigenvalues().maxCoeff(), 0.0)));
    }

    const int panel_w = 200, panel_h = 200;
    const int width = 20 + static_cast<int>(planes.size()) * (panel_w + 20);
    std::ofstream out = open_out(file);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
        << "' height='250' viewBox='0 0 " << width << " 250'>\n";
    out << "<!-- provenance: " << provenance.dump() << " -->\n";

    const int n_slots =
        static_cast<int>((log.steps.size() + static_cast<std::size_t>(stride) - 1) / stride);
    const double spacing = 2.4 * max_len;
    for (std::size_t p = 0; p < planes.size(); ++p) {
        const auto [i, j] = planes[p];
        Viewport v{20.0 + p * (panel_w + 20.0), 30, static_cast<double>(panel_w), panel_h,
                   -spacing, (n_slots - 1 + 1.0) * spacing, -1.5 * max_len, 1.5 * max_len};
        v.dy0 = -(v.dx1 - v.dx0) / 2 * panel_h / panel_w;
        v.dy1 = -v.dy0;
        axes(out, v, std::string(names[i]) + names[j] + " projection");
        int slot = 0;
        for (std::size_t k = 0; k < log.steps.size(); k += stride, ++slot) {
            const SimStep& s = log.steps[k];
            Eigen::Matrix2d cur, tgt;
            cur << s.current_m(i, i), s.current_m(i, j), s.current_m(j, i), s.current_m(j, j);
            tgt << s.target_m(i, i), s.target_m(i, j), s.target_m(j, i), s.target_m(j, j);
            ellipse_path(out, v, tgt, slot * spacing, 0.0, 1.0, "#1f6fb2", true);
            ellipse_path(out, v, cur, slot * spacing, 0.0, 1.0, "#2ca05a", false);
        }
    }
    out << "</svg>\n";
}

void write_profile_indices_csv(const std::filesystem::path& file,
                               const ManipulabilityProfile& profile,
                               const nlohmann::json& provenance) {
    std::ofstream out = open_out(file);
    out << "# provenance: " << provenance.dump() << "\n";
    out << "u,det,cond";
    const int d = profile.timesteps.empty() ? 0 : profile.timesteps.front().mean.dim();
    for (int i = 0; i < d; ++i) out << ",std_axis" << i;
    out << "\n";
    for (const ProfileTimestep& ts : profile.timesteps) {
        out << ts.u << "," << ts.det << "," << ts.cond;
        for (int i = 0; i < d; ++i) out << "," << ts.per_axis_std[i];
        out << "\n";
    }
}

}  // namespace manipulant
