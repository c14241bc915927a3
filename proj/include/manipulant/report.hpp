#pragma once

#include <filesystem>

#include <json.hpp>

#include "manipulant/control.hpp"
#include "manipulant/profile.hpp"

namespace manipulant {

/// t, spd_distance, pos_error, mode per step. The provenance JSON is echoed
/// in a leading comment line.
void write_error_csv(const std::filesystem::path& file, const TrackingLog& log,
                     const nlohmann::json& provenance);

/// Error curves over time with vertical markers at priority switches.
void write_error_svg(const std::filesystem::path& file, const TrackingLog& log,
                     const nlohmann::json& provenance);

/// 2-D projections (xy, yz, zx; xy only for planar logs) of the desired and
/// reproduced ellipsoids, sampled every `stride` steps.
void write_ellipse_svg(const std::filesystem::path& file, const TrackingLog& log, int stride,
                       const nlohmann::json& provenance);

/// u, det, cond, per-axis std tracks of an analyzed profile.
void write_profile_indices_csv(const std::filesystem::path& file,
                               const ManipulabilityProfile& profile,
                               const nlohmann::json& provenance);

}  // namespace manipulant
