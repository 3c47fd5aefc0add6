#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <Eigen/Core>

#include "shipcc/integrator.hpp"

namespace shipcc {

/// Single matrix file: magic "SHPM", u32 version, u64 rows, u64 cols, then
/// column-major float64 data.
void write_matrix(const std::filesystem::path& file, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::filesystem::path& file);

/// Named-matrix bundle: magic "SHPB", u32 version, u32 count, then per entry a
/// length-prefixed name followed by a matrix block in the layout above.
using MatrixBundle = std::map<std::string, Eigen::MatrixXd>;
void write_bundle(const std::filesystem::path& file, const MatrixBundle& bundle);
MatrixBundle read_bundle(const std::filesystem::path& file);

void write_trajectory(const std::filesystem::path& file, const Trajectory& t);
Trajectory read_trajectory(const std::filesystem::path& file);

/// One row per sample: t, x1..x103, z1..z7, u1..u3, p, y1..y2. The final row repeats
/// the last held input and load.
void write_trajectory_csv(const std::filesystem::path& file, const Trajectory& t);

/// Formats a double with 17 significant digits so CSV output round-trips exactly.
std::string format_double(double v);

}  // namespace shipcc
