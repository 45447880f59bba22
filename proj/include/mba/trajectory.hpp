#pragma once

#include <string>
#include <vector>

#include "mba/discretization.hpp"

namespace mba {

/// Time-ordered states at every step boundary, n_steps + 1 entries.
struct Trajectory {
    TimeGrid time;
    int n_fields = 1;
    std::vector<std::string> field_names;
    std::vector<Vector> states;

    Eigen::Index n_grid() const { return states.empty() ? 0 : states.front().size() / n_fields; }
    auto field(int k, int f) const { return states[k].segment(f * n_grid(), n_grid()); }
    /// Checks size and finiteness invariants.
    void validate() const;
};

/// CSV: `#` header lines (n_grid, n_fields, n_steps, dt, t0, fields), then one
/// row per step `step,t,<field>[i]...`.
void write_trajectory_csv(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_csv(const std::string& path);

/// Compact little-endian binary dump with the same header content.
void write_trajectory_binary(const Trajectory& traj, const std::string& path);
Trajectory read_trajectory_binary(const std::string& path);

/// Chooses the format by extension (.bin / .mbat binary, otherwise CSV).
Trajectory read_trajectory(const std::string& path);
void write_trajectory(const Trajectory& traj, const std::string& path);

/// Long-format dump `t,x,field,value` for plotting.
void write_trajectory_long_csv(const Trajectory& traj, const Grid& grid, const std::string& path);

}  // namespace mba
