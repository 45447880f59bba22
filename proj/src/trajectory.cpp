#include "mba/trajectory.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace mba {

namespace {

constexpr char kMagic[4] = {'M', 'B', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;

std::string join_names(const Trajectory& t) {
    std::string s;
    for (std::size_t i = 0; i < t.field_names.size(); ++i) s += (i ? ";" : "") + t.field_names[i];
    return s;
}

std::vector<std::string> split_names(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    for (std::string item; std::getline(in, item, ';');) out.push_back(item);
    return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void fill_names(Trajectory& t) {
    if (static_cast<int>(t.field_names.size()) == t.n_fields) return;
    t.field_names.clear();
    for (int f = 0; f < t.n_fields; ++f) t.field_names.push_back("q" + std::to_string(f + 1));
}

}  // namespace

void Trajectory::validate() const {
    if (static_cast<int>(states.size()) != time.n_steps + 1)
        throw ContractError("trajectory must hold n_steps + 1 states");
    for (std::size_t k = 0; k < states.size(); ++k) {
        if (states[k].size() != states.front().size()) throw ContractError("trajectory states differ in size");
        if (!states[k].allFinite()) throw NumericalError("non-finite trajectory state", static_cast<std::ptrdiff_t>(k));
    }
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    Trajectory t = traj;
    fill_names(t);
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    const Eigen::Index n = t.n_grid();
    out << "# n_grid=" << n << '\n'
        << "# n_fields=" << t.n_fields << '\n'
        << "# n_steps=" << t.time.n_steps << '\n'
        << std::setprecision(17) << "# dt=" << t.time.dt << '\n'
        << "# t0=" << t.time.t0 << '\n'
        << "# fields=" << join_names(t) << '\n';
    out << "step,t";
    for (int f = 0; f < t.n_fields; ++f)
        for (Eigen::Index i = 0; i < n; ++i) out << ',' << t.field_names[f] << '[' << i << ']';
    out << '\n';
    for (std::size_t k = 0; k < t.states.size(); ++k) {
        out << k << ',' << t.time.time(static_cast<int>(k));
        for (Eigen::Index j = 0; j < t.states[k].size(); ++j) out << ',' << t.states[k][j];
        out << '\n';
    }
}

Trajectory read_trajectory_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    std::map<std::string, std::string> header;
    std::string line;
    bool column_row_seen = false;
    Trajectory t;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            header[line.substr(2, eq - 2)] = line.substr(eq + 1);
            continue;
        }
        if (!column_row_seen) {
            column_row_seen = true;
            continue;
        }
        std::stringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        std::getline(row, cell, ',');
        std::vector<double> values;
        while (std::getline(row, cell, ',')) values.push_back(std::stod(cell));
        t.states.emplace_back(Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
    }
    try {
        t.n_fields = std::stoi(header.at("n_fields"));
        t.time.n_steps = std::stoi(header.at("n_steps"));
        t.time.dt = std::stod(header.at("dt"));
        t.time.t0 = std::stod(header.at("t0"));
        t.field_names = split_names(header.at("fields"));
        const auto n = std::stol(header.at("n_grid"));
        for (const auto& s : t.states)
            if (s.size() != n * t.n_fields) throw ConfigError("row length differs from header in " + path);
    } catch (const std::out_of_range&) {
        throw ConfigError("incomplete trajectory header in " + path);
    }
    t.validate();
    return t;
}

void write_trajectory_binary(const Trajectory& traj, const std::string& path) {
    Trajectory t = traj;
    fill_names(t);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    auto put = [&out](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };
    out.write(kMagic, 4);
    put(kVersion);
    put(static_cast<std::int64_t>(t.n_grid()));
    put(static_cast<std::int32_t>(t.n_fields));
    put(static_cast<std::int32_t>(t.time.n_steps));
    put(t.time.dt);
    put(t.time.t0);
    const std::string names = join_names(t);
    put(static_cast<std::uint32_t>(names.size()));
    out.write(names.data(), static_cast<std::streamsize>(names.size()));
    for (const auto& s : t.states) out.write(reinterpret_cast<const char*>(s.data()), s.size() * sizeof(double));
}

Trajectory read_trajectory_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    auto get = [&in](auto& v) { in.read(reinterpret_cast<char*>(&v), sizeof(v)); };
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ConfigError(path + " is not a trajectory dump");
    std::uint32_t version = 0;
    get(version);
    if (version != kVersion) throw ConfigError("unsupported trajectory dump version in " + path);
    std::int64_t n_grid = 0;
    std::int32_t n_fields = 0, n_steps = 0;
    Trajectory t;
    get(n_grid);
    get(n_fields);
    get(n_steps);
    get(t.time.dt);
    get(t.time.t0);
    std::uint32_t len = 0;
    get(len);
    std::string names(len, '\0');
    in.read(names.data(), len);
    t.n_fields = n_fields;
    t.time.n_steps = n_steps;
    t.field_names = split_names(names);
    for (int k = 0; k <= n_steps; ++k) {
        Vector s(n_grid * n_fields);
        in.read(reinterpret_cast<char*>(s.data()), s.size() * sizeof(double));
        if (!in) throw ConfigError("truncated trajectory dump " + path);
        t.states.push_back(std::move(s));
    }
    t.validate();
    return t;
}

Trajectory read_trajectory(const std::string& path) {
    if (ends_with(path, ".bin") || ends_with(path, ".mbat")) return read_trajectory_binary(path);
    return read_trajectory_csv(path);
}

void write_trajectory(const Trajectory& traj, const std::string& path) {
    if (ends_with(path, ".bin") || ends_with(path, ".mbat"))
        write_trajectory_binary(traj, path);
    else
        write_trajectory_csv(traj, path);
}

void write_trajectory_long_csv(const Trajectory& traj, const Grid& grid, const std::string& path) {
    Trajectory t = traj;
    fill_names(t);
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << std::setprecision(12) << "t,x,field,value\n";
    const Eigen::Index n = t.n_grid();
    for (std::size_t k = 0; k < t.states.size(); ++k)
        for (int f = 0; f < t.n_fields; ++f)
            for (Eigen::Index i = 0; i < n; ++i)
                out << t.time.time(static_cast<int>(k)) << ',' << grid.x(i) << ',' << t.field_names[f] << ','
                    << t.states[k][f * n + i] << '\n';
}

}  // namespace mba
