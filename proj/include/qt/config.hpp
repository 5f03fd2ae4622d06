#pragma once

#include "qt/dynamics.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

namespace qt {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Everything a CLI command may read from a config file.
struct RunConfig {
    SimConfig sim;
    int starts = 8;  // multi-start count for minimize / spectrum / verify
    std::vector<double> sweep_eps = {0.1, 0.05, 0.025};
    double sample_interval = 0.1;
};

// Strict parse: unknown keys and type mismatches raise ConfigError with the key path ("$.grid.nx").
// Missing keys keep their defaults; the result is validated.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

// Every field in a fixed order; parse_config(to_json(c)) reproduces c.
nlohmann::ordered_json to_json(const RunConfig& c);

// %.17g
std::string fmt(double x);
// Serializes with %.17g floats, keys in insertion order, two-space indent; non-finite numbers become null.
std::string dump_json(const nlohmann::ordered_json& j);

// Binary snapshot: "QT2D", u32 version, u32 nx, u32 ny, f64 time, then 10 Q + 3 v per node (little-endian).
void write_snapshot(const std::string& path, const FieldState& s);
FieldState read_snapshot(const std::string& path, double lx, double ly);

}  // namespace qt
