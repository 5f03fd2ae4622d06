#include "qt/config.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>

namespace qt {

using nlohmann::json;

namespace {

class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    // Rejects keys that were never read.
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(path_ + "." + it.key() + ": unknown key");
    }

    void num(const char* key, double& out) {
        if (const json* v = get(key)) {
            if (!v->is_number()) throw ConfigError(at(key) + ": expected a number");
            out = v->get<double>();
        }
    }
    void integer(const char* key, int& out) {
        if (const json* v = get(key)) {
            if (!v->is_number_integer()) throw ConfigError(at(key) + ": expected an integer");
            out = v->get<int>();
        }
    }
    void u64(const char* key, std::uint64_t& out) {
        if (const json* v = get(key)) {
            if (!v->is_number_unsigned()) throw ConfigError(at(key) + ": expected a nonnegative integer");
            out = v->get<std::uint64_t>();
        }
    }
    void boolean(const char* key, bool& out) {
        if (const json* v = get(key)) {
            if (!v->is_boolean()) throw ConfigError(at(key) + ": expected true or false");
            out = v->get<bool>();
        }
    }
    void str(const char* key, std::string& out) {
        if (const json* v = get(key)) {
            if (!v->is_string()) throw ConfigError(at(key) + ": expected a string");
            out = v->get<std::string>();
        }
    }
    void nums(const char* key, std::vector<double>& out) {
        if (const json* v = get(key)) {
            if (!v->is_array()) throw ConfigError(at(key) + ": expected an array of numbers");
            out.clear();
            for (std::size_t i = 0; i < v->size(); ++i) {
                if (!(*v)[i].is_number()) throw ConfigError(at(key) + "[" + std::to_string(i) + "]: expected a number");
                out.push_back((*v)[i].get<double>());
            }
        }
    }
    template <class F>
    void object(const char* key, F&& f) {
        if (const json* v = get(key)) {
            Reader sub(*v, at(key));
            f(sub);
            sub.finish();
        }
    }
    std::string at(const char* key) const { return path_ + "." + key; }

private:
    const json* get(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class F>
void rethrow_as(const std::string& path, F&& f) {
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace

RunConfig parse_config(const json& j) {
    RunConfig c;
    SimConfig& s = c.sim;
    Reader r(j, "$");
    r.num("epsilon", s.epsilon);
    r.object("grid", [&](Reader& g) {
        g.integer("nx", s.grid.nx);
        g.integer("ny", s.grid.ny);
        g.num("lx", s.grid.lx);
        g.num("ly", s.grid.ly);
    });
    r.num("dt", s.dt);
    r.num("t_end", s.t_end);
    r.object("params", [&](Reader& p) {
        PhysicalParams& q = s.params;
        p.num("gamma1", q.gamma1);
        p.num("gamma2", q.gamma2);
        p.num("gamma3", q.gamma3);
        p.num("zeta", q.zeta);
        p.num("i11", q.i11);
        p.num("i22", q.i22);
        p.num("i33", q.i33);
        p.num("eta", q.eta);
    });
    rethrow_as("$.params", [&] {
        const PhysicalParams& q = s.params;
        s.params = PhysicalParams::make(q.gamma1, q.gamma2, q.gamma3, q.zeta, q.i11, q.i22, q.i33, q.eta);
    });
    r.object("bulk", [&](Reader& b) {
        b.num("c02", s.bulk.c02);
        b.num("c03", s.bulk.c03);
        b.num("c04", s.bulk.c04);
        std::string entropy = s.bulk.kind.is_quasi() ? "quasi" : "original";
        double nu = s.bulk.kind.nu;
        b.str("entropy", entropy);
        b.num("nu", nu);
        if (entropy == "quasi")
            rethrow_as(b.at("nu"), [&] { s.bulk.kind = EntropyKind::quasi(nu); });
        else if (entropy == "original")
            s.bulk.kind = EntropyKind::original();
        else
            throw ConfigError(b.at("entropy") + ": expected \"quasi\" or \"original\"");
    });
    r.object("elastic", [&](Reader& e) {
        e.num("c22", s.elastic.c22);
        e.num("c23", s.elastic.c23);
        e.num("c24", s.elastic.c24);
        e.num("c28", s.elastic.c28);
        e.num("c29", s.elastic.c29);
        e.num("c210", s.elastic.c210);
    });
    std::string route = route_name(s.closure_route);
    r.str("closure_route", route);
    rethrow_as(r.at("closure_route"), [&] { s.closure_route = parse_route(route); });
    std::string integ = s.integrator == Integrator::Imex ? "imex" : "explicit_rk4";
    r.str("integrator", integ);
    if (integ == "explicit_rk4")
        s.integrator = Integrator::ExplicitRK4;
    else if (integ == "imex")
        s.integrator = Integrator::Imex;
    else
        throw ConfigError(r.at("integrator") + ": expected \"explicit_rk4\" or \"imex\"");
    std::string mode = s.closure_mode == ClosureMode::Table ? "table" : "direct";
    r.str("closure_mode", mode);
    if (mode == "direct")
        s.closure_mode = ClosureMode::Direct;
    else if (mode == "table")
        s.closure_mode = ClosureMode::Table;
    else
        throw ConfigError(r.at("closure_mode") + ": expected \"direct\" or \"table\"");
    r.num("table_spacing", s.table_spacing);
    r.boolean("validate_table", s.validate_table);
    r.num("delta", s.delta);
    r.num("energy_tol", s.energy_tol);
    r.object("quadrature", [&](Reader& q) {
        q.integer("n_beta", s.quad_beta);
        q.integer("n_torus", s.quad_torus);
    });
    r.integer("threads", s.threads);
    r.u64("seed", s.seed);
    r.integer("output_every", s.output_every);
    r.integer("snapshot_every", s.snapshot_every);
    r.object("init", [&](Reader& i) {
        i.str("kind", s.init.kind);
        i.num("frame_amplitude", s.init.frame_amplitude);
        i.integer("mode_x", s.init.mode_x);
        i.integer("mode_y", s.init.mode_y);
        i.num("perturbation", s.init.perturbation);
        i.num("velocity_amplitude", s.init.velocity_amplitude);
        i.boolean("well_prepared", s.init.well_prepared);
        if (s.init.kind != "frame_wave" && s.init.kind != "uniform")
            throw ConfigError(i.at("kind") + ": expected \"frame_wave\" or \"uniform\"");
    });
    r.integer("starts", c.starts);
    r.object("sweep", [&](Reader& w) {
        w.nums("eps", c.sweep_eps);
        w.num("sample_interval", c.sample_interval);
    });
    r.finish();

    if (c.starts < 1) throw ConfigError("$.starts: must be >= 1");
    if (!(c.sample_interval > 0)) throw ConfigError("$.sweep.sample_interval: must be positive");
    for (std::size_t i = 0; i < c.sweep_eps.size(); ++i)
        if (!(c.sweep_eps[i] > 0) || (i > 0 && !(c.sweep_eps[i] < c.sweep_eps[i - 1])))
            throw ConfigError("$.sweep.eps: must be positive and descending");
    try {
        s.elastic.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("$.elastic: ") + e.what());
    }
    try {
        s.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("$: ") + e.what());
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j);
}

nlohmann::ordered_json to_json(const RunConfig& c) {
    const SimConfig& s = c.sim;
    nlohmann::ordered_json j;
    j["epsilon"] = s.epsilon;
    j["grid"] = {{"nx", s.grid.nx}, {"ny", s.grid.ny}, {"lx", s.grid.lx}, {"ly", s.grid.ly}};
    j["dt"] = s.dt;
    j["t_end"] = s.t_end;
    const PhysicalParams& p = s.params;
    j["params"] = {{"gamma1", p.gamma1}, {"gamma2", p.gamma2}, {"gamma3", p.gamma3}, {"zeta", p.zeta},
                   {"i11", p.i11},       {"i22", p.i22},       {"i33", p.i33},       {"eta", p.eta}};
    j["bulk"] = {{"c02", s.bulk.c02},
                 {"c03", s.bulk.c03},
                 {"c04", s.bulk.c04},
                 {"entropy", s.bulk.kind.is_quasi() ? "quasi" : "original"},
                 {"nu", s.bulk.kind.nu}};
    const ElasticCoefficients& e = s.elastic;
    j["elastic"] = {{"c22", e.c22}, {"c23", e.c23}, {"c24", e.c24}, {"c28", e.c28}, {"c29", e.c29}, {"c210", e.c210}};
    j["closure_route"] = route_name(s.closure_route);
    j["integrator"] = s.integrator == Integrator::Imex ? "imex" : "explicit_rk4";
    j["closure_mode"] = s.closure_mode == ClosureMode::Table ? "table" : "direct";
    j["table_spacing"] = s.table_spacing;
    j["validate_table"] = s.validate_table;
    j["delta"] = s.delta;
    j["energy_tol"] = s.energy_tol;
    j["quadrature"] = {{"n_beta", s.quad_beta}, {"n_torus", s.quad_torus}};
    j["threads"] = s.threads;
    j["seed"] = s.seed;
    j["output_every"] = s.output_every;
    j["snapshot_every"] = s.snapshot_every;
    j["init"] = {{"kind", s.init.kind},
                 {"frame_amplitude", s.init.frame_amplitude},
                 {"mode_x", s.init.mode_x},
                 {"mode_y", s.init.mode_y},
                 {"perturbation", s.init.perturbation},
                 {"velocity_amplitude", s.init.velocity_amplitude},
                 {"well_prepared", s.init.well_prepared}};
    j["starts"] = c.starts;
    j["sweep"] = {{"eps", c.sweep_eps}, {"sample_interval", c.sample_interval}};
    return j;
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace {

void dump_into(const nlohmann::ordered_json& j, int depth, std::string& out) {
    const std::string pad(2 * (depth + 1), ' '), close(2 * depth, ' ');
    if (j.is_object()) {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) out += ",\n";
            first = false;
            out += pad + nlohmann::json(it.key()).dump() + ": ";
            dump_into(it.value(), depth + 1, out);
        }
        out += "\n" + close + "}";
    } else if (j.is_array()) {
        if (j.empty()) {
            out += "[]";
            return;
        }
        // Flat numeric arrays stay on one line.
        const bool flat = std::all_of(j.begin(), j.end(), [](const auto& e) { return e.is_primitive(); });
        out += flat ? "[" : "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) out += flat ? ", " : ",\n";
            if (!flat) out += pad;
            dump_into(j[i], depth + 1, out);
        }
        out += flat ? "]" : "\n" + close + "]";
    } else if (j.is_number_float()) {
        const double x = j.get<double>();
        out += std::isfinite(x) ? fmt(x) : "null";
    } else {
        out += j.dump();
    }
}

}  // namespace

std::string dump_json(const nlohmann::ordered_json& j) {
    std::string out;
    dump_into(j, 0, out);
    out += "\n";
    return out;
}

namespace {

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("snapshot truncated");
    return v;
}

}  // namespace

void write_snapshot(const std::string& path, const FieldState& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot write");
    out.write("QT2D", 4);
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.grid.nx));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.grid.ny));
    put<double>(out, s.time);
    for (std::size_t i = 0; i < s.q.size(); ++i) {
        const Vec10 q = s.q[i].vec();
        for (int a = 0; a < 10; ++a) put<double>(out, q(a));
        for (int c = 0; c < 3; ++c) put<double>(out, s.v[i](c));
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

FieldState read_snapshot(const std::string& path, double lx, double ly) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "QT2D", 4) != 0) throw std::runtime_error(path + ": not a QT2D snapshot");
    if (take<std::uint32_t>(in) != 1) throw std::runtime_error(path + ": unsupported snapshot version");
    FieldState s;
    s.grid.nx = static_cast<int>(take<std::uint32_t>(in));
    s.grid.ny = static_cast<int>(take<std::uint32_t>(in));
    s.grid.lx = lx;
    s.grid.ly = ly;
    s.time = take<double>(in);
    const std::size_t n = s.grid.size();
    s.q.resize(n);
    s.v.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec10 q;
        for (int a = 0; a < 10; ++a) q(a) = take<double>(in);
        s.q[i] = QPair::from_vec(q);
        for (int c = 0; c < 3; ++c) s.v[i](c) = take<double>(in);
    }
    return s;
}

}  // namespace qt
