#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "switching/model.hpp"
#include "switching/scheme.hpp"
#include "switching/strategy.hpp"
#include "switching/verify.hpp"

namespace switching::io {

using nlohmann::json;

/// Malformed problem document; `what()` names the offending field.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
    throw FormatError(where + ": " + what);
}

inline const json& member(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object()) fail(where, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) fail(where, std::string("missing field '") + key + "'");
    return *it;
}

inline double number(const json& v, const std::string& where) {
    if (!v.is_number()) fail(where, "expected a number");
    return v.get<double>();
}

inline int mode(const json& obj, const std::string& where) {
    const auto& v = member(obj, "mode", where);
    if (!v.is_number_integer() || (v.get<int>() != 1 && v.get<int>() != 2)) fail(where + "/mode", "expected 1 or 2");
    return v.get<int>();
}

inline Side side(const json& obj, const std::string& where) {
    const auto& v = member(obj, "side", where);
    if (v == "profit" || v == "+") return Side::profit;
    if (v == "cost" || v == "-") return Side::cost;
    fail(where + "/side", "expected \"profit\" or \"cost\"");
}

inline CoefficientFunction coefficient(const json& obj, const std::string& where) {
    const auto& kind = member(obj, "kind", where);
    const auto& params = member(obj, "params", where);
    if (!params.is_array()) fail(where + "/params", "expected an array of numbers");
    std::vector<double> p;
    for (std::size_t i = 0; i < params.size(); ++i) p.push_back(number(params[i], where + "/params/" + std::to_string(i)));
    CoefficientFunction f;
    if (kind == "constant") {
        if (p.size() != 1) fail(where + "/params", "constant takes one parameter");
        f = CoefficientFunction::constant(p[0]);
    } else if (kind == "exponential") {
        if (p.size() != 2) fail(where + "/params", "exponential takes [scale, rate]");
        f = CoefficientFunction::exponential(p[0], p[1]);
    } else if (kind == "polynomial") {
        if (p.empty()) fail(where + "/params", "polynomial needs at least one coefficient");
        f = CoefficientFunction::polynomial(p);
    } else {
        fail(where + "/kind", "expected constant, exponential or polynomial");
    }
    if (const auto it = obj.find("ito"); it != obj.end()) {
        if (!it->is_boolean()) fail(where + "/ito", "expected a boolean");
        if (!it->get<bool>()) f = f.without_derivative();
    }
    return f;
}

inline json coefficient_json(const CoefficientFunction& f) {
    json j{{"kind", to_string(f.kind())}, {"params", f.params()}};
    if (!f.has_derivative()) j["ito"] = false;
    return j;
}

}  // namespace detail

/// Parses a problem document. Field layout is described in docs/problem-format.md.
[[nodiscard]] inline SwitchingProblem parse_problem(const json& doc) {
    using namespace detail;
    SwitchingProblem p;
    p.horizon = number(member(doc, "horizon", ""), "/horizon");
    if (!(p.horizon > 0.0)) fail("/horizon", "must be positive");

    const auto& drivers = member(doc, "drivers", "");
    if (!drivers.is_array() || drivers.size() != 4) fail("/drivers", "expected four entries");
    std::array<bool, 4> seen{};
    for (std::size_t i = 0; i < 4; ++i) {
        const std::string where = "/drivers/" + std::to_string(i);
        const auto& d = drivers[i];
        const Component c = component(side(d, where), mode(d, where));
        if (seen[index(c)]) fail(where, "duplicate driver for " + to_string(c));
        seen[index(c)] = true;
        AffineDriver drv;
        drv.intercept = coefficient(member(d, "c0", where), where + "/c0");
        drv.y_coef = d.contains("c1") ? number(d["c1"], where + "/c1") : 0.0;
        drv.z_coef = d.contains("c2") ? number(d["c2"], where + "/c2") : 0.0;
        if (const auto it = d.find("feature"); it != d.end()) {
            if (*it == "none") drv.feature = StateFeature::none;
            else if (*it == "state") drv.feature = StateFeature::state;
            else fail(where + "/feature", "expected \"none\" or \"state\"");
        }
        p.drivers[c] = drv;
    }

    const auto& costs = member(doc, "costs", "");
    if (!costs.is_array() || costs.size() != 6) fail("/costs", "expected six entries");
    std::array<bool, 6> seen_cost{};
    for (std::size_t i = 0; i < 6; ++i) {
        const std::string where = "/costs/" + std::to_string(i);
        const auto& e = costs[i];
        const auto& type = member(e, "type", where);
        const int m = mode(e, where);
        std::size_t slot = 0;
        if (type == "switching") slot = 0;
        else if (type == "exit_cost") slot = 1;
        else if (type == "exit_benefit") slot = 2;
        else fail(where + "/type", "expected switching, exit_cost or exit_benefit");
        if (seen_cost[slot * 2 + (m - 1)]) fail(where, "duplicate cost entry");
        seen_cost[slot * 2 + (m - 1)] = true;
        auto f = coefficient(e, where);
        if (slot == 0) p.switching_cost[m - 1] = f;
        else if (slot == 1) p.exit_cost[m - 1] = f;
        else p.exit_benefit[m - 1] = f;
    }

    const auto& terminals = member(doc, "terminals", "");
    if (!terminals.is_array() || terminals.size() != 4) fail("/terminals", "expected four entries");
    std::array<bool, 4> seen_terminal{};
    for (std::size_t i = 0; i < 4; ++i) {
        const std::string where = "/terminals/" + std::to_string(i);
        const auto& e = terminals[i];
        const Component c = component(side(e, where), mode(e, where));
        if (seen_terminal[index(c)]) fail(where, "duplicate terminal for " + to_string(c));
        seen_terminal[index(c)] = true;
        if (e.contains("value")) {
            p.terminal[c] = StateFunction{number(e["value"], where + "/value"), 0.0};
        } else {
            p.terminal[c] = StateFunction{number(member(e, "intercept", where), where + "/intercept"),
                                          e.contains("slope") ? number(e["slope"], where + "/slope") : 0.0};
        }
    }
    return p;
}

[[nodiscard]] inline SwitchingProblem parse_problem_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("malformed JSON: ") + e.what());
    }
    return parse_problem(doc);
}

[[nodiscard]] inline SwitchingProblem load_problem(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open problem file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_problem_text(buf.str());
}

[[nodiscard]] inline json to_json(const SwitchingProblem& p) {
    json doc;
    doc["horizon"] = p.horizon;
    doc["drivers"] = json::array();
    for (Component c : all_components) {
        const auto& d = p.drivers[c];
        doc["drivers"].push_back({{"mode", mode_of(c)},
                                  {"side", to_string(side_of(c))},
                                  {"c0", detail::coefficient_json(d.intercept)},
                                  {"feature", d.feature == StateFeature::state ? "state" : "none"},
                                  {"c1", d.y_coef},
                                  {"c2", d.z_coef}});
    }
    doc["costs"] = json::array();
    const std::array<std::pair<const char*, const std::array<CoefficientFunction, 2>*>, 3> groups{
        {{"switching", &p.switching_cost}, {"exit_cost", &p.exit_cost}, {"exit_benefit", &p.exit_benefit}}};
    for (const auto& [type, fs] : groups) {
        for (int m = 1; m <= 2; ++m) {
            auto e = detail::coefficient_json((*fs)[m - 1]);
            e["type"] = type;
            e["mode"] = m;
            doc["costs"].push_back(e);
        }
    }
    doc["terminals"] = json::array();
    for (Component c : all_components)
        doc["terminals"].push_back({{"mode", mode_of(c)},
                                    {"side", to_string(side_of(c))},
                                    {"intercept", p.terminal[c].intercept},
                                    {"slope", p.terminal[c].slope}});
    return doc;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// step,node,value rows for every node of the surface.
inline void write_surface_csv(const std::filesystem::path& path, const FieldSurface& s) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "step,node,value\n";
    for (std::size_t k = 0; k <= s.steps(); ++k)
        for (std::size_t j = 0; j < s.nodes(k); ++j) out << k << ',' << j << ',' << format_double(s.at(k, j)) << '\n';
}

[[nodiscard]] inline FieldSurface read_surface_csv(const std::filesystem::path& path, const Backend& backend) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    FieldSurface s(backend);
    std::string line;
    std::getline(in, line);
    if (line != "step,node,value") throw FormatError(path.string() + ": unexpected header '" + line + "'");
    std::size_t count = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::size_t k = 0, j = 0;
        char c1 = 0, c2 = 0;
        std::string value;
        if (!(row >> k >> c1 >> j >> c2 >> value) || c1 != ',' || c2 != ',' || k > backend.steps() || j >= backend.nodes(k))
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad row '" + line + "'");
        s.at(k, j) = std::stod(value);
        ++count;
    }
    if (count != backend.total_nodes())
        throw FormatError(path.string() + ": expected " + std::to_string(backend.total_nodes()) + " rows, got " +
                          std::to_string(count));
    return s;
}

[[nodiscard]] inline std::string surface_file(const char* field, Component c) {
    return std::string(field) + "_" + (side_of(c) == Side::profit ? "plus_" : "minus_") + std::to_string(mode_of(c)) +
           ".csv";
}

/// Writes Y_*, Z_* and K_* surfaces (K_* holds the per-step increments ΔK).
inline void write_solution_surfaces(const std::filesystem::path& dir, const BalanceSheetSolution& sol) {
    for (Component c : all_components) {
        write_surface_csv(dir / surface_file("Y", c), sol.parts[c].y);
        write_surface_csv(dir / surface_file("Z", c), sol.parts[c].z);
        write_surface_csv(dir / surface_file("K", c), sol.parts[c].dk);
    }
}

[[nodiscard]] inline SurfaceSet read_solution_surfaces(const std::filesystem::path& dir, const Backend& backend) {
    SurfaceSet s;
    for (Component c : all_components) {
        s.y[c] = read_surface_csv(dir / surface_file("Y", c), backend);
        s.z[c] = read_surface_csv(dir / surface_file("Z", c), backend);
        s.dk[c] = read_surface_csv(dir / surface_file("K", c), backend);
    }
    return s;
}

inline void write_trace_csv(const std::filesystem::path& path, const ConvergenceTrace& trace) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "iteration,delta\n";
    for (std::size_t i = 0; i < trace.deltas.size(); ++i) out << i + 1 << ',' << format_double(trace.deltas[i]) << '\n';
}

[[nodiscard]] inline json summary_json(const BalanceSheetSolution& sol, const ConvergenceTrace& trace) {
    json y0;
    for (Component c : all_components) y0[to_string(c)] = sol.y0(c);
    return {{"converged", trace.converged},
            {"status", to_string(trace.status)},
            {"iterations", trace.iterations},
            {"final_delta", trace.deltas.empty() ? 0.0 : trace.deltas.back()},
            {"backend", to_string(sol.backend.kind())},
            {"steps", sol.backend.steps()},
            {"horizon", sol.backend.grid().horizon()},
            {"y0", y0},
            {"max_constraint_violation", sol.max_constraint_violation},
            {"max_skorokhod_sum", sol.max_skorokhod_sum}};
}

[[nodiscard]] inline json to_json(const ValidationReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks) {
        json e{{"id", c.id}, {"description", c.description}, {"passed", c.passed}};
        if (c.first_time) e["first_time"] = *c.first_time;
        if (c.first_value) e["first_value"] = *c.first_value;
        if (!c.detail.empty()) e["detail"] = c.detail;
        checks.push_back(e);
    }
    return {{"all_passed", r.all_passed()}, {"checks", checks}};
}

[[nodiscard]] inline json to_json(const SideOutcome& o) {
    return {{"component", to_string(o.component)},
            {"first_stop_step", o.first_stop_step},
            {"first_action", to_string(o.first_action)},
            {"mean_stop_step", o.mean_stop_step},
            {"realized", o.realized},
            {"std_error", o.std_error},
            {"value", o.value},
            {"gap", o.gap},
            {"action_counts",
             {{"switch", o.action_counts[0]}, {"terminate", o.action_counts[1]}, {"hold-to-horizon", o.action_counts[2]}}}};
}

[[nodiscard]] inline json to_json(const StrategyReport& r) {
    return {{"start_mode", r.start_mode},
            {"paths", r.n_paths},
            {"seed", r.seed},
            {"steps", r.steps},
            {"backend", to_string(r.backend)},
            {"profit", to_json(r.profit)},
            {"cost", to_json(r.cost)}};
}

[[nodiscard]] inline json to_json(const ResidualReport& r) {
    json comps;
    for (Component c : all_components) {
        const auto& v = r.components[c];
        comps[to_string(c)] = {{"max_step_residual", v.max_step_residual},
                               {"max_local_defect", v.max_local_defect},
                               {"terminal_mismatch", v.terminal_mismatch},
                               {"constraint_violation", v.constraint_violation},
                               {"skorokhod_sum", v.skorokhod_sum},
                               {"k_monotonicity_violation", v.k_monotonicity_violation},
                               {"max_k_density", v.max_k_density}};
    }
    return {{"dt", r.dt}, {"steps", r.steps}, {"components", comps}};
}

[[nodiscard]] inline json to_json(const AuditThresholds& t) {
    return {{"step_residual", t.step_residual},
            {"constraint", t.constraint},
            {"complementarity", t.complementarity},
            {"step_residual_rule", "10 * max|y''| * dt over both closed-form families"}};
}

inline void write_json(const std::filesystem::path& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

}  // namespace switching::io
