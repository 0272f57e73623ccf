#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "uot/neural/field.hpp"
#include "uot/sinkhorn.hpp"
#include "uot/types.hpp"

namespace uot::io {

using json = nlohmann::json;

// ---------- grid functions and densities ----------
// {dimension, axes: [{lo, hi, n}], values: [...] row-major [, c_lower]}

inline json grid_to_json(const Grid<double>& g) {
    json axes = json::array();
    for (const auto& a : g.axes) axes.push_back({{"lo", a.lo}, {"hi", a.hi}, {"n", a.n}});
    return axes;
}

inline Grid<double> grid_from_json(const json& axes) {
    Grid<double> g;
    for (const auto& a : axes)
        g.axes.push_back(GridAxis<double>{a.at("lo").get<double>(), a.at("hi").get<double>(),
                                          a.at("n").get<Eigen::Index>()});
    return g;
}

inline json grid_function_to_json(const Grid<double>& g, const Vec<double>& values) {
    json j;
    j["dimension"] = g.dimension();
    j["axes"] = grid_to_json(g);
    j["values"] = std::vector<double>(values.data(), values.data() + values.size());
    return j;
}

inline std::pair<Grid<double>, Vec<double>> grid_function_from_json(const json& j) {
    Grid<double> g = grid_from_json(j.at("axes"));
    const auto vals = j.at("values").get<std::vector<double>>();
    if (Eigen::Index(vals.size()) != g.size()) throw SpecError("grid function: value count does not match axes");
    Vec<double> v = Eigen::Map<const Vec<double>>(vals.data(), Eigen::Index(vals.size()));
    return {std::move(g), std::move(v)};
}

inline json density_to_json(const GridDensity<double>& rho) {
    json j = grid_function_to_json(rho.grid, rho.values);
    j["c_lower"] = rho.c_lower;
    return j;
}

inline GridDensity<double> density_from_json(const json& j) {
    auto [g, v] = grid_function_from_json(j);
    return GridDensity<double>(std::move(g), std::move(v), j.at("c_lower").get<double>());
}

// CSV fallback: axis header lines, then one value per line. %.17g keeps the
// round trip bit-exact.
inline std::string format_double(double v) {
    char buf[32];
    snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string density_to_csv(const GridDensity<double>& rho) {
    std::ostringstream out;
    out << "# dimension," << rho.grid.dimension() << "\n";
    for (const auto& a : rho.grid.axes)
        out << "# axis," << format_double(a.lo) << "," << format_double(a.hi) << "," << a.n << "\n";
    out << "# c_lower," << format_double(rho.c_lower) << "\n";
    out << "value\n";
    for (Eigen::Index i = 0; i < rho.values.size(); ++i) out << format_double(rho.values[i]) << "\n";
    return out.str();
}

inline GridDensity<double> density_from_csv(std::istream& in) {
    Grid<double> g;
    double c_lower = 0;
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# dimension,", 0) == 0) continue;
        if (line.rfind("# axis,", 0) == 0) {
            std::istringstream ls(line.substr(7));
            std::string tok;
            GridAxis<double> a;
            std::getline(ls, tok, ',');
            a.lo = std::stod(tok);
            std::getline(ls, tok, ',');
            a.hi = std::stod(tok);
            std::getline(ls, tok, ',');
            a.n = std::stol(tok);
            g.axes.push_back(a);
            continue;
        }
        if (line.rfind("# c_lower,", 0) == 0) {
            c_lower = std::stod(line.substr(10));
            continue;
        }
        if (line == "value") continue;
        values.push_back(std::stod(line));
    }
    Vec<double> v = Eigen::Map<const Vec<double>>(values.data(), Eigen::Index(values.size()));
    return GridDensity<double>(std::move(g), std::move(v), c_lower);
}

// ---------- problem spec ----------
// {f, g, cost: {kind, scale | values}, delta [, quadrature]}

inline json problem_spec_to_json(const ProblemSpec<double>& spec) {
    json j;
    j["f"] = density_to_json(spec.f);
    j["g"] = density_to_json(spec.g);
    j["delta"] = spec.delta;
    j["quadrature"] = spec.quadrature;
    json cost;
    cost["kind"] = spec.cost.form_tag;
    if (spec.cost.form_tag == "sqdist") cost["scale"] = spec.cost.form_scale;
    if (spec.cost.form_tag == "grid") {
        std::vector<double> vals(size_t(spec.cost.values.size()));
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < spec.cost.values.rows(); ++i)
            for (Eigen::Index jx = 0; jx < spec.cost.values.cols(); ++jx) vals[size_t(k++)] = spec.cost.values(i, jx);
        cost["values"] = vals;
    }
    j["cost"] = cost;
    return j;
}

inline ProblemSpec<double> problem_spec_from_json(const json& j) {
    ProblemSpec<double> spec;
    spec.f = density_from_json(j.at("f"));
    spec.g = density_from_json(j.at("g"));
    spec.delta = j.at("delta").get<double>();
    if (j.contains("quadrature")) spec.quadrature = j.at("quadrature").get<std::string>();
    const auto& cost = j.at("cost");
    const std::string kind = cost.at("kind").get<std::string>();
    if (kind == "zero") {
        spec.cost = CostGrid<double>::zero(spec.f.grid, spec.g.grid);
    } else if (kind == "sqdist") {
        spec.cost = CostGrid<double>::squared_distance(spec.f.grid, spec.g.grid, cost.at("scale").get<double>());
    } else if (kind == "grid") {
        const auto vals = cost.at("values").get<std::vector<double>>();
        CostGrid<double> c;
        c.grid_x = spec.f.grid;
        c.grid_y = spec.g.grid;
        c.form_tag = "grid";
        c.values.resize(spec.f.grid.size(), spec.g.grid.size());
        if (Eigen::Index(vals.size()) != c.values.size()) throw SpecError("cost grid size mismatch");
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < c.values.rows(); ++i)
            for (Eigen::Index jx = 0; jx < c.values.cols(); ++jx) c.values(i, jx) = vals[size_t(k++)];
        spec.cost = std::move(c);
    } else {
        throw SpecError("unknown cost kind: " + kind);
    }
    spec.validate();
    return spec;
}

inline ProblemSpec<double> load_problem_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open spec file: " + path);
    json j;
    in >> j;
    return problem_spec_from_json(j);
}

// ---------- coupling ----------

inline json coupling_to_json(const Coupling<double>& k) {
    json j;
    j["delta"] = k.delta;
    j["axes_x"] = grid_to_json(k.grid_x);
    j["axes_y"] = grid_to_json(k.grid_y);
    std::vector<double> vals(size_t(k.values.size()));
    Eigen::Index c = 0;
    for (Eigen::Index i = 0; i < k.values.rows(); ++i)
        for (Eigen::Index jx = 0; jx < k.values.cols(); ++jx) vals[size_t(c++)] = k.values(i, jx);
    j["values"] = vals;
    return j;
}

inline Coupling<double> coupling_from_json(const json& j) {
    Grid<double> gx = grid_from_json(j.at("axes_x"));
    Grid<double> gy = grid_from_json(j.at("axes_y"));
    const auto vals = j.at("values").get<std::vector<double>>();
    Mat<double> m(gx.size(), gy.size());
    if (Eigen::Index(vals.size()) != m.size()) throw SpecError("coupling size mismatch");
    Eigen::Index c = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index jx = 0; jx < m.cols(); ++jx) m(i, jx) = vals[size_t(c++)];
    return Coupling<double>(std::move(gx), std::move(gy), std::move(m), j.at("delta").get<double>());
}

// ---------- monotone map exchange ----------
// {grid: axes, T_values: per-axis arrays, det_values: per-axis derivatives}

inline json map_to_json(const MonotoneMap<double>& map) {
    json j;
    json axes = json::array(), taxes = json::array(), tv = json::array(), dv = json::array();
    for (const auto& am : map.axes) {
        axes.push_back({{"lo", am.source.lo}, {"hi", am.source.hi}, {"n", am.source.n}});
        taxes.push_back({{"lo", am.target.lo}, {"hi", am.target.hi}, {"n", am.target.n}});
        tv.push_back(std::vector<double>(am.T.data(), am.T.data() + am.T.size()));
        dv.push_back(std::vector<double>(am.dT.data(), am.dT.data() + am.dT.size()));
    }
    j["grid"] = axes;
    j["target_grid"] = taxes;
    j["T_values"] = tv;
    j["det_values"] = dv;
    return j;
}

inline MonotoneMap<double> map_from_json(const json& j) {
    MonotoneMap<double> map;
    const auto& axes = j.at("grid");
    const auto& taxes = j.at("target_grid");
    const auto& tv = j.at("T_values");
    const auto& dv = j.at("det_values");
    for (size_t a = 0; a < axes.size(); ++a) {
        AxisMap<double> am;
        am.source = GridAxis<double>{axes[a].at("lo").get<double>(), axes[a].at("hi").get<double>(),
                                     axes[a].at("n").get<Eigen::Index>()};
        am.target = GridAxis<double>{taxes[a].at("lo").get<double>(), taxes[a].at("hi").get<double>(),
                                     taxes[a].at("n").get<Eigen::Index>()};
        const auto t = tv[a].get<std::vector<double>>();
        const auto d = dv[a].get<std::vector<double>>();
        am.T = Eigen::Map<const Vec<double>>(t.data(), Eigen::Index(t.size()));
        am.dT = Eigen::Map<const Vec<double>>(d.data(), Eigen::Index(d.size()));
        if (am.T.size() != am.source.n) throw SpecError("map exchange: sample count mismatch");
        map.axes.push_back(std::move(am));
    }
    return map;
}

// ---------- neural field parameters ----------
// {activation: {name, W, A, b}, N, M, varsigma, stamps, per-unit {W_diag, A, b}}

inline json neural_params_to_json(const neural::NeuralFieldParams<double>& p) {
    json j;
    j["dimension"] = p.dimension;
    json act;
    act["name"] = neural::activation_name(p.kernel.activation);
    act["W"] = std::vector<double>(p.kernel.W.data(), p.kernel.W.data() + p.kernel.W.size());
    act["A"] = std::vector<double>(p.kernel.A.data(), p.kernel.A.data() + p.kernel.A.size());
    act["b"] = std::vector<double>(p.kernel.b.data(), p.kernel.b.data() + p.kernel.b.size());
    act["support_radius"] = p.kernel.support_radius;
    j["activation"] = act;
    j["N"] = p.N();
    j["M"] = p.box_bound;
    j["varsigma"] = p.varsigma;
    j["moll_width"] = p.moll_width;
    j["nbold"] = p.nbold;
    j["cap"] = p.cap;
    j["l_partition"] = p.l_partition;
    j["partition"] = {p.partition_lo, p.partition_hi};
    j["stamps"] = std::vector<double>(p.stamps.data(), p.stamps.data() + p.stamps.size());
    j["piecewise_constant_W"] = p.piecewise_constant_W;

    json units = json::array();
    for (const auto& u : p.units) {
        json ju;
        // W_diag rows (component) by stamp
        json wd = json::array();
        for (int c = 0; c < p.dimension; ++c)
            wd.push_back(std::vector<double>(u.W_diag.row(c).begin(), u.W_diag.row(c).end()));
        ju["W_diag"] = wd;
        // full A matrix: every row is a_scale * v
        json A = json::array();
        for (int r = 0; r < p.dimension; ++r) {
            std::vector<double> row(size_t(p.dimension));
            for (int c = 0; c < p.dimension; ++c) row[size_t(c)] = u.a_scale * u.direction[c];
            A.push_back(row);
        }
        ju["A"] = A;
        ju["b"] = std::vector<double>(size_t(p.dimension), u.offset);
        units.push_back(std::move(ju));
    }
    j["units"] = units;
    return j;
}

inline neural::NeuralFieldParams<double> neural_params_from_json(const json& j) {
    neural::NeuralFieldParams<double> p;
    p.dimension = j.at("dimension").get<int>();
    const auto& act = j.at("activation");
    p.kernel.activation = neural::activation_from_name(act.at("name").get<std::string>());
    auto getv = [](const json& arr) {
        const auto v = arr.get<std::vector<double>>();
        return Vec<double>(Eigen::Map<const Vec<double>>(v.data(), Eigen::Index(v.size())));
    };
    p.kernel.W = getv(act.at("W"));
    p.kernel.A = getv(act.at("A"));
    p.kernel.b = getv(act.at("b"));
    p.kernel.support_radius = act.at("support_radius").get<double>();
    p.box_bound = j.at("M").get<double>();
    p.varsigma = j.at("varsigma").get<double>();
    p.moll_width = j.at("moll_width").get<double>();
    p.nbold = j.at("nbold").get<int>();
    p.cap = j.at("cap").get<int>();
    p.l_partition = j.at("l_partition").get<long>();
    p.partition_lo = j.at("partition")[0].get<double>();
    p.partition_hi = j.at("partition")[1].get<double>();
    p.stamps = getv(j.at("stamps"));
    p.piecewise_constant_W = j.at("piecewise_constant_W").get<bool>();

    for (const auto& ju : j.at("units")) {
        neural::NeuralUnit<double> u;
        const auto& wd = ju.at("W_diag");
        u.W_diag.resize(p.dimension, p.stamps.size());
        for (int c = 0; c < p.dimension; ++c) {
            const auto row = wd[size_t(c)].get<std::vector<double>>();
            if (Eigen::Index(row.size()) != p.stamps.size()) throw SpecError("neural params: stamp count mismatch");
            for (Eigen::Index s = 0; s < p.stamps.size(); ++s) u.W_diag(c, s) = row[size_t(s)];
        }
        const auto& A = ju.at("A");
        const auto row0 = A[0].get<std::vector<double>>();
        // rows of A must coincide (the diagonality/factored-form invariant)
        for (size_t r = 1; r < A.size(); ++r)
            if (A[r].get<std::vector<double>>() != row0) throw SpecError("neural params: A rows are not identical");
        u.direction.resize(p.dimension);
        u.a_scale = row0[0]; // direction is normalized with v_0 = 1
        for (int c = 0; c < p.dimension; ++c)
            u.direction[c] = u.a_scale != 0.0 ? row0[size_t(c)] / u.a_scale : (c == 0 ? 1.0 : 0.0);
        const auto b = ju.at("b").get<std::vector<double>>();
        for (size_t r = 1; r < b.size(); ++r)
            if (b[r] != b[0]) throw SpecError("neural params: b entries are not identical");
        u.offset = b[0];
        p.units.push_back(std::move(u));
    }
    if (j.at("N").get<long>() != p.N() || p.N() != p.expected_unit_count())
        throw SpecError("neural params: unit count violates the counting formula");
    return p;
}

// ---------- small file helpers ----------

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw SpecError("cannot write file: " + path);
    out << text;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

inline json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open file: " + path);
    json j;
    in >> j;
    return j;
}

} // namespace uot::io
