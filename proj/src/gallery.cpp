#include "qcdirac/gallery.hpp"

#include <algorithm>
#include <set>

#include "qcdirac/errors.hpp"

namespace qcdirac {

namespace {

using nlohmann::json;

void check_keys(const json& params, std::initializer_list<const char*> allowed, const std::string& where) {
    if (params.is_null()) return;
    if (!params.is_object()) throw ConfigError(where + ": parameters must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : params.items())
        if (!ok.count(key)) throw ConfigError(where + ": unknown parameter '" + key + "'");
}

template <class T>
T get_or(const json& params, const char* key, T fallback, const std::string& where) {
    if (params.is_null() || !params.contains(key)) return fallback;
    try {
        return params.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

HolonomicConstraint dimer_bond(int dim, int i, int j, double bond) {
    if (dim < 1 || i < 0 || j < 0 || i == j) throw InvalidArgument("dimer-bond needs two distinct particles");
    if (!(bond > 0.0)) throw InvalidArgument("dimer-bond length must be positive");
    const Eigen::Index oi = static_cast<Eigen::Index>(i) * dim, oj = static_cast<Eigen::Index>(j) * dim;
    HolonomicConstraint c;
    c.name = "dimer-bond";
    c.sigma = [=](const Vector& R) { return 0.5 * ((R.segment(oi, dim) - R.segment(oj, dim)).squaredNorm() - bond * bond); };
    c.grad = [=](const Vector& R) {
        Vector g = Vector::Zero(R.size());
        const Vector r = R.segment(oi, dim) - R.segment(oj, dim);
        g.segment(oi, dim) = r;
        g.segment(oj, dim) = -r;
        return g;
    };
    c.hessian = [=](const Vector& R) {
        Matrix H = Matrix::Zero(R.size(), R.size());
        for (int k = 0; k < dim; ++k) {
            H(oi + k, oi + k) = 1.0;
            H(oj + k, oj + k) = 1.0;
            H(oi + k, oj + k) = -1.0;
            H(oj + k, oi + k) = -1.0;
        }
        return H;
    };
    return c;
}

HolonomicConstraint parabola_bead(int x, int y, double curvature) {
    if (x < 0 || y < 0 || x == y) throw InvalidArgument("parabola-bead needs two distinct coordinates");
    HolonomicConstraint c;
    c.name = "parabola-bead";
    c.sigma = [=](const Vector& R) { return R[y] - curvature * R[x] * R[x]; };
    c.grad = [=](const Vector& R) {
        Vector g = Vector::Zero(R.size());
        g[x] = -2.0 * curvature * R[x];
        g[y] = 1.0;
        return g;
    };
    c.hessian = [=](const Vector& R) {
        Matrix H = Matrix::Zero(R.size(), R.size());
        H(x, x) = -2.0 * curvature;
        return H;
    };
    return c;
}

HolonomicConstraint linear_plane(const Vector& normal, double offset) {
    if (normal.size() == 0 || !(normal.norm() > 0.0)) throw InvalidArgument("linear-plane normal must be nonzero");
    HolonomicConstraint c;
    c.name = "linear-plane";
    c.sigma = [=](const Vector& R) { return normal.dot(R) - offset; };
    c.grad = [=](const Vector&) { return normal; };
    c.hessian = [=](const Vector& R) { return Matrix::Zero(R.size(), R.size()); };
    return c;
}

ConstraintChoice make_constraints(const std::string& name, const json& p) {
    ConstraintChoice out;
    const std::string where = "constraint '" + name + "'";
    if (name == "dimer-bond") {
        check_keys(p, {"particles", "dim", "bond", "pair"}, where);
        const int particles = get_or(p, "particles", 2, where);
        const int dim = get_or(p, "dim", 2, where);
        const double bond = get_or(p, "bond", 1.0, where);
        const auto pair = get_or(p, "pair", std::vector<int>{0, 1}, where);
        if (particles < 2 || dim < 1) throw ConfigError(where + ": need at least 2 particles and dim >= 1");
        if (pair.size() != 2 || pair[0] == pair[1] || std::max(pair[0], pair[1]) >= particles ||
            std::min(pair[0], pair[1]) < 0)
            throw ConfigError(where + ".pair: two distinct particle indices expected");
        out.dofs = static_cast<Eigen::Index>(particles) * dim;
        out.constraints.push_back(dimer_bond(dim, pair[0], pair[1], bond));
        // particles on a line, spaced by the bond length, so the bonded pair sits at distance `bond`
        out.start = Vector::Zero(out.dofs);
        int slot = 2;
        for (int i = 0; i < particles; ++i) {
            int pos = i == pair[0] ? 0 : i == pair[1] ? 1 : slot++;
            out.start[static_cast<Eigen::Index>(i) * dim] = (pos - 0.5) * bond;
        }
    } else if (name == "parabola-bead") {
        check_keys(p, {"curvature", "dofs"}, where);
        const double c = get_or(p, "curvature", 1.0, where);
        const int dofs = get_or(p, "dofs", 2, where);
        if (dofs < 2) throw ConfigError(where + ".dofs: at least 2");
        out.dofs = dofs;
        out.constraints.push_back(parabola_bead(0, 1, c));
        out.start = Vector::Zero(dofs);
    } else if (name == "linear-plane") {
        check_keys(p, {"normal", "offset"}, where);
        const Vector u = to_vector(get_or(p, "normal", std::vector<double>{1.0, 1.0}, where));
        const double b = get_or(p, "offset", 0.0, where);
        if (u.size() == 0 || !(u.norm() > 0.0)) throw ConfigError(where + ".normal: nonzero vector expected");
        out.dofs = u.size();
        out.constraints.push_back(linear_plane(u, b));
        out.start = b * u / u.squaredNorm();
    } else if (name == "none") {
        check_keys(p, {"dofs"}, where);
        const int dofs = get_or(p, "dofs", 1, where);
        if (dofs < 1) throw ConfigError(where + ".dofs: at least 1");
        out.dofs = dofs;
        out.start = Vector::Zero(dofs);
    } else {
        throw ConfigError("unknown constraint gallery entry '" + name + "'");
    }
    return out;
}

DiabaticModel make_model(const std::string& name, const json& p, Eigen::Index dofs) {
    const std::string where = "model '" + name + "'";
    DiabaticModel m;
    m.n = 2;
    if (name == "two-level-linear") {
        check_keys(p, {"coupling", "delta", "spring", "coord"}, where);
        const double c = get_or(p, "coupling", 1.0, where);
        const double delta = get_or(p, "delta", 0.1, where);
        const double k = get_or(p, "spring", 1.0, where);
        const int coord = get_or(p, "coord", 0, where);
        if (coord < 0 || coord >= dofs) throw ConfigError(where + ".coord: out of range");
        m.h = [=](const Vector& R) {
            const double eps = c * R[coord];
            Matrix h(2, 2);
            h << eps, delta, delta, -eps;
            h.diagonal().array() += 0.5 * k * R.squaredNorm();
            return h;
        };
        m.grad_h = [=](const Vector& R) {
            std::vector<Matrix> g(R.size(), Matrix::Zero(2, 2));
            for (Eigen::Index i = 0; i < R.size(); ++i) g[i].diagonal().setConstant(k * R[i]);
            g[coord](0, 0) += c;
            g[coord](1, 1) -= c;
            return g;
        };
    } else if (name == "two-level-constant") {
        check_keys(p, {"epsilon", "delta", "spring"}, where);
        const double eps = get_or(p, "epsilon", 0.5, where);
        const double delta = get_or(p, "delta", 0.1, where);
        const double k = get_or(p, "spring", 1.0, where);
        m.h = [=](const Vector& R) {
            Matrix h(2, 2);
            h << eps, delta, delta, -eps;
            h.diagonal().array() += 0.5 * k * R.squaredNorm();
            return h;
        };
        m.grad_h = [=](const Vector& R) {
            std::vector<Matrix> g(R.size(), Matrix::Zero(2, 2));
            for (Eigen::Index i = 0; i < R.size(); ++i) g[i].diagonal().setConstant(k * R[i]);
            return g;
        };
    } else {
        throw ConfigError("unknown model gallery entry '" + name + "'");
    }
    return m;
}

System build_system(const std::string& constraint, const json& cp, const std::string& model, const json& mp,
                    const json& masses) {
    ConstraintChoice choice = make_constraints(constraint, cp);
    Vector M = Vector::Ones(choice.dofs);
    if (masses.is_number()) {
        M.setConstant(masses.get<double>());
    } else if (masses.is_array()) {
        const auto v = masses.get<std::vector<double>>();
        if (static_cast<Eigen::Index>(v.size()) != choice.dofs)
            throw ConfigError("masses: expected " + std::to_string(choice.dofs) + " entries");
        M = to_vector(v);
    } else if (!masses.is_null()) {
        throw ConfigError("masses: number or array expected");
    }
    for (Eigen::Index i = 0; i < M.size(); ++i)
        if (!(M[i] > 0.0)) throw ConfigError("masses: entries must be positive");
    System s{ConstraintSet(std::move(choice.constraints), M), make_model(model, mp, choice.dofs), choice.start};
    return s;
}

}  // namespace qcdirac
