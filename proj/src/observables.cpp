#include "qcdirac/observables.hpp"

#include "qcdirac/errors.hpp"

namespace qcdirac {

namespace {

int parse_index(const std::string& name, std::size_t colon, long limit) {
    const std::string tail = name.substr(colon + 1);
    std::size_t used = 0;
    long k = -1;
    try {
        k = std::stol(tail, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != tail.size() || k < 0 || k >= limit)
        throw ConfigError("observable '" + name + "': index must be in [0, " + std::to_string(limit) + ")");
    return static_cast<int>(k);
}

}  // namespace

MatrixPhaseFunction make_observable(const std::string& name, const DiabaticModel& model, Eigen::Index dofs) {
    const int n = model.n;
    MatrixPhaseFunction f;
    f.n = n;
    auto zeros = [n, dofs](const PhasePoint&) { return std::vector<CMatrix>(2 * dofs, CMatrix::Zero(n, n)); };
    const auto colon = name.find(':');
    const std::string kind = name.substr(0, colon);
    if (name == "identity") {
        f.value = [n](const PhasePoint&) { return CMatrix(CMatrix::Identity(n, n)); };
        f.gradient = zeros;
    } else if (kind == "diabatic" && colon != std::string::npos) {
        const int k = parse_index(name, colon, n);
        f.value = [n, k](const PhasePoint&) {
            CMatrix m = CMatrix::Zero(n, n);
            m(k, k) = 1.0;
            return m;
        };
        f.gradient = zeros;
    } else if (kind == "population" && colon != std::string::npos) {
        const int k = parse_index(name, colon, n);
        f.value = [model, k](const PhasePoint& X) {
            const AdiabaticFrame fr = adiabatize(model, X.R());
            return CMatrix((fr.U.col(k) * fr.U.col(k).transpose()).cast<complex>());
        };
    } else if ((kind == "position" || kind == "momentum") && colon != std::string::npos) {
        const int i = parse_index(name, colon, static_cast<long>(dofs));
        const Eigen::Index slot = kind == "position" ? i : dofs + i;
        f.value = [n, slot](const PhasePoint& X) {
            return CMatrix(X.stacked()[slot] * CMatrix::Identity(n, n));
        };
        f.gradient = [n, dofs, slot](const PhasePoint&) {
            std::vector<CMatrix> g(2 * dofs, CMatrix::Zero(n, n));
            g[slot].setIdentity();
            return g;
        };
    } else if (name == "energy") {
        f.value = [model](const PhasePoint& X) {
            Matrix h = model.h(X.R());
            h.diagonal().array() += X.kinetic_energy();
            return CMatrix(h.cast<complex>());
        };
        f.gradient = [model, n](const PhasePoint& X) {
            const Eigen::Index N = X.dofs();
            const auto gh = model.grad_h(X.R());
            std::vector<CMatrix> g(2 * N);
            for (Eigen::Index i = 0; i < N; ++i) {
                g[i] = gh[i].cast<complex>();
                g[N + i] = X.velocity()[i] * CMatrix::Identity(n, n);
            }
            return g;
        };
    } else {
        throw ConfigError("unknown observable '" + name + "'");
    }
    return f;
}

complex adiabatic_element(const CMatrix& chi, const AdiabaticFrame& frame, int b, int b2) {
    return (frame.U.col(b).cast<complex>().transpose() * chi * frame.U.col(b2).cast<complex>())(0, 0);
}

}  // namespace qcdirac
