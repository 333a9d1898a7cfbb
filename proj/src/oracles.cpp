#include "qcdirac/oracles.hpp"

#include <cmath>

namespace qcdirac {

double Polynomial::value(const Vector& x) const {
    double s = 0.0;
    for (std::size_t t = 0; t < coeffs.size(); ++t) {
        double term = coeffs[t];
        for (Eigen::Index i = 0; i < x.size(); ++i)
            if (powers[t][i]) term *= std::pow(x[i], powers[t][i]);
        s += term;
    }
    return s;
}

Vector Polynomial::gradient(const Vector& x) const {
    Vector g = Vector::Zero(x.size());
    for (std::size_t t = 0; t < coeffs.size(); ++t) {
        const auto& e = powers[t];
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            if (!e[k]) continue;
            double term = coeffs[t] * e[k] * std::pow(x[k], e[k] - 1);
            for (Eigen::Index i = 0; i < x.size(); ++i)
                if (i != k && e[i]) term *= std::pow(x[i], e[i]);
            g[k] += term;
        }
    }
    return g;
}

ScalarPhaseFunction Polynomial::function() const {
    auto self = *this;
    return {[self](const PhasePoint& X) { return self.value(X.stacked()); },
            [self](const PhasePoint& X) { return self.gradient(X.stacked()); }};
}

Polynomial Polynomial::random(CounterRng& rng, Eigen::Index dim, int terms, int max_degree) {
    Polynomial p;
    for (int t = 0; t < terms; ++t) {
        p.coeffs.push_back(2.0 * rng.uniform() - 1.0);
        std::vector<int> e(dim, 0);
        const int degree = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_degree));
        for (int k = 0; k < degree; ++k) ++e[rng() % static_cast<std::uint64_t>(dim)];
        p.powers.push_back(std::move(e));
    }
    return p;
}

MatrixPhaseFunction PolynomialMatrix::function() const {
    auto self = *this;
    MatrixPhaseFunction f;
    f.n = n;
    f.value = [self](const PhasePoint& X) {
        const Vector x = X.stacked();
        CMatrix m(self.n, self.n);
        std::size_t r = 0, c = 0;
        for (int a = 0; a < self.n; ++a)
            for (int b = a; b < self.n; ++b) {
                const double im = a == b ? 0.0 : self.im[c++].value(x);
                m(a, b) = complex(self.re[r++].value(x), im);
                m(b, a) = std::conj(m(a, b));
            }
        return m;
    };
    f.gradient = [self](const PhasePoint& X) {
        const Vector x = X.stacked();
        std::vector<CMatrix> g(x.size(), CMatrix(self.n, self.n));
        std::size_t r = 0, c = 0;
        for (int a = 0; a < self.n; ++a)
            for (int b = a; b < self.n; ++b) {
                const Vector gr = self.re[r++].gradient(x);
                const Vector gi = a == b ? Vector::Zero(x.size()) : self.im[c++].gradient(x);
                for (Eigen::Index k = 0; k < x.size(); ++k) {
                    g[k](a, b) = complex(gr[k], gi[k]);
                    g[k](b, a) = std::conj(g[k](a, b));
                }
            }
        return g;
    };
    return f;
}

PolynomialMatrix PolynomialMatrix::random(CounterRng& rng, Eigen::Index dim, int n, int terms, int max_degree) {
    PolynomialMatrix m;
    m.n = n;
    for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) {
            m.re.push_back(Polynomial::random(rng, dim, terms, max_degree));
            if (a != b) m.im.push_back(Polynomial::random(rng, dim, terms, max_degree));
        }
    return m;
}

MatrixPhaseFunction constraint_function(const ConstraintSet& set, const Polynomial& f, int n) {
    auto xi = [set](const PhasePoint& X) {
        Vector x(2 * set.size());
        x << set.sigma(X.R()), set.sigma_dot(X);
        return x;
    };
    MatrixPhaseFunction out;
    out.n = n;
    out.value = [f, xi, n](const PhasePoint& X) { return CMatrix(f.value(xi(X)) * CMatrix::Identity(n, n)); };
    out.gradient = [set, f, xi, n](const PhasePoint& X) {
        const Vector g = xi_jacobian(set.geometry(X.R()), X).transpose() * f.gradient(xi(X));
        std::vector<CMatrix> m(g.size());
        for (Eigen::Index i = 0; i < g.size(); ++i) m[i] = g[i] * CMatrix::Identity(n, n);
        return m;
    };
    return out;
}

}  // namespace qcdirac
