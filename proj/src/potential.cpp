#include "specprobe/potential.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace specprobe {

namespace {

Eigen::VectorXd pack1(double x) {
    Eigen::VectorXd v(1);
    v[0] = x;
    return v;
}

void check_dim(const Potential& pot, const Eigen::VectorXd& x, const char* op) {
    if (x.size() != pot.dim())
        throw ConfigError(fmt::format("{}: expected dimension {}, got {}", op,
                                      pot.dim(), x.size()));
}

std::vector<double> poly_derivative(const std::vector<double>& c) {
    std::vector<double> d;
    for (size_t i = 1; i < c.size(); ++i) d.push_back(c[i] * static_cast<double>(i));
    if (d.empty()) d.push_back(0.0);
    return d;
}

double horner(const std::vector<double>& c, double x) {
    double v = 0.0;
    for (size_t i = c.size(); i-- > 0;) v = v * x + c[i];
    return v;
}

}  // namespace

double Potential::value1(double x) const { return value(pack1(x)); }
double Potential::gradient1(double x) const { return gradient(pack1(x))[0]; }
double Potential::hessian1(double x) const { return hessian(pack1(x))(0, 0); }

Polynomial1d::Polynomial1d(std::vector<double> coeffs, double box_half_width,
                           std::string name)
    : Potential(box_half_width), coeffs_(std::move(coeffs)), name_(std::move(name)) {
    if (box_half_width <= 0.0)
        throw ConfigError("potential: box half-width must be positive");
    if (coeffs_.empty()) throw ConfigError("potential: empty coefficient list");
    d1_ = poly_derivative(coeffs_);
    d2_ = poly_derivative(d1_);
}

double Polynomial1d::value1(double x) const { return horner(coeffs_, x); }
double Polynomial1d::gradient1(double x) const { return horner(d1_, x); }
double Polynomial1d::hessian1(double x) const { return horner(d2_, x); }

double Polynomial1d::value(const Eigen::VectorXd& x) const {
    check_dim(*this, x, "potential value");
    return value1(x[0]);
}

Eigen::VectorXd Polynomial1d::gradient(const Eigen::VectorXd& x) const {
    check_dim(*this, x, "potential gradient");
    return pack1(gradient1(x[0]));
}

Eigen::MatrixXd Polynomial1d::hessian(const Eigen::VectorXd& x) const {
    check_dim(*this, x, "potential hessian");
    Eigen::MatrixXd h(1, 1);
    h(0, 0) = hessian1(x[0]);
    return h;
}

std::vector<double> Polynomial1d::taylor_at(double x0) const {
    // b_m = sum_{i >= m} a_i C(i, m) x0^(i-m), exact binomial shift.
    const size_t deg = coeffs_.size();
    std::vector<double> b(deg, 0.0);
    for (size_t m = 0; m < deg; ++m) {
        double binom = 1.0;  // C(i, m), starts at i = m
        double pw = 1.0;     // x0^(i-m)
        double acc = 0.0;
        for (size_t i = m; i < deg; ++i) {
            acc += coeffs_[i] * binom * pw;
            binom *= static_cast<double>(i + 1) / static_cast<double>(i + 1 - m);
            pw *= x0;
        }
        b[m] = acc;
    }
    return b;
}

QuadraticForm::QuadraticForm(Eigen::MatrixXd q, double box_half_width,
                             std::string name)
    : Potential(box_half_width), q_(std::move(q)), name_(std::move(name)) {
    if (box_half_width <= 0.0)
        throw ConfigError("potential: box half-width must be positive");
    if (q_.rows() != q_.cols() || q_.rows() < 1)
        throw ConfigError("potential: quadratic form needs a square matrix");
    q_ = 0.5 * (q_ + q_.transpose().eval());
}

double QuadraticForm::value(const Eigen::VectorXd& x) const {
    check_dim(*this, x, "potential value");
    return x.dot(q_ * x);
}

Eigen::VectorXd QuadraticForm::gradient(const Eigen::VectorXd& x) const {
    check_dim(*this, x, "potential gradient");
    return 2.0 * (q_ * x);
}

Eigen::MatrixXd QuadraticForm::hessian(const Eigen::VectorXd& x) const {
    check_dim(*this, x, "potential hessian");
    return 2.0 * q_;
}

PotentialPtr make_harmonic(double c, double box_half_width) {
    return std::make_shared<Polynomial1d>(std::vector<double>{0.0, 0.0, c},
                                          box_half_width,
                                          fmt::format("harmonic(c={:g})", c));
}

PotentialPtr make_pure_power(int k, double c, double box_half_width) {
    if (k < 1) throw ConfigError("pure power potential needs k >= 1");
    std::vector<double> coeffs(static_cast<size_t>(2 * k) + 1, 0.0);
    coeffs.back() = c;
    return std::make_shared<Polynomial1d>(
        std::move(coeffs), box_half_width,
        fmt::format("pure_power(k={},c={:g})", k, c));
}

PotentialPtr make_double_well(double box_half_width) {
    return std::make_shared<Polynomial1d>(
        std::vector<double>{1.0, 0.0, -2.0, 0.0, 1.0}, box_half_width,
        "double_well");
}

PotentialPtr make_asym_double_well(double eps, double box_half_width) {
    return std::make_shared<Polynomial1d>(
        std::vector<double>{1.0, eps, -2.0, 0.0, 1.0}, box_half_width,
        fmt::format("asym_double_well(eps={:g})", eps));
}

PotentialPtr make_polynomial(std::vector<double> coeffs, double box_half_width) {
    return std::make_shared<Polynomial1d>(std::move(coeffs), box_half_width,
                                          "polynomial");
}

PotentialPtr make_quadratic_form(Eigen::MatrixXd q, double box_half_width) {
    return std::make_shared<QuadraticForm>(std::move(q), box_half_width,
                                           "quadratic_form");
}

double symbol_eval(const Potential& pot, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& xi) {
    check_dim(pot, x, "symbol");
    check_dim(pot, xi, "symbol");
    return xi.squaredNorm() + pot.value(x);
}

std::vector<Eigen::VectorXd> sphere_samples(int n) {
    std::vector<Eigen::VectorXd> pts;
    if (n == 1) {
        pts.push_back(pack1(-1.0));
        pts.push_back(pack1(1.0));
    } else if (n == 2) {
        for (int i = 0; i < 64; ++i) {
            const double th = kTwoPi * i / 64.0;
            Eigen::VectorXd p(2);
            p << std::cos(th), std::sin(th);
            pts.push_back(std::move(p));
        }
    } else if (n == 3) {
        for (int j = 0; j < 8; ++j) {
            const double u = std::cos(kPi * (j + 0.5) / 8.0);
            const double r = std::sqrt(std::max(0.0, 1.0 - u * u));
            for (int i = 0; i < 16; ++i) {
                const double ph = kTwoPi * i / 16.0;
                Eigen::VectorXd p(3);
                p << r * std::cos(ph), r * std::sin(ph), u;
                pts.push_back(std::move(p));
            }
        }
    } else {
        throw ConfigError("sphere sampling implemented for n <= 3");
    }
    return pts;
}

namespace {

// Definite iff the germ has a uniform sign, bounded away from zero, over
// the deterministic sphere sample set.
bool germ_definite(const std::function<double(const Eigen::VectorXd&)>& germ,
                   int n, bool* positive) {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const Eigen::VectorXd& p : sphere_samples(n)) {
        const double v = germ(p);
        if (first) {
            lo = hi = v;
            first = false;
        } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (lo > 1e-10) {
        *positive = true;
        return true;
    }
    if (hi < -1e-10) {
        *positive = false;
        return true;
    }
    return false;
}

// Taylor coefficients of V(x0 + y) for a generic 1d potential by central
// differences, orders 0..6. Ill-conditioned by nature; used only when no
// polynomial form is declared, with a matching coarse threshold.
std::vector<double> taylor_fd_1d(const Potential& pot, double x0,
                                 double* threshold) {
    const double step = 1e-2 * std::max(1.0, std::abs(x0));
    auto f = [&](int i) { return pot.value1(x0 + i * step); };
    std::vector<double> b(7, 0.0);
    b[0] = f(0);
    b[1] = (f(1) - f(-1)) / (2 * step);
    b[2] = (-f(2) + 16 * f(1) - 30 * f(0) + 16 * f(-1) - f(-2)) /
           (12 * step * step) / 2.0;
    b[3] = (f(2) - 2 * f(1) + 2 * f(-1) - f(-2)) / (2 * std::pow(step, 3)) / 6.0;
    b[4] = (f(2) - 4 * f(1) + 6 * f(0) - 4 * f(-1) + f(-2)) /
           std::pow(step, 4) / 24.0;
    b[5] = (-f(3) + 4 * f(2) - 5 * f(1) + 5 * f(-1) - 4 * f(-2) + f(-3)) /
           (2 * std::pow(step, 5)) / 120.0;
    b[6] = (f(3) - 6 * f(2) + 15 * f(1) - 20 * f(0) + 15 * f(-1) - 6 * f(-2) +
            f(-3)) / std::pow(step, 6) / 720.0;
    double scale = 0.0;
    for (int i = -3; i <= 3; ++i) scale = std::max(scale, std::abs(f(i)));
    *threshold = 1e-6 * std::max(1.0, scale);
    return b;
}

CriticalPointInfo classify_1d(const Potential& pot, double x0) {
    CriticalPointInfo info;
    info.x0 = pack1(x0);
    info.e_c = pot.value1(x0);
    info.hessian = Eigen::MatrixXd(1, 1);
    info.hessian(0, 0) = pot.hessian1(x0);

    std::vector<double> tay;
    std::vector<double> tol;
    if (const std::vector<double>* pc = pot.poly_coeffs()) {
        const auto& poly = dynamic_cast<const Polynomial1d&>(pot);
        tay = poly.taylor_at(x0);
        // Per-order threshold tracks the cancellation in the binomial sum.
        tol.assign(tay.size(), 0.0);
        for (size_t m = 0; m < tay.size(); ++m) {
            double babs = 0.0;
            double binom = 1.0, pw = 1.0;
            for (size_t i = m; i < pc->size(); ++i) {
                babs += std::abs((*pc)[i]) * binom * pw;
                binom *= static_cast<double>(i + 1) / static_cast<double>(i + 1 - m);
                pw *= std::abs(x0);
            }
            tol[m] = 1e-12 * std::max(1.0, babs);
        }
    } else {
        double thr = 0.0;
        tay = taylor_fd_1d(pot, x0, &thr);
        tol.assign(tay.size(), thr);
    }

    size_t lead = 0;
    for (size_t m = 2; m < tay.size(); ++m) {
        if (std::abs(tay[m]) > tol[m]) {
            lead = m;
            break;
        }
    }
    if (lead == 0) {
        info.extremal = false;  // flat beyond the resolvable order
        return info;
    }

    const double c = tay[lead];
    const auto order = static_cast<int>(lead);
    info.coeff_1d = c;
    info.germ = [c, order](const Eigen::VectorXd& th) {
        return c * std::pow(th[0], order);
    };
    if (order % 2 != 0) {
        info.extremal = false;  // odd leading block, no extremum
        info.k = 0;
        return info;
    }
    info.k = order / 2;
    bool positive = false;
    info.extremal = germ_definite(info.germ, 1, &positive);
    info.is_minimum = positive;
    return info;
}

CriticalPointInfo classify_nd(const Potential& pot, const Eigen::VectorXd& x0) {
    CriticalPointInfo info;
    info.x0 = x0;
    info.e_c = pot.value(x0);
    info.hessian = pot.hessian(x0);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(info.hessian);
    const double hnorm = info.hessian.cwiseAbs().maxCoeff();
    const double degeneracy_tol = 1e-8 * std::max(1.0, hnorm);
    if (es.eigenvalues().cwiseAbs().minCoeff() <= degeneracy_tol) {
        info.extremal = false;  // degenerate block beyond quadratic: flagged only
        info.k = 0;
        return info;
    }
    info.k = 1;
    const Eigen::MatrixXd h = info.hessian;
    info.germ = [h](const Eigen::VectorXd& th) { return 0.5 * th.dot(h * th); };
    bool positive = false;
    info.extremal = germ_definite(info.germ, pot.dim(), &positive);
    info.is_minimum = positive;
    return info;
}

}  // namespace

std::vector<CriticalPointInfo> find_critical_points(const Potential& pot,
                                                    int seeds_per_axis) {
    if (seeds_per_axis < 2) throw ConfigError("critical-point search needs >= 2 seeds");
    const int n = pot.dim();
    const double L = pot.box_half_width();

    std::vector<Eigen::VectorXd> roots;
    auto record = [&](const Eigen::VectorXd& x) {
        for (const Eigen::VectorXd& r : roots)
            if ((r - x).norm() <= 1e-6) return;
        roots.push_back(x);
    };

    if (n == 1) {
        // Degenerate roots (V' ~ c x^m) make Newton only linearly
        // convergent, so iterate to step stagnation rather than stopping at
        // the first small gradient; otherwise different seeds would halt at
        // seed-dependent points wider apart than the dedupe radius.
        for (double s : linspace(-L, L, seeds_per_axis)) {
            double x = s;
            bool valid = true;
            for (int it = 0; it < 200; ++it) {
                const double g = pot.gradient1(x);
                const double h = pot.hessian1(x);
                if (g == 0.0) break;
                if (std::abs(h) < 1e-300) {
                    valid = false;
                    break;
                }
                const double dx = g / h;
                x -= dx;
                if (!std::isfinite(x) || std::abs(x) > 4.0 * L) {
                    valid = false;
                    break;
                }
                if (std::abs(dx) <= 4.0 * 2.2e-16 * (1.0 + std::abs(x))) break;
            }
            if (valid && std::abs(pot.gradient1(x)) <= 1e-10 &&
                std::abs(x) <= L + 1e-9)
                record(pack1(x));
        }
    } else {
        const int per_axis = std::min(seeds_per_axis, 9);
        std::vector<double> axis = linspace(-L, L, per_axis);
        std::vector<int> idx(static_cast<size_t>(n), 0);
        while (true) {
            Eigen::VectorXd x(n);
            for (int d = 0; d < n; ++d) x[d] = axis[static_cast<size_t>(idx[static_cast<size_t>(d)])];
            bool valid = true;
            for (int it = 0; it < 200; ++it) {
                const Eigen::VectorXd g = pot.gradient(x);
                if (g.lpNorm<Eigen::Infinity>() == 0.0) break;
                Eigen::VectorXd dx = pot.hessian(x).fullPivLu().solve(g);
                if (!dx.allFinite()) {
                    valid = false;
                    break;
                }
                x -= dx;
                if (x.lpNorm<Eigen::Infinity>() > 4.0 * L) {
                    valid = false;
                    break;
                }
                if (dx.lpNorm<Eigen::Infinity>() <=
                    4.0 * 2.2e-16 * (1.0 + x.lpNorm<Eigen::Infinity>()))
                    break;
            }
            if (valid &&
                pot.gradient(x).lpNorm<Eigen::Infinity>() <= 1e-10 &&
                x.lpNorm<Eigen::Infinity>() <= L + 1e-9)
                record(x);
            int d = 0;
            for (; d < n; ++d) {
                if (++idx[static_cast<size_t>(d)] < per_axis) break;
                idx[static_cast<size_t>(d)] = 0;
            }
            if (d == n) break;
        }
    }

    std::sort(roots.begin(), roots.end(),
              [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
                  for (int i = 0; i < a.size(); ++i)
                      if (a[i] != b[i]) return a[i] < b[i];
                  return false;
              });

    std::vector<CriticalPointInfo> out;
    for (const Eigen::VectorXd& r : roots)
        out.push_back(n == 1 ? classify_1d(pot, r[0]) : classify_nd(pot, r));
    return out;
}

double spherical_mean(const CriticalPointInfo& germ, int n) {
    if (!germ.extremal || germ.k < 1 || !germ.germ)
        throw ConfigError("spherical mean needs a definite even germ");
    const double expo = -static_cast<double>(n) / (2.0 * germ.k);
    auto f = [&](const Eigen::VectorXd& p) {
        return std::pow(std::abs(germ.germ(p)), expo);
    };

    if (n == 1) {
        return f(pack1(-1.0)) + f(pack1(1.0));
    }
    if (n == 2) {
        const int m = 512;
        double acc = 0.0;
        for (int i = 0; i < m; ++i) {
            const double th = kTwoPi * i / m;
            Eigen::VectorXd p(2);
            p << std::cos(th), std::sin(th);
            acc += f(p);
        }
        return acc * kTwoPi / m;
    }
    if (n == 3) {
        const GaussLegendre& gl = gauss_legendre(96);
        const int mphi = 192;
        double acc = 0.0;
        for (int i = 0; i < 96; ++i) {
            const double u = gl.node[static_cast<size_t>(i)];
            const double r = std::sqrt(std::max(0.0, 1.0 - u * u));
            double ring = 0.0;
            for (int j = 0; j < mphi; ++j) {
                const double ph = kTwoPi * j / mphi;
                Eigen::VectorXd p(3);
                p << r * std::cos(ph), r * std::sin(ph), u;
                ring += f(p);
            }
            acc += gl.weight[static_cast<size_t>(i)] * ring * kTwoPi / mphi;
        }
        return acc;
    }
    throw ConfigError("spherical mean implemented for n <= 3");
}

}  // namespace specprobe
