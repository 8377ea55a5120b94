#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "specprobe/common.hpp"

namespace specprobe {

/// Smooth confining potential on the box [-L, L]^n. Immutable after
/// construction; all evaluators are pure and safe to share across threads.
class Potential {
  public:
    virtual ~Potential() = default;

    virtual int dim() const = 0;
    virtual double value(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const = 0;

    /// Half-width of the declared confinement box.
    double box_half_width() const { return box_; }

    virtual std::string name() const = 0;

    /// Ascending coefficients when the potential is a 1d polynomial,
    /// nullptr otherwise. Exact Taylor data beats finite differences for
    /// germ extraction, so polynomial form is preferred when available.
    virtual const std::vector<double>* poly_coeffs() const { return nullptr; }

    // Scalar fast paths for n = 1 hot loops (grid fills, flow steps).
    virtual double value1(double x) const;
    virtual double gradient1(double x) const;
    virtual double hessian1(double x) const;

  protected:
    explicit Potential(double box_half_width) : box_(box_half_width) {}

  private:
    double box_;
};

using PotentialPtr = std::shared_ptr<const Potential>;

/// V(x) = sum_i coeffs[i] * x^i on [-L, L], n = 1.
class Polynomial1d final : public Potential {
  public:
    Polynomial1d(std::vector<double> coeffs, double box_half_width,
                 std::string name);

    int dim() const override { return 1; }
    double value(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const override;
    std::string name() const override { return name_; }
    const std::vector<double>* poly_coeffs() const override { return &coeffs_; }

    double value1(double x) const override;
    double gradient1(double x) const override;
    double hessian1(double x) const override;

    /// Exact coefficients of x -> V(x0 + x) (binomial shift).
    std::vector<double> taylor_at(double x0) const;

  private:
    std::vector<double> coeffs_, d1_, d2_;
    std::string name_;
};

/// V(x) = x^T Q x on [-L, L]^n with symmetric Q, n >= 1.
class QuadraticForm final : public Potential {
  public:
    QuadraticForm(Eigen::MatrixXd q, double box_half_width, std::string name);

    int dim() const override { return static_cast<int>(q_.rows()); }
    double value(const Eigen::VectorXd& x) const override;
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const override;
    std::string name() const override { return name_; }

    const Eigen::MatrixXd& matrix() const { return q_; }

  private:
    Eigen::MatrixXd q_;
    std::string name_;
};

PotentialPtr make_harmonic(double c = 1.0, double box_half_width = 6.0);
PotentialPtr make_pure_power(int k, double c = 1.0, double box_half_width = 4.0);
PotentialPtr make_double_well(double box_half_width = 3.0);
PotentialPtr make_asym_double_well(double eps, double box_half_width = 3.0);
PotentialPtr make_polynomial(std::vector<double> coeffs,
                             double box_half_width = 6.0);
PotentialPtr make_quadratic_form(Eigen::MatrixXd q,
                                 double box_half_width = 6.0);

/// Local model of V at a critical point:
/// V(x0 + y) = e_c + V_2k(y) + higher order, with V_2k homogeneous of
/// degree 2k. Only definite leading blocks (extremal == true) feed the
/// inverse pipeline; odd leading order or indefinite blocks are reported
/// with extremal == false and k = 0 resp. the sampled half-degree.
struct CriticalPointInfo {
    Eigen::VectorXd x0;
    double e_c = 0.0;
    int k = 0;              // half-degree of the leading homogeneous block
    bool is_minimum = false;  // meaningful only when extremal
    bool extremal = false;    // leading block definite on the sphere
    double coeff_1d = 0.0;    // n = 1: V_2k(y) = coeff_1d * y^(2k)
    Eigen::MatrixXd hessian;  // d^2 V(x0)
    std::function<double(const Eigen::VectorXd&)> germ;  // V_2k evaluator
};

/// p(x, xi) = |xi|^2 + V(x).
double symbol_eval(const Potential& pot, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& xi);

/// Locates critical points from a seed grid over the box (Newton polish to
/// |grad V| <= 1e-10, duplicates within 1e-6 merged) and classifies each by
/// its first non-vanishing homogeneous Taylor block.
std::vector<CriticalPointInfo> find_critical_points(const Potential& pot,
                                                    int seeds_per_axis = 41);

/// A(V) = integral over S^(n-1) of |V_2k(theta)|^(-n/(2k)).
/// n = 1 uses the two-point sphere, n = 2 a 512-point periodic trapezoid,
/// n = 3 a Gauss-Legendre x trapezoid product rule.
double spherical_mean(const CriticalPointInfo& germ, int n);

/// Deterministic unit-sphere sample set (>= 64 points for n >= 2),
/// used for definiteness checks and available to tests.
std::vector<Eigen::VectorXd> sphere_samples(int n);

}  // namespace specprobe
