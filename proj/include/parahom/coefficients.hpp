#pragma once

#include <Eigen/Core>

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace parahom {

// d x d matrix with d <= 2, stored without heap allocation.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 2, 2>;
using Point = std::array<double, 2>;

// Known sup-norm bounds of derivatives of A.  Rough fields carry none.
struct Seminorms {
  double ds = 0.0;     // ||d_s A||_inf
  double grad = 0.0;   // ||grad_y A||_inf
  double hess = 0.0;   // ||grad_y^2 A||_inf
};

class CoefficientField {
 public:
  using Evaluator = std::function<Matrix(const Point& y, double s)>;

  // Validates ellipticity (mu|xi|^2 <= xi.A xi, |A| <= 1/mu) and periodicity
  // by sampling; throws EllipticityViolated on failure.
  CoefficientField(int d, Evaluator eval, double mu, std::optional<Seminorms> seminorms,
                   std::string name, std::vector<double> params, bool diagonal);

  // Isotropic field a(y, s) I.
  static CoefficientField scalar(int d, std::function<double(const Point&, double)> a, double mu,
                                 std::optional<Seminorms> seminorms, std::string name,
                                 std::vector<double> params = {});

  int d() const { return d_; }
  double mu() const { return mu_; }
  // Temporal period: 1 for built-ins, lambda after rescale_lambda.
  double time_period() const { return period_; }
  const std::optional<Seminorms>& seminorms() const { return seminorms_; }
  bool smooth() const { return seminorms_.has_value(); }
  bool diagonal() const { return diagonal_; }
  // True when A does not depend on s; cell samplers then evaluate one slice.
  bool steady() const { return steady_; }
  const std::string& name() const { return name_; }
  const std::vector<double>& params() const { return params_; }

  Matrix operator()(const Point& y, double s) const { return eval_(y, s); }
  double entry(int i, int j, const Point& y, double s) const { return eval_(y, s)(i, j); }

  // A(y + h/2 e_axis, s)_{axis,axis}: the face sample used by every
  // conservative discretization.
  double face(int axis, const Point& node, double h, double s) const;

  // Provenance string, e.g. "sep-trig[0.5]@lambda=2".
  std::string describe() const;

 private:
  friend CoefficientField rescale_lambda(const CoefficientField& a, double lambda);
  friend CoefficientField time_average(const CoefficientField& a, int n_s);
  friend CoefficientField builtin_field(const std::string& name, const std::vector<double>& params, int d);
  CoefficientField() = default;

  int d_ = 1;
  Evaluator eval_;
  double mu_ = 1.0;
  double period_ = 1.0;
  std::optional<Seminorms> seminorms_;
  std::string name_;
  std::vector<double> params_;
  bool diagonal_ = true;
  bool steady_ = false;
};

// Built-in families: constant, time-only, space-only, sep-trig, prod-trig,
// checkerboard-smooth.  Throws UnknownFamily / EllipticityViolated.
CoefficientField builtin_field(const std::string& name, const std::vector<double>& params, int d = 1);
std::vector<std::string> builtin_families();
// Parameters used when a config names a family without params.
std::vector<double> default_params(const std::string& family);

// A_lambda(y, s) = A(y, s / lambda); (1, lambda)-periodic.
CoefficientField rescale_lambda(const CoefficientField& a, double lambda);

// Time average over one period from n_s equispaced samples: the matrix A-bar(y).
CoefficientField time_average(const CoefficientField& a, int n_s);

struct ScaleParams {
  double epsilon = 0.125;
  double k = 2.0;

  ScaleParams(double eps, double k_exp);
  double lambda() const;  // eps^(k-2)
  double delta() const;   // eps + eps^(k/2) = (1 + sqrt(lambda)) eps
};

}  // namespace parahom
