#include "parahom/coefficients.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "parahom/error.hpp"

namespace parahom {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<Eigen::Vector2d> probe_directions(int d) {
  std::vector<Eigen::Vector2d> dirs;
  if (d == 1) {
    for (double v : {1.0, -1.0, 0.5, -2.0}) dirs.emplace_back(v, 0.0);
    return dirs;
  }
  const double r = 1.0 / std::sqrt(2.0);
  dirs.emplace_back(1.0, 0.0);
  dirs.emplace_back(0.0, 1.0);
  dirs.emplace_back(r, r);
  dirs.emplace_back(r, -r);
  dirs.emplace_back(std::cos(0.3), std::sin(0.3));
  dirs.emplace_back(std::cos(2.1), std::sin(2.1));
  return dirs;
}

double operator_norm(const Matrix& m) {
  if (m.rows() == 1) return std::abs(m(0, 0));
  Eigen::Matrix2d full = m;
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(full);
  return svd.singularValues()(0);
}

void check_admissible(int d, const CoefficientField::Evaluator& eval, double mu, double period) {
  if (!(mu > 0.0)) throw Error(ErrorCode::EllipticityViolated, "ellipticity constant must be positive");
  constexpr int kSamples = 12;
  const auto dirs = probe_directions(d);
  const double slack = 1e-12;
  const int n2 = d == 2 ? kSamples : 1;
  for (int n = 0; n < kSamples; ++n) {
    const double s = period * (n + 0.37) / kSamples;
    for (int i2 = 0; i2 < n2; ++i2) {
      for (int i1 = 0; i1 < kSamples; ++i1) {
        const Point y{(i1 + 0.21) / kSamples, d == 2 ? (i2 + 0.53) / kSamples : 0.0};
        const Matrix a = eval(y, s);
        if (!a.allFinite()) throw Error(ErrorCode::EllipticityViolated, "coefficient is not finite");
        if (operator_norm(a) > 1.0 / mu + slack)
          throw Error(ErrorCode::EllipticityViolated, "|A| exceeds 1/mu");
        for (const auto& dir : dirs) {
          const Eigen::VectorXd xi = dir.head(d);
          const double q = xi.dot(a * xi);
          if (q < mu * xi.squaredNorm() - slack) {
            std::ostringstream os;
            os << "xi.A xi = " << q << " < mu |xi|^2 = " << mu * xi.squaredNorm() << " at y=(" << y[0]
               << ", " << y[1] << "), s=" << s;
            throw Error(ErrorCode::EllipticityViolated, os.str());
          }
        }
        // Periodicity under integer shifts in y and period shifts in s.
        const Point shifted{y[0] + 1.0, d == 2 ? y[1] - 2.0 : 0.0};
        const Matrix b = eval(shifted, s + period);
        if ((a - b).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + a.cwiseAbs().maxCoeff()))
          throw Error(ErrorCode::InvalidArgument, "coefficient is not periodic");
      }
    }
  }
}

void require_amplitude(double c, const std::string& family) {
  if (!(std::abs(c) < 1.0))
    throw Error(ErrorCode::EllipticityViolated,
                family + " amplitude must satisfy |c| < 1 (got " + std::to_string(c) + ")");
}

// Product of sines over the spatial axes.
double sine_product(const Point& y, int d) {
  double v = std::sin(kTwoPi * y[0]);
  if (d == 2) v *= std::sin(kTwoPi * y[1]);
  return v;
}

}  // namespace

CoefficientField::CoefficientField(int d, Evaluator eval, double mu, std::optional<Seminorms> seminorms,
                                   std::string name, std::vector<double> params, bool diagonal)
    : d_(d),
      eval_(std::move(eval)),
      mu_(mu),
      seminorms_(seminorms),
      name_(std::move(name)),
      params_(std::move(params)),
      diagonal_(diagonal) {
  if (d_ != 1 && d_ != 2) throw Error(ErrorCode::InvalidArgument, "dimension must be 1 or 2");
  check_admissible(d_, eval_, mu_, period_);
}

CoefficientField CoefficientField::scalar(int d, std::function<double(const Point&, double)> a,
                                          double mu, std::optional<Seminorms> seminorms,
                                          std::string name, std::vector<double> params) {
  auto eval = [d, a = std::move(a)](const Point& y, double s) {
    return Matrix(Matrix::Identity(d, d) * a(y, s));
  };
  return CoefficientField(d, std::move(eval), mu, seminorms, std::move(name), std::move(params), true);
}

double CoefficientField::face(int axis, const Point& node, double h, double s) const {
  Point y = node;
  y[axis] += 0.5 * h;
  return eval_(y, s)(axis, axis);
}

std::string CoefficientField::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << name_ << "[";
  for (std::size_t i = 0; i < params_.size(); ++i) os << (i ? "," : "") << params_[i];
  os << "]";
  if (period_ != 1.0) os << "@lambda=" << period_;
  return os.str();
}

std::vector<std::string> builtin_families() {
  return {"constant", "time-only", "space-only", "sep-trig", "prod-trig", "checkerboard-smooth"};
}

std::vector<double> default_params(const std::string& family) {
  if (family == "constant") return {1.0};
  if (family == "time-only") return {0.5};
  if (family == "space-only") return {0.5};
  if (family == "sep-trig") return {0.5};
  if (family == "prod-trig") return {0.5, 0.25};
  if (family == "checkerboard-smooth") return {0.5, 2.0, 20.0};
  throw Error(ErrorCode::UnknownFamily, "unknown coefficient family '" + family + "'");
}

CoefficientField builtin_field(const std::string& name, const std::vector<double>& params, int d) {
  auto need = [&](std::size_t n) {
    if (params.size() != n)
      throw Error(ErrorCode::InvalidArgument,
                  name + " expects " + std::to_string(n) + " parameter(s), got " + std::to_string(params.size()));
  };
  const double sq = d == 2 ? std::sqrt(2.0) : 1.0;
  if (name == "constant") {
    need(1);
    const double c = params[0];
    if (!(c > 0.0)) throw Error(ErrorCode::EllipticityViolated, "constant coefficient must be positive");
    auto out = CoefficientField::scalar(
        d, [c](const Point&, double) { return c; }, std::min(c, 1.0 / c), Seminorms{}, name, params);
    out.steady_ = true;
    return out;
  }
  if (name == "time-only") {
    need(1);
    const double c = params[0];
    require_amplitude(c, name);
    return CoefficientField::scalar(
        d, [c](const Point&, double s) { return 1.0 + c * std::cos(kTwoPi * s); }, 1.0 - std::abs(c),
        Seminorms{kTwoPi * std::abs(c), 0.0, 0.0}, name, params);
  }
  if (name == "space-only") {
    need(1);
    const double c = params[0];
    require_amplitude(c, name);
    auto out = CoefficientField::scalar(
        d, [c, d](const Point& y, double) { return 1.0 + c * sine_product(y, d); }, 1.0 - std::abs(c),
        Seminorms{0.0, kTwoPi * std::abs(c) * sq, kTwoPi * kTwoPi * std::abs(c) * sq}, name, params);
    out.steady_ = true;
    return out;
  }
  if (name == "sep-trig") {
    need(1);
    const double c = params[0];
    require_amplitude(c, name);
    return CoefficientField::scalar(
        d, [c, d](const Point& y, double s) { return 1.0 + c * sine_product(y, d) * std::cos(kTwoPi * s); },
        1.0 - std::abs(c),
        Seminorms{kTwoPi * std::abs(c), kTwoPi * std::abs(c) * sq, kTwoPi * kTwoPi * std::abs(c) * sq},
        name, params);
  }
  if (name == "prod-trig") {
    need(2);
    const double c1 = params[0], c2 = params[1];
    require_amplitude(c1, name);
    require_amplitude(c2, name);
    const double lo = (1.0 - std::abs(c1)) * (1.0 - std::abs(c2));
    const double hi = (1.0 + std::abs(c1)) * (1.0 + std::abs(c2));
    return CoefficientField::scalar(
        d,
        [c1, c2, d](const Point& y, double s) {
          return (1.0 + c1 * sine_product(y, d)) * (1.0 + c2 * std::cos(kTwoPi * s));
        },
        std::min(lo, 1.0 / hi),
        Seminorms{kTwoPi * std::abs(c2) * (1.0 + std::abs(c1)),
                  kTwoPi * std::abs(c1) * sq * (1.0 + std::abs(c2)),
                  kTwoPi * kTwoPi * std::abs(c1) * sq * (1.0 + std::abs(c2))},
        name, params);
  }
  if (name == "checkerboard-smooth") {
    need(3);
    const double lo = params[0], hi = params[1], sharp = params[2];
    if (!(lo > 0.0) || !(hi >= lo) || !(sharp > 0.0))
      throw Error(ErrorCode::EllipticityViolated, "checkerboard-smooth needs 0 < lo <= hi and sharpness > 0");
    return CoefficientField::scalar(
        d,
        [lo, hi, sharp, d](const Point& y, double s) {
          const double phase = sine_product(y, d) * std::sin(kTwoPi * s);
          return lo + (hi - lo) * 0.5 * (1.0 + std::tanh(sharp * phase));
        },
        std::min(lo, 1.0 / hi), std::nullopt, name, params);
  }
  throw Error(ErrorCode::UnknownFamily, "unknown coefficient family '" + name + "'");
}

CoefficientField rescale_lambda(const CoefficientField& a, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw Error(ErrorCode::NonPositiveLambda, "lambda must be positive");
  CoefficientField out;
  out.d_ = a.d_;
  out.mu_ = a.mu_;
  out.seminorms_ = a.seminorms_;
  out.name_ = a.name_;
  out.params_ = a.params_;
  out.diagonal_ = a.diagonal_;
  out.steady_ = a.steady_;
  out.period_ = a.period_ * lambda;
  if (lambda == 1.0) {
    out.eval_ = a.eval_;
  } else {
    out.eval_ = [inner = a.eval_, lambda](const Point& y, double s) { return inner(y, s / lambda); };
  }
  return out;
}

CoefficientField time_average(const CoefficientField& a, int n_s) {
  const double period = a.time_period();
  auto eval = [a, n_s, period](const Point& y, double) {
    Matrix sum = Matrix::Zero(a.d(), a.d());
    for (int n = 0; n < n_s; ++n) sum += a(y, period * n / n_s);
    return Matrix(sum / double(n_s));
  };
  std::optional<Seminorms> semi;
  if (a.seminorms()) semi = Seminorms{0.0, a.seminorms()->grad, a.seminorms()->hess};
  CoefficientField out(a.d(), eval, a.mu(), semi, a.name() + "/time-average", a.params(), a.diagonal());
  out.steady_ = true;
  return out;
}

ScaleParams::ScaleParams(double eps, double k_exp) : epsilon(eps), k(k_exp) {
  if (!(eps > 0.0 && eps <= 1.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must lie in (0, 1]");
  if (!(k_exp > 0.0)) throw Error(ErrorCode::NonPositiveK, "scale exponent k must be positive");
}

double ScaleParams::lambda() const { return std::pow(epsilon, k - 2.0); }
double ScaleParams::delta() const { return epsilon + std::pow(epsilon, k / 2.0); }

}  // namespace parahom
