#pragma once

#include "stiga/geometry.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>

namespace stiga {

/// Parameters shared by the benchmark catalogue.
struct ExampleParams {
  double k1 = 1.0;
  double k2 = 1.0;
  double lambda = 0.5;
};

/// A benchmark problem on one patch. Gradients are space-time gradients:
/// entries 0..d-1 are ∇x u, entry d is ∂t u.
template <int Dim>
struct ProblemCase {
  using Scalar = std::function<double(const SamplePoint<Dim>&)>;
  using Gradient = std::function<Point<Dim>(const SamplePoint<Dim>&)>;

  std::string id;
  std::string description;
  PatchId patch = PatchId::unit_interval_time;
  double T = 1.0;
  ExampleParams params;
  Scalar u;        // empty when no closed form is known
  Gradient grad_u;
  Scalar lap_u;    // spatial Laplacian
  Scalar f;
  Scalar u_D;      // lateral boundary data
  Scalar u_0;      // initial data
  Gradient grad_u0;  // space-time gradient of the initial data extension
  double friedrichs = 0.0;

  [[nodiscard]] bool has_exact() const { return static_cast<bool>(u); }
  [[nodiscard]] GeometryMap<Dim> geometry() const { return benchmark_patch<Dim>(patch, T); }
};

/// Friedrichs constant bound for the spatial domain of a patch.
inline double friedrichs_constant(PatchId id) {
  switch (id) {
    case PatchId::unit_interval_time:
      return 1.0 / std::numbers::pi;
    case PatchId::unit_square_time:
      return 1.0 / (std::sqrt(2.0) * std::numbers::pi);
    case PatchId::quarter_annulus_time:
      return std::sqrt(5.0) / std::numbers::pi;
  }
  throw std::invalid_argument("friedrichs_constant: unknown domain");
}

namespace detail {

inline ProblemCase<2> ex1() {
  ProblemCase<2> c;
  c.id = "ex1";
  c.description = "polynomial u = (1-x) x^2 (1-t) t on (0,1)x(0,1)";
  c.u = [](const SamplePoint<2>& s) {
    const double x = s.x(0), t = s.x(1);
    return (1 - x) * x * x * (1 - t) * t;
  };
  c.grad_u = [](const SamplePoint<2>& s) {
    const double x = s.x(0), t = s.x(1);
    return Point<2>((2 * x - 3 * x * x) * (1 - t) * t, (1 - x) * x * x * (1 - 2 * t));
  };
  c.lap_u = [](const SamplePoint<2>& s) {
    const double x = s.x(0), t = s.x(1);
    return (2 - 6 * x) * (1 - t) * t;
  };
  c.f = [](const SamplePoint<2>& s) {
    const double x = s.x(0), t = s.x(1);
    return (1 - x) * x * x * (1 - 2 * t) - (2 - 6 * x) * (1 - t) * t;
  };
  return c;
}

inline ProblemCase<2> ex2(double k1, double k2) {
  ProblemCase<2> c;
  c.id = "ex2";
  c.description = "trigonometric u = sin(k1 pi x) sin(k2 pi t)";
  c.params.k1 = k1;
  c.params.k2 = k2;
  const double a = k1 * std::numbers::pi;
  const double b = k2 * std::numbers::pi;
  c.u = [a, b](const SamplePoint<2>& s) { return std::sin(a * s.x(0)) * std::sin(b * s.x(1)); };
  c.grad_u = [a, b](const SamplePoint<2>& s) {
    return Point<2>(a * std::cos(a * s.x(0)) * std::sin(b * s.x(1)), b * std::sin(a * s.x(0)) * std::cos(b * s.x(1)));
  };
  c.lap_u = [a, b](const SamplePoint<2>& s) { return -a * a * std::sin(a * s.x(0)) * std::sin(b * s.x(1)); };
  c.f = [a, b](const SamplePoint<2>& s) {
    return std::sin(a * s.x(0)) * (b * std::cos(b * s.x(1)) + a * a * std::sin(b * s.x(1)));
  };
  return c;
}

// u = A(x) B(t) G(x,t), A = x^2 - x, B = t^2 - t, G = exp(-100 r).
struct GaussianPeak {
  static constexpr double x0 = 0.8;
  static constexpr double t0 = 0.05;
  static constexpr double k = 100.0;

  struct Parts {
    double A, A1, B, B1, G, Gx, Gt, Gxx;
  };

  static Parts eval(double x, double t) {
    Parts p{};
    const double X = x - x0;
    const double S = t - t0;
    const double r = std::hypot(X, S);
    p.A = x * x - x;
    p.A1 = 2 * x - 1;
    p.B = t * t - t;
    p.B1 = 2 * t - 1;
    p.G = std::exp(-k * r);
    if (r > 0.0) {
      p.Gx = -k * (X / r) * p.G;
      p.Gt = -k * (S / r) * p.G;
      p.Gxx = -k * (S * S / (r * r * r)) * p.G + k * k * (X * X / (r * r)) * p.G;
    }
    return p;
  }
};

inline ProblemCase<2> ex3() {
  ProblemCase<2> c;
  c.id = "ex3";
  c.description = "sharp Gaussian-type peak at (0.8, 0.05)";
  using P = GaussianPeak;
  c.u = [](const SamplePoint<2>& s) {
    const auto p = P::eval(s.x(0), s.x(1));
    return p.A * p.B * p.G;
  };
  c.grad_u = [](const SamplePoint<2>& s) {
    const auto p = P::eval(s.x(0), s.x(1));
    return Point<2>(p.B * (p.A1 * p.G + p.A * p.Gx), p.A * (p.B1 * p.G + p.B * p.Gt));
  };
  c.lap_u = [](const SamplePoint<2>& s) {
    const auto p = P::eval(s.x(0), s.x(1));
    return p.B * (2 * p.G + 2 * p.A1 * p.Gx + p.A * p.Gxx);
  };
  c.f = [](const SamplePoint<2>& s) {
    const auto p = P::eval(s.x(0), s.x(1));
    const double ut = p.A * (p.B1 * p.G + p.B * p.Gt);
    const double uxx = p.B * (2 * p.G + 2 * p.A1 * p.Gx + p.A * p.Gxx);
    return ut - uxx;
  };
  return c;
}

inline ProblemCase<2> ex4(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("ex4: lambda must be positive");
  ProblemCase<2> c;
  c.id = "ex4";
  c.description = "u = sin(pi x) |1-t|^lambda on (0,1)x(0,2)";
  c.T = 2.0;
  c.params.lambda = lambda;
  const double pi = std::numbers::pi;
  // d/dt |1-t|^l = -l sign(1-t) |1-t|^(l-1); zero at t = 1 when l > 1.
  auto dt_factor = [lambda](double t) {
    const double s = 1.0 - t;
    if (s == 0.0) return 0.0;
    return -lambda * (s > 0 ? 1.0 : -1.0) * std::pow(std::abs(s), lambda - 1.0);
  };
  c.u = [lambda, pi](const SamplePoint<2>& s) {
    return std::sin(pi * s.x(0)) * std::pow(std::abs(1.0 - s.x(1)), lambda);
  };
  c.grad_u = [lambda, pi, dt_factor](const SamplePoint<2>& s) {
    const double tp = std::pow(std::abs(1.0 - s.x(1)), lambda);
    return Point<2>(pi * std::cos(pi * s.x(0)) * tp, std::sin(pi * s.x(0)) * dt_factor(s.x(1)));
  };
  c.lap_u = [lambda, pi](const SamplePoint<2>& s) {
    return -pi * pi * std::sin(pi * s.x(0)) * std::pow(std::abs(1.0 - s.x(1)), lambda);
  };
  c.f = [lambda, pi, dt_factor](const SamplePoint<2>& s) {
    const double sx = std::sin(pi * s.x(0));
    return sx * dt_factor(s.x(1)) + pi * pi * sx * std::pow(std::abs(1.0 - s.x(1)), lambda);
  };
  return c;
}

// u written in parameter coordinates of the annulus map; physical
// derivatives follow from the chain rule through the map.
inline ProblemCase<3> ex5() {
  ProblemCase<3> c;
  c.id = "ex5";
  c.description = "quarter annulus x (0,1), u = (1-s)s^2 (1-r)r^2 (1-t)t^2 in parameter coordinates";
  c.patch = PatchId::quarter_annulus_time;
  auto geo = std::make_shared<GeometryMap<3>>(benchmark_patch<3>(c.patch, 1.0));
  auto q = [](double s) { return (1 - s) * s * s; };
  auto q1 = [](double s) { return 2 * s - 3 * s * s; };
  auto q2 = [](double s) { return 2 - 6 * s; };
  auto parametric = [=](const Point<3>& xi, Point<3>& g, Matrix<3>& h) {
    const double a = q(xi(0)), b = q(xi(1)), t = xi(2);
    const double ct = (1 - t) * t * t, ct1 = 2 * t - 3 * t * t, ct2 = 2 - 6 * t;
    const double a1 = q1(xi(0)), b1 = q1(xi(1)), a2 = q2(xi(0)), b2 = q2(xi(1));
    g << a1 * b * ct, a * b1 * ct, a * b * ct1;
    h << a2 * b * ct, a1 * b1 * ct, a1 * b * ct1, a1 * b1 * ct, a * b2 * ct, a * b1 * ct1, a1 * b * ct1, a * b1 * ct1,
        a * b * ct2;
    return a * b * ct;
  };
  c.u = [=](const SamplePoint<3>& s) {
    Point<3> g;
    Matrix<3> h;
    return parametric(s.xi, g, h);
  };
  c.grad_u = [=](const SamplePoint<3>& s) {
    Point<3> g;
    Matrix<3> h;
    parametric(s.xi, g, h);
    return geo->evaluate(s.xi, 1).grad(g);
  };
  c.lap_u = [=](const SamplePoint<3>& s) {
    Point<3> g;
    Matrix<3> h;
    parametric(s.xi, g, h);
    const Matrix<3> H = geo->evaluate(s.xi, 2).hessian(g, h);
    return H(0, 0) + H(1, 1);
  };
  c.f = [=](const SamplePoint<3>& s) {
    Point<3> g;
    Matrix<3> h;
    parametric(s.xi, g, h);
    const auto pg = geo->evaluate(s.xi, 2);
    const Matrix<3> H = pg.hessian(g, h);
    return pg.grad(g)(2) - H(0, 0) - H(1, 1);
  };
  return c;
}

template <int Dim>
void finish_case(ProblemCase<Dim>& c) {
  c.friedrichs = friedrichs_constant(c.patch);
  c.u_D = c.u;
  c.u_0 = c.u;
  c.grad_u0 = c.grad_u;
}

}  // namespace detail

/// Benchmark catalogue: ex1, ex2, ex3, ex4 (space-time Dim = 2) and ex5 (Dim = 3).
template <int Dim>
ProblemCase<Dim> example_case(std::string_view id, const ExampleParams& params = {}) {
  ProblemCase<Dim> c;
  if constexpr (Dim == 2) {
    if (id == "ex1") {
      c = detail::ex1();
    } else if (id == "ex2") {
      c = detail::ex2(params.k1, params.k2);
    } else if (id == "ex3") {
      c = detail::ex3();
    } else if (id == "ex4") {
      c = detail::ex4(params.lambda);
    } else if (id == "ex5") {
      throw std::invalid_argument("example ex5 is three-dimensional in space-time");
    } else {
      throw std::invalid_argument("unknown example: " + std::string(id));
    }
  } else if constexpr (Dim == 3) {
    if (id == "ex5") {
      c = detail::ex5();
    } else if (id == "ex1" || id == "ex2" || id == "ex3" || id == "ex4") {
      throw std::invalid_argument("example " + std::string(id) + " is two-dimensional in space-time");
    } else {
      throw std::invalid_argument("unknown example: " + std::string(id));
    }
  } else {
    throw std::invalid_argument("unsupported dimension");
  }
  detail::finish_case(c);
  return c;
}

/// Space-time dimension of a catalogue entry.
inline int example_dimension(std::string_view id) {
  if (id == "ex1" || id == "ex2" || id == "ex3" || id == "ex4") return 2;
  if (id == "ex5") return 3;
  throw std::invalid_argument("unknown example: " + std::string(id));
}

struct ExampleInfo {
  std::string id;
  std::string patch;
  std::string description;
};

inline std::vector<ExampleInfo> list_examples() {
  return {
      {"ex1", "unit_interval_time", detail::ex1().description},
      {"ex2", "unit_interval_time", "trigonometric u = sin(k1 pi x) sin(k2 pi t); parameters k1, k2"},
      {"ex3", "unit_interval_time", detail::ex3().description},
      {"ex4", "unit_interval_time", "u = sin(pi x) |1-t|^lambda on (0,1)x(0,2); parameter lambda > 0"},
      {"ex5", "quarter_annulus_time", "quarter annulus x (0,1), polynomial in parameter coordinates"},
  };
}

}  // namespace stiga
