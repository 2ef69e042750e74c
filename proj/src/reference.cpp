#include "optree/reference.hpp"

#include <cmath>

#include "optree/errors.hpp"

namespace optree {

namespace {

double log_beta_pdf(double x, double a, double b) {
  if (x <= 0.0 || x >= 1.0) return -std::numeric_limits<double>::infinity();
  return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
         (b - 1.0) * std::log1p(-x);
}

double draw_beta(std::mt19937_64& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  double x = ga(rng), y = gb(rng);
  return x / (x + y);
}

// Gamma(shape, scale) truncated to (0,1); rejection draw.
double draw_truncated_gamma(std::mt19937_64& rng, double shape, double scale) {
  std::gamma_distribution<double> g(shape, scale);
  for (;;) {
    double x = g(rng);
    if (x > 0.0 && x < 1.0) return x;
  }
}

// P(Gamma(2, scale) <= 1) for the truncation constants.
double gamma2_cdf_at_one(double scale) {
  double t = 1.0 / scale;
  return 1.0 - std::exp(-t) * (1.0 + t);
}

ReferenceDensity make_ex1() {
  ReferenceDensity d;
  d.id = "ex1";
  d.p = 2;
  d.support = "[0,1]^2";
  d.pdf = [](const double* x) {
    double f = 0.0;
    if (x[0] >= 0.78 && x[0] <= 0.80 && x[1] >= 0.2 && x[1] <= 0.8) f += 0.35 / 0.012;
    if (x[0] >= 0.25 && x[0] <= 0.4 && x[1] > 0.0 && x[1] < 1.0)
      f += 0.65 / 0.15 * std::exp(log_beta_pdf(x[1], 100.0, 120.0));
    return f;
  };
  d.draw = [](std::mt19937_64& rng, double* out) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (unif(rng) < 0.35) {
      out[0] = 0.78 + 0.02 * unif(rng);
      out[1] = 0.2 + 0.6 * unif(rng);
    } else {
      out[0] = 0.25 + 0.15 * unif(rng);
      out[1] = draw_beta(rng, 100.0, 120.0);
    }
  };
  return d;
}

ReferenceDensity make_ex2() {
  ReferenceDensity d;
  d.id = "ex2";
  d.p = 4;
  d.support = "[0,1]^4";
  d.pdf = [](const double* x) {
    for (int j = 0; j < 4; ++j)
      if (x[j] < 0.0 || x[j] > 1.0) return 0.0;
    const double sig2 = 0.01;
    double dx = x[0] - 0.6, dy = x[1] - 0.4;
    return std::exp(-(dx * dx + dy * dy) / (2.0 * sig2)) / (2.0 * M_PI * sig2);
  };
  d.draw = [](std::mt19937_64& rng, double* out) {
    std::normal_distribution<double> nx(0.6, 0.1), ny(0.4, 0.1);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    do {
      out[0] = nx(rng);
    } while (out[0] < 0.0 || out[0] > 1.0);
    do {
      out[1] = ny(rng);
    } while (out[1] < 0.0 || out[1] > 1.0);
    out[2] = unif(rng);
    out[3] = unif(rng);
  };
  return d;
}

ReferenceDensity make_ex3() {
  ReferenceDensity d;
  d.id = "ex3";
  d.p = 1;
  d.support = "(0,1)";
  const double z = gamma2_cdf_at_one(0.1);
  d.pdf = [z](const double* x) {
    if (x[0] <= 0.0 || x[0] >= 1.0) return 0.0;
    // Gamma(2, 0.1) density x/scale^2 e^{-x/scale}, renormalized on (0,1).
    return x[0] * std::exp(-x[0] / 0.1) / (0.01 * z);
  };
  d.draw = [](std::mt19937_64& rng, double* out) {
    out[0] = draw_truncated_gamma(rng, 2.0, 0.1);
  };
  return d;
}

ReferenceDensity make_ex4() {
  ReferenceDensity d;
  d.id = "ex4";
  d.p = 2;
  d.support = "[0,1]^2";
  d.pdf = [](const double* x) {
    if (x[0] < 0.0 || x[0] > 1.0) return 0.0;
    if (x[1] <= 0.0 || x[1] >= 1.0) return 0.0;
    return 0.8 * std::exp(log_beta_pdf(x[1], 2.0, 10.0)) +
           0.2 * std::exp(log_beta_pdf(x[1], 7.0, 2.0));
  };
  d.draw = [](std::mt19937_64& rng, double* out) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    out[0] = unif(rng);
    out[1] = unif(rng) < 0.8 ? draw_beta(rng, 2.0, 10.0) : draw_beta(rng, 7.0, 2.0);
  };
  return d;
}

ReferenceDensity make_ex5() {
  ReferenceDensity d;
  d.id = "ex5";
  d.p = 5;
  d.support = "linear image of [0,1]^5";
  const double z4 = gamma2_cdf_at_one(1.0);           // Gamma(2,1) on (0,1)
  const double z5 = 1.0 - std::exp(-0.5);             // Gamma(1,2) = Exp(2) on (0,1)
  d.pdf = [z4, z5](const double* y) {
    // y = (x1, x1/3 + 2 x2/3, x3, x4, x3/5 + 4 x5/5); Jacobian (3/2)(5/4).
    double x1 = y[0];
    double x2 = (3.0 * y[1] - y[0]) / 2.0;
    double x3 = y[2];
    double x4 = y[3];
    double x5 = (5.0 * y[4] - y[2]) / 4.0;
    for (double x : {x1, x2, x3, x4, x5})
      if (x <= 0.0 || x >= 1.0) return 0.0;
    double f1 = std::exp(log_beta_pdf(x1, 2.0, 8.0));
    double f2 = std::exp(log_beta_pdf(x2, 8.0, 2.0));
    double f4 = x4 * std::exp(-x4) / z4;
    double f5 = 0.5 * std::exp(-x5 / 2.0) / z5;
    return f1 * f2 * f4 * f5 * 1.5 * 1.25;
  };
  d.draw = [](std::mt19937_64& rng, double* out) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double x1 = draw_beta(rng, 2.0, 8.0);
    double x2 = draw_beta(rng, 8.0, 2.0);
    double x3 = unif(rng);
    double x4 = draw_truncated_gamma(rng, 2.0, 1.0);
    double x5 = draw_truncated_gamma(rng, 1.0, 2.0);
    out[0] = x1;
    out[1] = x1 / 3.0 + 2.0 * x2 / 3.0;
    out[2] = x3;
    out[3] = x4;
    out[4] = x3 / 5.0 + 4.0 * x5 / 5.0;
  };
  return d;
}

}  // namespace

ReferenceDensity reference(const std::string& id) {
  if (id == "ex1") return make_ex1();
  if (id == "ex2") return make_ex2();
  if (id == "ex3") return make_ex3();
  if (id == "ex4") return make_ex4();
  if (id == "ex5") return make_ex5();
  throw ConfigError("reference: unknown example id '" + id + "' (expected ex1..ex5)");
}

}  // namespace optree
