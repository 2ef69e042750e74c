#pragma once

#include <functional>
#include <random>
#include <string>

namespace optree {

// One of the built-in benchmark densities: an exact evaluator on its data
// space together with an exact sampler.
struct ReferenceDensity {
  std::string id;
  int p = 0;
  std::string support;
  std::function<double(const double*)> pdf;
  std::function<void(std::mt19937_64&, double*)> draw;
};

// Known ids:
//   ex1  mixture of a uniform block and a uniform-by-Beta strip on [0,1]^2
//   ex2  bivariate normal bump times two uniform dimensions on [0,1]^4
//   ex3  strongly skewed truncated Gamma(2, 0.1) on (0,1)
//   ex4  uniform by (0.8 Beta(2,10) + 0.2 Beta(7,2)) on [0,1]^2
//   ex5  5-dimensional linear image of Beta/uniform/truncated-Gamma factors
ReferenceDensity reference(const std::string& id);

}  // namespace optree
