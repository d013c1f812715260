#pragma once

// Every differentiable op wrapped as a scalar function with random inputs,
// for finite-difference checks.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mncastle/autodiff.hpp"
#include "test_util.hpp"

namespace mncastle::testing {

struct OpCase {
  std::string name;
  Builder f;
  std::function<std::vector<Tensor>(Rng&)> inputs;
};

inline Tensor positive(Shape shape, Rng& rng) { return random_tensor(std::move(shape), rng, 0.5, 2.0); }

inline std::vector<OpCase> op_cases() {
  using V = std::span<const ad::Var>;
  std::vector<OpCase> cases;
  auto two = [](Shape a, Shape b) {
    return [a, b](Rng& rng) { return std::vector<Tensor>{random_tensor(a, rng), random_tensor(b, rng)}; };
  };
  auto one = [](Shape a) { return [a](Rng& rng) { return std::vector<Tensor>{random_tensor(a, rng)}; }; };
  // A fixed weighting turns every op into a scalar with a non-trivial adjoint.
  auto weigh = [](ad::Tape& tape, ad::Var v) {
    Tensor w(v.shape());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
    return ad::sum(v * tape.constant(w));
  };

  cases.push_back({"add", [=](ad::Tape& t, V x) { return weigh(t, x[0] + x[1]); }, two({2, 3}, {3})});
  cases.push_back({"sub", [=](ad::Tape& t, V x) { return weigh(t, x[0] - x[1]); }, two({2, 3}, {2, 1})});
  cases.push_back({"mul", [=](ad::Tape& t, V x) { return weigh(t, x[0] * x[1]); }, two({2, 3}, {2, 3})});
  cases.push_back({"div", [=](ad::Tape& t, V x) { return weigh(t, x[0] / x[1]); },
                   [](Rng& r) { return std::vector<Tensor>{random_tensor({3}, r), positive({3}, r)}; }});
  cases.push_back({"neg", [=](ad::Tape& t, V x) { return weigh(t, -x[0]); }, one({4})});
  cases.push_back({"scale", [=](ad::Tape& t, V x) { return weigh(t, 2.5 * x[0]); }, one({4})});
  cases.push_back({"add_scalar", [=](ad::Tape& t, V x) { return weigh(t, ad::square(x[0] + 1.5)); }, one({4})});
  cases.push_back({"matmul", [=](ad::Tape& t, V x) { return weigh(t, ad::matmul(x[0], x[1])); },
                   two({2, 3, 4}, {4, 2})});
  cases.push_back({"transpose", [=](ad::Tape& t, V x) { return weigh(t, ad::transpose(x[0])); }, one({2, 3, 4})});
  cases.push_back({"exp", [=](ad::Tape& t, V x) { return weigh(t, ad::exp(x[0])); }, one({5})});
  cases.push_back({"log", [=](ad::Tape& t, V x) { return weigh(t, ad::log(x[0])); },
                   [](Rng& r) { return std::vector<Tensor>{positive({5}, r)}; }});
  cases.push_back({"square", [=](ad::Tape& t, V x) { return weigh(t, ad::square(x[0])); }, one({5})});
  cases.push_back({"sqrt", [=](ad::Tape& t, V x) { return weigh(t, ad::sqrt(x[0])); },
                   [](Rng& r) { return std::vector<Tensor>{positive({5}, r)}; }});
  cases.push_back({"softplus", [=](ad::Tape& t, V x) { return weigh(t, ad::softplus(x[0])); }, one({5})});
  cases.push_back({"clamp_min", [=](ad::Tape& t, V x) { return weigh(t, ad::clamp_min(x[0], -5.0)); }, one({5})});
  cases.push_back({"sum", [=](ad::Tape&, V x) { return ad::sum(ad::square(x[0])); }, one({2, 3})});
  cases.push_back({"sum_last", [=](ad::Tape& t, V x) { return weigh(t, ad::sum_last(x[0])); }, one({2, 3})});
  cases.push_back({"mean", [=](ad::Tape&, V x) { return ad::mean(ad::square(x[0])); }, one({2, 3})});
  cases.push_back({"logsumexp", [=](ad::Tape&, V x) { return ad::logsumexp(x[0]); }, one({6})});
  cases.push_back({"logsumexp_last", [=](ad::Tape& t, V x) { return weigh(t, ad::logsumexp_last(x[0])); },
                   one({3, 4})});
  cases.push_back({"triangular_solve",
                   [=](ad::Tape& t, V x) { return weigh(t, ad::triangular_solve(x[0], x[1])); },
                   [](Rng& r) {
                     Tensor l = random_tensor({3, 3}, r);
                     for (std::size_t i = 0; i < 3; ++i) {
                       for (std::size_t j = i + 1; j < 3; ++j) l[i * 3 + j] = 0.0;
                       l[i * 3 + i] = r.uniform(1.0, 2.0);
                     }
                     return std::vector<Tensor>{l, random_tensor({3, 2}, r)};
                   }});
  cases.push_back({"triangular_solve_transposed",
                   [=](ad::Tape& t, V x) { return weigh(t, ad::triangular_solve(x[0], x[1], true)); },
                   [](Rng& r) {
                     Tensor l = random_tensor({3, 3}, r);
                     for (std::size_t i = 0; i < 3; ++i) {
                       for (std::size_t j = i + 1; j < 3; ++j) l[i * 3 + j] = 0.0;
                       l[i * 3 + i] = r.uniform(1.0, 2.0);
                     }
                     return std::vector<Tensor>{l, random_tensor({2, 3, 2}, r)};
                   }});
  cases.push_back({"cholesky",
                   [=](ad::Tape& t, V x) {
                     // Symmetrize so both triangles of the perturbed input count.
                     return weigh(t, ad::cholesky(0.5 * (x[0] + ad::transpose(x[0]))));
                   },
                   [](Rng& r) { return std::vector<Tensor>{random_spd(4, r)}; }});
  cases.push_back({"index_map",
                   [=](ad::Tape& t, V x) { return weigh(t, ad::index_map(x[0], Shape{2, 3}, {3, -1, 0, 0, 2, 1})); },
                   one({4})});
  cases.push_back({"reshape", [=](ad::Tape& t, V x) { return weigh(t, ad::square(ad::reshape(x[0], {3, 2}))); },
                   one({2, 3})});
  cases.push_back({"nilpotent_inverse",
                   [=](ad::Tape& t, V x) {
                     std::vector<std::ptrdiff_t> src(2 * 9, -1);
                     // Strict lower triangle of two 3x3 slices from 6 free values.
                     const std::size_t pos[] = {3, 6, 7};
                     for (std::size_t b = 0; b < 2; ++b)
                       for (std::size_t i = 0; i < 3; ++i) src[b * 9 + pos[i]] = static_cast<std::ptrdiff_t>(b * 3 + i);
                     return weigh(t, ad::nilpotent_inverse(ad::index_map(x[0], Shape{2, 3, 3}, src)));
                   },
                   one({6})});
  cases.push_back({"rbf_gram",
                   [=](ad::Tape& t, V x) { return weigh(t, ad::rbf_gram(x[0], x[1], x[2], x[3])); },
                   [](Rng& r) {
                     return std::vector<Tensor>{random_tensor({4}, r, 0.0, 3.0), random_tensor({3}, r, 0.0, 3.0),
                                                Tensor::scalar(r.uniform(0.5, 2.0)),
                                                Tensor::scalar(r.uniform(0.5, 2.0))};
                   }});
  cases.push_back({"pl_log_prob",
                   [=](ad::Tape& t, V x) {
                     const std::vector<std::vector<std::size_t>> orders{{2, 0, 1, 3}, {0, 1, 2, 3}, {3, 1, 0, 2}};
                     return weigh(t, ad::pl_log_prob(x[0], orders));
                   },
                   one({4})});
  return cases;
}

}  // namespace mncastle::testing
