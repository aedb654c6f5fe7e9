#pragma once

#include <filesystem>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "dualx/ops.hpp"

// Shared test utilities: finite-difference gradient checking in double and a
// scratch directory helper.

namespace dualx::testing {

// Central finite differences (h = 1e-3) against the gradients already
// accumulated in `inputs`. Relative error uses a small floor so near-zero
// gradients compare by absolute difference.
template <class Eval>
double fd_max_rel_error(Eval&& eval, const std::vector<TensorT<double>*>& inputs,
                        double h = 1e-3) {
  double worst = 0.0;
  for (TensorT<double>* t : inputs) {
    for (std::int64_t i = 0; i < t->numel(); ++i) {
      double orig = t->values()[static_cast<size_t>(i)];
      t->values_mut()[static_cast<size_t>(i)] = orig + h;
      double fp = eval();
      t->values_mut()[static_cast<size_t>(i)] = orig - h;
      double fm = eval();
      t->values_mut()[static_cast<size_t>(i)] = orig;
      double fd = (fp - fm) / (2.0 * h);
      double an = t->grad()[static_cast<size_t>(i)];
      double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-3});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

// Runs `build` twice: once on a tape to get analytic gradients, then
// repeatedly without a tape for the finite differences.
template <class Build>
double gradcheck(Build&& build, std::vector<TensorT<double>*> inputs, double h = 1e-3) {
  for (auto* t : inputs) t->set_requires_grad(true);
  TapeT<double> tape;
  TensorT<double> loss = build(&tape);
  tape.backward(loss);
  auto eval = [&]() { return build(static_cast<TapeT<double>*>(nullptr)).item(); };
  double err = fd_max_rel_error(eval, inputs, h);
  for (auto* t : inputs) t->set_requires_grad(false);
  return err;
}

inline std::string scratch_dir(const std::string& name) {
  namespace fs = std::filesystem;
  fs::path p = fs::temp_directory_path() / ("dualx_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

inline bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (std::memcmp(&a[i], &b[i], sizeof(float)) != 0) return false;
  }
  return true;
}

}  // namespace dualx::testing
