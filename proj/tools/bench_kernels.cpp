// Benchmark of the OpenMP kernels against their serial references. Each row
// reports wall time per call and the speedup; results are checked to be
// bit-identical before timing.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "dualx/image_ops.hpp"
#include "dualx/kernels.hpp"
#include "dualx/rng.hpp"

using namespace dualx;

namespace {

template <class F>
double time_call(F&& f, int reps) {
  f();  // warm up
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<float> random_vec(std::int64_t n, Rng& rng) {
  std::vector<float> v(static_cast<size_t>(n));
  for (auto& x : v) x = static_cast<float>(rng.next_uniform(-1.0, 1.0));
  return v;
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
  std::printf("%-28s serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx   %s\n", name,
              serial_ms, parallel_ms, serial_ms / parallel_ms,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
  Rng rng(123);
  std::printf("threads: %d\n", max_threads());

  {
    const std::int64_t m = 256, k = 256, n = 256, batch = 4;
    auto a = random_vec(batch * m * k, rng), b = random_vec(batch * k * n, rng);
    std::vector<float> c_s(static_cast<size_t>(batch * m * n)),
        c_p(static_cast<size_t>(batch * m * n));
    std::vector<std::int64_t> ao(batch), bo(batch);
    for (std::int64_t i = 0; i < batch; ++i) {
      ao[static_cast<size_t>(i)] = i * m * k;
      bo[static_cast<size_t>(i)] = i * k * n;
    }
    double ts = time_call(
        [&] { kernels::serial::matmul(a.data(), b.data(), c_s.data(), batch, m, k, n, ao.data(), bo.data()); },
        3);
    double tp = time_call(
        [&] { kernels::matmul(a.data(), b.data(), c_p.data(), batch, m, k, n, ao.data(), bo.data()); },
        3);
    report("matmul 4x256x256x256", ts, tp,
           std::memcmp(c_s.data(), c_p.data(), c_s.size() * sizeof(float)) == 0);
  }

  {
    const std::int64_t B = 2, cin = 16, cout = 32, H = 128, W = 128;
    auto x = random_vec(B * cin * H * W, rng), w = random_vec(cout * cin * 9, rng),
         bias = random_vec(cout, rng);
    std::vector<float> y_s(static_cast<size_t>(B * cout * H * W)), y_p(y_s.size());
    double ts = time_call(
        [&] { kernels::serial::conv2d_3x3(x.data(), w.data(), bias.data(), y_s.data(), B, cin, cout, H, W); },
        3);
    double tp = time_call(
        [&] { kernels::conv2d_3x3(x.data(), w.data(), bias.data(), y_p.data(), B, cin, cout, H, W); },
        3);
    report("conv2d 2x16->32 @128^2", ts, tp,
           std::memcmp(y_s.data(), y_p.data(), y_s.size() * sizeof(float)) == 0);
  }

  {
    const std::int64_t H = 1024, W = 1024;
    auto x = random_vec(H * W, rng);
    std::vector<float> y_s(static_cast<size_t>(H * W)), y_p(y_s.size());
    std::vector<double> k(21);
    double total = 0;
    for (int i = -10; i <= 10; ++i) {
      k[static_cast<size_t>(i + 10)] = std::exp(-0.5 * i * i / 4.0);
      total += k[static_cast<size_t>(i + 10)];
    }
    for (auto& v : k) v /= total;
    double ts = time_call([&] { kernels::serial::filter_rows(x.data(), y_s.data(), H, W, k.data(), 10); }, 5);
    double tp = time_call([&] { kernels::filter_rows(x.data(), y_p.data(), H, W, k.data(), 10); }, 5);
    report("gaussian row pass 1024^2", ts, tp,
           std::memcmp(y_s.data(), y_p.data(), y_s.size() * sizeof(float)) == 0);
  }

  {
    const std::int64_t H = 1024, W = 1024, Wo = 256;
    auto x = random_vec(H * W, rng);
    std::vector<float> y_s(static_cast<size_t>(H * Wo)), y_p(y_s.size());
    auto tb = detail::make_resample_table(W, Wo, ResizeMode::Bicubic);
    double ts = time_call([&] { kernels::serial::resample_rows(x.data(), y_s.data(), H, W, Wo, tb); }, 5);
    double tp = time_call([&] { kernels::resample_rows(x.data(), y_p.data(), H, W, Wo, tb); }, 5);
    report("bicubic rows 1024->256", ts, tp,
           std::memcmp(y_s.data(), y_p.data(), y_s.size() * sizeof(float)) == 0);
  }

  return 0;
}
