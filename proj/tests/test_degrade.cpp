#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dualx/degrade.hpp"
#include "dualx/synthetic.hpp"
#include "helpers.hpp"

using namespace dualx;

namespace {

double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

double mse(const std::vector<float>& a, const std::vector<float>& b) {
  double m = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    m += d * d;
  }
  return m / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("gaussian blur basics") {
  Rng rng(1);
  Tensor frame = Tensor::uniform({3, 16, 16}, 0.0f, 1.0f, rng);
  // sigma 0 is the identity
  CHECK(gaussian_blur(frame, 0.0).values() == frame.values());

  // constant frames are unchanged (normalized kernel, reflect borders)
  Tensor cst = Tensor::full({1, 12, 12}, 0.42f);
  Tensor blurred = gaussian_blur(cst, 2.0);
  CHECK(max_abs_diff(blurred.values(), cst.values()) <= 1e-6);

  // mean is preserved
  Tensor b2 = gaussian_blur(frame, 1.4);
  double m0 = 0, m1 = 0;
  for (float v : frame.values()) m0 += v;
  for (float v : b2.values()) m1 += v;
  CHECK(std::abs(m0 - m1) / static_cast<double>(frame.numel()) <= 1e-6);
}

TEST_CASE("blur impulse response matches the sampled gaussian") {
  const double sigma = 1.25;
  Tensor frame = Tensor::zeros({1, 31, 31});
  frame.values_mut()[static_cast<size_t>(15 * 31 + 15)] = 1.0f;
  Tensor out = gaussian_blur(frame, sigma);
  // closed form: normalized separable kernel product
  double k[21], total = 0;
  for (int i = -10; i <= 10; ++i) {
    k[i + 10] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += k[i + 10];
  }
  for (auto& v : k) v /= total;
  for (int dy = -10; dy <= 10; ++dy)
    for (int dx = -10; dx <= 10; ++dx)
      CHECK(std::abs(static_cast<double>(out.at({0, 15 + dy, 15 + dx})) -
                     k[dy + 10] * k[dx + 10]) <= 1e-4);
}

TEST_CASE("resize preserves constants in every mode") {
  for (auto mode : {ResizeMode::Bicubic, ResizeMode::Bilinear, ResizeMode::Nearest}) {
    Tensor cst = Tensor::full({1, 12, 16}, 0.5f);
    for (auto [oh, ow] : {std::pair<std::int64_t, std::int64_t>{6, 8},
                          std::pair<std::int64_t, std::int64_t>{24, 32},
                          std::pair<std::int64_t, std::int64_t>{5, 7}}) {
      Tensor out = resize_frame(cst, oh, ow, mode);
      CHECK(out.shape() == Shape{1, oh, ow});
      CHECK(max_abs_diff(out.values(), std::vector<float>(static_cast<size_t>(oh * ow), 0.5f)) <=
            1e-6);
    }
  }
}

TEST_CASE("resize at scale 1 is the identity") {
  Rng rng(2);
  Tensor frame = Tensor::uniform({3, 9, 11}, 0.0f, 1.0f, rng);
  Tensor out = resize_frame_scale(frame, 1.0, ResizeMode::Bicubic);
  CHECK(max_abs_diff(out.values(), frame.values()) <= 1e-6);
}

TEST_CASE("downscale matches a direct kernel-sum oracle") {
  // 8x8 ramp halved: reproduce box prefilter + bicubic sampling by hand
  Tensor frame(Shape{1, 8, 8});
  for (std::int64_t y = 0; y < 8; ++y)
    for (std::int64_t x = 0; x < 8; ++x)
      frame.values_mut()[static_cast<size_t>(y * 8 + x)] =
          static_cast<float>((y * 8 + x) / 64.0);
  Tensor out = resize_frame(frame, 4, 4, ResizeMode::Bicubic);

  auto reflect = [](std::int64_t i, std::int64_t n) {
    while (i < 0 || i >= n) {
      if (i < 0) i = -i - 1;
      if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
  };
  auto cubic = [](double x) {
    constexpr double a = -0.5;
    x = std::abs(x);
    if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
    if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
    return 0.0;
  };
  // independent recomputation in double over the full plane
  std::vector<double> src(64);
  for (int i = 0; i < 64; ++i) src[static_cast<size_t>(i)] = i / 64.0;
  // box prefilter width 2 (left 0, right 1), rows then cols
  std::vector<double> boxed(64), boxed2(64);
  for (std::int64_t y = 0; y < 8; ++y)
    for (std::int64_t x = 0; x < 8; ++x)
      boxed[static_cast<size_t>(y * 8 + x)] =
          0.5 * (src[static_cast<size_t>(y * 8 + x)] +
                 src[static_cast<size_t>(y * 8 + reflect(x + 1, 8))]);
  for (std::int64_t y = 0; y < 8; ++y)
    for (std::int64_t x = 0; x < 8; ++x)
      boxed2[static_cast<size_t>(y * 8 + x)] =
          0.5 * (boxed[static_cast<size_t>(y * 8 + x)] +
                 boxed[static_cast<size_t>(reflect(y + 1, 8) * 8 + x)]);
  // bicubic sample rows then cols
  auto sample_axis = [&](std::int64_t i) {
    double sc = (i + 0.5) * 2.0 - 0.5;
    std::int64_t s = static_cast<std::int64_t>(std::floor(sc)) - 1;
    std::array<double, 4> w{};
    double tot = 0;
    for (int t = 0; t < 4; ++t) {
      w[static_cast<size_t>(t)] = cubic(sc - static_cast<double>(s + t));
      tot += w[static_cast<size_t>(t)];
    }
    for (auto& v : w) v /= tot;
    return std::pair<std::int64_t, std::array<double, 4>>(s, w);
  };
  for (std::int64_t oy = 0; oy < 4; ++oy)
    for (std::int64_t ox = 0; ox < 4; ++ox) {
      auto [sx, wx] = sample_axis(ox);
      auto [sy, wy] = sample_axis(oy);
      double mid[4];
      for (int ty = 0; ty < 4; ++ty) {
        double acc = 0;
        for (int tx = 0; tx < 4; ++tx)
          acc += wx[static_cast<size_t>(tx)] *
                 boxed2[static_cast<size_t>(reflect(sy + ty, 8) * 8 + reflect(sx + tx, 8))];
        mid[ty] = acc;
      }
      double expect = 0;
      for (int ty = 0; ty < 4; ++ty) expect += wy[static_cast<size_t>(ty)] * mid[ty];
      CHECK(static_cast<double>(out.at({0, oy, ox})) == doctest::Approx(expect).epsilon(1e-5));
    }
}

TEST_CASE("resize rejects empty outputs") {
  Tensor frame = Tensor::ones({1, 4, 4});
  CHECK_THROWS_AS(resize_frame_scale(frame, 0.01, ResizeMode::Bicubic), ConfigError);
}

TEST_CASE("gaussian noise determinism and statistics") {
  Rng r1(77), r2(77);
  Tensor frame = Tensor::full({1, 8, 8}, 0.5f);
  Tensor a = add_gaussian_noise(frame, 0.05, r1);
  Tensor b = add_gaussian_noise(frame, 0.05, r2);
  CHECK(dualx::testing::same_bits(a.values(), b.values()));

  Rng r3(5);
  CHECK(add_gaussian_noise(frame, 0.0, r3).values() == frame.values());

  // sample mean of 1e6 draws within 3 sigma / 1000
  Rng r4(6);
  const int n = 1000000;
  Tensor big = Tensor::zeros({1, 1000, 1000});
  Tensor noisy = add_gaussian_noise(big, 1.0, r4);
  double acc = 0;
  for (float v : noisy.values()) acc += v;
  CHECK(std::abs(acc / n) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("jpeg proxy closed cases") {
  Rng rng(3);
  // quality 100 gives the all-ones table and a near-identity round trip
  Tensor frame = Tensor::uniform({1, 16, 16}, 0.1f, 0.9f, rng);
  Tensor q100 = jpeg_proxy(frame, 100);
  CHECK(mse(q100.values(), frame.values()) < 1e-4);

  // constant blocks survive exactly up to rounding: only the DC coefficient
  Tensor cst = Tensor::full({1, 8, 8}, 0.6f);
  Tensor qc = jpeg_proxy(cst, 50);
  double spread = 0;
  for (float v : qc.values())
    spread = std::max(spread, std::abs(static_cast<double>(v) - static_cast<double>(qc.values()[0])));
  CHECK(spread <= 1e-6);  // stays constant
  CHECK(std::abs(static_cast<double>(qc.values()[0]) - 0.6) <= 16.0 / 2.0 / 255.0 + 1e-9);

  CHECK_THROWS_AS(jpeg_proxy(frame, 0), ConfigError);
  CHECK_THROWS_AS(jpeg_proxy(frame, 101), ConfigError);
}

TEST_CASE("jpeg proxy is idempotent at fixed quality") {
  Rng rng(4);
  for (int quality : {30, 50, 75, 95}) {
    Tensor frame = Tensor::uniform({3, 24, 24}, 0.0f, 1.0f, rng);
    Tensor once = jpeg_proxy(frame, quality);
    Tensor twice = jpeg_proxy(once, quality);
    CHECK(max_abs_diff(once.values(), twice.values()) <= 1e-5);
  }
  // non-multiple-of-8 extents: the fixed point holds on full blocks; the
  // zero-padded edge blocks see fresh padding on the second pass and are
  // only required to stay bounded
  Tensor odd = Tensor::uniform({1, 13, 19}, 0.0f, 1.0f, rng);
  Tensor once = jpeg_proxy(odd, 60);
  Tensor twice = jpeg_proxy(once, 60);
  double interior = 0.0, edge = 0.0;
  for (std::int64_t y = 0; y < 13; ++y)
    for (std::int64_t x = 0; x < 19; ++x) {
      double d = std::abs(static_cast<double>(once.at({0, y, x})) -
                          static_cast<double>(twice.at({0, y, x})));
      if (y < 8 && x < 16)
        interior = std::max(interior, d);
      else
        edge = std::max(edge, d);
    }
  CHECK(interior <= 1e-5);
  CHECK(edge <= 0.5);
}

TEST_CASE("single-block jpeg matches a scalar oracle") {
  Rng rng(5);
  Tensor frame = Tensor::uniform({1, 8, 8}, 0.0f, 1.0f, rng);
  Tensor out = jpeg_proxy(frame, 50);
  // direct recomputation: 2D DCT-II, quantize with the q50 table, invert
  const int base[64] = {16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
                        14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
                        18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
                        49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
  double q[64];
  for (int i = 0; i < 64; ++i) q[i] = std::max(1, std::min(255, (base[i] * 100 + 50) / 100));
  constexpr double pi = 3.14159265358979323846;
  auto cu = [](int u) { return u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0); };
  double coef[64];
  for (int v = 0; v < 8; ++v)
    for (int u = 0; u < 8; ++u) {
      double acc = 0;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          acc += (static_cast<double>(frame.values()[static_cast<size_t>(y * 8 + x)]) * 255.0 -
                  128.0) *
                 std::cos((2 * x + 1) * u * pi / 16.0) * std::cos((2 * y + 1) * v * pi / 16.0);
      coef[v * 8 + u] = cu(u) * cu(v) * acc;
    }
  for (int i = 0; i < 64; ++i) coef[i] = std::round(coef[i] / q[i]) * q[i];
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double acc = 0;
      for (int v = 0; v < 8; ++v)
        for (int u = 0; u < 8; ++u)
          acc += cu(u) * cu(v) * coef[v * 8 + u] * std::cos((2 * x + 1) * u * pi / 16.0) *
                 std::cos((2 * y + 1) * v * pi / 16.0);
      double expect = (acc + 128.0) / 255.0;
      CHECK(static_cast<double>(out.at({0, y, x})) == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("bicubic down4 contract") {
  Tensor cst = Tensor::full({1, 3, 2, 16, 16}, 0.3f);
  Tensor down = bicubic_down4(cst);
  CHECK(down.shape() == Shape{1, 3, 2, 4, 4});
  CHECK(max_abs_diff(down.values(), std::vector<float>(down.values().size(), 0.3f)) <= 1e-6);
  CHECK_THROWS_AS(bicubic_down4(Tensor::zeros({1, 3, 1, 15, 16})), ShapeError);
}

TEST_CASE("degrade_clip determinism and frame consistency") {
  Tensor clip = make_moving_clip<float>(3, 16, 16, 1.0, 0.5, 99);
  DegradationConfig cfg;
  cfg.seed = 1234;
  auto [lq1, d1] = degrade_clip(clip, cfg);
  auto [lq2, d2] = degrade_clip(clip, cfg);
  CHECK(dualx::testing::same_bits(lq1.values(), lq2.values()));
  CHECK(d1.blur_sigma == d2.blur_sigma);
  CHECK(d1.jpeg_quality == d2.jpeg_quality);
  CHECK(lq1.shape() == Shape{1, 3, 3, 4, 4});

  // different seed draws different parameters
  cfg.seed = 4321;
  auto [lq3, d3] = degrade_clip(clip, cfg);
  (void)lq3;
  CHECK(d3.blur_sigma != d1.blur_sigma);
}

TEST_CASE("degenerate config equals plain bicubic x4") {
  Tensor clip = make_moving_clip<float>(2, 24, 24, 0.7, 0.0, 5);
  DegradationConfig cfg;
  cfg.blur_sigma_lo = cfg.blur_sigma_hi = 0.0;
  cfg.resize_lo = cfg.resize_hi = 0.25;
  cfg.resize_modes = {ResizeMode::Bicubic};
  cfg.noise_lo = cfg.noise_hi = 0.0;
  cfg.jpeg_q_lo = cfg.jpeg_q_hi = 100;
  cfg.seed = 7;
  auto [lq, draw] = degrade_clip(clip, cfg);
  (void)draw;
  Tensor reference = bicubic_down4(clip);
  CHECK(mse(lq.values(), reference.values()) <= 1e-4);
}

TEST_CASE("degradation config validation") {
  DegradationConfig cfg;
  cfg.blur_sigma_lo = 2.0;
  cfg.blur_sigma_hi = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  DegradationConfig cfg2;
  cfg2.jpeg_q_hi = 101;
  CHECK_THROWS_AS(cfg2.validate(), ConfigError);
}

TEST_CASE("draw record serializes every parameter") {
  DegradationDraw d;
  d.blur_sigma = 1.5;
  d.resize_scale = 0.5;
  d.resize_mode = ResizeMode::Bilinear;
  d.noise_sigma = 0.02;
  d.jpeg_quality = 77;
  d.seed = 42;
  std::string rec = draw_record(d, "clipA", "deadbeef00000000");
  CHECK(rec.find("blur_sigma 1.5") != std::string::npos);
  CHECK(rec.find("resize_mode bilinear") != std::string::npos);
  CHECK(rec.find("jpeg_quality 77") != std::string::npos);
  CHECK(rec.find("config_hash deadbeef00000000") != std::string::npos);
}
