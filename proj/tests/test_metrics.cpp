#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dualx/metrics.hpp"
#include "dualx/synthetic.hpp"
#include "helpers.hpp"

using namespace dualx;

TEST_CASE("psnr closed forms") {
  Tensor x = Tensor::full({1, 3, 1, 16, 16}, 0.5f);
  CHECK(psnr(x, x) == doctest::Approx(100.0));  // exact match cap

  // uniform |delta| = 10/255 -> 20 log10(25.5)
  Tensor y = Tensor::full({1, 3, 1, 16, 16}, 0.5f + 10.0f / 255.0f);
  CHECK(psnr(x, y) == doctest::Approx(20.0 * std::log10(25.5)).epsilon(1e-6));
  CHECK(psnr(x, y) == doctest::Approx(28.1308).epsilon(1e-4));

  CHECK_THROWS_AS(psnr(x, Tensor::zeros({1, 3, 1, 8, 8})), ShapeError);
}

TEST_CASE("psnr matches a direct two-pass recomputation") {
  Rng rng(1);
  Tensor a = Tensor::uniform({1, 3, 2, 12, 12}, 0.0f, 1.0f, rng);
  Tensor b = Tensor::uniform({1, 3, 2, 12, 12}, 0.0f, 1.0f, rng);
  auto frames = psnr_frames(a, b);
  // oracle: luma then MSE, in double
  for (int f = 0; f < 2; ++f) {
    double mse = 0;
    for (std::int64_t y = 0; y < 12; ++y)
      for (std::int64_t x = 0; x < 12; ++x) {
        double la = 0.299 * a.at({0, 0, f, y, x}) + 0.587 * a.at({0, 1, f, y, x}) +
                    0.114 * a.at({0, 2, f, y, x});
        double lb = 0.299 * b.at({0, 0, f, y, x}) + 0.587 * b.at({0, 1, f, y, x}) +
                    0.114 * b.at({0, 2, f, y, x});
        mse += (la - lb) * (la - lb);
      }
    mse /= 144.0;
    CHECK(frames[static_cast<size_t>(f)] == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-10));
  }
}

TEST_CASE("psnr strictly decreases with noise amplitude") {
  Rng rng(2);
  Tensor x = Tensor::uniform({1, 3, 1, 16, 16}, 0.2f, 0.8f, rng);
  double prev = 1e9;
  for (float amp : {0.01f, 0.02f, 0.05f, 0.1f}) {
    Tensor y = x.clone();
    Rng nrng(3);
    for (auto& v : y.values_mut())
      v += amp * (nrng.next_uniform() < 0.5 ? -1.0f : 1.0f);
    double p = psnr(x, y);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("ssim closed forms and symmetry") {
  Rng rng(3);
  Tensor x = Tensor::uniform({1, 3, 1, 16, 16}, 0.0f, 1.0f, rng);
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-12));

  // constant planes: luminance term only
  Tensor a = Tensor::zeros({1, 3, 1, 16, 16});
  Tensor b = Tensor::full({1, 3, 1, 16, 16}, 0.5f);
  double c1 = 1e-4;
  CHECK(ssim(a, b) == doctest::Approx(c1 / (0.25 + c1)).epsilon(1e-4));
  CHECK(ssim(a, b) == doctest::Approx(4.0e-4).epsilon(0.01));

  Tensor y = Tensor::uniform({1, 3, 1, 16, 16}, 0.0f, 1.0f, rng);
  CHECK(ssim(x, y) == ssim(y, x));  // exact symmetry
  CHECK(ssim(x, y) >= -1.0);
  CHECK(ssim(x, y) <= 1.0);

  CHECK_THROWS_AS(ssim(Tensor::zeros({1, 3, 1, 8, 8}), Tensor::zeros({1, 3, 1, 8, 8})),
                  ShapeError);  // smaller than the window
}

TEST_CASE("charbonnier closed forms") {
  Tensor x = Tensor::full({8}, 0.25f);
  CHECK(charbonnier(x, x) == doctest::Approx(1e-6).epsilon(1e-9));

  Tensor y = Tensor::full({8}, 0.35f);
  CHECK(charbonnier(x, y) == doctest::Approx(0.1).epsilon(1e-8));

  CHECK_THROWS_AS(charbonnier(x, Tensor::zeros({4})), ShapeError);
}

TEST_CASE("motion amplitude on synthetic translations") {
  // static clip
  Tensor still = make_moving_clip<float>(4, 64, 64, 0.0, 0.0, 10);
  auto [u0, v0] = motion_amplitude(still);
  CHECK(u0 == 0.0);
  CHECK(v0 == 0.0);

  // horizontal +3 px/frame
  Tensor horiz = make_moving_clip<float>(4, 64, 64, 3.0, 0.0, 11);
  auto [u3, v3] = motion_amplitude(horiz);
  CHECK(std::abs(u3 - 3.0) <= 0.5);
  CHECK(std::abs(v3 - 0.0) <= 0.5);

  // vertical +2 px/frame
  Tensor vert = make_moving_clip<float>(4, 64, 64, 0.0, 2.0, 12);
  auto [u2, v2] = motion_amplitude(vert);
  CHECK(std::abs(u2 - 0.0) <= 0.5);
  CHECK(std::abs(v2 - 2.0) <= 0.5);

  // horizontally dominant motion reports |u| > |v|
  Tensor dominant = make_moving_clip<float>(4, 64, 64, 3.0, 1.0, 13);
  auto [ud, vd] = motion_amplitude(dominant);
  CHECK(ud > vd);

  CHECK_THROWS_AS(motion_amplitude(make_moving_clip<float>(1, 64, 64, 0, 0, 1)), ShapeError);
}

TEST_CASE("metrics report serialization") {
  Rng rng(5);
  Tensor ref = make_moving_clip<float>(2, 16, 16, 1.0, 0.0, 6);
  Tensor test = ref.clone();
  MetricsReport r = evaluate_clip(test, ref, "clip0", /*with_motion=*/true);
  CHECK(r.psnr_mean == doctest::Approx(100.0));
  CHECK(r.ssim_mean == doctest::Approx(1.0));
  std::string text = r.to_text();
  CHECK(text.find("clip clip0") != std::string::npos);
  CHECK(text.find("mean psnr") != std::string::npos);
  CHECK(text.find("motion u") != std::string::npos);
}
