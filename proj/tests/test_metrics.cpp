#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cycletrans/metrics.hpp"
#include "oracles.hpp"

using namespace cycletrans;

TEST_CASE("ssim of an image with itself is exactly one") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 5; ++i) {
    ImageD img = oracle::random_image(20, 20, rng);
    auto r = ssim(img, img);
    CHECK(r.score == 1.0);
    CHECK((r.map.array() == 1.0).all());
  }
  ImageD constant = ImageD::Constant(16, 16, -0.25);
  CHECK(ssim(constant, constant).score == 1.0);
}

TEST_CASE("ssim is symmetric") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 5; ++i) {
    ImageD a = oracle::random_image(16, 16, rng);
    ImageD b = oracle::random_image(16, 16, rng);
    CHECK(std::fabs(ssim(a, b).score - ssim(b, a).score) < 1e-9);
  }
}

TEST_CASE("ssim matches the brute-force window oracle") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) {
    ImageD a = oracle::random_image(16, 16, rng);
    ImageD b = oracle::random_image(16, 16, rng);
    const double expect = oracle::ssim_naive(a, b);
    CHECK(ssim(a, b).score == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("intensity inversion destroys structural similarity") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 3; ++i) {
    ImageD a = oracle::random_image(24, 24, rng);  // high-variance by construction
    ImageD inv = -a;
    const double score = ssim(a, inv).score;
    CHECK(score < 0.3);
    CHECK(score == doctest::Approx(oracle::ssim_naive(a, inv)).epsilon(1e-9));
  }
}

TEST_CASE("ssim rejects mismatched shapes") {
  ImageD a(8, 8), b(8, 9);
  a.setZero();
  b.setZero();
  CHECK_THROWS_AS(ssim(a, b), InputError);
}

TEST_CASE("histogram of a constant image concentrates in one bin") {
  ImageD img = ImageD::Constant(8, 8, -1.0);
  Histogram h = histogram(img, 16);
  CHECK(h.counts[0] == 64.0);
  CHECK(h.counts.sum() == 64.0);
}

TEST_CASE("uniform ramp fills bins evenly") {
  // 256 values placed at bin-interior points: exactly 64 per bin over 4 bins
  ImageD img(16, 16);
  for (Eigen::Index i = 0; i < 256; ++i)
    img(i / 16, i % 16) = -1.0 + 2.0 * (static_cast<double>(i) + 0.5) / 256.0;
  Histogram h = histogram(img, 4);
  for (int b = 0; b < 4; ++b) CHECK(h.counts[b] == 64.0);
}

TEST_CASE("histogram conservation and masking") {
  std::mt19937_64 rng(5);
  ImageD img = oracle::random_image(12, 12, rng);
  Histogram h = histogram(img, 32);
  CHECK(h.counts.sum() == 144.0);

  Image<bool> mask(12, 12);
  mask.setConstant(false);
  mask(0, 0) = true;
  Histogram hm = histogram(img, 32, &mask);
  CHECK(hm.counts.sum() == 1.0);

  mask.setConstant(false);
  CHECK_THROWS_AS(histogram(img, 32, &mask), InputError);
  CHECK_THROWS_AS(histogram(img, 1), InputError);
}

TEST_CASE("bhattacharyya distance identity, symmetry, and hand value") {
  Histogram p = make_histogram_frame(2);
  Histogram q = make_histogram_frame(2);
  p.counts << 0.5, 0.5;
  q.counts << 0.9, 0.1;
  p.normalized = q.normalized = true;

  CHECK(bhattacharyya_distance(p, p).value == 0.0);
  // -ln(sqrt(.45) + sqrt(.05)), evaluated independently
  CHECK(bhattacharyya_distance(p, q).value == doctest::Approx(0.1115717757).epsilon(1e-9));
  CHECK(bhattacharyya_distance(p, q).value ==
        doctest::Approx(bhattacharyya_distance(q, p).value).epsilon(1e-15));
  CHECK_FALSE(bhattacharyya_distance(p, q).clamped);
}

TEST_CASE("disjoint histograms clamp at the maximum distance") {
  Histogram p = make_histogram_frame(4);
  Histogram q = make_histogram_frame(4);
  p.counts << 1, 0, 0, 0;
  q.counts << 0, 0, 0, 1;
  p.normalized = q.normalized = true;
  auto r = bhattacharyya_distance(p, q);
  CHECK(r.clamped);
  CHECK(r.value == doctest::Approx(-std::log(kBhattacharyyaEps)).epsilon(1e-12));
}

TEST_CASE("bhattacharyya preconditions") {
  Histogram p = make_histogram_frame(4);
  Histogram q = make_histogram_frame(8);
  p.counts.setConstant(0.25);
  p.normalized = true;
  q.counts.setConstant(0.125);
  q.normalized = true;
  CHECK_THROWS_AS(bhattacharyya_distance(p, q), InputError);
  Histogram raw = make_histogram_frame(4);
  raw.counts.setConstant(5);
  CHECK_THROWS_AS(bhattacharyya_distance(raw, raw), InputError);
}

TEST_CASE("histogram correlation identity, affine invariance, and hand value") {
  Histogram p = make_histogram_frame(4);
  p.counts << 4, 1, 3, 2;
  CHECK(histogram_correlation(p, p) == doctest::Approx(1.0).epsilon(1e-12));

  Histogram q = p;
  q.counts = 2.5 * p.counts.array() + 7.0;
  CHECK(histogram_correlation(p, q) == doctest::Approx(1.0).epsilon(1e-12));

  Histogram r = make_histogram_frame(4);
  r.counts << 1, 4, 2, 3;
  // Pearson evaluated independently: exactly -1 for this mirrored pattern
  CHECK(histogram_correlation(p, r) == doctest::Approx(-1.0).epsilon(1e-12));
  std::vector<double> pv{4, 1, 3, 2}, rv{1, 4, 2, 3};
  CHECK(oracle::pearson_naive(pv, rv) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("zero-variance histograms raise instead of defaulting") {
  Histogram p = make_histogram_frame(4);
  p.counts << 10, 0, 0, 0;
  Histogram flat = make_histogram_frame(4);
  flat.counts.setConstant(3);
  CHECK_THROWS_AS(histogram_correlation(flat, p), ZeroVarianceError);
}

TEST_CASE("metrics match brute-force oracles on random histograms") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int bins = 16;
    Histogram p = make_histogram_frame(bins);
    Histogram q = make_histogram_frame(bins);
    std::vector<double> pv(bins), qv(bins);
    for (int i = 0; i < bins; ++i) {
      pv[i] = dist(rng) + 0.01;
      qv[i] = dist(rng) + 0.01;
      p.counts[i] = pv[i];
      q.counts[i] = qv[i];
    }
    Histogram pn = normalized(p);
    Histogram qn = normalized(q);
    double psum = p.counts.sum(), qsum = q.counts.sum();
    std::vector<double> pvn(bins), qvn(bins);
    for (int i = 0; i < bins; ++i) {
      pvn[i] = pv[i] / psum;
      qvn[i] = qv[i] / qsum;
    }
    CHECK(bhattacharyya_distance(pn, qn).value ==
          doctest::Approx(oracle::bhattacharyya_naive(pvn, qvn)).epsilon(1e-9));
    CHECK(histogram_correlation(p, q) ==
          doctest::Approx(oracle::pearson_naive(pv, qv)).epsilon(1e-9));
    CHECK(bhattacharyya_distance(pn, qn).value >= 0.0);
  }
}

TEST_CASE("pooled histogram accumulation") {
  std::mt19937_64 rng(7);
  ImageD a = oracle::random_image(8, 8, rng);
  ImageD b = oracle::random_image(8, 8, rng);
  Histogram pooled = make_histogram_frame(32);
  accumulate_histogram(pooled, a);
  accumulate_histogram(pooled, b);
  CHECK(pooled.counts.sum() == 128.0);
  Histogram ha = histogram(a, 32);
  Histogram hb = histogram(b, 32);
  CHECK(pooled.counts == (ha.counts + hb.counts).eval());
}
