#include <doctest.h>

#include "schauder/holder_norms.hpp"

#include <cmath>
#include <random>

using namespace schauder;

namespace {

GridFunction line(double radius, double h, double (*fn)(double)) {
  return GridFunction::sample(1, radius, h, [fn](const Point& x) { return fn(x[0]); });
}

// Brute-force seminorm over all node pairs with 0 < |x - y| <= 1 inside [-r, r].
double brute_seminorm(const std::vector<double>& xs, const std::vector<double>& fs, double alpha, double r) {
  double best = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = i + 1; j < xs.size(); ++j) {
      if (std::abs(xs[i]) > r + 1e-12 || std::abs(xs[j]) > r + 1e-12) continue;
      const double d = std::abs(xs[i] - xs[j]);
      if (d > 1.0 + 1e-12) continue;
      best = std::max(best, std::abs(fs[i] - fs[j]) / std::pow(d, alpha));
    }
  return best;
}

}  // namespace

TEST_CASE("sup norm examples") {
  CHECK(sup_norm(line(2.0, 0.125, [](double) { return 3.0; }), 1.0) == 3.0);
  CHECK(sup_norm(line(2.0, 0.125, [](double) { return 0.0; }), 1.0) == 0.0);
  const auto f = line(4.0, 1e-3, [](double x) { return std::sin(5.0 * x); });
  CHECK(std::abs(sup_norm(f, 3.0) - 1.0) <= 1e-5);
  CHECK_THROWS(sup_norm(f, 5.0));
}

TEST_CASE("seminorm examples") {
  CHECK(holder_seminorm(line(2.0, 1.0 / 64, [](double) { return 2.0; }), 0.5, 1.0) == 0.0);

  // |x|^{1/2} on [-1, 1]: pairs (0, d) give exactly 1, opposite-sign pairs give less.
  const double h = 1.0 / 64;
  const auto sq = line(1.0, h, [](double x) { return std::sqrt(std::abs(x)); });
  std::vector<double> xs, fs;
  for (Eigen::Index k = 0; k < sq.size(); ++k) xs.push_back(sq.point(k)[0]), fs.push_back(sq[k]);
  const double oracle = brute_seminorm(xs, fs, 0.5, 1.0);
  const double got = holder_seminorm(sq, 0.5, 1.0);
  CHECK(got == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(got == doctest::Approx(1.0).epsilon(0.02));

  // f(x) = x: |x - y|^{1/2} is largest at the distance cap.
  CHECK(holder_seminorm(line(2.0, 1.0 / 32, [](double x) { return x; }), 0.5, 2.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(holder_seminorm(sq, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(holder_seminorm(sq, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("sampled seminorm matches exhaustive search") {
  const auto f = GridFunction::sample(2, 2.0, 1.0 / 32, [](const Point& x) {
    return std::sin(3.0 * x[0]) * std::cos(2.0 * x[1]) + std::sqrt(std::abs(x[0] - 0.3));
  });
  const double exact = holder_seminorm(f, 0.5, 1.5, std::size_t{1} << 30);
  const double sampled = holder_seminorm(f, 0.5, 1.5, 200000);
  CHECK(sampled <= exact + 1e-12);
  CHECK(sampled >= 0.97 * exact);
  CHECK(holder_seminorm(f, 0.5, 1.5, 200000) == sampled);  // deterministic
}

TEST_CASE("derivative examples") {
  const auto f = line(2.0, 1.0 / 16, [](double x) { return x * x; });
  const auto d2 = derivative(f, {2, 0});
  for (Eigen::Index k = 0; k < d2.size(); ++k)
    if (d2.valid(k)) CHECK(d2[k] == doctest::Approx(2.0).epsilon(1e-12));

  const auto e = line(2.0, 1e-2, [](double x) { return std::exp(x); });
  const auto d3 = derivative(e, {3, 0});
  for (Eigen::Index k = 0; k < d3.size(); ++k)
    if (std::abs(d3.point(k)[0]) <= 1.0) CHECK(std::abs(d3[k] - std::exp(d3.point(k)[0])) <= 1e-6 * std::exp(1.0));

  const auto c = line(2.0, 1.0 / 16, [](double) { return 4.0; });
  for (int o = 1; o <= 3; ++o) CHECK(derivative(c, {o, 0}).values().cwiseAbs().maxCoeff() < 1e-10);

  CHECK(d3.margin() == 3);
  const auto tiny = line(0.25, 0.125, [](double x) { return x; });
  CHECK_THROWS(derivative(derivative(tiny, {1, 0}), {3, 0}));
}

TEST_CASE("ck alpha norm examples") {
  CHECK(ck_alpha_norm(line(2.0, 1.0 / 16, [](double) { return 1.0; }), 2, 0.5, 1.0).value == doctest::Approx(1.0));

  const auto est = ck_alpha_norm(line(4.0, 1.0 / 64, [](double x) { return x * x; }), 2, 0.5, 1.0);
  CHECK(est.value == doctest::Approx(5.0).epsilon(1e-10));
  CHECK(est.sup_terms.size() == 3);
  CHECK(est.seminorm < 1e-8);

  // sin on [-pi, pi]: [cos]_{1/2} from a brute-force pair search on a fine line
  const double h = 1.0 / 256;
  std::vector<double> xs, fs;
  for (double x = -M_PI; x <= M_PI; x += h / 2) xs.push_back(x), fs.push_back(std::cos(x));
  const double cos_semi = brute_seminorm(xs, fs, 0.5, M_PI);
  const auto s = ck_alpha_norm(line(6.0, h, [](double x) { return std::sin(x); }), 1, 0.5, M_PI);
  CHECK(s.value == doctest::Approx(2.0 + cos_semi).epsilon(0.02));
  CHECK(s.value == doctest::Approx(2.919).epsilon(0.02));
  double total = s.seminorm;
  for (const double v : s.sup_terms) total += v;
  CHECK(total == doctest::Approx(s.value).epsilon(1e-12));
}

TEST_CASE("norms are homogeneous and subadditive") {
  const auto f = GridFunction::sample(2, 2.0, 1.0 / 16, [](const Point& x) { return std::exp(-x.squaredNorm()) * x[0]; });
  const auto g = GridFunction::sample(2, 2.0, 1.0 / 16, [](const Point& x) { return std::sin(x[1] + 0.5 * x[0]); });
  const double nf = ck_alpha_norm(f, 2, 0.4, 1.0).value;
  CHECK(ck_alpha_norm(-3.5 * f, 2, 0.4, 1.0).value == doctest::Approx(3.5 * nf).epsilon(1e-12));
  const double ng = ck_alpha_norm(g, 2, 0.4, 1.0).value;
  CHECK(ck_alpha_norm(f + g, 2, 0.4, 1.0).value <= nf + ng + 1e-10);
}

TEST_CASE("pairwise bound for a smaller exponent") {
  const auto f = line(2.0, 1.0 / 32, [](double x) { return std::sin(4.0 * x) + std::sqrt(std::abs(x)); });
  const double semi = holder_seminorm(f, 0.7, 1.5);
  const double sup = sup_norm(f, 1.5);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i)
    for (Eigen::Index j = i + 1; j < f.size(); ++j) {
      const double xi = f.point(i)[0], xj = f.point(j)[0];
      if (std::abs(xi) > 1.5 || std::abs(xj) > 1.5 || std::abs(xi - xj) > 1.0) continue;
      worst = std::max(worst, std::abs(f[i] - f[j]) / std::pow(std::abs(xi - xj), 0.3));
    }
  CHECK(worst <= std::max(semi, 2.0 * sup) + 1e-12);
}

TEST_CASE("mesh convergence of an analytic norm") {
  const auto fn = [](const Point& x) { return std::exp(-x[0] * x[0]) * std::cos(x[0]); };
  std::vector<double> v;
  for (const double h : {1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128})
    v.push_back(ck_alpha_norm(GridFunction::sample(1, 4.0, h, fn), 1, 0.0, 2.0).value);
  const double slope = std::log2(std::abs(v[1] - v[0]) / std::abs(v[3] - v[2])) / 2.0;
  CHECK(slope >= 1.8);
}

TEST_CASE("interpolation inequality examples") {
  CHECK(interpolation_inequality_check(line(4.0, 1.0 / 32, [](double) { return 0.0; }), 0.5, 2.0) == 0.0);
  const auto s1 = line(4.0, 1.0 / 32, [](double x) { return std::sin(x); });
  const auto s2 = line(4.0, 1.0 / 64, [](double x) { return std::sin(x); });
  const double r1 = interpolation_inequality_check(s1, 0.5, 2.0);
  const double r2 = interpolation_inequality_check(s2, 0.5, 2.0);
  CHECK(r1 > 0.0);
  CHECK(std::isfinite(r1));
  CHECK(std::abs(r1 - r2) <= 0.05 * r1);
  CHECK(interpolation_inequality_check(10.0 * s1, 0.5, 2.0) == doctest::Approx(r1).epsilon(1e-12));
}

TEST_CASE("grid functions persist with a sidecar") {
  const auto f = GridFunction::sample(2, 1.0, 0.25, [](const Point& x) { return x[0] - 2.0 * x[1]; });
  const auto dir = std::filesystem::temp_directory_path();
  f.write_binary(dir / "gf_test.bin");
  f.write_csv(dir / "gf_test.csv");
  const auto b = GridFunction::read_binary(dir / "gf_test.bin");
  const auto c = GridFunction::read_csv(dir / "gf_test.csv");
  CHECK(b.same_mesh(f));
  CHECK((b.values() - f.values()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((c.values() - f.values()).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(f.coarsen().step() == 0.5);
}
