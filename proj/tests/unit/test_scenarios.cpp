#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "mtssrp/scenarios.hpp"
#include "oracles.hpp"

using namespace mtssrp;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mtssrp_test_" + name);
}

}  // namespace

TEST_SUITE("scenarios") {

TEST_CASE("nonoverlap blocks") {
  auto bank = build_nonoverlap(1000, 50, 0.8);
  CHECK(bank.dim() == 1000);
  CHECK(bank.size() == 50);
  const auto s0 = bank.support(0);
  CHECK(std::vector<std::size_t>(s0.begin(), s0.end()) == [] {
    std::vector<std::size_t> v(20);
    for (std::size_t i = 0; i < 20; ++i) v[i] = i;
    return v;
  }());
  CHECK(bank.mode(0).mean()[19] == 0.8);
  CHECK(bank.mode(0).mean()[20] == 0.0);
  std::set<std::size_t> seen;
  for (std::size_t k = 0; k < 50; ++k)
    for (auto j : bank.support(k)) CHECK(seen.insert(j).second);
  CHECK(seen.size() == 1000);
  CHECK(bank.label(3) == "row_3");
}

TEST_CASE("nonoverlap errors") {
  CHECK_THROWS(build_nonoverlap(1000, 30, 0.8));
  CHECK_THROWS_AS(build_nonoverlap(100, 10, 0.0), ModelError);
}

TEST_CASE("bspline basis partitions unity") {
  const auto b = bspline_basis_on_grid(7, 30);
  CHECK(b.rows() == 30);
  CHECK(b.cols() == 7);
  for (Eigen::Index r = 0; r < b.rows(); ++r) {
    CHECK(b.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b.row(r).minCoeff() >= 0.0);
  }
}

TEST_CASE("overlap bank structure") {
  auto bank = build_overlap(30, 30, 7, 0.8);
  CHECK(bank.size() == 49);
  CHECK(bank.dim() == 900);
  const Eigen::VectorXd mu0 = bank.base().mean();
  for (std::size_t k = 0; k < 49; ++k) {
    const Eigen::VectorXd d = bank.mode(k).mean() - mu0;
    CHECK(d.maxCoeff() == 0.8);
    CHECK(d.minCoeff() >= 0.0);
  }
  auto shift = [&](std::size_t a, std::size_t b) { return Eigen::VectorXd(bank.mode(a * 7 + b).mean() - mu0); };
  // independent inner products on the built bank
  for (std::size_t a = 0; a < 7; ++a) {
    for (std::size_t b = 0; b < 7; ++b) {
      if (b + 1 < 7) CHECK(shift(a, b).dot(shift(a, b + 1)) > 0.0);
      if (a + 1 < 7) CHECK(shift(a, b).dot(shift(a + 1, b)) > 0.0);
      if (b + 3 < 7) CHECK(shift(a, b).dot(shift(a, b + 3)) == 0.0);
      if (a + 3 < 7) CHECK(shift(a, b).dot(shift(a + 3, b)) == 0.0);
    }
  }
  CHECK_THROWS(build_overlap(30, 30, 1, 0.8));
}

TEST_CASE("in-control generator") {
  auto bank = std::make_shared<const ModeBank>(build_nonoverlap(20, 4, 1.0));
  auto gen = StreamGenerator::in_control(bank, 5);
  for (std::size_t t : {1u, 10u, 1000u}) {
    CHECK_FALSE(gen.post_change(t));
    CHECK_FALSE(gen.active_mode(t).has_value());
  }
  ScenarioSpec spec;
  spec.p = 20;
  spec.num_modes = 4;
  spec.change_time = kNoChange;
  const auto tick = generate_tick(spec, bank, 50, 3);
  CHECK_FALSE(tick.active_mode.has_value());
}

TEST_CASE("post-change mean of the single true mode") {
  auto bank = std::make_shared<const ModeBank>(build_nonoverlap(10, 2, 0.8));
  StreamGenerator gen(bank, 0, {1}, Mixing::single, 1.0, 42);
  const int n = 10000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(10);
  for (int t = 1; t <= n; ++t) sum += gen.tick(static_cast<std::size_t>(t)).full_x;
  const Eigen::VectorXd mean = sum / n;
  const double se = 1.0 / std::sqrt(static_cast<double>(n));
  for (Eigen::Index j = 0; j < 10; ++j) CHECK(std::abs(mean[j] - bank->mode(1).mean()[j]) <= 3.5 * se);
}

TEST_CASE("per-tick mixing frequencies") {
  auto bank = std::make_shared<const ModeBank>(build_nonoverlap(30, 10, 0.8));
  StreamGenerator gen(bank, 0, {2, 5, 7}, Mixing::per_tick_uniform, 1.0, 9);
  std::vector<double> freq(10, 0.0);
  const int n = 30000;
  for (int t = 1; t <= n; ++t) freq[*gen.active_mode(static_cast<std::size_t>(t))] += 1;
  const double se = std::sqrt((1.0 / 3) * (2.0 / 3) / n);
  for (auto k : {2, 5, 7}) CHECK(std::abs(freq[k] / n - 1.0 / 3) <= 3 * se);
  CHECK(freq[0] == 0.0);
}

TEST_CASE("simultaneous mixing adds the shifts") {
  auto bank = std::make_shared<const ModeBank>(build_nonoverlap(6, 3, 0.5));
  StreamGenerator sim(bank, 0, {0, 2}, Mixing::simultaneous, 1.0, 1);
  StreamGenerator none = StreamGenerator::in_control(bank, 1);
  const auto a = sim.tick(4).full_x, b = none.tick(4).full_x;
  CHECK(a[0] - b[0] == doctest::Approx(0.5));
  CHECK(a[2] == b[2]);
  CHECK(a[5] - b[5] == doctest::Approx(0.5));
}

TEST_CASE("generator reveals only the plan and logs it") {
  auto bank = std::make_shared<const ModeBank>(build_nonoverlap(12, 3, 0.8));
  StreamGenerator gen(bank, 0, {0}, Mixing::single, 1.0, 4);
  gen.enable_access_log();
  const auto obs = gen.observe(1, SamplingPlan{{1, 5, 9}, SolverKind::fixed});
  CHECK(obs.indices == std::vector<std::size_t>{1, 5, 9});
  CHECK(obs.values.size() == 3);
  // every value equals the hidden truth at the same coordinate
  const auto full = gen.tick(1).full_x;
  for (std::size_t i = 0; i < 3; ++i) CHECK(obs.values[i] == full[static_cast<Eigen::Index>(obs.indices[i])]);
  CHECK(gen.access_log().reads.size() == 3);
}

TEST_CASE("scenario validation") {
  ScenarioSpec s;
  s.delta = 0.0;
  CHECK_THROWS(s.validate());
  s.bank_delta = 0.8;
  CHECK_NOTHROW(s.validate());
  CHECK(s.data_scale() == 0.0);
  ScenarioSpec multi;
  multi.true_modes = {1, 2};
  CHECK_THROWS(multi.validate());
  multi.mixing = Mixing::per_tick_uniform;
  CHECK_NOTHROW(multi.validate());
  for (auto m : {Mixing::single, Mixing::per_tick_uniform, Mixing::simultaneous}) CHECK(parse_mixing(to_string(m)) == m);
}

TEST_CASE("drawn true modes are distinct and seeded") {
  ScenarioSpec s;
  s.num_true_modes = 3;
  s.mixing = Mixing::per_tick_uniform;
  const auto a = draw_true_modes(s, 50, 77);
  CHECK(a == draw_true_modes(s, 50, 77));
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 3);
  s.true_modes = {4};
  s.mixing = Mixing::single;
  CHECK(draw_true_modes(s, 50, 77) == std::vector<std::size_t>{4});
}

TEST_CASE("bank estimated from samples (custom path, synthetic stand-in data)") {
  std::mt19937_64 gen(10);
  std::normal_distribution<double> z;
  const Eigen::Index p = 5;
  Eigen::MatrixXd ic(400, p), m1(300, p);
  for (Eigen::Index r = 0; r < ic.rows(); ++r)
    for (Eigen::Index j = 0; j < p; ++j) ic(r, j) = z(gen);
  for (Eigen::Index r = 0; r < m1.rows(); ++r)
    for (Eigen::Index j = 0; j < p; ++j) m1(r, j) = (j < 2 ? 1.5 : 0.0) + z(gen);
  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(10, p, 2.0);  // zero sample variance
  auto bank = bank_from_samples(ic, {m1, flat}, {"tonnage_a", "stuck"});
  CHECK(bank.mode(0).mean()[0] == doctest::Approx(1.5).epsilon(0.1));
  CHECK(bank.mode(1).variances()[3] == 1e-6);

  // sample variance with n - 1, computed by hand for one column
  double m = 0, ss = 0;
  for (Eigen::Index r = 0; r < ic.rows(); ++r) m += ic(r, 2);
  m /= static_cast<double>(ic.rows());
  for (Eigen::Index r = 0; r < ic.rows(); ++r) ss += (ic(r, 2) - m) * (ic(r, 2) - m);
  CHECK(bank.base().variances()[2] == doctest::Approx(ss / (ic.rows() - 1)).epsilon(1e-12));

  const auto path = temp_path("bank.json");
  save_bank_file(bank, path);
  auto back = load_bank_file(path);
  CHECK(back.size() == 2);
  CHECK(back.label(1) == "stuck");
  CHECK(back.mode(0).mean() == bank.mode(0).mean());
  CHECK(back.base().variances() == bank.base().variances());

  ScenarioSpec spec;
  spec.kind = ScenarioKind::custom;
  spec.bank_file = path.string();
  CHECK(build_bank(spec).dim() == 5);
  CHECK(spec.data_scale() == 1.0);
  std::filesystem::remove(path);
}

TEST_CASE("full-covariance bank file") {
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.4, 0.4, 2.0;
  ModeBank bank(GaussianModel::full(Eigen::VectorXd::Zero(2), cov), {GaussianModel::full(Eigen::VectorXd::Ones(2), cov)});
  const auto path = temp_path("full.json");
  save_bank_file(bank, path);
  auto back = load_bank_file(path);
  CHECK_FALSE(back.is_diagonal());
  CHECK(back.mode(0).covariance() == cov);
  std::filesystem::remove(path);
}

}  // TEST_SUITE
