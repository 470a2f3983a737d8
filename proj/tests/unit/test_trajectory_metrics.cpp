#include <cmath>
#include <random>

#include <Eigen/Geometry>

#include "doctest.h"
#include "support.hpp"
#include "tempmask/error.hpp"
#include "tempmask/trajectory_metrics.hpp"

using namespace tempmask;

namespace {

Trajectory from_points(const std::vector<Eigen::Vector3d>& points, double t0 = 0.0,
                       double dt = 1.0) {
  Trajectory tr;
  for (std::size_t i = 0; i < points.size(); ++i) {
    Pose p;
    p.timestamp = t0 + dt * static_cast<double>(i);
    p.position = points[i];
    tr.poses.push_back(p);
  }
  return tr;
}

Trajectory random_trajectory(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> step(0.0, 0.1);
  std::vector<Eigen::Vector3d> pts;
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    p += Eigen::Vector3d(step(rng), step(rng), step(rng));
    pts.push_back(p);
  }
  return from_points(pts, 0.0, 1.0 / 30.0);
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

ErrorKind error_kind(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::internal;
}

}  // namespace

TEST_CASE("usm values") {
  const UsmParams ten{10.0};
  CHECK(usm(0.0, 1.0, ten) == 1.0);
  CHECK(usm(0.019, 0.96, ten) == doctest::Approx(0.7939).epsilon(0).scale(0).epsilon(1e-4));
  CHECK(std::abs(usm(0.019, 0.96, ten) - 0.7938807685856277) < 1e-15);
  CHECK(usm(5.0, 0.0, ten) == 0.0);
  CHECK(error_kind([&] { usm(-0.1, 0.5, ten); }) == ErrorKind::parameter);
  CHECK(error_kind([&] { usm(0.1, 1.5, ten); }) == ErrorKind::parameter);
  CHECK(error_kind([&] { usm(0.1, -0.1, ten); }) == ErrorKind::parameter);
  CHECK(error_kind([&] { usm(0.1, 0.5, UsmParams{0.0}); }) == ErrorKind::parameter);
  CHECK(error_kind([&] { usm(std::nan(""), 0.5, ten); }) == ErrorKind::parameter);
}

TEST_CASE("usm properties over random triples") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ate(0.0, 1.0), tr(0.0, 1.0), lam(0.01, 50.0);
  for (int i = 0; i < 10000; ++i) {
    const double a = ate(rng), t = tr(rng), l = lam(rng);
    const double s = usm(a, t, {l});
    CHECK(s >= 0.0);
    CHECK(s <= t);
    // decreasing in ATE, increasing in TR, linear in TR
    CHECK(usm(a + 0.01, t, {l}) <= s);
    CHECK(usm(a, std::min(1.0, t + 0.01), {l}) >= s);
    CHECK(usm(a, t / 2, {l}) == doctest::Approx(s / 2).epsilon(1e-12));
  }
}

TEST_CASE("usm first-order behaviour for small errors") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> x(0.0, 0.01);
  for (int i = 0; i < 1000; ++i) {
    const double lx = x(rng);
    const double s = usm(lx / 10.0, 1.0, {10.0});
    CHECK(std::abs(s - (1.0 - lx)) <= lx * lx);
  }
}

TEST_CASE("default lambda and tracking rate") {
  CHECK(default_lambda(0.01).lambda == doctest::Approx(10.0));
  CHECK(default_lambda(1.0).lambda == doctest::Approx(0.1));
  CHECK(default_lambda(0.5).lambda == doctest::Approx(0.2));
  CHECK(error_kind([] { default_lambda(0.0); }) == ErrorKind::parameter);
  CHECK(error_kind([] { default_lambda(-1.0); }) == ErrorKind::parameter);
  CHECK(tracking_rate(300, 300) == 1.0);
  CHECK(tracking_rate(0, 300) == 0.0);
  CHECK(tracking_rate(240, 250) == doctest::Approx(0.96));
  CHECK(error_kind([] { tracking_rate(301, 300); }) == ErrorKind::parameter);
  CHECK(error_kind([] { tracking_rate(0, 0); }) == ErrorKind::parameter);
}

TEST_CASE("parse_trajectory") {
  const auto tr = parse_trajectory("# comment\n0.0 0 0 0 0 0 0 1\n1.0 1 0 0 0 0 0 1");
  REQUIRE(tr.size() == 2);
  CHECK(tr.poses[1].position.x() == 1.0);
  CHECK(tr.poses[1].timestamp == 1.0);

  CHECK(parse_trajectory("\n\r\n0.0\t1 2 3 0 0 0 1\r\n").size() == 1);

  try {
    parse_trajectory("0.0 0 0 0");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
    CHECK(std::string(e.what()).find("line 1") != std::string::npos);
  }
  try {
    parse_trajectory("# header\n0.0 0 0 0 0 0 0 1\n1.0 0 x 0 0 0 0 1\n");
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::parse);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK(error_kind([] { parse_trajectory("1.0 0 0 0 0 0 0 1\n0.5 0 0 0 0 0 0 1"); }) ==
        ErrorKind::validation);
  CHECK(error_kind([] { parse_trajectory("1.0 0 0 0 0 0 0 1\n1.0 0 0 0 0 0 0 1"); }) ==
        ErrorKind::validation);
  CHECK(error_kind([] { read_trajectory("/nonexistent/traj.txt"); }) == ErrorKind::io);
}

TEST_CASE("trajectory text round trip") {
  std::mt19937_64 rng(3);
  auto tr = random_trajectory(rng, 50);
  for (auto& p : tr.poses) p.orientation = Eigen::Quaterniond(random_rotation(rng));
  const std::string text = serialize_trajectory(tr);
  const auto back = parse_trajectory(text);
  REQUIRE(back.size() == tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    CHECK(back.poses[i].timestamp == tr.poses[i].timestamp);
    CHECK(back.poses[i].position == tr.poses[i].position);
    CHECK(back.poses[i].orientation.coeffs() == tr.poses[i].orientation.coeffs());
  }
  CHECK(serialize_trajectory(back) == text);
}

TEST_CASE("associate") {
  const auto ref = from_points({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}});
  const auto pairs = associate(ref, ref, 0.02);
  REQUIRE(pairs.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(pairs[i] == std::pair<std::size_t, std::size_t>{i, i});

  const auto shifted = from_points({{0, 0, 0}, {1, 0, 0}, {2, 0, 0}}, 0.5);
  CHECK(error_kind([&] { associate(ref, shifted, 0.02); }) == ErrorKind::association);

  Trajectory a = from_points({{0, 0, 0}, {1, 0, 0}});
  Trajectory b = from_points({{0, 0, 0}, {1, 0, 0}});
  b.poses[0].timestamp = 0.01;
  b.poses[1].timestamp = 0.99;
  const auto ab = associate(a, b, 0.02);
  REQUIRE(ab.size() == 2);
  CHECK(ab[0] == std::pair<std::size_t, std::size_t>{0, 0});
  CHECK(ab[1] == std::pair<std::size_t, std::size_t>{1, 1});

  // one-to-one: two references compete for one estimate, the closer wins
  Trajectory r2 = from_points({{0, 0, 0}, {0, 0, 0}}, 0.0, 0.01);
  Trajectory e2 = from_points({{0, 0, 0}}, 0.008);
  const auto one = associate(r2, e2, 0.02);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == std::pair<std::size_t, std::size_t>{1, 0});
}

TEST_CASE("ate_rmse hand cases") {
  const auto ref = from_points({{0, 0, 0}, {1, 0, 0}});
  const auto est = from_points({{0, 0, 0}, {0, 0, 0}});
  CHECK(ate_rmse(ref, est, Alignment::none) == doctest::Approx(std::sqrt(0.5)));
  CHECK(ate_rmse(ref, ref, Alignment::none) == 0.0);
  CHECK(ate_rmse(ref, ref, Alignment::rigid) < 1e-12);
  const auto single = from_points({{0, 0, 0}});
  CHECK(error_kind([&] { ate_rmse(single, single, Alignment::rigid); }) == ErrorKind::validation);
  CHECK(error_kind([&] { ate_rmse(ref, est, Alignment::rigid_with_scale); }) ==
        ErrorKind::validation);
  CHECK(parse_alignment("rigid") == Alignment::rigid);
  CHECK(parse_alignment("rigid_with_scale") == Alignment::rigid_with_scale);
  CHECK(parse_alignment("none") == Alignment::none);
  CHECK(error_kind([] { parse_alignment("affine"); }) == ErrorKind::parameter);
}

TEST_CASE("rigid alignment removes arbitrary rigid motions") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> shift(-10.0, 10.0);
  for (int i = 0; i < 50; ++i) {
    const auto ref = random_trajectory(rng, 40);
    const Eigen::Matrix3d rot = random_rotation(rng);
    const Eigen::Vector3d t(shift(rng), shift(rng), shift(rng));
    Trajectory est = ref;
    for (auto& p : est.poses) p.position = rot * p.position + t;
    CHECK(ate_rmse(ref, est, Alignment::rigid) < 1e-9);
    CHECK(ate_rmse(ref, est, Alignment::none) > 1e-3);

    Trajectory scaled = ref;
    for (auto& p : scaled.poses) p.position = 2.5 * (rot * p.position) + t;
    CHECK(ate_rmse(ref, scaled, Alignment::rigid_with_scale) < 1e-9);
  }
}

TEST_CASE("align_points agrees with Eigen::umeyama") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    Eigen::Matrix3Xd src(3, 30), dst(3, 30);
    for (int c = 0; c < 30; ++c) {
      src.col(c) = Eigen::Vector3d(n(rng), n(rng), n(rng));
      dst.col(c) = Eigen::Vector3d(n(rng), n(rng), n(rng));
    }
    for (bool with_scale : {false, true}) {
      const auto mine = align_points(src, dst, with_scale);
      const Eigen::Matrix4d oracle = Eigen::umeyama(src, dst, with_scale);
      Eigen::Matrix3d sr = mine.scale * mine.rotation;
      CHECK((sr - oracle.topLeftCorner<3, 3>()).norm() < 1e-9);
      CHECK((mine.translation - oracle.topRightCorner<3, 1>()).norm() < 1e-9);
      CHECK(mine.rotation.determinant() == doctest::Approx(1.0));
    }
  }
}
