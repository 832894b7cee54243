#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "focuscal/core_types.h"
#include "focuscal/error.h"
#include "test_support.h"

using namespace focuscal;
using focuscal::testing::RandomRotation;
using focuscal::testing::Uniform;

namespace {

Intrinsics RobotiqPlateau() { return {1370.8, 1373.8, 0.0001, 645.8, 359.3}; }

// Term-by-term evaluation of the correction with the radius measured in
// normalized coordinates.
Point2 UndistortOracle(const Point2& p, const Intrinsics& in, const Distortion& d) {
  const double du = p.u - in.u0;
  const double dv = p.v - in.v0;
  const double y = dv / in.beta;
  const double x = (du - in.gamma * y) / in.alpha;
  const double r2 = x * x + y * y;
  const double r4 = r2 * r2;
  return {p.u + du * d.k1 * r2 + du * d.k2 * r4, p.v + dv * d.k1 * r2 + dv * d.k2 * r4};
}

}  // namespace

TEST_CASE("intrinsic matrix layout") {
  CHECK(IntrinsicMatrix(Intrinsics{}).isApprox(Eigen::Matrix3d::Identity(), 0.0));
  const Eigen::Matrix3d a = IntrinsicMatrix(RobotiqPlateau());
  CHECK(a(0, 0) == 1370.8);
  CHECK(a(0, 1) == 0.0001);
  CHECK(a(0, 2) == 645.8);
  CHECK(a(1, 0) == 0.0);
  CHECK(a(1, 1) == 1373.8);
  CHECK(a(1, 2) == 359.3);
  CHECK(a.row(2) == Eigen::RowVector3d(0, 0, 1));
}

TEST_CASE("intrinsics validation rejects non-positive scale") {
  CHECK_FALSE(Intrinsics{0.0, 1.0, 0.0, 0.0, 0.0}.IsValid());
  CHECK_FALSE(Intrinsics{1.0, -1.0, 0.0, 0.0, 0.0}.IsValid());
  CHECK_FALSE(Intrinsics{1.0, 1.0, NAN, 0.0, 0.0}.IsValid());
  CHECK_THROWS_AS(Intrinsics({0.0, 1.0, 0.0, 0.0, 0.0}).Validate(), Error);
}

TEST_CASE("projection of simple points") {
  Pose pose;
  pose.translation = {0, 0, 1000};
  const Intrinsics in = RobotiqPlateau();
  const Point2 c = Project({0, 0, 0}, in, pose);
  CHECK(c.u == doctest::Approx(in.u0).epsilon(1e-15));
  CHECK(c.v == doctest::Approx(in.v0).epsilon(1e-15));

  const Point2 p = Project({100, 0, 0}, {1000, 1000, 0, 0, 0}, pose);
  CHECK(p.u == doctest::Approx(100.0).epsilon(1e-15));
  CHECK(p.v == 0.0);
}

TEST_CASE("projection matches the full matrix product") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const Intrinsics in{Uniform(rng, 500, 2000), Uniform(rng, 500, 2000),
                        Uniform(rng, -1, 1), Uniform(rng, 300, 700),
                        Uniform(rng, 200, 500)};
    const Eigen::Matrix3d r = RandomRotation(rng);
    const Eigen::Vector3d w(Uniform(rng, -200, 200), Uniform(rng, -200, 200), 0.0);
    const Eigen::Vector3d t =
        Eigen::Vector3d(Uniform(rng, -50, 50), Uniform(rng, -50, 50), 0.0) -
        r * w + Eigen::Vector3d(0, 0, Uniform(rng, 300, 2000));
    const Pose pose = Pose::FromMatrix(r, t);
    const Point2 p = Project({w.x(), w.y(), w.z()}, in, pose);
    const Eigen::Vector2d oracle = focuscal::testing::MatrixProductProjection(
        IntrinsicMatrix(in), pose.RotationMatrix(), t, w);
    CHECK(std::abs(p.u - oracle.x()) < 1e-12 * std::max(1.0, std::abs(oracle.x())));
    CHECK(std::abs(p.v - oracle.y()) < 1e-12 * std::max(1.0, std::abs(oracle.y())));
  }
}

TEST_CASE("projection is invariant to the homogeneous scale") {
  std::mt19937_64 rng(12);
  const Intrinsics in = RobotiqPlateau();
  for (int trial = 0; trial < 200; ++trial) {
    Pose pose = Pose::FromMatrix(RandomRotation(rng), {0, 0, 0});
    const Eigen::Vector3d w(Uniform(rng, -100, 100), Uniform(rng, -100, 100), 0.0);
    pose.translation = Eigen::Vector3d(0, 0, 800) - pose.RotationMatrix() * w;
    const Point2 ref = ProjectHomogeneous(w.homogeneous(), in, pose);
    for (double s : {-3.0, 1e-3, 7.5, 1e4}) {
      const Point2 p = ProjectHomogeneous(s * w.homogeneous(), in, pose);
      CHECK(p.u == doctest::Approx(ref.u).epsilon(1e-13));
      CHECK(p.v == doctest::Approx(ref.v).epsilon(1e-13));
    }
  }
}

TEST_CASE("points at or behind the camera plane are rejected") {
  Pose pose;
  pose.translation = {0, 0, -5};
  CHECK_THROWS_AS(Project({0, 0, 0}, RobotiqPlateau(), pose), Error);
  pose.translation = {0, 0, 0};
  try {
    Project({1, 2, 0}, RobotiqPlateau(), pose);
    FAIL("expected NonPositiveDepth");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonPositiveDepth);
  }
}

TEST_CASE("Rodrigues round trip over random and edge rotations") {
  std::mt19937_64 rng(13);
  std::vector<Eigen::Matrix3d> rotations;
  for (int i = 0; i < 1000; ++i) rotations.push_back(RandomRotation(rng));
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector3d axis = focuscal::testing::RandomUnitVector(rng);
    const double eps = std::pow(10.0, -Uniform(rng, 1, 12));
    rotations.push_back(RodriguesToMatrix((std::numbers::pi - eps) * axis));
    rotations.push_back(RodriguesToMatrix(eps * axis));
  }
  rotations.push_back(Eigen::Matrix3d::Identity());
  rotations.push_back(RodriguesToMatrix({std::numbers::pi, 0, 0}));
  rotations.push_back(RodriguesToMatrix({0, 0, std::numbers::pi}));
  for (const auto& r : rotations) {
    const Eigen::Vector3d v = MatrixToRodrigues(r);
    CHECK(v.norm() <= std::numbers::pi + 1e-12);
    CHECK((RodriguesToMatrix(v) - r).norm() < 1e-10);
    const Eigen::Matrix3d m = RodriguesToMatrix(v);
    CHECK(focuscal::testing::OrthonormalityError(m) < 1e-10);
    CHECK(std::abs(m.determinant() - 1.0) < 1e-10);
  }
}

TEST_CASE("rotation angle between matrices") {
  const Eigen::Matrix3d a = RodriguesToMatrix({0.1, -0.2, 0.3});
  const Eigen::Vector3d delta(0.0, 0.0, 0.25);
  CHECK(RotationAngleBetween(RodriguesToMatrix(delta) * a, a) ==
        doctest::Approx(0.25).epsilon(1e-12));
  CHECK(RotationAngleBetween(a, a) < 1e-15);
}

TEST_CASE("pose algebra") {
  Pose a = Pose::FromMatrix(RodriguesToMatrix({0.3, 0.1, -0.2}), {1, 2, 3});
  Pose b = Pose::FromMatrix(RodriguesToMatrix({-0.1, 0.4, 0.2}), {-4, 5, 60});
  const Eigen::Vector3d p(7, -8, 9);
  CHECK((a.Compose(b).Transform(p) - a.Transform(b.Transform(p))).norm() < 1e-12);
  CHECK((a.Inverse().Transform(a.Transform(p)) - p).norm() < 1e-12);
}

TEST_CASE("rotate-point Jacobian matches finite differences") {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::Vector3d r = focuscal::testing::RandomUnitVector(rng) * Uniform(rng, 0, 3.0);
    if (trial < 10) r *= 1e-9;
    const Eigen::Vector3d p(Uniform(rng, -100, 100), Uniform(rng, -100, 100),
                            Uniform(rng, -100, 100));
    const Eigen::Matrix3d j = RotatePointJacobian(r, p);
    Eigen::Matrix3d fd;
    for (int k = 0; k < 3; ++k) {
      Eigen::Vector3d h = Eigen::Vector3d::Zero();
      h[k] = 1e-6;
      fd.col(k) = (RodriguesToMatrix(r + h) * p - RodriguesToMatrix(r - h) * p) / 2e-6;
    }
    CHECK((j - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()));
  }
}

TEST_CASE("undistort matches the term-by-term oracle") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 500; ++trial) {
    const Intrinsics in = RobotiqPlateau();
    const Distortion d{Uniform(rng, -0.05, 0.05), Uniform(rng, -0.2, 0.2)};
    const Point2 p{Uniform(rng, 0, 1279), Uniform(rng, 0, 724)};
    const Point2 got = Undistort(p, in, d);
    const Point2 want = UndistortOracle(p, in, d);
    CHECK(std::abs(got.u - want.u) < 1e-12 * std::max(1.0, std::abs(want.u)));
    CHECK(std::abs(got.v - want.v) < 1e-12 * std::max(1.0, std::abs(want.v)));
  }
}

TEST_CASE("distortion identities") {
  const Intrinsics in = RobotiqPlateau();
  const Point2 p{812.25, 101.5};
  const Point2 u = Undistort(p, in, {});
  CHECK(u.u == p.u);
  CHECK(u.v == p.v);
  const Point2 d = Distort(p, in, {});
  CHECK(d.u == p.u);
  CHECK(d.v == p.v);

  const Point2 centre{in.u0, in.v0};
  for (const Distortion dist : {Distortion{0.0087, -0.072}, Distortion{-0.05, 0.2}}) {
    const Point2 c = Distort(centre, in, dist);
    CHECK(c.u == in.u0);
    CHECK(c.v == in.v0);
  }
}

TEST_CASE("distort inverts undistort at 200 px with the wrist camera coefficients") {
  const Intrinsics in = RobotiqPlateau();
  const Distortion dist{0.0087, -0.072};
  for (double angle = 0.0; angle < 2 * std::numbers::pi; angle += 0.3) {
    const Point2 ideal{in.u0 + 200 * std::cos(angle), in.v0 + 200 * std::sin(angle)};
    const Point2 back = Undistort(Distort(ideal, in, dist), in, dist);
    CHECK(std::abs(back.u - ideal.u) < 1e-9);
    CHECK(std::abs(back.v - ideal.v) < 1e-9);
  }
}

TEST_CASE("distort and undistort are mutual inverses over the image") {
  std::mt19937_64 rng(16);
  const Intrinsics in = RobotiqPlateau();
  const double half_diagonal = 0.5 * std::hypot(1279.0, 724.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const Distortion dist{Uniform(rng, -0.05, 0.05), Uniform(rng, -0.2, 0.2)};
    const double radius = Uniform(rng, 0, half_diagonal);
    const double angle = Uniform(rng, 0, 2 * std::numbers::pi);
    const Point2 p{in.u0 + radius * std::cos(angle), in.v0 + radius * std::sin(angle)};
    const Point2 a = Undistort(Distort(p, in, dist), in, dist);
    const Point2 b = Distort(Undistort(p, in, dist), in, dist);
    CHECK(std::hypot(a.u - p.u, a.v - p.v) < 1e-9);
    CHECK(std::hypot(b.u - p.u, b.v - p.v) < 1e-9);
  }
}

TEST_CASE("distort reports divergence") {
  const Intrinsics in{100, 100, 0, 0, 0};
  CHECK_THROWS_AS(Distort({1000, 1000}, in, {5.0, 5.0}), Error);
}
