#include <doctest.h>

#include <random>

#include "geomopt/geometry.hpp"
#include "support.hpp"

using namespace geomopt;

namespace {

ProjectionMatrix random_matrix(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  ProjectionMatrix P;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) P(i, j) = u(rng);
  P(1, 2) += 5.0;  // keep depth positive near the origin
  return P;
}

}  // namespace

TEST_CASE("isocentre maps to the principal point in every view") {
  ScanGeometry geom;
  const auto P = make_circular_trajectory(geom);
  REQUIRE(P.size() == 360);
  for (const auto& Pp : P) {
    CHECK(project_point(Pp, Vector2(0, 0)) == doctest::Approx(511.5).epsilon(1e-14));
    CHECK(depth(Pp, Vector2(0, 0)) == doctest::Approx(1000.0).epsilon(1e-14));
  }
}

TEST_CASE("off-axis point at theta = 0 lands where the explicit ray hits the detector") {
  ScanGeometry geom;
  const auto P = make_circular_trajectory(geom);
  const testing::FanOracle oracle{geom};
  const Vector2 x(0.0, 100.0);
  CHECK(depth(P[0], x) == doctest::Approx(oracle.depth(0.0, x)).epsilon(1e-12));
  CHECK(depth(P[0], x) == doctest::Approx(1000.0));
  CHECK(oracle.detector_index(0.0, x) == doctest::Approx(611.5).epsilon(1e-12));
  CHECK(project_point(P[0], x) == doctest::Approx(611.5).epsilon(1e-12));
}

TEST_CASE("trajectory agrees with the ray oracle for random points and views") {
  ScanGeometry geom;
  geom.num_projections = 37;
  geom.start_angle = 0.3;
  const auto P = make_circular_trajectory(geom);
  const testing::FanOracle oracle{geom};
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> coord(-300.0, 300.0);
  for (int p = 0; p < geom.num_projections; ++p) {
    for (int k = 0; k < 5; ++k) {
      const Vector2 x(coord(rng), coord(rng));
      const double theta = geom.angle(p);
      CHECK(depth(P[p], x) == doctest::Approx(oracle.depth(theta, x)).epsilon(1e-10));
      CHECK(project_point(P[p], x) == doctest::Approx(oracle.detector_index(theta, x)).epsilon(1e-10));
    }
  }
}

TEST_CASE("source position is the null space of each matrix") {
  ScanGeometry geom;
  const auto P = make_circular_trajectory(geom);
  const testing::FanOracle oracle{geom};
  for (int p = 0; p < geom.num_projections; p += 17) {
    const Vector2 s = source_position(P[p]);
    CHECK((s - oracle.source(geom.angle(p))).norm() < 1e-9);
  }
}

TEST_CASE("matrices have rank 2 and positive depth inside the field") {
  const auto P = make_circular_trajectory(ScanGeometry{});
  for (const auto& Pp : P) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Pp);
    CHECK(svd.singularValues()[1] > 1e-6 * svd.singularValues()[0]);
    for (double a = 0; a < 6.28; a += 0.5) CHECK(depth(Pp, Vector2(400 * std::cos(a), 400 * std::sin(a))) > 0.0);
  }
}

TEST_CASE("homogeneous scale invariance") {
  const auto P = make_circular_trajectory(ScanGeometry{});
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(-250.0, 250.0);
  for (double lambda : {3.0, 0.25, 1e3}) {
    for (int k = 0; k < 50; ++k) {
      const auto& Pp = P[static_cast<std::size_t>(k * 7)];
      const Vector2 x(coord(rng), coord(rng));
      const ProjectionMatrix scaled = lambda * Pp;
      CHECK(testing::rel_error(project_point(scaled, x), project_point(Pp, x)) < 1e-12);
    }
  }
  // negative scale flips the depth sign, so the point counts as behind the source
  CHECK_THROWS_AS(project_point(ProjectionMatrix(-1.0 * P[0]), Vector2(0, 0)), BehindSourceError);
}

TEST_CASE("opposite views see the point reflected through the isocenter at the same detector index") {
  ScanGeometry geom;
  const auto P = make_circular_trajectory(geom);
  const double cu = geom.principal_point();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> coord(-200.0, 200.0);
  for (int p = 0; p < 180; p += 13) {
    const Vector2 x(coord(rng), coord(rng));
    const double u1 = project_point(P[p], x);
    const double u2 = project_point(P[p + 180], Vector2(-x));
    CHECK(std::abs(u1 - u2) < 1e-9);
    CHECK(std::abs(u1 - cu) < cu);
  }
}

TEST_CASE("points behind the source raise") {
  const auto P = make_circular_trajectory(ScanGeometry{});
  // source of view 0 is at (1000, 0), the point (1500, 0) lies behind it
  CHECK_THROWS_AS(project_point(P[0], Vector2(1500, 0)), BehindSourceError);
  CHECK_THROWS_AS(project_point(P[0], Vector2(1000, 0)), BehindSourceError);
}

TEST_CASE("invalid geometry is a configuration error") {
  auto bad = [](auto mutate) {
    ScanGeometry g;
    mutate(g);
    return g;
  };
  CHECK_THROWS_AS(make_circular_trajectory(bad([](ScanGeometry& g) { g.source_isocenter_distance = 0; })), ConfigError);
  CHECK_THROWS_AS(make_circular_trajectory(bad([](ScanGeometry& g) { g.source_detector_distance = 900; })),
                  ConfigError);
  CHECK_THROWS_AS(make_circular_trajectory(bad([](ScanGeometry& g) { g.num_projections = 0; })), ConfigError);
  CHECK_THROWS_AS(make_circular_trajectory(bad([](ScanGeometry& g) { g.num_detector_pixels = 1; })), ConfigError);
  CHECK_THROWS_AS(make_circular_trajectory(bad([](ScanGeometry& g) { g.detector_spacing = -2; })), ConfigError);
  CHECK_NOTHROW(make_circular_trajectory(bad([](ScanGeometry& g) { g.num_projections = 1; })));
}

TEST_CASE("apply_rigid: zero motion is the identity") {
  const auto P = make_circular_trajectory(ScanGeometry{});
  CHECK(apply_rigid(P, RigidParams::zeros(360)) == P);
}

TEST_CASE("apply_rigid: pure translation moves the observed point") {
  const auto P = make_circular_trajectory(ScanGeometry{});
  RigidParams m = RigidParams::zeros(360);
  m.translation_x.setConstant(10.0);
  const auto Q = apply_rigid(P, m);
  for (std::size_t p = 0; p < P.size(); p += 31)
    CHECK(project_point(Q[p], Vector2(0, 0)) == doctest::Approx(project_point(P[p], Vector2(10, 0))).epsilon(1e-13));
}

TEST_CASE("apply_rigid: transform-then-project oracle at random points") {
  ScanGeometry geom;
  geom.num_projections = 24;
  const auto P = make_circular_trajectory(geom);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ang(-0.3, 0.3), mm(-20.0, 20.0), coord(-200.0, 200.0);
  RigidParams m = RigidParams::zeros(24);
  for (int p = 0; p < 24; ++p) {
    m.rotation[p] = ang(rng);
    m.translation_x[p] = mm(rng);
    m.translation_y[p] = mm(rng);
  }
  const auto Q = apply_rigid(P, m);
  for (int p = 0; p < 24; ++p) {
    const double c = std::cos(m.rotation[p]), s = std::sin(m.rotation[p]);
    for (int k = 0; k < 10; ++k) {
      const Vector2 x(coord(rng), coord(rng));
      const Vector2 moved(c * x.x() - s * x.y() + m.translation_x[p], s * x.x() + c * x.y() + m.translation_y[p]);
      CHECK(project_point(Q[p], x) == doctest::Approx(project_point(P[p], moved)).epsilon(1e-11));
    }
  }
}

TEST_CASE("apply_rigid followed by the inverse transform restores the stack") {
  ScanGeometry geom;
  geom.num_projections = 16;
  const auto P = make_circular_trajectory(geom);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> ang(-0.5, 0.5), mm(-30.0, 30.0);
  RigidParams m = RigidParams::zeros(16), inv = RigidParams::zeros(16);
  for (int p = 0; p < 16; ++p) {
    m.rotation[p] = ang(rng);
    m.translation_x[p] = mm(rng);
    m.translation_y[p] = mm(rng);
    // T^-1 = [R^T, -R^T t]
    const double c = std::cos(m.rotation[p]), s = std::sin(m.rotation[p]);
    inv.rotation[p] = -m.rotation[p];
    inv.translation_x[p] = -(c * m.translation_x[p] + s * m.translation_y[p]);
    inv.translation_y[p] = -(-s * m.translation_x[p] + c * m.translation_y[p]);
  }
  const auto back = apply_rigid(apply_rigid(P, m), inv);
  for (int p = 0; p < 16; ++p) {
    const double scale = P[p].cwiseAbs().maxCoeff();
    CHECK((back[p] - P[p]).cwiseAbs().maxCoeff() <= 1e-12 * scale);
  }
}

TEST_CASE("apply_rigid rejects a length mismatch and non-finite motion") {
  const auto P = make_circular_trajectory(ScanGeometry{});
  CHECK_THROWS_AS(apply_rigid(P, RigidParams::zeros(359)), ShapeError);
  RigidParams m = RigidParams::zeros(360);
  m.translation_y.resize(10);
  CHECK_THROWS_AS(apply_rigid(P, m), ShapeError);
  RigidParams nan = RigidParams::zeros(360);
  nan.rotation[4] = std::nan("");
  CHECK_THROWS(apply_rigid(P, nan));
}

TEST_CASE("rigid_jacobian matches central differences on random inputs") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ang(-3.0, 3.0), mm(-50.0, 50.0);
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ProjectionMatrix P = random_matrix(rng);
    const double r = ang(rng), tx = mm(rng), ty = mm(rng);
    const auto J = rigid_jacobian(P, r, tx, ty);
    const auto PT = [&](double a, double b, double c) -> ProjectionMatrix { return P * rigid_transform(a, b, c); };
    const ProjectionMatrix fd[3] = {(PT(r + h, tx, ty) - PT(r - h, tx, ty)) / (2 * h),
                                    (PT(r, tx + h, ty) - PT(r, tx - h, ty)) / (2 * h),
                                    (PT(r, tx, ty + h) - PT(r, tx, ty - h)) / (2 * h)};
    for (int k = 0; k < 3; ++k) {
      const double scale = std::max(J[k].cwiseAbs().maxCoeff(), 1.0);
      worst = std::max(worst, (J[k] - fd[k]).cwiseAbs().maxCoeff() / scale);
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("rigid_jacobian structure") {
  std::mt19937_64 rng(1);
  const ProjectionMatrix P = random_matrix(rng);
  const auto J = rigid_jacobian(P, 0.0, 3.0, -4.0);
  Eigen::Matrix3d gen;
  gen << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  CHECK((J[0] - P * gen).norm() < 1e-15);
  CHECK(J[1].leftCols(2).isZero(0.0));
  CHECK(J[1].col(2) == P.col(0));
  CHECK(J[2].leftCols(2).isZero(0.0));
  CHECK(J[2].col(2) == P.col(1));
  // the rotation derivative does not depend on the translation
  const auto J2 = rigid_jacobian(P, 0.4, -30.0, 12.0);
  const auto J3 = rigid_jacobian(P, 0.4, 7.0, 1.0);
  CHECK(J2[0] == J3[0]);
}
