#include "mipo/leg_kinematics.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace mipo;
using mipo::test::random_vec;

namespace {

LegModel left_leg() {
  LegModel m;
  m.hip_offset = Vec3(0.1881, 0.04675, 0.0);
  m.link_lengths = Vec3(0.08, 0.213, 0.213);
  m.axis_signs = Vec3::Ones();
  m.d0 = 0.02;
  return m;
}

LegModel right_leg() {
  LegModel m = left_leg();
  m.hip_offset(1) = -m.hip_offset(1);
  return m;
}

// independent oracle: the same chain composed from homogeneous transforms
Eigen::Matrix4d hom(const Mat3& r, const Vec3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

Eigen::Matrix4d oracle_chain(const LegModel& model, const Vec3& alpha) {
  auto rx = [](double a) {
    return rot_of(quat_exp_exact(a * Vec3::UnitX()));
  };
  auto ry = [](double a) {
    return rot_of(quat_exp_exact(a * Vec3::UnitY()));
  };
  const double side = model.hip_offset(1) >= 0 ? 1.0 : -1.0;
  const Vec3& sg = model.axis_signs;
  const Vec3& l = model.link_lengths;
  Eigen::Matrix4d t = hom(Mat3::Identity(), model.hip_offset);
  t = t * hom(rx(sg(0) * alpha(0)), Vec3::Zero());
  t = t * hom(Mat3::Identity(), Vec3(0, side * l(0), 0));
  t = t * hom(ry(sg(1) * alpha(1)), Vec3::Zero());
  t = t * hom(Mat3::Identity(), Vec3(0, 0, -l(1)));
  t = t * hom(ry(sg(2) * alpha(2)), Vec3::Zero());
  t = t * hom(Mat3::Identity(), Vec3(0, 0, -l(2)));
  return t;
}

Vec3 random_alpha(std::mt19937_64* rng) {
  std::uniform_real_distribution<double> roll(-0.6, 0.6);
  std::uniform_real_distribution<double> pitch(-1.0, 1.4);
  std::uniform_real_distribution<double> knee(-2.4, -0.3);
  return Vec3(roll(*rng), pitch(*rng), knee(*rng));
}

}  // namespace

TEST(FkPosition, ZeroPoseStraightDown) {
  for (const LegModel& m : {left_leg(), right_leg()}) {
    const double side = m.hip_offset(1) >= 0 ? 1.0 : -1.0;
    const Vec3 expect = m.hip_offset +
                        Vec3(0, side * m.link_lengths(0),
                             -(m.link_lengths(1) + m.link_lengths(2)));
    EXPECT_LT((fk_position(m, Vec3::Zero()) - expect).norm(), 1e-15);
  }
}

TEST(FkPosition, MatchesTransformChainOracle) {
  std::mt19937_64 rng(11);
  const LegModel m = left_leg();
  for (int i = 0; i < 200; ++i) {
    const Vec3 a = random_alpha(&rng);
    const Eigen::Matrix4d t = oracle_chain(m, a);
    EXPECT_LT((fk_position(m, a) - t.topRightCorner<3, 1>()).norm(), 1e-12);
  }
}

TEST(FkPosition, WorkspaceBound) {
  std::mt19937_64 rng(12);
  const LegModel m = right_leg();
  const double reach = m.link_lengths.sum() + 1e-9;
  for (int i = 0; i < 1000; ++i) {
    const Vec3 a = random_vec(&rng, 1.5);
    EXPECT_LE((fk_position(m, a) - m.hip_offset).norm(), reach);
  }
}

TEST(FkJacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  const LegModel m = left_leg();
  const double eps = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Vec3 a = random_alpha(&rng);
    const Mat3 j = fk_jacobian(m, a);
    for (int k = 0; k < 3; ++k) {
      Vec3 d = Vec3::Zero();
      d(k) = eps;
      const Vec3 col = (fk_position(m, a + d) - fk_position(m, a - d)) / (2 * eps);
      const double scale = std::max(1.0, col.norm());
      EXPECT_LT((j.col(k) - col).norm() / scale, 1e-6);
    }
    EXPECT_LT((j * Vec3::Zero()).norm(), 1e-15);
  }
}

TEST(FkJacobian, StraightKneeSingularity) {
  const LegModel m = left_leg();
  const Vec3 a(0.2, 0.3, 0.0);  // straight knee
  const Eigen::JacobiSVD<Mat3> svd(fk_jacobian(m, a));
  const auto& sv = svd.singularValues();
  EXPECT_GT(sv(1), 1e-6);
  EXPECT_LT(sv(2) / sv(0), 1e-10);
}

TEST(FkOrientation, IdentityAtZeroAndMatchesOracle) {
  std::mt19937_64 rng(14);
  const LegModel m = right_leg();
  EXPECT_LT((rot_of(fk_orientation(m, Vec3::Zero())) - Mat3::Identity()).norm(),
            1e-12);
  for (int i = 0; i < 100; ++i) {
    const Vec3 a = random_alpha(&rng);
    const UnitQuaternion q = fk_orientation(m, a);
    EXPECT_NEAR(q.coeffs().norm(), 1.0, 1e-12);
    EXPECT_LT((rot_of(q) - oracle_chain(m, a).topLeftCorner<3, 3>()).norm(),
              1e-12);
  }
}

TEST(FkAxes, AngularVelocityConsistency) {
  // d/dt R(q(alpha)) = R skew(Ax * alpha_dot)
  std::mt19937_64 rng(15);
  const LegModel m = left_leg();
  const double eps = 1e-7;
  for (int i = 0; i < 50; ++i) {
    const Vec3 a = random_alpha(&rng);
    const Vec3 ad = random_vec(&rng, 1.0);
    const Mat3 r0 = rot_of(fk_orientation(m, a - eps * ad));
    const Mat3 r1 = rot_of(fk_orientation(m, a + eps * ad));
    const Mat3 omega_hat =
        rot_of(fk_orientation(m, a)).transpose() * (r1 - r0) / (2 * eps);
    const Vec3 w(omega_hat(2, 1), omega_hat(0, 2), omega_hat(1, 0));
    EXPECT_LT((w - fk_axes(m, a) * ad).norm(), 1e-5);
  }
}

TEST(LoVelocity, StaticAndAdditive) {
  std::mt19937_64 rng(16);
  const LegModel m = left_leg();
  const UnitQuaternion q = mipo::test::random_quat(&rng);
  const Vec3 a = random_alpha(&rng);
  EXPECT_LT(lo_velocity(m, q, a, Vec3::Zero(), Vec3::Zero(), Vec3::Zero()).norm(),
            1e-15);
  const Vec3 ad = random_vec(&rng);
  const Vec3 w = random_vec(&rng);
  const Vec3 vf = random_vec(&rng);
  const Vec3 base = lo_velocity(m, q, a, ad, w, Vec3::Zero());
  EXPECT_LT((lo_velocity(m, q, a, ad, w, vf) - base - vf).norm(), 1e-15);
}

TEST(Ik, RoundTripsThroughFk) {
  std::mt19937_64 rng(17);
  for (const LegModel& m : {left_leg(), right_leg()}) {
    for (int i = 0; i < 200; ++i) {
      const Vec3 a = random_alpha(&rng);
      const Vec3 p = fk_position(m, a);
      Vec3 sol;
      ASSERT_TRUE(ik_angles(m, p, &sol));
      EXPECT_LT((fk_position(m, sol) - p).norm(), 1e-10);
    }
  }
}

TEST(Ik, RejectsOutOfWorkspace) {
  const LegModel m = left_leg();
  Vec3 sol;
  EXPECT_FALSE(ik_angles(m, m.hip_offset + Vec3(0, 0, -1.0), &sol));
  EXPECT_FALSE(ik_angles(m, m.hip_offset + Vec3(0, 0.01, 0.0), &sol));
}

TEST(LegModel, Validation) {
  LegModel m = left_leg();
  EXPECT_TRUE(m.valid());
  m.d0 = 0.0;
  EXPECT_FALSE(m.valid());
  m = left_leg();
  m.link_lengths(1) = -0.1;
  EXPECT_FALSE(m.valid());
  m = left_leg();
  m.axis_signs(0) = 0.5;
  EXPECT_FALSE(m.valid());
}
