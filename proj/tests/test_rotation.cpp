#include "mipo/rotation.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace mipo;
using mipo::test::random_quat;
using mipo::test::random_vec;
using mipo::test::rotation_distance;

TEST(Skew, Basics) {
  EXPECT_EQ(skew(Vec3::Zero()), Mat3::Zero());
  EXPECT_EQ((skew(Vec3::UnitX()) * Vec3::UnitY()), Vec3::UnitZ());
  std::mt19937_64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const Vec3 v = random_vec(&rng);
    const Vec3 x = random_vec(&rng);
    EXPECT_LT((skew(v) * x - v.cross(x)).norm(), 1e-15);
    EXPECT_LT((skew(v).transpose() + skew(v)).norm(), 1e-15);
    EXPECT_LT((skew(v) * v).norm(), 1e-15);
  }
}

TEST(MultiplicativeMaps, ProductIdentities) {
  std::mt19937_64 rng(1);
  const UnitQuaternion id;
  for (int i = 0; i < 100; ++i) {
    const UnitQuaternion q1 = random_quat(&rng);
    const UnitQuaternion q2 = random_quat(&rng);
    // lmap(identity) q = q
    EXPECT_LT((lmap(id) * q1.coeffs() - q1.coeffs()).norm(), 1e-15);
    // L(q1) q2 = R(q2) q1 = q1 ⊗ q2
    const Vec4 prod = (q1 * q2).coeffs();
    EXPECT_LT((lmap(q1) * q2.coeffs() - prod).norm(), 1e-12);
    EXPECT_LT((rmap(q2) * q1.coeffs() - prod).norm(), 1e-12);
    // [L(q)]_3 = [R(q^-1)]_3
    EXPECT_LT((vec_block(lmap(q1)) - vec_block(rmap(q1.inverse()))).norm(),
              1e-12);
  }
}

// bottom-right block of a two-sided product, [L(a)R(b)]_3 = [L(b^-1)R(a^-1)]_3;
// the form the measurement Jacobian derivation relies on
TEST(MultiplicativeMaps, TwoSidedBlockIdentity) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100; ++i) {
    const UnitQuaternion a = random_quat(&rng);
    const UnitQuaternion b = random_quat(&rng);
    const Mat3 lhs = vec_block(lmap(a) * rmap(b));
    const Mat3 rhs = vec_block(lmap(b.inverse()) * rmap(a.inverse()));
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(QuatAlgebra, GroupLaws) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const UnitQuaternion q1 = random_quat(&rng);
    const UnitQuaternion q2 = random_quat(&rng);
    EXPECT_NEAR((q1 * q2).coeffs().norm(), 1.0, 1e-9);
    // inverse law q ⊗ q^-1 = identity
    EXPECT_LT(((q1 * q1.inverse()).coeffs() - Vec4(1, 0, 0, 0)).norm(), 1e-12);
    // homomorphism
    EXPECT_LT(
        (rot_of(q1 * q2) - rot_of(q1) * rot_of(q2)).cwiseAbs().maxCoeff(),
        1e-9);
  }
}

TEST(ExpLog, FixedPoints) {
  const UnitQuaternion id = quat_exp(Vec3::Zero());
  EXPECT_LT((id.coeffs() - Vec4(1, 0, 0, 0)).norm(), 1e-15);
  EXPECT_LT(quat_log(UnitQuaternion()).norm(), 1e-15);
  EXPECT_LT(quat_log_exact(UnitQuaternion()).norm(), 1e-15);
}

TEST(ExpLog, RoundTrips) {
  const Vec3 theta(0.01, -0.02, 0.005);
  // exact maps round-trip at machine precision
  EXPECT_LT((quat_log_exact(quat_exp_exact(theta)) - theta).norm(), 1e-12);
  // first-order pair: the error is cubic, ||theta||^3/8 for the renormalized
  // approximation (1.5e-6 at this theta)
  const double err = (quat_log(quat_exp(theta)) - theta).norm();
  EXPECT_LT(err, std::pow(theta.norm(), 3) / 6.0);
  EXPECT_GT(err, 0.0);

  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const Vec3 th = random_vec(&rng, 0.05);
    EXPECT_LT((quat_log(quat_exp(th)) - th).norm(),
              std::pow(th.norm(), 3) / 6.0 + 1e-15);
    EXPECT_LT((quat_log_exact(quat_exp_exact(th)) - th).norm(), 1e-12);
  }
}

TEST(ExpLog, LogCanonicalizesDoubleCover) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const UnitQuaternion q = random_quat(&rng);
    EXPECT_LT((quat_log_exact(q) - quat_log_exact(q.negated())).norm(), 1e-12);
    EXPECT_LE(quat_log_exact(q).norm(), M_PI + 1e-9);
  }
}

TEST(RotOf, KnownRotations) {
  EXPECT_LT((rot_of(UnitQuaternion()) - Mat3::Identity()).norm(), 1e-15);
  const UnitQuaternion qz = quat_exp_exact(M_PI / 2 * Vec3::UnitZ());
  EXPECT_LT((rot_of(qz) * Vec3::UnitX() - Vec3::UnitY()).norm(), 1e-9);

  std::mt19937_64 rng(6);
  for (int i = 0; i < 100; ++i) {
    const Mat3 r = rot_of(random_quat(&rng));
    EXPECT_LT((r.transpose() * r - Mat3::Identity()).norm(), 1e-9);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
  }
}

TEST(RotOf, DoubleCover) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const UnitQuaternion q = random_quat(&rng);
    EXPECT_LT(rotation_distance(q, q.negated()), 1e-12);
  }
}

TEST(RotOf, FirstOrderAgreement) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> mag(0.0, 0.1);
  for (int i = 0; i < 200; ++i) {
    Vec3 th = random_vec(&rng);
    th = th / th.norm() * mag(rng);
    const double err =
        (rot_of(quat_exp(th)) - Mat3::Identity() - skew(th)).cwiseAbs().maxCoeff();
    EXPECT_LT(err, 2.0 * th.squaredNorm() + 1e-14);
  }
}

TEST(Yaw, KnownValues) {
  EXPECT_DOUBLE_EQ(yaw_of(UnitQuaternion()), 0.0);
  EXPECT_NEAR(yaw_of(quat_exp_exact(M_PI / 2 * Vec3::UnitZ())), M_PI / 2, 1e-9);
  EXPECT_NEAR(yaw_of(quat_exp_exact(0.7 * Vec3::UnitY())), 0.0, 1e-9);
  const double y = yaw_of(quat_exp_exact(3.0 * Vec3::UnitZ()));
  EXPECT_NEAR(y, 3.0, 1e-9);
  EXPECT_TRUE(y > -M_PI && y <= M_PI);
}

TEST(Yaw, WrapConvention) {
  EXPECT_NEAR(wrap_angle(M_PI - 0.01 - (-M_PI + 0.01)), -0.02, 1e-12);
  EXPECT_NEAR(wrap_angle(3 * M_PI), M_PI, 1e-12);
  EXPECT_NEAR(wrap_angle(-3 * M_PI), M_PI, 1e-12);
}

TEST(Yaw, ErrorJacobianMatchesFd) {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 50; ++i) {
    const UnitQuaternion q = random_quat(&rng);
    if (std::abs(std::abs(yaw_of(q)) - M_PI) < 0.1) continue;  // cut
    const Eigen::RowVector3d j = yaw_error_jacobian(q);
    for (int k = 0; k < 3; ++k) {
      const double eps = 1e-7;
      Vec3 d = Vec3::Zero();
      d(k) = eps;
      const double plus = yaw_of(q * quat_exp(d));
      const double minus = yaw_of(q * quat_exp(-d));
      EXPECT_NEAR(j(k), wrap_angle(plus - minus) / (2 * eps), 1e-6);
    }
  }
}
