#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "stateval/liegroups.hpp"
#include "test_support.hpp"

namespace stateval {
namespace {

using std::numbers::pi;

double max_abs(const Matrix3& m) { return m.cwiseAbs().maxCoeff(); }

Matrix3 rz(double angle) {
  Matrix3 r;
  r << std::cos(angle), -std::sin(angle), 0, std::sin(angle), std::cos(angle), 0, 0, 0, 1;
  return r;
}

TEST(So3Hat, ZeroAndUnitX) {
  EXPECT_EQ(so3_hat(Vector3::Zero()), Matrix3::Zero());
  Matrix3 expected;
  expected << 0, 0, 0, 0, 0, -1, 0, 1, 0;
  EXPECT_EQ(so3_hat(Vector3::UnitX()), expected);
}

TEST(So3Hat, ActsAsCrossProductAndInvertsVee) {
  auto rng = testing::make_rng(1);
  for (int i = 0; i < 200; ++i) {
    const Vector3 w = testing::random_vector(rng, 3.0);
    const Vector3 u = testing::random_vector(rng, 3.0);
    const Matrix3 s = so3_hat(w);
    EXPECT_EQ(s + s.transpose(), Matrix3::Zero());
    EXPECT_LT((s * u - w.cross(u)).norm(), 1e-12);
    EXPECT_EQ(so3_vee(s), w);
  }
}

TEST(So3Vee, KnownMatrix) {
  Matrix3 s;
  s << 0, -3, 2, 3, 0, -1, -2, 1, 0;
  EXPECT_EQ(so3_vee(s), Vector3(1, 2, 3));
  EXPECT_EQ(so3_vee(Matrix3::Zero()), Vector3::Zero());
}

TEST(So3Vee, RejectsSymmetricInput) {
  Matrix3 sym;
  sym << 1, 2, 3, 2, 4, 5, 3, 5, 6;
  try {
    so3_vee(sym);
    FAIL() << "expected NotSkewSymmetric";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSkewSymmetric);
  }
}

TEST(So3Exp, IdentityAndQuarterTurnAboutX) {
  EXPECT_EQ(so3_exp(Vector3::Zero()).matrix(), Matrix3::Identity());
  Matrix3 expected;
  expected << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  EXPECT_LT(max_abs(so3_exp(Vector3(pi / 2, 0, 0)).matrix() - expected), 1e-15);
}

TEST(So3Exp, MatchesScalingAndSquaringSeries) {
  auto rng = testing::make_rng(2);
  std::uniform_real_distribution<double> angle(0.0, 3.0);
  for (int i = 0; i < 500; ++i) {
    const Vector3 w = testing::random_vector(rng).normalized() * angle(rng);
    const Rotation r = so3_exp(w);
    EXPECT_LT(max_abs(r.matrix() - oracle::expm(so3_hat(w))), 1e-9);
    EXPECT_TRUE(is_rotation_matrix(r.matrix()));
  }
}

TEST(So3Exp, TaylorBranchAgreesWithSeries) {
  for (double theta : {0.0, 1e-12, 1e-8, 5e-6, 9.99e-6, 1e-5, 2e-5}) {
    const Vector3 w = Vector3(1, -2, 0.5).normalized() * theta;
    EXPECT_LT(max_abs(so3_exp(w).matrix() - oracle::expm(so3_hat(w))), 1e-15) << theta;
    EXPECT_LT((so3_log(so3_exp(w)) - w).norm(), 1e-15) << theta;
  }
}

TEST(So3Log, KnownRotations) {
  EXPECT_EQ(so3_log(Rotation::identity()), Vector3::Zero());
  const Vector3 w = so3_log(Rotation::from_matrix(rz(pi / 2)));
  EXPECT_LT((w - Vector3(0, 0, pi / 2)).norm(), 1e-15);
}

TEST(So3Log, HalfTurnUsesPositiveFirstComponent) {
  Matrix3 rx_pi;
  rx_pi << 1, 0, 0, 0, -1, 0, 0, 0, -1;
  const Vector3 w = so3_log(Rotation::from_matrix(rx_pi));
  EXPECT_NEAR(w.norm(), pi, 1e-15);
  EXPECT_LT((w - Vector3(pi, 0, 0)).norm(), 1e-12);

  // 180 degrees about (0, -1, 1)/sqrt(2): first nonzero component made positive
  const Vector3 axis = Vector3(0, -1, 1).normalized();
  const Matrix3 r = 2.0 * axis * axis.transpose() - Matrix3::Identity();
  const Vector3 w2 = so3_log(Rotation::from_matrix(r));
  EXPECT_NEAR(w2.norm(), pi, 1e-12);
  EXPECT_LT((w2 / pi - Vector3(0, 1, -1).normalized()).norm(), 1e-12);
}

TEST(So3Log, RoundTripAcrossAngleRange) {
  auto rng = testing::make_rng(3);
  std::uniform_real_distribution<double> angle(1e-9, pi - 1e-3);
  for (int i = 0; i < 2000; ++i) {
    const Vector3 w = testing::random_vector(rng).normalized() * angle(rng);
    const Vector3 back = so3_log(so3_exp(w));
    EXPECT_LT((back - w).norm(), 1e-9);
    EXPECT_LE(back.norm(), pi);
  }
}

TEST(So3Log, NearHalfTurnRoundTrip) {
  auto rng = testing::make_rng(4);
  for (double delta : {1e-3, 1e-5, 1e-8, 1e-11, 0.0}) {
    for (int i = 0; i < 50; ++i) {
      const Vector3 w = testing::random_vector(rng).normalized() * (pi - delta);
      const Rotation r = so3_exp(w);
      const Vector3 back = so3_log(r);
      EXPECT_LE(back.norm(), pi + 1e-15);
      EXPECT_LT(max_abs(so3_exp(back).matrix() - r.matrix()), 1e-9) << delta;
    }
  }
}

TEST(Rotation, FromMatrixValidates) {
  Matrix3 bad = Matrix3::Identity();
  bad(0, 0) = 1.1;
  EXPECT_THROW(Rotation::from_matrix(bad), Error);
  EXPECT_THROW(Rotation::from_matrix(-Matrix3::Identity()), Error);  // det = -1
  EXPECT_NO_THROW(Rotation::from_matrix(rz(0.3)));
}

TEST(Rotation, QuaternionHasNonNegativeScalar) {
  auto rng = testing::make_rng(5);
  for (int i = 0; i < 100; ++i) {
    const Rotation r = testing::random_rotation(rng);
    const Eigen::Quaterniond q = r.quaternion();
    EXPECT_GE(q.w(), 0.0);
    EXPECT_LT(max_abs(Rotation::from_quaternion(q).matrix() - r.matrix()), 1e-14);
  }
}

TEST(Rotation, ProjectRecoversNearbyRotation) {
  auto rng = testing::make_rng(6);
  const Rotation r = testing::random_rotation(rng);
  Matrix3 noisy = r.matrix();
  noisy(0, 1) += 1e-6;
  const Rotation p = Rotation::project(noisy);
  EXPECT_TRUE(is_rotation_matrix(p.matrix(), 1e-14));
  EXPECT_LT(max_abs(p.matrix() - r.matrix()), 1e-6);
}

TEST(Se23, ComposeIdentityLeavesElementUnchanged) {
  auto rng = testing::make_rng(7);
  const ExtendedPose b = testing::random_extended_pose(rng);
  const ExtendedPose c = se23_compose(ExtendedPose::identity(), b);
  EXPECT_EQ(c.rotation.matrix(), b.rotation.matrix());
  EXPECT_EQ(c.translation, b.translation);
  EXPECT_EQ(c.velocity, b.velocity);
}

TEST(Se23, ComposeKnownElements) {
  const ExtendedPose a{Rotation::from_matrix(rz(pi / 2)), {1, 0, 0}, {0, 1, 0}};
  const ExtendedPose b{Rotation::identity(), {1, 0, 0}, {1, 0, 0}};
  const ExtendedPose c = se23_compose(a, b);

  // 5x5 product of the embeddings, written out independently
  const Matrix5 expected = oracle::extended(rz(pi / 2), {1, 0, 0}, {0, 1, 0}) *
                           oracle::extended(Matrix3::Identity(), {1, 0, 0}, {1, 0, 0});
  EXPECT_LT((embed(c) - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((c.translation - Vector3(1, 1, 0)).norm(), 1e-15);
  EXPECT_LT((c.velocity - Vector3(0, 2, 0)).norm(), 1e-15);
  EXPECT_LT(max_abs(c.rotation.matrix() - rz(pi / 2)), 1e-15);
}

TEST(Se23, InverseKnownElements) {
  const ExtendedPose id = se23_inverse(ExtendedPose::identity());
  EXPECT_EQ(embed(id), Matrix5::Identity());
  const ExtendedPose t{Rotation::identity(), {1, 2, 3}, {4, 5, 6}};
  const ExtendedPose inv = se23_inverse(t);
  EXPECT_EQ(inv.translation, Vector3(-1, -2, -3));
  EXPECT_EQ(inv.velocity, Vector3(-4, -5, -6));
}

TEST(Se23, MatchesEmbeddingProductAndInverse) {
  auto rng = testing::make_rng(8);
  for (int i = 0; i < 1000; ++i) {
    const ExtendedPose a = testing::random_extended_pose(rng);
    const ExtendedPose b = testing::random_extended_pose(rng);
    EXPECT_LT((embed(a * b) - embed(a) * embed(b)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((embed(se23_inverse(a)) - embed(a).inverse()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((embed(a * se23_inverse(a)) - Matrix5::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Se23, Associativity) {
  auto rng = testing::make_rng(9);
  for (int i = 0; i < 1000; ++i) {
    const ExtendedPose a = testing::random_extended_pose(rng);
    const ExtendedPose b = testing::random_extended_pose(rng);
    const ExtendedPose c = testing::random_extended_pose(rng);
    EXPECT_LT((embed((a * b) * c) - embed(a * (b * c))).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Se23, EmbedExtractRoundTrip) {
  auto rng = testing::make_rng(10);
  const ExtendedPose a = testing::random_extended_pose(rng);
  const ExtendedPose b = extract(embed(a));
  EXPECT_EQ(embed(b), embed(a));
  Matrix5 broken = embed(a);
  broken(4, 0) = 0.5;
  EXPECT_THROW(extract(broken), Error);
}

TEST(Se23, OrthonormalityDriftUnderRepeatedComposition) {
  auto rng = testing::make_rng(11);
  ExtendedPose acc = ExtendedPose::identity();
  for (int i = 0; i < 1000; ++i) acc = acc * testing::random_extended_pose(rng);
  EXPECT_TRUE(is_rotation_matrix(acc.rotation.matrix(), 1e-9));
}

TEST(FrobeniusError, KnownValues) {
  EXPECT_EQ(frobenius_error(ExtendedPose::identity()), 0.0);
  EXPECT_DOUBLE_EQ(frobenius_error({Rotation::identity(), {0, 0, 1}, {0, 0, 0}}), 1.0);
  EXPECT_DOUBLE_EQ(frobenius_error({Rotation::identity(), {3, 0, 0}, {4, 0, 0}}), 5.0);
}

TEST(FrobeniusError, MatchesNaiveFiveByFiveNorm) {
  auto rng = testing::make_rng(12);
  for (int i = 0; i < 1000; ++i) {
    const ExtendedPose e = testing::random_extended_pose(rng);
    EXPECT_NEAR(frobenius_error(e), (embed(e) - Matrix5::Identity()).norm(), 1e-12);
  }
}

TEST(Pose, ComposeAndInverseMatchHomogeneousMatrices) {
  auto rng = testing::make_rng(13);
  for (int i = 0; i < 200; ++i) {
    const Pose a = testing::random_extended_pose(rng).pose();
    const Pose b = testing::random_extended_pose(rng).pose();
    EXPECT_LT(((a * b).matrix() - a.matrix() * b.matrix()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((a.inverse().matrix() - a.matrix().inverse()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

}  // namespace
}  // namespace stateval
