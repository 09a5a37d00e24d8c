#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "bsmimo/error.hpp"
#include "bsmimo/network.hpp"

using namespace bsmimo;
using namespace bsmimo::network;

namespace {

ScatteringMatrix3 printed() { return load_s_matrix(std::string(BSMIMO_FIXTURES) + "/radiator_2g45.json"); }

Mat3 random_mat(Rng& rng, double scale) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat3 m;
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) m(i, k) = scale * cplx(n(rng), n(rng));
  return m;
}

void expect_mat_near(const Mat3& a, const Mat3& b, double tol) {
  EXPECT_LE((a - b).norm(), tol * std::max(1.0, b.norm())) << "a=\n" << a << "\nb=\n" << b;
}

}  // namespace

TEST(SToZ, MatchedIsReferenceImpedance) {
  const auto z = s_to_z(ScatteringMatrix3(Mat3::Zero(), 50.0));
  expect_mat_near(z.entries(), 50.0 * Mat3::Identity(), 1e-14);
}

TEST(SToZ, NearOpenCircuitDiagonal) {
  const double eps = 1e-6;
  const auto z = s_to_z(ScatteringMatrix3(Mat3::Identity() * (1.0 - eps), 50.0));
  const double expected = 50.0 * (2.0 / eps - 1.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(z.entries()(i, i).real(), expected, 1e-6 * expected);
  EXPECT_NEAR(std::abs(z.entries()(0, 1)), 0.0, 1e-9);
}

TEST(SToZ, PrintedMatrixMatchesColumnwiseSolve) {
  const auto s = printed();
  const Mat3 id = Mat3::Identity();
  const Mat3 a = id - s.entries();
  const Mat3 b = id + s.entries();
  Mat3 x;
  for (int c = 0; c < 3; ++c) x.col(c) = a.fullPivLu().solve(b.col(c));
  expect_mat_near(s_to_z(s).entries(), 50.0 * x, 1e-12);
}

TEST(SToZ, SingularThrows) {
  try {
    s_to_z(ScatteringMatrix3(Mat3::Identity()));
    FAIL() << "expected SingularConversion";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularConversion);
  }
}

TEST(ZToS, ReferenceAndShort) {
  expect_mat_near(z_to_s(ImpedanceMatrix3(50.0 * Mat3::Identity())).entries(), Mat3::Zero(), 1e-14);
  expect_mat_near(z_to_s(ImpedanceMatrix3(Mat3::Zero())).entries(), -Mat3::Identity(), 1e-14);
}

TEST(ZToS, SingularThrows) {
  EXPECT_THROW(z_to_s(ImpedanceMatrix3(-50.0 * Mat3::Identity())), Error);
}

TEST(ZToS, RoundTripRandom) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    // Passive-ish S: scale a random matrix to spectral norm 0.9.
    Mat3 m = random_mat(rng, 1.0);
    m *= 0.9 / Eigen::JacobiSVD<Mat3>(m).singularValues()(0);
    const ScatteringMatrix3 s(m);
    expect_mat_near(z_to_s(s_to_z(s)).entries(), m, 1e-10);

    Mat3 zm = random_mat(rng, 30.0);
    zm += 100.0 * Mat3::Identity();
    const ImpedanceMatrix3 z(zm);
    expect_mat_near(s_to_z(z_to_s(z)).entries(), zm, 1e-10);
  }
}

TEST(AmendWithLosses, ZeroLossIsIdentity) {
  const auto s = printed();
  EXPECT_EQ(amend_with_losses(s, 0.0, 0.0).entries(), s.entries());
}

TEST(AmendWithLosses, LargeLossOpensPassivePorts) {
  const auto s = amend_with_losses(printed(), 1e6, 1e6);
  EXPECT_NEAR(std::abs(s(1, 1) - 1.0), 0.0, 1e-3);
  EXPECT_NEAR(std::abs(s(2, 2) - 1.0), 0.0, 1e-3);
  EXPECT_TRUE(s.is_symmetric_radiator(1e-12));
}

TEST(AmendWithLosses, RejectsNegativeLoss) { EXPECT_THROW(amend_with_losses(printed(), -1.0, 0.0), Error); }

TEST(InputReflection, IsolatedPorts) {
  const ScatteringMatrix3 s(Mat3::Zero());
  EXPECT_EQ(input_reflection(s, LoadTermination(-123.0, 45.0)), cplx(0.0));
}

TEST(InputReflection, DecoupledActivePort) {
  Mat3 m = Mat3::Zero();
  m(0, 0) = cplx(0.3, -0.2);
  m(1, 1) = m(2, 2) = cplx(0.5, 0.1);
  m(1, 2) = m(2, 1) = cplx(-0.1, 0.2);
  EXPECT_NEAR(std::abs(input_reflection(ScatteringMatrix3(m), LoadTermination(-50.0, -20.0)) - m(0, 0)), 0.0, 1e-15);
}

TEST(InputReflection, PrintedMatrixReferenceStateOne) {
  const cplx g = input_reflection(printed(), LoadTermination(-200.0, -66.0));
  const double rl_db = 10.0 * std::log10(std::norm(g));
  EXPECT_NEAR(rl_db, -19.6, 1.5);
}

TEST(InputReflection, SingularReduction) {
  Mat3 m = Mat3::Zero();
  m(1, 1) = m(2, 2) = -1.0;
  // Short-circuit loads reflect with -1, so I - Spp G vanishes.
  try {
    input_reflection(ScatteringMatrix3(m), LoadTermination(0.0, 0.0));
    FAIL() << "expected SingularReduction";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularReduction);
  }
}

TEST(InputReflection, PassiveNetworkStaysPassive) {
  Rng rng(11);
  std::uniform_real_distribution<double> x(-500.0, 500.0);
  for (int trial = 0; trial < 500; ++trial) {
    Mat3 m = random_mat(rng, 1.0);
    m *= 0.999 / Eigen::JacobiSVD<Mat3>(m).singularValues()(0);
    const cplx g = input_reflection(ScatteringMatrix3(m), LoadTermination(x(rng), x(rng)));
    EXPECT_LE(std::abs(g), 1.0 + 1e-12);
  }
}

TEST(LoadReflection, ClosedForm) {
  EXPECT_EQ(load_reflection(50.0, 0.0, 50.0), cplx(0.0));
  EXPECT_NEAR(std::abs(load_reflection(0.0, -73.0, 50.0)), 1.0, 1e-15);
}

TEST(LoadTermination, RejectsNegativeResistance) { EXPECT_THROW(LoadTermination(0, 0, -1, 0), Error); }

TEST(ScatteringMatrix3, RejectsBadReferenceImpedance) {
  EXPECT_THROW(ScatteringMatrix3(Mat3::Zero(), 0.0), Error);
}

TEST(SMatrixFile, FixtureIsSymmetricRadiator) {
  const auto s = printed();
  EXPECT_TRUE(s.is_symmetric_radiator());
  EXPECT_EQ(s.z0(), 50.0);
  EXPECT_EQ(s(0, 0), cplx(-0.23, -0.32));
  EXPECT_EQ(s(1, 2), cplx(-0.19, -0.11));
}

TEST(SMatrixFile, RoundTrip) {
  Rng rng(3);
  const ScatteringMatrix3 s(random_mat(rng, 0.3), 75.0);
  const auto path = std::filesystem::temp_directory_path() / "bsmimo_s_roundtrip.json";
  save_s_matrix(s, path);
  const auto back = load_s_matrix(path);
  EXPECT_EQ(back.entries(), s.entries());
  EXPECT_EQ(back.z0(), 75.0);
  std::filesystem::remove(path);
}

TEST(SMatrixFile, MissingFileIsInputError) {
  try {
    load_s_matrix("/nonexistent/s.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(is_input_error(e.code()));
  }
}
