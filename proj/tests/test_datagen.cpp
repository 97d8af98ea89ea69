// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "itsvd/datagen.hpp"
#include "oracles.hpp"

namespace itsvd
{
namespace
{

Eigen::Index NumericalRank(const Eigen::VectorXd &s, double rel)
{
  Eigen::Index r = 0;
  while (r < s.size() && s[r] > rel * s[0])
  {
    r++;
  }
  return r;
}

TEST(Spectrum, RankOne)
{
  const Eigen::MatrixXd y = generate_spectrum({1.0}, 10, 6, 1);
  EXPECT_EQ(NumericalRank(testing::oracle_singular_values(y), 1e-12), 1);
}

TEST(Spectrum, TwoByTwo)
{
  const Eigen::MatrixXd y = generate_spectrum({3.0, 1.0}, 2, 2, 2);
  EXPECT_LE(testing::max_rel_diff(testing::oracle_singular_values(y), Eigen::Vector2d(3.0, 1.0)), 1e-14);
}

TEST(Spectrum, GeometricRecovered)
{
  const auto s = geometric_spectrum(20);
  EXPECT_DOUBLE_EQ(s.front(), 5.0);
  EXPECT_DOUBLE_EQ(s.back(), 10.0 * std::pow(2.0, -20));
  for (auto modes : {SpatialModes::gaussian, SpatialModes::smooth})
  {
    const Eigen::MatrixXd y = generate_spectrum(s, 300, 40, 3, modes, 3);
    const Eigen::VectorXd got = testing::oracle_singular_values(y).head(20);
    for (Eigen::Index i = 0; i < 20; i++)
    {
      EXPECT_NEAR(got[i] / s[static_cast<std::size_t>(i)], 1.0, 1e-10);
    }
  }
}

TEST(Spectrum, Deterministic)
{
  EXPECT_TRUE(generate_spectrum({2, 1}, 9, 5, 4) == generate_spectrum({2, 1}, 9, 5, 4));
  EXPECT_FALSE(generate_spectrum({2, 1}, 9, 5, 4) == generate_spectrum({2, 1}, 9, 5, 5));
}

TEST(Spectrum, RejectsBadTargets)
{
  EXPECT_THROW(generate_spectrum({1, 2}, 5, 5, 1), ArgumentError);
  EXPECT_THROW(generate_spectrum({1, 0}, 5, 5, 1), ArgumentError);
  EXPECT_THROW(generate_spectrum({3, 2, 1}, 5, 2, 1), ArgumentError);
}

TEST(Cylinder, ZeroModesIsConstant)
{
  CylinderCase c;
  c.modes = 0;
  const auto stream = generate_cylinder_like(c);
  EXPECT_EQ(NumericalRank(testing::oracle_singular_values(stream.matrix()), 1e-12), 1);
  EXPECT_TRUE(stream.fields.front() == stream.fields.back());
}

TEST(Cylinder, ThreeModesGiveRankSeven)
{
  CylinderCase c;
  c.states = 2;
  const auto s = testing::oracle_singular_values(generate_cylinder_like(c).matrix());
  EXPECT_EQ(NumericalRank(s, 1e-10), 7);
}

TEST(Cylinder, NoiseFloorPlateau)
{
  CylinderCase c;
  c.noise = 1e-6;
  const auto s = testing::oracle_singular_values(generate_cylinder_like(c).matrix());
  EXPECT_GT(s[7], 1e-8 * s[0]);
  EXPECT_LT(s[7], 1e-4 * s[6]);
  EXPECT_LT(s[7] / s[s.size() - 1], 10.0);
}

TEST(Cylinder, StateMagnitudesAndValidation)
{
  CylinderCase c;
  c.states = 2;
  c.state_magnitudes = {1.0, 1e5};
  const auto stream = generate_cylinder_like(c);
  EXPECT_GT(stream.fields[0].col(1).cwiseAbs().maxCoeff(), 1e4);
  c.decay = 1.0;
  EXPECT_THROW(generate_cylinder_like(c), ArgumentError);
}

TEST(Constrained, AllOnesRowGivesZeroMean)
{
  CylinderCase c;
  const auto base = generate_cylinder_like(c);
  const auto out = generate_constrained(base, Eigen::MatrixXd::Ones(1, base.rows()));
  for (const auto &f : out.fields)
  {
    EXPECT_LE(std::abs(f.sum()), 1e-12);
  }
}

TEST(Constrained, RandomRowsResidual)
{
  CylinderCase c;
  c.states = 2;
  c.noise = 0.1;
  const auto base = generate_cylinder_like(c);
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd a = detail::Gaussian(2, base.rows(), rng);
  const auto out = generate_constrained(base, a);
  EXPECT_LE((a * out.matrix()).cwiseAbs().maxCoeff(), 1e-12);
  Eigen::MatrixXd dependent(2, base.rows());
  dependent.row(0) = a.row(0);
  dependent.row(1) = 2.0 * a.row(0);
  EXPECT_THROW(generate_constrained(base, dependent), ArgumentError);
  EXPECT_THROW(generate_constrained(base, Eigen::MatrixXd::Ones(1, 3)), ArgumentError);
}

TEST(Assembly, LayoutIndependentColumns)
{
  CylinderCase c;
  c.states = 3;
  c.dofs = 23;
  const auto stream = generate_cylinder_like(c);
  const ReferenceScales scales{{1.0, 2.0, 3.0}, 23};
  const Eigen::MatrixXd one = assembled_matrix(stream, Layout::Even(3, 23, 1), scales);
  for (int p : {2, 5})
  {
    const Eigen::MatrixXd many = assembled_matrix(stream, Layout::Even(3, 23, p), scales);
    // Same column Gram matrix: rows only permute.
    EXPECT_LE((many.transpose() * many - one.transpose() * one).cwiseAbs().maxCoeff(), 1e-12);
  }
  const auto back = stream_from_normalized(one, scales);
  EXPECT_LE((back.matrix() - stream.matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace
}  // namespace itsvd
