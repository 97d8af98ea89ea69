// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ITSVD_DATAGEN_HPP
#define ITSVD_DATAGEN_HPP

// Synthetic snapshot streams with controllable spectra and constraints.
// Everything is generated globally from a seed and only then sliced into
// partitions, so the assembled data never depends on the partition count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/QR>

#include "itsvd/error.hpp"
#include "itsvd/snapshot.hpp"

namespace itsvd
{

// Global raw fields, one L_total x S matrix per time step.
struct SnapshotStream
{
  int states = 1;
  Index dofs = 0;
  std::vector<Fields> fields;

  Index steps() const { return static_cast<Index>(fields.size()); }
  Index rows() const { return states * dofs; }

  // N x T matrix of raw fields; each column is a state-major global vector.
  Eigen::MatrixXd matrix() const
  {
    Eigen::MatrixXd y(rows(), steps());
    for (Index t = 0; t < steps(); t++)
    {
      y.col(t) = Eigen::Map<const Eigen::VectorXd>(fields[static_cast<std::size_t>(t)].data(), rows());
    }
    return y;
  }
};

// Global normalized snapshot matrix in partition-major row order, i.e. the
// stacking of the local state vectors every partition assembles. Rows differ
// from SnapshotStream::matrix() by a permutation and the per-state scaling.
inline Eigen::MatrixXd assembled_matrix(const SnapshotStream &stream, const Layout &layout,
                                        const ReferenceScales &scales)
{
  Eigen::MatrixXd y(layout.global_rows(), stream.steps());
  for (Index t = 0; t < stream.steps(); t++)
  {
    Index row = 0;
    for (int p = 0; p < layout.partitions(); p++)
    {
      const auto local = assemble_state_vector(layout.Slice(stream.fields[static_cast<std::size_t>(t)], p), scales);
      y.col(t).segment(row, local.values.size()) = local.values;
      row += local.values.size();
    }
  }
  return y;
}

// Raw fields whose normalized state vectors (under `scales`) are the
// columns of `normalized`, an N x T matrix in global state-major row order.
inline SnapshotStream stream_from_normalized(const Eigen::MatrixXd &normalized, const ReferenceScales &scales)
{
  const int states = scales.states();
  if (normalized.rows() % states != 0)
  {
    throw ArgumentError("row count not divisible by the state count");
  }
  SnapshotStream stream;
  stream.states = states;
  stream.dofs = normalized.rows() / states;
  for (Index t = 0; t < normalized.cols(); t++)
  {
    stream.fields.push_back(disassemble_state_vector(normalized.col(t), scales));
  }
  return stream;
}

namespace detail
{

inline Eigen::MatrixXd Gaussian(Index rows, Index cols, std::mt19937_64 &rng)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(rows, cols);
  for (Index j = 0; j < cols; j++)
  {
    for (Index i = 0; i < rows; i++)
    {
      g(i, j) = normal(rng);
    }
  }
  return g;
}

inline Eigen::MatrixXd OrthonormalColumns(const Eigen::MatrixXd &a)
{
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  return qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
}

// Random smooth function on the unit interval sampled at `n` cell centers:
// a Fourier sine/cosine series with 1/k decaying random coefficients.
inline Eigen::VectorXd SmoothFunction(Index n, int terms, std::mt19937_64 &rng)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  for (int k = 1; k <= terms; k++)
  {
    const double c = normal(rng) / k;
    const double theta = phase(rng);
    for (Index i = 0; i < n; i++)
    {
      const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      f[i] += c * std::sin(k * std::numbers::pi * x + theta);
    }
  }
  return f;
}

}  // namespace detail

enum class SpatialModes
{
  gaussian,  // columns of a Gaussian matrix
  smooth,    // random smooth Fourier series, per state block
};

// Y = U diag(s_target) V^T with random orthonormal U (rows x r) and
// V (steps x r), r = len(s_target). With `states` > 1 and smooth modes each
// state block of a column is an independent smooth function.
inline Eigen::MatrixXd generate_spectrum(const std::vector<double> &s_target, Index rows, Index steps,
                                         std::uint64_t seed, SpatialModes modes = SpatialModes::gaussian,
                                         int states = 1)
{
  const auto r = static_cast<Index>(s_target.size());
  if (r < 1 || r > std::min(rows, steps))
  {
    throw ArgumentError("spectrum length must lie in [1, min(N, T)]");
  }
  for (Index i = 0; i < r; i++)
  {
    if (!(s_target[static_cast<std::size_t>(i)] > 0.0) ||
        (i > 0 && s_target[static_cast<std::size_t>(i)] > s_target[static_cast<std::size_t>(i - 1)]))
    {
      throw ArgumentError("target spectrum must be positive and non-increasing");
    }
  }
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd spatial;
  if (modes == SpatialModes::gaussian)
  {
    spatial = detail::Gaussian(rows, r, rng);
  }
  else
  {
    if (rows % states != 0)
    {
      throw ArgumentError("row count not divisible by the state count");
    }
    const Index dofs = rows / states;
    const int terms = static_cast<int>(std::max<Index>(16, 2 * r));
    spatial.resize(rows, r);
    for (Index j = 0; j < r; j++)
    {
      for (int s = 0; s < states; s++)
      {
        spatial.col(j).segment(s * dofs, dofs) = detail::SmoothFunction(dofs, terms, rng);
      }
    }
  }
  const Eigen::MatrixXd u = detail::OrthonormalColumns(spatial);
  const Eigen::MatrixXd v = detail::OrthonormalColumns(detail::Gaussian(steps, r, rng));
  const Eigen::Map<const Eigen::VectorXd> s(s_target.data(), r);
  return u * s.asDiagonal() * v.transpose();
}

// Singular values 10 * 2^-i, i = 1..count.
inline std::vector<double> geometric_spectrum(int count, double leading = 10.0, double ratio = 0.5)
{
  std::vector<double> s;
  double value = leading;
  for (int i = 0; i < count; i++)
  {
    value *= ratio;
    s.push_back(value);
  }
  return s;
}

struct CylinderCase
{
  Index dofs = 100;  // L_total
  int states = 1;
  Index steps = 40;
  int modes = 3;          // oscillatory mode pairs
  double amplitude = 1.0; // a_1; a_j = a_1 * decay^(j-1)
  double decay = 0.5;
  double period = 17.3;   // of the leading oscillation, in steps
  double noise = 0.0;     // relative to a_1
  std::vector<double> state_magnitudes;  // raw scale per state, default 1
  std::uint64_t seed = 1;
};

// Quasi-steady bulk field plus oscillating mode pairs:
//   y(t) = m0 + sum_j a_j [cos(w_j t) u_j + sin(w_j t) w_j] + noise.
// Without noise the stream has rank 1 + 2 * modes.
inline SnapshotStream generate_cylinder_like(const CylinderCase &c)
{
  if (c.dofs < 1 || c.steps < 1 || c.states < 1 || c.modes < 0)
  {
    throw ArgumentError("invalid cylinder-like case");
  }
  if (!(c.decay > 0.0 && c.decay < 1.0) && c.modes > 1)
  {
    throw ArgumentError("mode amplitudes must be strictly decreasing");
  }
  std::mt19937_64 rng(c.seed);
  const Index n = c.dofs * c.states;
  constexpr int kTerms = 16;

  auto field = [&](double offset) {
    Eigen::VectorXd f(n);
    for (int s = 0; s < c.states; s++)
    {
      f.segment(s * c.dofs, c.dofs) = detail::SmoothFunction(c.dofs, kTerms, rng).array() + offset;
    }
    return f;
  };
  const Eigen::VectorXd mean = field(2.0);
  std::vector<Eigen::VectorXd> cosine_modes;
  std::vector<Eigen::VectorXd> sine_modes;
  for (int j = 0; j < c.modes; j++)
  {
    cosine_modes.push_back(field(0.0));
    sine_modes.push_back(field(0.0));
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  const double omega = 2.0 * std::numbers::pi / c.period;
  SnapshotStream stream;
  stream.states = c.states;
  stream.dofs = c.dofs;
  for (Index t = 1; t <= c.steps; t++)
  {
    Eigen::VectorXd y = mean;
    double a = c.amplitude;
    for (int j = 0; j < c.modes; j++)
    {
      const double w = omega * (j + 1);
      y += a * (std::cos(w * static_cast<double>(t)) * cosine_modes[static_cast<std::size_t>(j)] +
                std::sin(w * static_cast<double>(t)) * sine_modes[static_cast<std::size_t>(j)]);
      a *= c.decay;
    }
    if (c.noise > 0.0)
    {
      for (Index i = 0; i < n; i++)
      {
        y[i] += c.noise * c.amplitude * normal(rng);
      }
    }
    Fields f = Eigen::Map<const Fields>(y.data(), c.dofs, c.states);
    for (int s = 0; s < c.states && s < static_cast<int>(c.state_magnitudes.size()); s++)
    {
      f.col(s) *= c.state_magnitudes[static_cast<std::size_t>(s)];
    }
    stream.fields.push_back(std::move(f));
  }
  return stream;
}

// Projects every snapshot onto null(A), where the rows of `constraints`
// (k x N, global state-major order) are linear functionals of the fields.
inline SnapshotStream generate_constrained(const SnapshotStream &base, const Eigen::MatrixXd &constraints)
{
  if (constraints.cols() != base.rows())
  {
    throw ArgumentError("constraint functionals have " + std::to_string(constraints.cols()) +
                        " columns, stream rows are " + std::to_string(base.rows()));
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> pivoted(constraints.transpose());
  if (pivoted.rank() < constraints.rows())
  {
    throw ArgumentError("constraint functionals are linearly dependent");
  }
  const Eigen::MatrixXd basis = detail::OrthonormalColumns(constraints.transpose());
  SnapshotStream out = base;
  for (auto &f : out.fields)
  {
    Eigen::Map<Eigen::VectorXd> y(f.data(), f.size());
    for (int pass = 0; pass < 2; pass++)
    {
      y -= basis * (basis.transpose() * y);
    }
  }
  return out;
}

}  // namespace itsvd

#endif  // ITSVD_DATAGEN_HPP
