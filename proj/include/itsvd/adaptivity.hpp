// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ITSVD_ADAPTIVITY_HPP
#define ITSVD_ADAPTIVITY_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include <Eigen/Core>

#include "itsvd/error.hpp"

namespace itsvd
{

enum class TruncationMode
{
  fixed,
  adaptive,
};

struct TruncationPolicy
{
  TruncationMode mode = TruncationMode::fixed;
  // Rank cap of the fixed mode.
  Eigen::Index q_max = std::numeric_limits<Eigen::Index>::max();
  // Minimum rank o and modified energy threshold of the adaptive mode.
  Eigen::Index min_rank = 1;
  double eta_o = 1.0;

  static TruncationPolicy Fixed(Eigen::Index q_max)
  {
    TruncationPolicy p;
    p.q_max = q_max;
    p.Validate();
    return p;
  }

  static TruncationPolicy Adaptive(Eigen::Index min_rank, double eta_o)
  {
    TruncationPolicy p;
    p.mode = TruncationMode::adaptive;
    p.min_rank = min_rank;
    p.eta_o = eta_o;
    p.Validate();
    return p;
  }

  void Validate() const
  {
    if (mode == TruncationMode::fixed && q_max < 1)
    {
      throw ArgumentError("fixed truncation rank must be >= 1");
    }
    if (mode == TruncationMode::adaptive)
    {
      if (min_rank < 1)
      {
        throw ArgumentError("minimum rank o must be >= 1");
      }
      if (!(eta_o >= 0.0 && eta_o <= 1.0))
      {
        throw ArgumentError("energy threshold eta_o must lie in [0, 1]");
      }
    }
  }
};

namespace detail
{

inline double SumSquares(std::span<const double> s, std::size_t begin, std::size_t end)
{
  double acc = 0.0;
  for (std::size_t i = begin; i < end; i++)
  {
    acc += s[i] * s[i];
  }
  return acc;
}

}  // namespace detail

// Energy of singular values o..q (1-based, inclusive) relative to the total
// energy e minus the o-1 leading values. o = 1 gives the plain retained
// energy ratio.
inline double retained_energy(std::span<const double> s, std::size_t q, std::size_t o, double e)
{
  if (o < 1 || q < o || q > s.size())
  {
    throw ArgumentError("retained_energy needs 1 <= o <= q <= len(s); got o=" + std::to_string(o) +
                        " q=" + std::to_string(q) + " len=" + std::to_string(s.size()));
  }
  const double denominator = e - detail::SumSquares(s, 0, o - 1);
  if (!(e > 0.0) || !(denominator > 0.0))
  {
    throw EnergyAccountingError("non-positive energy denominator " + std::to_string(denominator) +
                                " (e=" + std::to_string(e) + ", o=" + std::to_string(o) + ")");
  }
  return detail::SumSquares(s, o - 1, q) / denominator;
}

// Smallest q in [o, len(s)] whose modified retained energy reaches eta_o.
// Keeps every candidate if len(s) <= o or if no q reaches the threshold.
inline std::size_t adaptive_truncation(std::span<const double> s, std::size_t o, double eta_o, double e)
{
  if (o < 1)
  {
    throw ArgumentError("minimum rank o must be >= 1");
  }
  if (s.size() <= o)
  {
    return s.size();
  }
  // When the leading o-1 values already hold all of e up to rounding, the
  // remaining candidates carry nothing measurable and the floor is enough.
  const double denominator = e - detail::SumSquares(s, 0, o - 1);
  if (!(denominator > 0.0))
  {
    constexpr double rounding = 64.0 * std::numeric_limits<double>::epsilon();
    if (e > 0.0 && denominator >= -rounding * e)
    {
      return o;
    }
    throw EnergyAccountingError("non-positive energy denominator " + std::to_string(denominator) +
                                " (e=" + std::to_string(e) + ", o=" + std::to_string(o) + ")");
  }
  for (std::size_t q = o; q <= s.size(); q++)
  {
    if (retained_energy(s, q, o, e) >= eta_o)
    {
      return q;
    }
  }
  return s.size();
}

inline std::size_t adaptive_truncation(const Eigen::VectorXd &s, std::size_t o, double eta_o, double e)
{
  return adaptive_truncation(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), o,
                             eta_o, e);
}

// Raw footprint of one N x b double-precision matrix.
inline std::int64_t single_matrix_bytes(std::int64_t rows, std::int64_t bunch)
{
  return rows * bunch * static_cast<std::int64_t>(sizeof(double));
}

inline constexpr int kDefaultWorkMatrices = 4;  // B, P, Q_P and the widened Q
inline constexpr double kDefaultBunchSafety = 0.75;

// Largest bunch width whose c_work simultaneously live N x b work matrices
// fit into safety * budget bytes.
inline std::int64_t estimate_bunch_size(std::int64_t rows, std::int64_t mem_budget_bytes,
                                        double safety = kDefaultBunchSafety,
                                        int work_matrices = kDefaultWorkMatrices)
{
  if (rows < 1)
  {
    throw ArgumentError("row count must be positive");
  }
  if (!(safety > 0.0 && safety <= 1.0))
  {
    throw ArgumentError("safety factor must lie in (0, 1]");
  }
  if (work_matrices < 1)
  {
    throw ArgumentError("work matrix count must be >= 1");
  }
  const long double per_column = static_cast<long double>(work_matrices) * rows * sizeof(double);
  const auto b = static_cast<std::int64_t>(
    std::floor(static_cast<long double>(safety) * mem_budget_bytes / per_column));
  if (b < 1)
  {
    const auto minimum = static_cast<std::int64_t>(std::ceil(per_column / safety));
    throw ConfigError("memory budget of " + std::to_string(mem_budget_bytes) +
                      " bytes is too small for b=1; need at least " + std::to_string(minimum) + " bytes");
  }
  return b;
}

}  // namespace itsvd

#endif  // ITSVD_ADAPTIVITY_HPP
