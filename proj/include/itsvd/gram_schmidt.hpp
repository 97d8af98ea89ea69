// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ITSVD_GRAM_SCHMIDT_HPP
#define ITSVD_GRAM_SCHMIDT_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "itsvd/comm.hpp"

namespace itsvd
{

// Thin QR of a matrix whose rows are distributed over partitions. Q holds
// this partition's rows; R is global and identical everywhere.
struct QrResult
{
  Eigen::MatrixXd q;
  Eigen::MatrixXd r;
  // Columns whose orthogonal remainder fell below the drop tolerance. Their
  // Q column and R diagonal entry are exactly zero.
  std::vector<Eigen::Index> deflated;
};

inline constexpr double kGramSchmidtDropTol = 1e-14;

// Modified Gram-Schmidt with every inner product globalized by an
// all-reduce. A column is deflated when its remaining global norm drops
// below drop_tol * max(reference_norm, largest input column norm so far).
inline QrResult parallel_gram_schmidt(const Eigen::Ref<const Eigen::MatrixXd> &a,
                                      comm::Communicator &comm, double reference_norm = 0.0,
                                      double drop_tol = kGramSchmidtDropTol)
{
  using Eigen::Index;
  const Index m = a.cols();
  if (m < 1)
  {
    throw ArgumentError("parallel_gram_schmidt needs at least one column");
  }

  Eigen::VectorXd input_norms(m);
  for (Index j = 0; j < m; j++)
  {
    input_norms[j] = a.col(j).squaredNorm();
  }
  comm.all_reduce_sum({input_norms.data(), static_cast<std::size_t>(m)});

  QrResult out;
  out.q.resize(a.rows(), m);
  out.r = Eigen::MatrixXd::Zero(m, m);
  double scale = reference_norm;
  for (Index j = 0; j < m; j++)
  {
    scale = std::max(scale, std::sqrt(input_norms[j]));
    Eigen::VectorXd v = a.col(j);
    for (Index i = 0; i < j; i++)
    {
      double rij = out.q.col(i).dot(v);
      rij = comm.all_reduce_sum(rij);
      out.r(i, j) = rij;
      v -= rij * out.q.col(i);
    }
    const double rjj = std::sqrt(comm.all_reduce_sum(v.squaredNorm()));
    if (!(rjj > drop_tol * scale))
    {
      out.q.col(j).setZero();
      out.deflated.push_back(j);
      continue;
    }
    out.r(j, j) = rjj;
    out.q.col(j) = v / rjj;
  }
  return out;
}

}  // namespace itsvd

#endif  // ITSVD_GRAM_SCHMIDT_HPP
