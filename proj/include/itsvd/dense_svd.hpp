// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ITSVD_DENSE_SVD_HPP
#define ITSVD_DENSE_SVD_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "itsvd/error.hpp"

namespace itsvd
{

struct DenseSvd
{
  Eigen::MatrixXd u;  // m x n, orthonormal columns
  Eigen::VectorXd s;  // n, non-increasing, non-negative
  Eigen::MatrixXd v;  // n x n, orthogonal
  int sweeps = 0;
};

// Flip each (u_i, v_i) pair so that the entry of largest magnitude in u_i is
// positive; on ties the lowest row index decides.
inline void apply_sign_convention(Eigen::MatrixXd &u, Eigen::MatrixXd &v)
{
  for (Eigen::Index i = 0; i < u.cols(); i++)
  {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < u.rows(); r++)
    {
      const double a = std::abs(u(r, i));
      if (a > best)
      {
        best = a;
        arg = r;
      }
    }
    if (u(arg, i) < 0.0)
    {
      u.col(i) = -u.col(i);
      v.col(i) = -v.col(i);
    }
  }
}

// One-sided (Hestenes) Jacobi SVD of an m x n matrix with m >= n. Columns of
// a working copy are rotated pairwise until mutually orthogonal to n*eps
// relative accuracy; the column norms are the singular values and the
// accumulated rotations form V. Left vectors of numerically null singular
// values are completed to an orthonormal set.
inline DenseSvd small_svd(const Eigen::MatrixXd &k)
{
  using Eigen::Index;
  const Index m = k.rows();
  const Index n = k.cols();
  if (m < n)
  {
    throw ArgumentError("small_svd expects rows >= cols");
  }
  if (!k.allFinite())
  {
    throw NumericError("small_svd: non-finite entry in input matrix");
  }

  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double tol = static_cast<double>(std::max<Index>(n, 1)) * eps;
  constexpr int max_sweeps = 100;

  Eigen::MatrixXd w = k;
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd norms(n);
  for (Index j = 0; j < n; j++)
  {
    norms[j] = w.col(j).squaredNorm();
  }

  DenseSvd out;
  for (out.sweeps = 0; out.sweeps < max_sweeps;)
  {
    bool rotated = false;
    for (Index p = 0; p + 1 < n; p++)
    {
      for (Index q = p + 1; q < n; q++)
      {
        const double a = norms[p];
        const double b = norms[q];
        if (a == 0.0 || b == 0.0)
        {
          continue;
        }
        const double g = w.col(p).dot(w.col(q));
        if (std::abs(g) <= tol * std::sqrt(a) * std::sqrt(b))
        {
          continue;
        }
        rotated = true;
        const double zeta = (b - a) / (2.0 * g);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        for (Index r = 0; r < m; r++)
        {
          const double wp = w(r, p);
          const double wq = w(r, q);
          w(r, p) = c * wp - s * wq;
          w(r, q) = s * wp + c * wq;
        }
        for (Index r = 0; r < n; r++)
        {
          const double vp = v(r, p);
          const double vq = v(r, q);
          v(r, p) = c * vp - s * vq;
          v(r, q) = s * vp + c * vq;
        }
        norms[p] = w.col(p).squaredNorm();
        norms[q] = w.col(q).squaredNorm();
      }
    }
    out.sweeps++;
    if (!rotated)
    {
      break;
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  Eigen::VectorXd sv(n);
  for (Index j = 0; j < n; j++)
  {
    sv[j] = w.col(j).norm();
  }
  std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return sv[x] > sv[y]; });

  out.u.resize(m, n);
  out.s.resize(n);
  out.v.resize(n, n);
  const double null_tol = (n > 0 ? sv[order[0]] : 0.0) * tol;
  std::vector<Index> null_cols;
  for (Index j = 0; j < n; j++)
  {
    const Index src = order[static_cast<std::size_t>(j)];
    out.s[j] = sv[src];
    out.v.col(j) = v.col(src);
    if (sv[src] > null_tol && sv[src] > 0.0)
    {
      out.u.col(j) = w.col(src) / sv[src];
    }
    else
    {
      out.u.col(j).setZero();
      null_cols.push_back(j);
    }
  }

  // Complete the left basis with canonical vectors orthogonalized (twice)
  // against everything accepted so far.
  Index candidate = 0;
  for (Index j : null_cols)
  {
    while (candidate < m)
    {
      Eigen::VectorXd e = Eigen::VectorXd::Unit(m, candidate++);
      for (int pass = 0; pass < 2; pass++)
      {
        for (Index i = 0; i < n; i++)
        {
          if (i != j)
          {
            e -= out.u.col(i).dot(e) * out.u.col(i);
          }
        }
      }
      const double norm = e.norm();
      if (norm > 0.5)
      {
        out.u.col(j) = e / norm;
        break;
      }
    }
  }

  apply_sign_convention(out.u, out.v);
  return out;
}

}  // namespace itsvd

#endif  // ITSVD_DENSE_SVD_HPP
