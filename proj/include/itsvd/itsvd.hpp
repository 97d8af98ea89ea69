// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ITSVD_ITSVD_HPP
#define ITSVD_ITSVD_HPP

// Incrementally updated truncated SVD of a row-distributed, column-streamed
// snapshot matrix Y ~ U diag(s) V^T.
//
// Every partition owns the rows of U belonging to its spatial sub-domain;
// s, V and the exact accumulated energy ||Y||_F^2 are global and replicated
// bit-identically on all partitions. New columns arrive in bunches B and are
// absorbed with a rank-b column update:
//
//   M = U^T B,  P = B - U M = Q_P R_P,  [U Q_P] = Q_Q R_Q,
//   K = [[diag(s), M], [0, R_P]]          (basic)
//   K = R_Q [[diag(s), M], [0, R_P]]      (enhanced)
//   K = U' diag(s') V'^T,
//   U <- Q_Q U'(:,1:l),  s <- s'(1:l),  V <- [[V,0],[0,I]] V'(:,1:l).
//
// The small SVD of K runs on partition 0 only and its factors are
// broadcast, so the replicated data never diverges.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "itsvd/adaptivity.hpp"
#include "itsvd/comm.hpp"
#include "itsvd/dense_svd.hpp"
#include "itsvd/gram_schmidt.hpp"
#include "itsvd/snapshot.hpp"
#include "itsvd/timing.hpp"

namespace itsvd
{

struct ItSvdState
{
  Eigen::MatrixXd u_local;  // Y_p x q
  Eigen::VectorXd s;        // q
  Eigen::MatrixXd v;        // T_seen x q
  double energy = 0.0;      // exact ||Y||_F^2 of every absorbed snapshot

  Index rank() const { return s.size(); }
  Index snapshots() const { return v.rows(); }
  bool empty() const { return s.size() == 0; }
};

enum class UpdateVariant
{
  basic,
  enhanced,
};

inline const char *to_string(UpdateVariant v)
{
  return v == UpdateVariant::basic ? "basic" : "enhanced";
}

struct UpdateOptions
{
  UpdateVariant variant = UpdateVariant::enhanced;
  // Second Gram-Schmidt pass over [U Q_P]. Without it Q_Q = [U Q_P] and
  // R_Q = I, which makes both variants coincide.
  bool reorthonormalize = true;
  UpdateTimings *timings = nullptr;
};

struct UpdateReport
{
  Index previous_rank = 0;
  Index columns = 0;
  // Singular values of K that are not numerically zero.
  Index candidates = 0;
  Index rank = 0;
  std::vector<Index> deflated;
};

inline constexpr double kDegenerateNorm = 1e-300;

inline ItSvdState init_rank_one(const Eigen::Ref<const Eigen::VectorXd> &y, comm::Communicator &comm)
{
  const double s1 = std::sqrt(comm.all_reduce_sum(y.squaredNorm()));
  if (!(s1 >= kDegenerateNorm))
  {
    throw DegenerateStartError("first snapshot has vanishing norm " + std::to_string(s1) +
                               "; cannot initialize the factorization");
  }
  ItSvdState state;
  state.u_local = y / s1;
  state.s = Eigen::VectorXd::Constant(1, s1);
  state.v = Eigen::MatrixXd::Ones(1, 1);
  state.energy = s1 * s1;
  return state;
}

inline void accumulate_energy(ItSvdState &state, const Eigen::Ref<const Eigen::VectorXd> &y,
                              comm::Communicator &comm)
{
  state.energy += comm.all_reduce_sum(y.squaredNorm());
}

namespace detail
{

inline Index SelectRank(const TruncationPolicy &policy, const Eigen::VectorXd &s, Index candidates,
                        double energy)
{
  if (policy.mode == TruncationMode::fixed)
  {
    return std::min(policy.q_max, candidates);
  }
  const auto q = adaptive_truncation(
    std::span<const double>(s.data(), static_cast<std::size_t>(candidates)),
    static_cast<std::size_t>(policy.min_rank), policy.eta_o, energy);
  return static_cast<Index>(q);
}

}  // namespace detail

inline UpdateReport update(ItSvdState &state, const Eigen::Ref<const Eigen::MatrixXd> &bunch,
                           comm::Communicator &comm, const TruncationPolicy &policy,
                           const UpdateOptions &options = {})
{
  using Eigen::MatrixXd;
  using Eigen::VectorXd;

  const Index k = bunch.cols();
  const Index u = state.rank();
  if (state.empty())
  {
    throw ContractError("update() needs an initialized state");
  }
  if (k < 1)
  {
    throw ArgumentError("bunch must hold at least one column");
  }
  if (bunch.rows() != state.u_local.rows())
  {
    throw ArgumentError("bunch has " + std::to_string(bunch.rows()) + " rows, U has " +
                        std::to_string(state.u_local.rows()));
  }
  UpdateTimings *timings = options.timings;
  UpdateReport report;
  report.previous_rank = u;
  report.columns = k;
  const Index c = u + k;

  // M = U^T B together with the squared column norms of B in one reduction.
  MatrixXd packed(u + 1, k);
  {
    StepTimer timer(timings, UpdateStep::project);
    packed.topRows(u).noalias() = state.u_local.transpose() * bunch;
    packed.row(u) = bunch.colwise().squaredNorm();
    comm.all_reduce_sum({packed.data(), static_cast<std::size_t>(packed.size())});
  }
  const MatrixXd m = packed.topRows(u);
  const double bunch_norm = std::sqrt(packed.row(u).maxCoeff());

  MatrixXd residual;
  {
    StepTimer timer(timings, UpdateStep::residual);
    residual = bunch;
    residual.noalias() -= state.u_local * m;
  }

  QrResult qr_p;
  {
    StepTimer timer(timings, UpdateStep::qr_residual);
    qr_p = parallel_gram_schmidt(residual, comm, bunch_norm);
  }
  report.deflated = qr_p.deflated;

  MatrixXd widened(state.u_local.rows(), c);
  {
    StepTimer timer(timings, UpdateStep::widen);
    widened.leftCols(u) = state.u_local;
    widened.rightCols(k) = qr_p.q;
  }

  MatrixXd r_q;
  {
    StepTimer timer(timings, UpdateStep::qr_widened);
    if (options.reorthonormalize)
    {
      QrResult qr_q = parallel_gram_schmidt(widened, comm);
      widened = std::move(qr_q.q);
      r_q = std::move(qr_q.r);
    }
  }

  // Header [q, l] first, so every partition knows the payload size.
  Eigen::Vector2d header = Eigen::Vector2d::Zero();
  DenseSvd local;
  if (comm.is_master())
  {
    MatrixXd kmat;
    {
      StepTimer timer(timings, UpdateStep::assemble_k);
      MatrixXd k0 = MatrixXd::Zero(c, c);
      k0.topLeftCorner(u, u).diagonal() = state.s;
      k0.topRightCorner(u, k) = m;
      k0.bottomRightCorner(k, k) = qr_p.r;
      if (options.variant == UpdateVariant::enhanced && options.reorthonormalize)
      {
        kmat.noalias() = r_q * k0;
      }
      else
      {
        kmat = std::move(k0);
      }
    }
    {
      StepTimer timer(timings, UpdateStep::local_svd);
      local = small_svd(kmat);
    }
    {
      StepTimer timer(timings, UpdateStep::adapt_rank);
      // Numerically zero singular values stem from deflated columns; they
      // carry no information and their left vectors are not in range(Q_Q).
      const double zero_tol =
        static_cast<double>(c) * std::numeric_limits<double>::epsilon() * local.s[0];
      Index candidates = 0;
      while (candidates < c && local.s[candidates] > zero_tol)
      {
        candidates++;
      }
      const Index q = detail::SelectRank(policy, local.s, candidates, state.energy);
      const Index l = std::min(q, u + k);
      header << static_cast<double>(q), static_cast<double>(l);
      report.candidates = candidates;
    }
  }

  VectorXd payload;
  Index l = 0;
  {
    StepTimer timer(timings, UpdateStep::broadcast);
    comm.broadcast({header.data(), 2}, 0);
    l = static_cast<Index>(header[1]);
    if (l < 1 || l > c)
    {
      throw ContractError("broadcast truncation rank " + std::to_string(l) + " outside [1, " +
                          std::to_string(c) + "]");
    }
    payload.resize(2 * c * l + l);
    if (comm.is_master())
    {
      payload.head(c * l) = Eigen::Map<const VectorXd>(local.u.data(), c * l);
      payload.segment(c * l, c * l) = Eigen::Map<const VectorXd>(local.v.data(), c * l);
      payload.tail(l) = local.s.head(l);
    }
    comm.broadcast({payload.data(), static_cast<std::size_t>(payload.size())}, 0);
  }
  const Eigen::Map<const MatrixXd> u_prime(payload.data(), c, l);
  const Eigen::Map<const MatrixXd> v_prime(payload.data() + c * l, c, l);

  {
    StepTimer timer(timings, UpdateStep::rotate_v);
    const Index t_seen = state.v.rows();
    MatrixXd v_new(t_seen + k, l);
    v_new.topRows(t_seen).noalias() = state.v * v_prime.topRows(u);
    v_new.bottomRows(k) = v_prime.bottomRows(k);
    state.v = std::move(v_new);
  }
  {
    StepTimer timer(timings, UpdateStep::rotate_u);
    MatrixXd u_new;
    u_new.noalias() = widened * u_prime;
    state.u_local = std::move(u_new);
  }
  state.s = payload.tail(l);
  report.rank = l;
  if (timings != nullptr)
  {
    timings->updates++;
  }
  return report;
}

// max |U^T U - I| over the assembled global U.
inline double orthogonality_error_u(const ItSvdState &state, comm::Communicator &comm)
{
  Eigen::MatrixXd gram = state.u_local.transpose() * state.u_local;
  comm.all_reduce_sum({gram.data(), static_cast<std::size_t>(gram.size())});
  gram -= Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
  return gram.size() == 0 ? 0.0 : gram.cwiseAbs().maxCoeff();
}

inline double orthogonality_error_v(const ItSvdState &state)
{
  Eigen::MatrixXd gram = state.v.transpose() * state.v;
  gram -= Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
  return gram.size() == 0 ? 0.0 : gram.cwiseAbs().maxCoeff();
}

struct EngineOptions
{
  Index bunch = 1;
  TruncationPolicy policy;
  UpdateOptions update;
};

// Per-partition driver of the streaming construction: the first snapshot
// initializes a rank-1 factorization, every further snapshot is buffered
// and absorbed once the bunch is full. finish() flushes a partial bunch.
class IncrementalSvd
{
public:
  IncrementalSvd(comm::Communicator &comm, Index local_rows, EngineOptions options)
    : comm_(&comm), options_(options), buffer_(local_rows, options.bunch)
  {
    options_.policy.Validate();
  }

  // Resume from a completed factorization.
  IncrementalSvd(comm::Communicator &comm, ItSvdState state, EngineOptions options)
    : IncrementalSvd(comm, state.u_local.rows(), options)
  {
    state_ = std::move(state);
  }

  // Returns true when this snapshot triggered an update.
  bool push(const Eigen::Ref<const Eigen::VectorXd> &y)
  {
    if (y.size() != buffer_.rows())
    {
      throw ArgumentError("snapshot length " + std::to_string(y.size()) + " != local rows " +
                          std::to_string(buffer_.rows()));
    }
    if (state_.empty())
    {
      state_ = init_rank_one(y, *comm_);
      return false;
    }
    accumulate_energy(state_, y, *comm_);
    if (buffer_.push(y))
    {
      flush();
      return true;
    }
    return false;
  }

  bool push(const LocalStateVector &y) { return push(y.values); }

  void finish()
  {
    if (!buffer_.empty())
    {
      flush();
    }
  }

  const ItSvdState &state() const { return state_; }
  ItSvdState release() { return std::move(state_); }
  const std::vector<UpdateReport> &reports() const { return reports_; }
  const EngineOptions &options() const { return options_; }

private:
  void flush()
  {
    reports_.push_back(update(state_, buffer_.view(), *comm_, options_.policy, options_.update));
    buffer_.clear();
  }

  comm::Communicator *comm_;
  EngineOptions options_;
  BunchBuffer buffer_;
  ItSvdState state_;
  std::vector<UpdateReport> reports_;
};

}  // namespace itsvd

#endif  // ITSVD_ITSVD_HPP
