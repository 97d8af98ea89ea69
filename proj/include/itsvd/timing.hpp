// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ITSVD_TIMING_HPP
#define ITSVD_TIMING_HPP

#include <array>
#include <chrono>
#include <cstddef>

namespace itsvd
{

// The individual stages of one incremental update, in execution order.
enum class UpdateStep : std::size_t
{
  project,         // M = U^T B, all-reduced
  residual,        // P = B - U M
  qr_residual,     // (Q_P, R_P) = GS(P)
  widen,           // Q = [U Q_P]
  qr_widened,      // (Q_Q, R_Q) = GS(Q)
  assemble_k,      // K on the master
  local_svd,       // svd(K) on the master
  adapt_rank,      // truncation rank selection
  broadcast,       // distribute U', s', V', q
  rotate_v,        // V <- [[V,0],[0,I]] V'
  rotate_u,        // U <- Q_Q U'
  count
};

inline constexpr std::array<const char *, static_cast<std::size_t>(UpdateStep::count)> kUpdateStepNames = {
  "M=U^T*B", "P=B-U*M", "QR(P)", "Q=[U,Q_P]", "QR(Q)", "assemble K",
  "svd(K)",  "adapt q", "bcast",  "V update",  "U update",
};

struct UpdateTimings
{
  std::array<double, static_cast<std::size_t>(UpdateStep::count)> seconds{};
  std::size_t updates = 0;

  double &operator[](UpdateStep step) { return seconds[static_cast<std::size_t>(step)]; }
  double operator[](UpdateStep step) const { return seconds[static_cast<std::size_t>(step)]; }

  double total() const
  {
    double t = 0.0;
    for (double s : seconds)
    {
      t += s;
    }
    return t;
  }

  UpdateTimings &operator+=(const UpdateTimings &other)
  {
    for (std::size_t i = 0; i < seconds.size(); i++)
    {
      seconds[i] += other.seconds[i];
    }
    updates += other.updates;
    return *this;
  }
};

// Accumulates elapsed wall time into one step of an optional sink.
class StepTimer
{
public:
  StepTimer(UpdateTimings *sink, UpdateStep step)
    : sink_(sink), step_(step), start_(std::chrono::steady_clock::now())
  {
  }
  StepTimer(const StepTimer &) = delete;
  StepTimer &operator=(const StepTimer &) = delete;
  ~StepTimer()
  {
    if (sink_ != nullptr)
    {
      (*sink_)[step_] += std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }
  }

private:
  UpdateTimings *sink_;
  UpdateStep step_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace itsvd

#endif  // ITSVD_TIMING_HPP
