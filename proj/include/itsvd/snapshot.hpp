// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ITSVD_SNAPSHOT_HPP
#define ITSVD_SNAPSHOT_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "itsvd/error.hpp"

namespace itsvd
{

using Index = Eigen::Index;

// Raw physical fields of one partition (or of the whole domain) at one time
// instant: one column per state, one row per spatial DoF. Column-major
// storage makes the flattened matrix state-major, i.e. exactly the layout of
// a state vector.
using Fields = Eigen::MatrixXd;

// Row distribution of the spatial DoFs over partitions. Each partition owns
// a contiguous block of L_p DoFs of every state.
class Layout
{
public:
  Layout() = default;

  Layout(int states, std::vector<Index> local_dofs) : states_(states), local_dofs_(std::move(local_dofs))
  {
    if (states_ < 1)
    {
      throw ArgumentError("layout needs at least one state");
    }
    if (local_dofs_.empty())
    {
      throw ArgumentError("layout needs at least one partition");
    }
    for (auto l : local_dofs_)
    {
      if (l < 1)
      {
        throw ArgumentError("every partition must own at least one DoF");
      }
    }
  }

  // Splits `total_dofs` into `partitions` contiguous chunks whose sizes
  // differ by at most one.
  static Layout Even(int states, Index total_dofs, int partitions)
  {
    if (partitions < 1 || total_dofs < partitions)
    {
      throw ArgumentError("cannot split " + std::to_string(total_dofs) + " DoFs over " +
                          std::to_string(partitions) + " partitions");
    }
    std::vector<Index> dofs(static_cast<std::size_t>(partitions), total_dofs / partitions);
    for (Index p = 0; p < total_dofs % partitions; p++)
    {
      dofs[static_cast<std::size_t>(p)]++;
    }
    return Layout(states, std::move(dofs));
  }

  int states() const { return states_; }
  int partitions() const { return static_cast<int>(local_dofs_.size()); }
  const std::vector<Index> &local_dofs() const { return local_dofs_; }
  Index local_dofs(int p) const { return local_dofs_.at(static_cast<std::size_t>(p)); }
  Index total_dofs() const { return std::accumulate(local_dofs_.begin(), local_dofs_.end(), Index{0}); }
  Index dof_offset(int p) const
  {
    return std::accumulate(local_dofs_.begin(), local_dofs_.begin() + p, Index{0});
  }
  // Y_p = S * L_p
  Index local_rows(int p) const { return states_ * local_dofs(p); }
  // N = S * sum_p L_p
  Index global_rows() const { return states_ * total_dofs(); }

  // Partition p's slice of a global field set.
  Fields Slice(const Fields &global, int p) const
  {
    return global.middleRows(dof_offset(p), local_dofs(p));
  }

  bool operator==(const Layout &) const = default;

private:
  int states_ = 1;
  std::vector<Index> local_dofs_{1};
};

// Per-state reference values and the global DoF scale used to
// non-dimensionalize snapshots.
struct ReferenceScales
{
  std::vector<double> per_state_ref;
  // Global DoF count sum_p L_p, identical on all partitions.
  std::int64_t dof_scale = 1;

  int states() const { return static_cast<int>(per_state_ref.size()); }

  void Validate() const
  {
    if (per_state_ref.empty())
    {
      throw ArgumentError("reference scales need at least one state");
    }
    for (std::size_t s = 0; s < per_state_ref.size(); s++)
    {
      if (!(per_state_ref[s] > 0.0) || !std::isfinite(per_state_ref[s]))
      {
        throw ArgumentError("reference value of state " + std::to_string(s) +
                            " must be positive and finite");
      }
    }
    if (dof_scale < 1)
    {
      throw ArgumentError("DoF scale must be positive");
    }
  }

  double factor(int state) const
  {
    return per_state_ref[static_cast<std::size_t>(state)] * static_cast<double>(dof_scale);
  }

  bool operator==(const ReferenceScales &) const = default;
};

struct LocalStateVector
{
  Eigen::VectorXd values;
  Index time_index = 0;
  int partition_id = 0;
};

inline LocalStateVector assemble_state_vector(const Fields &fields, const ReferenceScales &scales,
                                              Index time_index = 0, int partition_id = 0)
{
  scales.Validate();
  if (fields.cols() != scales.states())
  {
    throw ArgumentError("expected " + std::to_string(scales.states()) + " state fields, got " +
                        std::to_string(fields.cols()));
  }
  LocalStateVector y;
  y.time_index = time_index;
  y.partition_id = partition_id;
  y.values.resize(fields.size());
  const Index dofs = fields.rows();
  for (int s = 0; s < scales.states(); s++)
  {
    const double f = scales.factor(s);
    for (Index l = 0; l < dofs; l++)
    {
      const double v = fields(l, s);
      if (!std::isfinite(v))
      {
        throw DataError("non-finite value in state " + std::to_string(s) + " at index " +
                        std::to_string(l) + " (t=" + std::to_string(time_index) + ")");
      }
      y.values[s * dofs + l] = v / f;
    }
  }
  return y;
}

inline Fields disassemble_state_vector(const Eigen::Ref<const Eigen::VectorXd> &y,
                                       const ReferenceScales &scales)
{
  scales.Validate();
  const Index states = scales.states();
  if (y.size() % states != 0)
  {
    throw ArgumentError("state vector of length " + std::to_string(y.size()) +
                        " does not split into " + std::to_string(states) + " blocks");
  }
  const Index dofs = y.size() / states;
  Fields fields(dofs, states);
  for (int s = 0; s < states; s++)
  {
    const double f = scales.factor(s);
    for (Index l = 0; l < dofs; l++)
    {
      fields(l, s) = f * y[s * dofs + l];
    }
  }
  return fields;
}

inline Fields disassemble_state_vector(const LocalStateVector &y, const ReferenceScales &scales)
{
  return disassemble_state_vector(y.values, scales);
}

// Column buffer aggregating snapshots between two updates.
class BunchBuffer
{
public:
  BunchBuffer(Index rows, Index capacity) : columns_(rows, capacity)
  {
    if (capacity < 1)
    {
      throw ArgumentError("bunch capacity must be >= 1");
    }
    columns_.setZero();
  }

  Index rows() const { return columns_.rows(); }
  Index capacity() const { return columns_.cols(); }
  Index size() const { return fill_; }
  bool empty() const { return fill_ == 0; }
  bool full() const { return fill_ == capacity(); }

  // Returns true once the buffer holds `capacity` columns.
  bool push(const Eigen::Ref<const Eigen::VectorXd> &y)
  {
    if (full())
    {
      throw std::logic_error("push into a full bunch buffer; flush it first");
    }
    if (y.size() != rows())
    {
      throw ArgumentError("snapshot length " + std::to_string(y.size()) + " != bunch rows " +
                          std::to_string(rows()));
    }
    columns_.col(fill_++) = y;
    return full();
  }

  bool push(const LocalStateVector &y) { return push(y.values); }

  // Only the first size() columns; the rest is unobservable.
  auto view() const { return columns_.leftCols(fill_); }

  void clear() { fill_ = 0; }

private:
  Eigen::MatrixXd columns_;
  Index fill_ = 0;
};

}  // namespace itsvd

#endif  // ITSVD_SNAPSHOT_HPP
