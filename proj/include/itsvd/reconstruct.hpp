// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ITSVD_RECONSTRUCT_HPP
#define ITSVD_RECONSTRUCT_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "itsvd/comm.hpp"
#include "itsvd/itsvd.hpp"
#include "itsvd/snapshot.hpp"

namespace itsvd
{

// ---------------------------------------------------------------------------
// Rank-q~ evaluation

// Normalized local state vector of snapshot t (1-based) from the first
// q_tilde modes: y~ = U(:,1:q~) (s(1:q~) .* V(t,1:q~)^T).
inline Eigen::VectorXd reconstruct_state_vector(const ItSvdState &state, Index t, Index q_tilde)
{
  if (q_tilde < 1 || q_tilde > state.rank())
  {
    throw ArgumentError("evaluation rank " + std::to_string(q_tilde) + " outside [1, " +
                        std::to_string(state.rank()) + "]");
  }
  if (t < 1 || t > state.snapshots())
  {
    throw ArgumentError("time index " + std::to_string(t) + " outside [1, " +
                        std::to_string(state.snapshots()) + "]");
  }
  const Eigen::VectorXd f =
    state.s.head(q_tilde).cwiseProduct(state.v.row(t - 1).head(q_tilde).transpose());
  return state.u_local.leftCols(q_tilde) * f;
}

inline Fields reconstruct_column(const ItSvdState &state, Index t, Index q_tilde,
                                 const ReferenceScales &scales)
{
  return disassemble_state_vector(reconstruct_state_vector(state, t, q_tilde), scales);
}

// ---------------------------------------------------------------------------
// Realizability clipping

struct StateBounds
{
  std::optional<double> lower;
  std::optional<double> upper;
};

struct RealizabilityBounds
{
  inline static constexpr double kDefaultAlpha = 1e-16;

  std::map<int, StateBounds> per_state;
  double alpha = kDefaultAlpha;

  // Volume fraction style: [alpha, 1].
  StateBounds unit_interval() const { return {alpha, 1.0}; }
  // Turbulence quantity style: [alpha, inf).
  StateBounds positive() const { return {alpha, std::nullopt}; }

  void Validate(int states) const
  {
    if (!(alpha > 0.0))
    {
      throw ArgumentError("realizability floor alpha must be positive");
    }
    for (const auto &[state, b] : per_state)
    {
      if (state < 0 || state >= states)
      {
        throw ArgumentError("bounds reference state " + std::to_string(state) + " outside [0, " +
                            std::to_string(states) + ")");
      }
      if (b.lower && b.upper && !(*b.lower < *b.upper))
      {
        throw ArgumentError("lower bound must be below upper bound for state " + std::to_string(state));
      }
    }
  }
};

struct ClipStats
{
  // Indexed by state.
  std::vector<Index> count;
  std::vector<double> max_excursion;

  Index total() const
  {
    Index n = 0;
    for (auto c : count)
    {
      n += c;
    }
    return n;
  }
};

struct ClipResult
{
  Fields fields;
  ClipStats stats;
};

inline ClipStats clip_realizability_inplace(Fields &fields, const RealizabilityBounds &bounds)
{
  const int states = static_cast<int>(fields.cols());
  bounds.Validate(states);
  ClipStats stats;
  stats.count.assign(static_cast<std::size_t>(states), 0);
  stats.max_excursion.assign(static_cast<std::size_t>(states), 0.0);
  for (const auto &[state, b] : bounds.per_state)
  {
    auto &count = stats.count[static_cast<std::size_t>(state)];
    auto &excursion = stats.max_excursion[static_cast<std::size_t>(state)];
    for (Index l = 0; l < fields.rows(); l++)
    {
      double &x = fields(l, state);
      if (b.lower && x < *b.lower)
      {
        excursion = std::max(excursion, *b.lower - x);
        x = *b.lower;
        count++;
      }
      else if (b.upper && x > *b.upper)
      {
        excursion = std::max(excursion, x - *b.upper);
        x = *b.upper;
        count++;
      }
    }
  }
  return stats;
}

inline ClipResult clip_realizability(Fields fields, const RealizabilityBounds &bounds)
{
  ClipStats stats = clip_realizability_inplace(fields, bounds);
  return {std::move(fields), std::move(stats)};
}

// Upper bound on |F(clipped) - F(unclipped)| for a linear functional whose
// state-major weights match the clipped fields: sum_s ||w_s||_1 * excursion_s.
inline double clip_effect_bound(const Eigen::Ref<const Eigen::VectorXd> &weights, const ClipStats &stats)
{
  const auto states = static_cast<Index>(stats.max_excursion.size());
  if (states == 0 || weights.size() % states != 0)
  {
    throw ArgumentError("weights do not match the clipped state count");
  }
  const Index dofs = weights.size() / states;
  double bound = 0.0;
  for (Index s = 0; s < states; s++)
  {
    bound += weights.segment(s * dofs, dofs).cwiseAbs().sum() * stats.max_excursion[static_cast<std::size_t>(s)];
  }
  return bound;
}

// ---------------------------------------------------------------------------
// Linear quantities of interest

// A linear functional over the global field vector in state-major order,
// i.e. weights[s * L_total + l] multiplies state s at global DoF l.
struct Functional
{
  std::string name;
  Eigen::VectorXd weights;
};

// Partition p's share of a functional's weights, in local state-major order.
inline Eigen::VectorXd local_weights(const Functional &functional, const Layout &layout, int p)
{
  const Index total = layout.total_dofs();
  if (functional.weights.size() != layout.states() * total)
  {
    throw ArgumentError("functional '" + functional.name + "' has " +
                        std::to_string(functional.weights.size()) + " weights, expected " +
                        std::to_string(layout.states() * total));
  }
  const Index offset = layout.dof_offset(p);
  const Index dofs = layout.local_dofs(p);
  Eigen::VectorXd w(layout.states() * dofs);
  for (int s = 0; s < layout.states(); s++)
  {
    w.segment(s * dofs, dofs) = functional.weights.segment(s * total + offset, dofs);
  }
  return w;
}

// F_j = sum over all DoF of w_j . fields, one batched all-reduce.
inline Eigen::VectorXd evaluate_functionals(const Fields &fields, const std::vector<Eigen::VectorXd> &weights,
                                            comm::Communicator &comm)
{
  Eigen::VectorXd values(static_cast<Index>(weights.size()));
  const Eigen::Map<const Eigen::VectorXd> flat(fields.data(), fields.size());
  for (std::size_t j = 0; j < weights.size(); j++)
  {
    if (weights[j].size() != flat.size())
    {
      throw ArgumentError("functional " + std::to_string(j) + " has " + std::to_string(weights[j].size()) +
                          " local weights, fields have " + std::to_string(flat.size()) + " entries");
    }
    values[static_cast<Index>(j)] = weights[j].dot(flat);
  }
  comm.all_reduce_sum({values.data(), static_cast<std::size_t>(values.size())});
  return values;
}

// ---------------------------------------------------------------------------
// Error reports

struct Aggregate
{
  double mean = 0.0;
  double max = 0.0;
  double min = 0.0;

  static Aggregate Of(const std::vector<double> &xs)
  {
    Aggregate a;
    if (xs.empty())
    {
      return a;
    }
    a.max = *std::max_element(xs.begin(), xs.end());
    a.min = *std::min_element(xs.begin(), xs.end());
    double sum = 0.0;
    for (double x : xs)
    {
      sum += x;
    }
    a.mean = std::clamp(sum / static_cast<double>(xs.size()), a.min, a.max);
    return a;
  }
};

struct FunctionalErrorRow
{
  Index t = 0;
  int functional = 0;
  double original = 0.0;
  double reconstructed = 0.0;
  double error = 0.0;
  // |original| too close to zero for a relative error; `error` is absolute.
  bool absolute = false;
};

struct ErrorReport
{
  inline static constexpr double kZeroCrossingTol = 1e-12;

  Index q_tilde = 0;
  std::vector<std::string> functional_names;
  std::vector<FunctionalErrorRow> rows;
  std::vector<Aggregate> functional_summary;  // per functional
  std::vector<Index> times;
  std::vector<std::vector<double>> field_error;  // [time][state]
  std::vector<Aggregate> field_summary;          // per state

  // Mean over functionals of the per-functional mean error.
  double mean_functional_error() const
  {
    if (functional_summary.empty())
    {
      return 0.0;
    }
    double sum = 0.0;
    for (const auto &a : functional_summary)
    {
      sum += a.mean;
    }
    return sum / static_cast<double>(functional_summary.size());
  }

  void WriteCsv(std::ostream &os) const
  {
    os << "t,functional_id,value_original,value_reconstructed,rel_error,abs_flag\n";
    os.precision(17);
    for (const auto &r : rows)
    {
      os << r.t << ',' << r.functional << ',' << r.original << ',' << r.reconstructed << ',' << r.error
         << ',' << (r.absolute ? 1 : 0) << '\n';
    }
  }

  nlohmann::json Summary() const
  {
    auto agg = [](const Aggregate &a) { return nlohmann::json{{"mean", a.mean}, {"max", a.max}, {"min", a.min}}; };
    nlohmann::json j;
    j["q_tilde"] = q_tilde;
    j["functionals"] = nlohmann::json::array();
    for (std::size_t f = 0; f < functional_summary.size(); f++)
    {
      Index flagged = 0;
      for (const auto &r : rows)
      {
        flagged += (r.functional == static_cast<int>(f) && r.absolute) ? 1 : 0;
      }
      auto entry = agg(functional_summary[f]);
      entry["id"] = f;
      entry["name"] = f < functional_names.size() ? functional_names[f] : std::to_string(f);
      entry["absolute_rows"] = flagged;
      j["functionals"].push_back(entry);
    }
    j["fields"] = nlohmann::json::array();
    for (std::size_t s = 0; s < field_summary.size(); s++)
    {
      auto entry = agg(field_summary[s]);
      entry["state"] = s;
      j["fields"].push_back(entry);
    }
    return j;
  }
};

// Per-time, per-functional errors between two functional histories (rows =
// time, columns = functional). Relative unless |original| is below
// kZeroCrossingTol times the functional's largest magnitude.
inline void append_functional_errors(ErrorReport &report, const std::vector<Index> &times,
                                     const Eigen::MatrixXd &original, const Eigen::MatrixXd &reconstructed)
{
  if (original.rows() != reconstructed.rows() || original.cols() != reconstructed.cols() ||
      original.rows() != static_cast<Index>(times.size()))
  {
    throw ArgumentError("functional histories differ in shape");
  }
  report.functional_summary.assign(static_cast<std::size_t>(original.cols()), {});
  for (Index j = 0; j < original.cols(); j++)
  {
    const double scale = original.rows() > 0 ? original.col(j).cwiseAbs().maxCoeff() : 0.0;
    std::vector<double> errors;
    for (Index i = 0; i < original.rows(); i++)
    {
      FunctionalErrorRow row;
      row.t = times[static_cast<std::size_t>(i)];
      row.functional = static_cast<int>(j);
      row.original = original(i, j);
      row.reconstructed = reconstructed(i, j);
      const double diff = std::abs(row.reconstructed - row.original);
      if (std::abs(row.original) < ErrorReport::kZeroCrossingTol * scale || scale == 0.0)
      {
        row.absolute = true;
        row.error = diff;
      }
      else
      {
        row.error = diff / std::abs(row.original);
      }
      errors.push_back(row.error);
      report.rows.push_back(row);
    }
    report.functional_summary[static_cast<std::size_t>(j)] = Aggregate::Of(errors);
  }
  std::sort(report.rows.begin(), report.rows.end(), [](const auto &a, const auto &b) {
    return a.t != b.t ? a.t < b.t : a.functional < b.functional;
  });
}

// Compares stored originals (this partition's fields, one entry per time
// 1..originals.size()) against rank-q_tilde reconstructions: max-abs field
// errors normalized by the reference values, and functional errors.
inline ErrorReport reconstruction_error(const std::vector<Fields> &originals, const ItSvdState &state,
                                        Index q_tilde, const ReferenceScales &scales,
                                        const std::vector<Eigen::VectorXd> &weights, comm::Communicator &comm)
{
  const int states = scales.states();
  const auto horizon = static_cast<Index>(originals.size());
  if (horizon > state.snapshots())
  {
    throw ArgumentError("more originals than absorbed snapshots");
  }
  ErrorReport report;
  report.q_tilde = q_tilde;
  Eigen::MatrixXd f_orig(horizon, static_cast<Index>(weights.size()));
  Eigen::MatrixXd f_rec(horizon, static_cast<Index>(weights.size()));
  std::vector<std::vector<double>> per_state(static_cast<std::size_t>(states));
  for (Index t = 1; t <= horizon; t++)
  {
    const Fields &original = originals[static_cast<std::size_t>(t - 1)];
    if (original.size() == 0)
    {
      throw DataError("missing original snapshot at t=" + std::to_string(t));
    }
    const Fields approx = reconstruct_column(state, t, q_tilde, scales);
    if (approx.rows() != original.rows() || approx.cols() != original.cols())
    {
      throw DataError("original snapshot at t=" + std::to_string(t) + " has the wrong shape");
    }
    // Gather per-partition maxima through a sum over disjoint slots.
    Eigen::MatrixXd slots = Eigen::MatrixXd::Zero(states, comm.size());
    for (int s = 0; s < states; s++)
    {
      slots(s, comm.rank()) =
        (approx.col(s) - original.col(s)).cwiseAbs().maxCoeff() / scales.per_state_ref[static_cast<std::size_t>(s)];
    }
    comm.all_reduce_sum({slots.data(), static_cast<std::size_t>(slots.size())});
    std::vector<double> errs(static_cast<std::size_t>(states));
    for (int s = 0; s < states; s++)
    {
      errs[static_cast<std::size_t>(s)] = slots.row(s).maxCoeff();
      per_state[static_cast<std::size_t>(s)].push_back(errs[static_cast<std::size_t>(s)]);
    }
    report.times.push_back(t);
    report.field_error.push_back(std::move(errs));
    if (!weights.empty())
    {
      f_orig.row(t - 1) = evaluate_functionals(original, weights, comm).transpose();
      f_rec.row(t - 1) = evaluate_functionals(approx, weights, comm).transpose();
    }
  }
  for (const auto &errs : per_state)
  {
    report.field_summary.push_back(Aggregate::Of(errs));
  }
  append_functional_errors(report, report.times, f_orig, f_rec);
  return report;
}

}  // namespace itsvd

#endif  // ITSVD_RECONSTRUCT_HPP
