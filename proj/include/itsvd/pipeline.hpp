// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ITSVD_PIPELINE_HPP
#define ITSVD_PIPELINE_HPP

#include <chrono>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "itsvd/comm.hpp"
#include "itsvd/datagen.hpp"
#include "itsvd/itsvd.hpp"
#include "itsvd/reconstruct.hpp"
#include "itsvd/snapshot.hpp"
#include "itsvd/timing.hpp"

namespace itsvd
{

struct ConstructionResult
{
  std::vector<ItSvdState> states;        // one per partition
  std::vector<UpdateReport> reports;     // partition 0
  UpdateTimings timings;                 // partition 0
  Eigen::MatrixXd functional_log;        // T x functionals, originals
  double seconds = 0.0;                  // wall time of the SPMD region
};

// Streams every snapshot of `stream` through P = layout.partitions()
// engines. Functionals of the original fields are logged per time step.
inline ConstructionResult construct_stream(const SnapshotStream &stream, const Layout &layout,
                                           const ReferenceScales &scales, const EngineOptions &options,
                                           const std::vector<Functional> &functionals = {},
                                           comm::Schedule schedule = comm::Schedule::threaded)
{
  if (stream.states != layout.states() || stream.dofs != layout.total_dofs())
  {
    throw ArgumentError("stream is " + std::to_string(stream.dofs) + " DoF x " + std::to_string(stream.states) +
                        " states, layout expects " + std::to_string(layout.total_dofs()) + " x " +
                        std::to_string(layout.states()));
  }
  if (stream.steps() < 1)
  {
    throw ConfigError("snapshot stream is empty");
  }
  scales.Validate();

  struct PartitionResult
  {
    ItSvdState state;
    std::vector<UpdateReport> reports;
    UpdateTimings timings;
    Eigen::MatrixXd log;
  };

  const auto start = std::chrono::steady_clock::now();
  auto results = comm::run_spmd(
    layout.partitions(),
    [&](comm::Communicator &comm) {
      const int p = comm.rank();
      PartitionResult out;
      EngineOptions local = options;
      local.update.timings = &out.timings;
      std::vector<Eigen::VectorXd> weights;
      for (const auto &f : functionals)
      {
        weights.push_back(local_weights(f, layout, p));
      }
      out.log.resize(stream.steps(), static_cast<Index>(functionals.size()));
      IncrementalSvd engine(comm, layout.local_rows(p), local);
      for (Index t = 1; t <= stream.steps(); t++)
      {
        const Fields fields = layout.Slice(stream.fields[static_cast<std::size_t>(t - 1)], p);
        engine.push(assemble_state_vector(fields, scales, t, p));
        if (!weights.empty())
        {
          out.log.row(t - 1) = evaluate_functionals(fields, weights, comm).transpose();
        }
      }
      engine.finish();
      out.reports = engine.reports();
      out.state = engine.release();
      return out;
    },
    schedule);
  ConstructionResult result;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.reports = std::move(results[0].reports);
  result.timings = results[0].timings;
  result.functional_log = std::move(results[0].log);
  for (auto &r : results)
  {
    result.states.push_back(std::move(r.state));
  }
  return result;
}

// Stacks per-partition U blocks into the global (partition-major) U.
inline Eigen::MatrixXd global_u(const std::vector<ItSvdState> &states)
{
  Index rows = 0;
  for (const auto &s : states)
  {
    rows += s.u_local.rows();
  }
  Eigen::MatrixXd u(rows, states.front().rank());
  Index offset = 0;
  for (const auto &s : states)
  {
    u.middleRows(offset, s.u_local.rows()) = s.u_local;
    offset += s.u_local.rows();
  }
  return u;
}

}  // namespace itsvd

#endif  // ITSVD_PIPELINE_HPP
