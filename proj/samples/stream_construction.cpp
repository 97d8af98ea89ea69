// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

// Streams a synthetic two-state flow through four partitions and prints the
// retained spectrum together with the cumulative energy fraction.

#include <iostream>

#include "itsvd/adaptivity.hpp"
#include "itsvd/datagen.hpp"
#include "itsvd/pipeline.hpp"

int main()
{
  using namespace itsvd;

  CylinderCase flow;
  flow.states = 2;
  flow.dofs = 2000;
  flow.steps = 120;
  flow.noise = 0.01;
  flow.state_magnitudes = {1.0, 1.0e5};  // velocity-like and pressure-like
  const SnapshotStream stream = generate_cylinder_like(flow);

  const Layout layout = Layout::Even(2, 2000, 4);
  const ReferenceScales scales{{1.0, 1.0e5}, 2000};

  EngineOptions options;
  options.bunch = 10;
  options.policy = TruncationPolicy::Adaptive(3, 0.999);
  const ConstructionResult result = construct_stream(stream, layout, scales, options);

  const ItSvdState &state = result.states[0];
  std::cout << "absorbed " << state.snapshots() << " snapshots, rank " << state.rank() << ", "
            << result.seconds << " s\n";
  std::cout << "i,s,retained\n";
  for (Index i = 0; i < state.rank(); i++)
  {
    const std::span<const double> s(state.s.data(), static_cast<std::size_t>(state.s.size()));
    std::cout << i + 1 << "," << state.s[i] << ","
              << retained_energy(s, static_cast<std::size_t>(i + 1), 1, state.energy) << "\n";
  }
}
