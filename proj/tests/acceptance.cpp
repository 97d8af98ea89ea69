// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <Eigen/SVD>

#include "itsvd/adaptivity.hpp"
#include "itsvd/comm.hpp"
#include "itsvd/datagen.hpp"
#include "itsvd/dense_svd.hpp"
#include "itsvd/itsvd.hpp"
#include "itsvd/pipeline.hpp"
#include "itsvd/reconstruct.hpp"
#include "itsvd/store.hpp"

namespace
{

using namespace itsvd;
using comm::Communicator;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;

struct Verdict
{
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char *format, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// Oracles and helpers

VectorXd OracleSingularValues(const MatrixXd &y) { return Eigen::JacobiSVD<MatrixXd>(y).singularValues(); }

// Largest elementwise relative deviation over the first n values.
double RelativeDiff(const VectorXd &a, const VectorXd &b)
{
  const Index n = std::min(a.size(), b.size());
  return ((a.head(n) - b.head(n)).array().abs() / b.head(n).array().abs()).maxCoeff();
}

// Partition-major rows (stacked local state vectors) to global state-major.
MatrixXd ToStateMajor(const MatrixXd &z, const Layout &layout)
{
  MatrixXd out(z.rows(), z.cols());
  const Index total = layout.total_dofs();
  Index row = 0;
  for (int p = 0; p < layout.partitions(); p++)
  {
    const Index lp = layout.local_dofs(p);
    for (int s = 0; s < layout.states(); s++)
    {
      out.middleRows(s * total + layout.dof_offset(p), lp) = z.middleRows(row, lp);
      row += lp;
    }
  }
  return out;
}

// Normalized rank-q reconstruction of every absorbed column, state-major.
MatrixXd Reconstruction(const std::vector<ItSvdState> &states, const Layout &layout, Index q)
{
  const ItSvdState &master = states[0];
  return ToStateMajor(global_u(states).leftCols(q) * master.s.head(q).asDiagonal() * master.v.leftCols(q).transpose(),
                      layout);
}

// Normalized matrix of the stream, state-major.
MatrixXd Normalized(const SnapshotStream &stream, const Layout &layout, const ReferenceScales &scales)
{
  return ToStateMajor(assembled_matrix(stream, layout, scales), layout);
}

EngineOptions Options(Index bunch, TruncationPolicy policy = {}, bool reortho = true)
{
  EngineOptions o;
  o.bunch = bunch;
  o.policy = policy;
  o.update.reorthonormalize = reortho;
  return o;
}

struct Corpus
{
  SnapshotStream stream;
  ReferenceScales scales;
};

// N=300 (S=3, L=100), T=40: smooth random spatial modes with a decaying
// spectrum, states on very different physical scales.
Corpus DeskCorpus()
{
  std::vector<double> s;
  for (int i = 1; i <= 40; i++)
  {
    s.push_back(10.0 * std::pow(0.8, i));
  }
  Corpus c;
  c.scales = {{1.0, 1.0e5, 1.0e-2}, 100};
  c.stream = stream_from_normalized(generate_spectrum(s, 300, 40, 2024, SpatialModes::smooth, 3), c.scales);
  return c;
}

// ---------------------------------------------------------------------------
// Criteria

Verdict OracleEquivalence()
{
  const Corpus c = DeskCorpus();
  const Layout layout = Layout::Even(3, 100, 4);
  const auto r = construct_stream(c.stream, layout, c.scales, Options(8, TruncationPolicy::Fixed(40)));
  const MatrixXd y = Normalized(c.stream, layout, c.scales);
  const double sv = RelativeDiff(r.states[0].s, OracleSingularValues(y));
  const double rec = (Reconstruction(r.states, layout, r.states[0].rank()) - y).cwiseAbs().maxCoeff();
  return {r.states[0].rank() == 40 && sv <= 1e-10 && rec <= 1e-9 && r.seconds < 1.0,
          Fmt("q=%lld sv_rel=%.2e (<=1e-10) rec_maxabs=%.2e (<=1e-9) runtime=%.3fs (<1s)",
              static_cast<long long>(r.states[0].rank()), sv, rec, r.seconds)};
}

Verdict PartitionInvariance()
{
  const Corpus c = DeskCorpus();
  std::vector<VectorXd> s;
  std::vector<MatrixXd> rec;
  for (int p : {1, 2, 4, 8})
  {
    const Layout layout = Layout::Even(3, 100, p);
    const auto r = construct_stream(c.stream, layout, c.scales, Options(8, TruncationPolicy::Fixed(40)));
    s.push_back(r.states[0].s);
    rec.push_back(Reconstruction(r.states, layout, r.states[0].rank()));
  }
  double sv = 0.0;
  double diff = 0.0;
  for (std::size_t i = 0; i < s.size(); i++)
  {
    for (std::size_t j = i + 1; j < s.size(); j++)
    {
      sv = std::max(sv, s[i].size() == s[j].size() ? RelativeDiff(s[i], s[j]) : INFINITY);
      diff = std::max(diff, (rec[i] - rec[j]).cwiseAbs().maxCoeff());
    }
  }
  return {sv <= 1e-10 && diff <= 1e-9,
          Fmt("P={1,2,4,8} pairwise sv_rel=%.2e (<=1e-10) rec_maxabs=%.2e (<=1e-9)", sv, diff)};
}

Verdict BunchInvariance()
{
  const Corpus c = DeskCorpus();
  const Layout layout = Layout::Even(3, 100, 4);
  std::vector<VectorXd> s;
  for (Index b : {1, 5, 40})
  {
    s.push_back(construct_stream(c.stream, layout, c.scales, Options(b, TruncationPolicy::Fixed(40))).states[0].s);
  }
  double sv = 0.0;
  for (std::size_t i = 0; i < s.size(); i++)
  {
    for (std::size_t j = i + 1; j < s.size(); j++)
    {
      sv = std::max(sv, s[i].size() == s[j].size() ? RelativeDiff(s[i], s[j]) : INFINITY);
    }
  }
  return {sv <= 1e-8, Fmt("b={1,5,40} pairwise sv_rel=%.2e (<=1e-8)", sv)};
}

Verdict EckartYoung()
{
  const Corpus c = DeskCorpus();
  const Layout layout = Layout::Even(3, 100, 4);
  const MatrixXd y = Normalized(c.stream, layout, c.scales);
  const DenseSvd one_shot = small_svd(y);
  double identity = 0.0;
  double worst_ratio = 0.0;
  std::ostringstream ratios;
  for (Index q : {1, 2, 5, 10})
  {
    const MatrixXd yq = one_shot.u.leftCols(q) * one_shot.s.head(q).asDiagonal() * one_shot.v.leftCols(q).transpose();
    const double measured = (y - yq).norm();
    const double optimal = one_shot.s.tail(one_shot.s.size() - q).norm();
    identity = std::max(identity, std::abs(measured - optimal) / optimal);

    const auto r = construct_stream(c.stream, layout, c.scales, Options(8, TruncationPolicy::Fixed(q)));
    const double incremental = (y - Reconstruction(r.states, layout, q)).norm();
    const double ratio = incremental / optimal;
    worst_ratio = std::max(worst_ratio, ratio);
    ratios << (q == 1 ? "" : ",") << Fmt("q%lld:%.4f", static_cast<long long>(q), ratio);
  }
  return {identity <= 1e-10 && worst_ratio <= 1.5,
          Fmt("one-shot |err-opt|/opt=%.2e (<=1e-10) incremental/optimal=", identity) + ratios.str() + " (<=1.5)"};
}

Verdict EnergyAccounting()
{
  const Corpus c = DeskCorpus();
  const Layout layout = Layout::Even(3, 100, 4);
  const MatrixXd y = Normalized(c.stream, layout, c.scales);
  const auto r = construct_stream(c.stream, layout, c.scales, Options(8, TruncationPolicy::Fixed(10)));
  const double frob = y.squaredNorm();
  const double energy = std::abs(r.states[0].energy - frob) / frob;
  // retained_energy with o=1 against sums of squared oracle values.
  const VectorXd oracle = OracleSingularValues(y);
  const std::vector<double> s(oracle.data(), oracle.data() + oracle.size());
  double retained = 0.0;
  double partial = 0.0;
  for (std::size_t q = 1; q <= s.size(); q++)
  {
    partial += s[q - 1] * s[q - 1];
    retained = std::max(retained, std::abs(retained_energy(s, q, 1, frob) - partial / frob));
  }
  return {energy <= 1e-12 && retained <= 1e-12,
          Fmt("|e-||Y||_F^2|/||Y||_F^2=%.2e (<=1e-12) retained_energy(o=1) maxdiff=%.2e (<=1e-12)", energy, retained)};
}

std::size_t ExhaustiveMinRank(const std::vector<double> &s, std::size_t o, double eta, double e)
{
  if (s.size() <= o)
  {
    return s.size();
  }
  double lead = 0.0;
  for (std::size_t i = 0; i + 1 < o; i++)
  {
    lead += s[i] * s[i];
  }
  std::size_t best = s.size();
  bool found = false;
  for (std::size_t q = o; q <= s.size(); q++)
  {
    double num = 0.0;
    for (std::size_t i = o - 1; i < q; i++)
    {
      num += s[i] * s[i];
    }
    if (!found && num / (e - lead) >= eta)
    {
      best = q;
      found = true;
    }
  }
  return best;
}

Verdict AdaptiveOracle()
{
  const auto geo = geometric_spectrum(20);
  double e = 0.0;
  for (double x : geo)
  {
    e += x * x;
  }
  const std::size_t q_geo = adaptive_truncation(geo, 3, 0.9, e);
  int agree = q_geo == ExhaustiveMinRank(geo, 3, 0.9, e) ? 1 : 0;
  int cases = 1;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; trial++)
  {
    std::vector<double> s(5 + static_cast<std::size_t>(u(rng) * 55));
    for (auto &x : s)
    {
      x = std::pow(10.0, -8.0 * u(rng));
    }
    std::sort(s.rbegin(), s.rend());
    double energy = 0.0;
    for (double x : s)
    {
      energy += x * x;
    }
    energy *= 1.0 + 0.5 * u(rng);
    const double eta = 0.5 + 0.5 * u(rng);
    for (std::size_t o : {1u, 3u, 10u})
    {
      cases++;
      agree += adaptive_truncation(s, o, eta, energy) == ExhaustiveMinRank(s, o, eta, energy) ? 1 : 0;
    }
  }
  return {agree == cases, Fmt("geo20 o=3 eta=0.9 -> q=%zu; agreement %d/%d (100%% required)", q_geo, agree, cases)};
}

Verdict BunchEstimator()
{
  const double gb = static_cast<double>(single_matrix_bytes(3'180'000, 500)) / 1e9;
  const bool footprint = std::abs(gb - 12.72) <= 0.005 * 12.72;
  int exact = 0;
  int cases = 0;
  for (std::int64_t n : {3, 999, 30'000, 3'180'000})
  {
    for (std::int64_t b : {1, 2, 7, 75, 500, 4096})
    {
      // Budgets for which the formula yields b exactly, at both safeties.
      const std::int64_t full = kDefaultWorkMatrices * n * 8 * b;
      const std::int64_t slack = kDefaultWorkMatrices * n * 8 - 1;
      cases += 3;
      exact += estimate_bunch_size(n, full, 1.0) == b ? 1 : 0;
      exact += estimate_bunch_size(n, full + slack, 1.0) == b ? 1 : 0;
      exact += estimate_bunch_size(n, 2 * full, 0.5) == b ? 1 : 0;
    }
  }
  return {footprint && exact == cases,
          Fmt("N=3180000 b=500 -> %.4f GB (12.72 +-0.5%%); formula inverted %d/%d", gb, exact, cases)};
}

Verdict ConstraintPreservation()
{
  CylinderCase cc;
  cc.states = 2;
  cc.dofs = 100;
  cc.steps = 40;
  cc.noise = 0.05;
  const auto base = generate_cylinder_like(cc);
  std::mt19937_64 rng(8);
  MatrixXd a(3, base.rows());
  a.row(0).setZero();
  a.row(0).head(100).setOnes();  // zero-mean state 0
  a.bottomRows(2) = detail::Gaussian(2, base.rows(), rng);
  const auto stream = generate_constrained(base, a);
  const ReferenceScales scales{{1.0, 1.0}, 100};
  const Layout layout = Layout::Even(2, 100, 4);
  const auto r = construct_stream(stream, layout, scales, Options(5, TruncationPolicy::Fixed(15)));
  const Index q = r.states[0].rank();
  double worst = 0.0;
  for (Index qt = 1; qt <= q; qt++)
  {
    // Back to raw global fields before applying the constraint functionals.
    const MatrixXd raw = Reconstruction(r.states, layout, qt) * static_cast<double>(scales.dof_scale);
    worst = std::max(worst, (a * raw).cwiseAbs().maxCoeff());
  }
  const double input = (a * stream.matrix()).cwiseAbs().maxCoeff();
  return {worst <= 1e-8, Fmt("q~=1..%lld max|A*y~|=%.2e (<=1e-8); input residual %.2e",
                             static_cast<long long>(q), worst, input)};
}

Verdict Realizability()
{
  CylinderCase cc;
  cc.states = 2;
  cc.dofs = 120;
  cc.steps = 40;
  cc.noise = 0.02;
  auto stream = generate_cylinder_like(cc);
  // State 0 mapped onto [0, 1] (volume-fraction like), state 1 shifted to a
  // non-negative range touching zero (turbulence-quantity like).
  double lo0 = INFINITY, hi0 = -INFINITY, lo1 = INFINITY;
  for (const auto &f : stream.fields)
  {
    lo0 = std::min(lo0, f.col(0).minCoeff());
    hi0 = std::max(hi0, f.col(0).maxCoeff());
    lo1 = std::min(lo1, f.col(1).minCoeff());
  }
  for (auto &f : stream.fields)
  {
    f.col(0) = (f.col(0).array() - lo0) / (hi0 - lo0);
    f.col(1).array() -= lo1;
  }
  const ReferenceScales scales{{1.0, 1.0}, 120};
  const Layout layout = Layout::Even(2, 120, 3);
  const auto r = construct_stream(stream, layout, scales, Options(4));
  RealizabilityBounds bounds;
  bounds.per_state[0] = bounds.unit_interval();
  bounds.per_state[1] = bounds.positive();
  std::mt19937_64 rng(5);
  std::vector<Functional> functionals{{"mean0", VectorXd::Zero(240)}, {"mean1", VectorXd::Zero(240)},
                                      {"random", detail::Gaussian(240, 1, rng)}};
  functionals[0].weights.head(120).setConstant(1.0 / 120);
  functionals[1].weights.tail(120).setConstant(1.0 / 120);

  struct Tally
  {
    Index clipped = 0;
    bool in_bounds = true;
    bool stats_match = true;
    double worst_slack = -INFINITY;  // max over t, functionals of |dF| - bound
  };
  const auto tallies = comm::run_spmd(3, [&](Communicator &comm) {
    const int p = comm.rank();
    const ItSvdState &st = r.states[static_cast<std::size_t>(p)];
    std::vector<VectorXd> w;
    for (const auto &f : functionals)
    {
      w.push_back(local_weights(f, layout, p));
    }
    Tally tally;
    for (Index t = 1; t <= st.snapshots(); t++)
    {
      const Fields raw = reconstruct_column(st, t, 3, scales);
      const auto clipped = clip_realizability(raw, bounds);
      // Direct scan of the unclipped reconstruction.
      for (int s = 0; s < 2; s++)
      {
        Index count = 0;
        double excursion = 0.0;
        const auto b = bounds.per_state.at(s);
        for (Index l = 0; l < raw.rows(); l++)
        {
          const double x = raw(l, s);
          const double y = clipped.fields(l, s);
          if (x < *b.lower)
          {
            count++;
            excursion = std::max(excursion, *b.lower - x);
          }
          else if (b.upper && x > *b.upper)
          {
            count++;
            excursion = std::max(excursion, x - *b.upper);
          }
          tally.in_bounds = tally.in_bounds && y >= *b.lower && (!b.upper || y <= *b.upper);
        }
        tally.stats_match = tally.stats_match && count == clipped.stats.count[static_cast<std::size_t>(s)] &&
                            excursion == clipped.stats.max_excursion[static_cast<std::size_t>(s)];
        tally.clipped += count;
      }
      const VectorXd before = evaluate_functionals(raw, w, comm);
      const VectorXd after = evaluate_functionals(clipped.fields, w, comm);
      VectorXd bound(static_cast<Index>(w.size()));
      for (std::size_t j = 0; j < w.size(); j++)
      {
        bound[static_cast<Index>(j)] = clip_effect_bound(w[j], clipped.stats);
      }
      comm.all_reduce_sum({bound.data(), static_cast<std::size_t>(bound.size())});
      tally.worst_slack = std::max(tally.worst_slack, ((after - before).cwiseAbs() - bound).maxCoeff());
    }
    return tally;
  });
  Index clipped = 0;
  bool in_bounds = true;
  bool stats = true;
  for (const auto &t : tallies)
  {
    clipped += t.clipped;
    in_bounds = in_bounds && t.in_bounds;
    stats = stats && t.stats_match;
  }
  const double slack = tallies[0].worst_slack;
  return {clipped > 0 && in_bounds && stats && slack <= 1e-15,
          Fmt("q~=3 clipped=%lld within_bounds=%s stats_match=%s max(|dF|-bound)=%.2e (<=1e-15)",
              static_cast<long long>(clipped), in_bounds ? "yes" : "no", stats ? "yes" : "no", slack)};
}

Verdict ErrorTrend()
{
  CylinderCase cc;
  cc.states = 2;
  cc.dofs = 200;
  cc.steps = 60;
  cc.modes = 3;
  cc.noise = 1e-3;
  cc.state_magnitudes = {1.0, 20.0};
  const auto stream = generate_cylinder_like(cc);
  const ReferenceScales scales{{3.0, 60.0}, 200};
  const Layout layout = Layout::Even(2, 200, 4);
  const auto r = construct_stream(stream, layout, scales, Options(6, TruncationPolicy::Fixed(60)));
  std::vector<Functional> functionals{{"mean0", VectorXd::Zero(400)}, {"mean1", VectorXd::Zero(400)},
                                      {"probe", VectorXd::Zero(400)}, {"moment", VectorXd::Zero(400)}};
  functionals[0].weights.head(200).setConstant(1.0 / 200);
  functionals[1].weights.tail(200).setConstant(1.0 / 200);
  functionals[2].weights[57] = 1.0;
  for (Index l = 0; l < 200; l++)
  {
    functionals[3].weights[l] = std::sin(2.0 * M_PI * (static_cast<double>(l) + 0.5) / 200.0) / 200.0;
  }
  const Index full = r.states[0].rank();
  std::vector<double> errors;
  std::ostringstream trace;
  for (Index q : {Index{1}, Index{2}, Index{4}, Index{8}, full})
  {
    const auto reports = comm::run_spmd(4, [&](Communicator &comm) {
      std::vector<Fields> originals;
      for (const auto &f : stream.fields)
      {
        originals.push_back(layout.Slice(f, comm.rank()));
      }
      std::vector<VectorXd> w;
      for (const auto &f : functionals)
      {
        w.push_back(local_weights(f, layout, comm.rank()));
      }
      return reconstruction_error(originals, r.states[static_cast<std::size_t>(comm.rank())], q, scales, w, comm);
    });
    errors.push_back(reports[0].mean_functional_error());
    trace << (errors.size() == 1 ? "" : " ") << Fmt("q%lld:%.2e", static_cast<long long>(q), errors.back());
  }
  bool monotone = true;
  for (std::size_t i = 1; i < errors.size(); i++)
  {
    monotone = monotone && errors[i] <= 1.1 * errors[i - 1];
  }
  return {monotone && errors.back() <= 1e-8,
          "mean functional error " + trace.str() + Fmt(" (non-increasing +-10%%, full<=1e-8, full q=%lld)",
                                                        static_cast<long long>(full))};
}

Verdict StorageRatio(const fs::path &work)
{
  CylinderCase cc;
  cc.states = 2;
  cc.dofs = 10'000;
  cc.steps = 100;
  cc.modes = 5;
  cc.noise = 0.05;
  const auto stream = generate_cylinder_like(cc);
  const ReferenceScales scales{{1.0, 1.0}, 10'000};
  const Layout layout = Layout::Even(2, 10'000, 4);
  const fs::path full = work / "storage_full";
  fs::remove_all(full);
  store::write_snapshots_full(stream, layout, scales, full);
  const double n = static_cast<double>(layout.global_rows());
  const double t = static_cast<double>(stream.steps());
  double worst = 0.0;
  double b_spread = 0.0;
  std::ostringstream trace;
  for (Index q : {100, 50, 10})
  {
    const double analytic = (n * static_cast<double>(q) + t * static_cast<double>(q)) / (n * t);
    std::vector<double> ratios;
    for (Index b : {5, 20})
    {
      const auto r = construct_stream(stream, layout, scales, Options(b, TruncationPolicy::Fixed(q)));
      const fs::path dir = work / ("storage_q" + std::to_string(q) + "_b" + std::to_string(b));
      fs::remove_all(dir);
      const store::ConstructionInfo info{b, TruncationPolicy::Fixed(q), UpdateVariant::enhanced, true};
      comm::run_spmd(4, [&](Communicator &comm) {
        store::write_state(r.states[static_cast<std::size_t>(comm.rank())], layout, scales, info, dir, comm);
      });
      ratios.push_back(store::measure_disk_ratio(dir, full));
      worst = std::max(worst, std::abs(ratios.back() - analytic) / analytic);
      fs::remove_all(dir);
    }
    b_spread = std::max(b_spread, std::abs(ratios[0] - ratios[1]) / ratios[0]);
    trace << Fmt(" q/T=%.1f:%.4f(analytic %.4f)", static_cast<double>(q) / t, ratios[0], analytic);
  }
  fs::remove_all(full);
  return {worst <= 0.05 && b_spread <= 1e-3,
          "N=20000 T=100" + trace.str() + Fmt(" max_dev=%.2f%% (<=5%%) b-spread=%.1e (<=1e-3)", 100 * worst, b_spread)};
}

Verdict OverheadTrend()
{
  CylinderCase cc;
  cc.dofs = 30'000;
  cc.steps = 500;
  cc.modes = 10;
  cc.decay = 0.8;
  cc.noise = 0.01;
  const auto stream = generate_cylinder_like(cc);
  const ReferenceScales scales{{1.0}, 30'000};
  const Layout layout = Layout::Even(1, 30'000, 1);
  std::vector<double> seconds;
  for (Index b : {50, 10, 1})
  {
    // Best of two runs for every bunch width.
    double best = INFINITY;
    for (int repeat = 0; repeat < 2; repeat++)
    {
      best = std::min(best, construct_stream(stream, layout, scales, Options(b, TruncationPolicy::Fixed(50))).seconds);
    }
    seconds.push_back(best);
  }
  const bool ordered = seconds[0] < seconds[1] && seconds[1] < seconds[2];
  const bool gaps = seconds[1] >= 1.2 * seconds[0] && seconds[2] >= 1.2 * seconds[1];
  return {ordered && gaps, Fmt("N=30000 T=500 q=50 best of 2: t(b=50)=%.2fs t(b=10)=%.2fs t(b=1)=%.2fs (each gap >=20%%)",
                               seconds[0], seconds[1], seconds[2])};
}

Verdict OrthogonalityEndurance()
{
  constexpr Index kRows = 256;
  constexpr Index kUpdates = 10'000;
  auto run = [&](bool reortho) {
    Communicator comm;
    IncrementalSvd engine(comm, kRows, Options(1, TruncationPolicy::Fixed(50), reortho));
    std::mt19937_64 rng(2718);
    std::normal_distribution<double> g(0.0, 1.0);
    VectorXd y(kRows);
    for (Index t = 0; t <= kUpdates; t++)
    {
      for (Index i = 0; i < kRows; i++)
      {
        y[i] = g(rng);
      }
      engine.push(y);
    }
    engine.finish();
    return std::make_pair(orthogonality_error_u(engine.state(), comm), orthogonality_error_v(engine.state()));
  };
  const auto on = run(true);
  const auto off = run(false);
  return {on.first <= 1e-10 && std::isfinite(off.first),
          Fmt("10000 b=1 updates q=50: |U^TU-I|max=%.2e (<=1e-10) |V^TV-I|max=%.2e; no-reortho drift U=%.2e V=%.2e",
              on.first, on.second, off.first, off.second)};
}

}  // namespace

int main(int argc, char **argv)
{
  CLI::App app{"itsvd acceptance criteria"};
  std::string workdir = (fs::temp_directory_path() / "itsvd_acceptance").string();
  std::vector<int> only;
  app.add_option("--workdir", workdir, "scratch directory for storage measurements");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
    {"oracle equivalence", OracleEquivalence},
    {"partition invariance", PartitionInvariance},
    {"bunch invariance", BunchInvariance},
    {"Eckart-Young", EckartYoung},
    {"energy accounting", EnergyAccounting},
    {"adaptive rank oracle", AdaptiveOracle},
    {"bunch-size estimator", BunchEstimator},
    {"constraint preservation", ConstraintPreservation},
    {"realizability", Realizability},
    {"error-vs-rank trend", ErrorTrend},
    {"storage ratio", [&] { return StorageRatio(workdir); }},
    {"overhead trend", OverheadTrend},
    {"orthogonality endurance", OrthogonalityEndurance},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); i++)
  {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && selected.count(id) == 0)
    {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try
    {
      v = criteria[i].second();
    }
    catch (const std::exception &e)
    {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << id << " " << criteria[i].first << ": "
              << v.detail << Fmt(" [%.1fs]", elapsed) << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
