// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ITSVD_TOOLS_CLI_HPP
#define ITSVD_TOOLS_CLI_HPP

// Batch front-end: construct, evaluate, spectrum, compare.
//
// Exit codes: 0 success, 2 usage/configuration, 3 data/format,
// 4 numeric/contract.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "itsvd/adaptivity.hpp"
#include "itsvd/comm.hpp"
#include "itsvd/datagen.hpp"
#include "itsvd/error.hpp"
#include "itsvd/itsvd.hpp"
#include "itsvd/pipeline.hpp"
#include "itsvd/reconstruct.hpp"
#include "itsvd/snapshot.hpp"
#include "itsvd/store.hpp"

namespace itsvd::cli
{

namespace fs = std::filesystem;

inline constexpr const char *kFunctionalsFile = "functionals.json";
inline constexpr const char *kFunctionalLogFile = "functionals.csv";

// ---------------------------------------------------------------------------
// Inputs

struct Input
{
  SnapshotStream stream;
  ReferenceScales scales;
};

// synthetic:<kind>[,key=value...] where kind is one of
//   spectrum=geoK   rank-K stream with singular values 10 * 2^-i
//   cylinder=M      mean flow plus M oscillating mode pairs
//   random          i.i.d. Gaussian snapshots
// and keys N (rows), T (steps), S (states), seed, noise.
inline Input synthetic_input(const std::string &spec)
{
  std::map<std::string, std::string> kv;
  std::string kind;
  std::istringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ','))
  {
    const auto eq = token.find('=');
    const std::string key = token.substr(0, eq);
    const std::string value = eq == std::string::npos ? "" : token.substr(eq + 1);
    if (kind.empty())
    {
      kind = key;
    }
    kv[key] = value;
  }
  auto integer = [&](const std::string &key, std::int64_t fallback) -> std::int64_t {
    const auto it = kv.find(key);
    if (it == kv.end())
    {
      return fallback;
    }
    try
    {
      std::size_t used = 0;
      const auto v = std::stoll(it->second, &used);
      if (used != it->second.size())
      {
        throw std::invalid_argument(key);
      }
      return v;
    }
    catch (const std::exception &)
    {
      throw ArgumentError("synthetic input: '" + key + "' needs an integer, got '" + it->second + "'");
    }
  };
  auto real = [&](const std::string &key, double fallback) {
    const auto it = kv.find(key);
    if (it == kv.end())
    {
      return fallback;
    }
    try
    {
      return std::stod(it->second);
    }
    catch (const std::exception &)
    {
      throw ArgumentError("synthetic input: '" + key + "' needs a number, got '" + it->second + "'");
    }
  };
  for (const auto &[key, value] : kv)
  {
    if (key != kind && key != "N" && key != "T" && key != "S" && key != "seed" && key != "noise")
    {
      throw ArgumentError("synthetic input: unknown key '" + key + "'");
    }
  }

  const auto states = static_cast<int>(integer("S", 1));
  const Index steps = integer("T", 40);
  const auto seed = static_cast<std::uint64_t>(integer("seed", 1));
  if (states < 1 || steps < 1)
  {
    throw ArgumentError("synthetic input: S and T must be positive");
  }

  Input in;
  if (kind == "spectrum" || kind == "random")
  {
    const Index rows = integer("N", 300);
    if (rows < 1 || rows % states != 0)
    {
      throw ArgumentError("synthetic input: N must be a positive multiple of S");
    }
    in.scales.per_state_ref.assign(static_cast<std::size_t>(states), 1.0);
    in.scales.dof_scale = rows / states;
    Eigen::MatrixXd y;
    if (kind == "spectrum")
    {
      const std::string &shape = kv["spectrum"];
      if (shape.rfind("geo", 0) != 0)
      {
        throw ArgumentError("synthetic input: spectrum must be geoK, got '" + shape + "'");
      }
      int count = 0;
      try
      {
        count = std::stoi(shape.substr(3));
      }
      catch (const std::exception &)
      {
        throw ArgumentError("synthetic input: spectrum must be geoK, got '" + shape + "'");
      }
      y = generate_spectrum(geometric_spectrum(count), rows, steps, seed, SpatialModes::smooth, states);
    }
    else
    {
      std::mt19937_64 rng(seed);
      y = detail::Gaussian(rows, steps, rng) / std::sqrt(static_cast<double>(rows));
    }
    const double noise = real("noise", 0.0);
    if (noise > 0.0)
    {
      std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
      y += noise * detail::Gaussian(rows, steps, rng) / std::sqrt(static_cast<double>(rows));
    }
    in.stream = stream_from_normalized(y, in.scales);
    return in;
  }
  if (kind == "cylinder")
  {
    CylinderCase c;
    c.modes = static_cast<int>(integer("cylinder", 3));
    c.dofs = integer("N", 300) / states;
    c.states = states;
    c.steps = steps;
    c.noise = real("noise", 0.0);
    c.seed = seed;
    in.stream = generate_cylinder_like(c);
    in.scales.per_state_ref.assign(static_cast<std::size_t>(states), 1.0);
    in.scales.dof_scale = c.dofs;
    return in;
  }
  throw ArgumentError("synthetic input: unknown kind '" + kind + "'");
}

inline Input load_input(const std::string &input)
{
  constexpr std::string_view prefix = "synthetic:";
  if (input.rfind(prefix, 0) == 0)
  {
    return synthetic_input(input.substr(prefix.size()));
  }
  auto stored = store::read_snapshots_full(input);
  return {std::move(stored.stream), std::move(stored.scales)};
}

// Default functionals when none are given: the spatial mean of every state.
inline nlohmann::json default_functionals(int states, Index total_dofs)
{
  nlohmann::json j;
  j["functionals"] = nlohmann::json::array();
  for (int s = 0; s < states; s++)
  {
    j["functionals"].push_back(
      {{"name", "mean_s" + std::to_string(s)}, {"state", s}, {"uniform", 1.0 / static_cast<double>(total_dofs)}});
  }
  return j;
}

// "all", "a:b" (inclusive), or "a,b,c".
inline std::vector<Index> parse_times(const std::string &range, Index horizon)
{
  std::vector<Index> times;
  auto number = [&](const std::string &s) -> Index {
    try
    {
      std::size_t used = 0;
      const Index v = std::stoll(s, &used);
      if (used == s.size())
      {
        return v;
      }
    }
    catch (const std::exception &)
    {
    }
    throw ArgumentError("invalid time index '" + s + "'");
  };
  if (range.empty() || range == "all")
  {
    for (Index t = 1; t <= horizon; t++)
    {
      times.push_back(t);
    }
  }
  else if (const auto colon = range.find(':'); colon != std::string::npos)
  {
    const Index first = number(range.substr(0, colon));
    const Index last = number(range.substr(colon + 1));
    for (Index t = first; t <= last; t++)
    {
      times.push_back(t);
    }
  }
  else
  {
    std::istringstream ss(range);
    std::string token;
    while (std::getline(ss, token, ','))
    {
      times.push_back(number(token));
    }
  }
  for (Index t : times)
  {
    if (t < 1 || t > horizon)
    {
      throw ArgumentError("time index " + std::to_string(t) + " outside [1, " + std::to_string(horizon) + "]");
    }
  }
  return times;
}

// ---------------------------------------------------------------------------
// Subcommands

struct ConstructArgs
{
  std::string input;
  int partitions = 1;
  std::string bunch = "1";
  std::optional<Index> rank;
  bool adaptive = false;
  Index min_rank = 1;
  double eta = 1.0;
  std::string variant = "enhanced";
  bool no_reortho = false;
  std::optional<std::int64_t> mem_budget;
  std::string out;
  std::string store_full;
  std::string functionals;
};

inline void print_timings(std::ostream &os, const UpdateTimings &timings, double wall)
{
  const double total = timings.total();
  os << "construction: " << timings.updates << " updates, " << std::fixed << std::setprecision(6) << wall
     << " s wall\n";
  os << std::left << std::setw(12) << "step" << std::right << std::setw(14) << "seconds" << std::setw(9) << "share"
     << '\n';
  for (std::size_t i = 0; i < timings.seconds.size(); i++)
  {
    os << std::left << std::setw(12) << kUpdateStepNames[i] << std::right << std::setw(14) << timings.seconds[i]
       << std::setw(8) << std::setprecision(2) << (total > 0.0 ? 100.0 * timings.seconds[i] / total : 0.0) << "%"
       << std::setprecision(6) << '\n';
  }
  os << std::defaultfloat;
}

inline int cmd_construct(const ConstructArgs &args, std::ostream &out)
{
  Input in = load_input(args.input);
  const Layout layout = Layout::Even(in.stream.states, in.stream.dofs, args.partitions);

  EngineOptions options;
  if (args.bunch == "auto")
  {
    if (!args.mem_budget)
    {
      throw ArgumentError("--bunch auto requires --mem-budget");
    }
    options.bunch = estimate_bunch_size(layout.global_rows(), *args.mem_budget);
  }
  else
  {
    try
    {
      std::size_t used = 0;
      options.bunch = std::stoll(args.bunch, &used);
      if (used != args.bunch.size())
      {
        throw std::invalid_argument(args.bunch);
      }
    }
    catch (const std::exception &)
    {
      throw ArgumentError("--bunch must be a positive integer or 'auto', got '" + args.bunch + "'");
    }
    if (options.bunch < 1)
    {
      throw ArgumentError("--bunch must be >= 1");
    }
  }
  options.policy = args.adaptive ? TruncationPolicy::Adaptive(args.min_rank, args.eta)
                   : args.rank   ? TruncationPolicy::Fixed(*args.rank)
                                 : TruncationPolicy{};
  options.update.variant = args.variant == "basic" ? UpdateVariant::basic : UpdateVariant::enhanced;
  options.update.reorthonormalize = !args.no_reortho;

  const nlohmann::json functional_json =
    args.functionals.empty() ? default_functionals(layout.states(), layout.total_dofs())
                             : nlohmann::json::parse(store::read_file(args.functionals));
  const auto functionals = store::parse_functionals(functional_json, layout.states(), layout.total_dofs());

  ConstructionResult result = construct_stream(in.stream, layout, in.scales, options, functionals);

  const fs::path dir(args.out);
  store::ConstructionInfo info{options.bunch, options.policy, options.update.variant,
                               options.update.reorthonormalize};
  const auto manifest = comm::run_spmd(layout.partitions(), [&](comm::Communicator &comm) {
    return store::write_state(result.states[static_cast<std::size_t>(comm.rank())], layout, in.scales, info, dir,
                              comm);
  })[0];
  store::write_file_atomic(dir / kFunctionalsFile, functional_json.dump(2) + "\n");
  store::FunctionalLog log;
  for (Index t = 1; t <= in.stream.steps(); t++)
  {
    log.times.push_back(t);
  }
  log.values = result.functional_log;
  store::write_functional_log(dir / kFunctionalLogFile, log);

  if (!args.store_full.empty())
  {
    store::write_snapshots_full(in.stream, layout, in.scales, args.store_full);
    out << "disk ratio: " << store::measure_disk_ratio(dir, args.store_full) << '\n';
  }

  print_timings(out, result.timings, result.seconds);
  const ItSvdState &master = result.states[0];
  out << "N=" << manifest.rows << " T=" << manifest.snapshots << " P=" << layout.partitions()
      << " b=" << options.bunch << " q=" << manifest.rank << " variant=" << to_string(options.update.variant)
      << " reortho=" << (options.update.reorthonormalize ? "on" : "off") << '\n';
  const double u_error = comm::run_spmd(layout.partitions(), [&](comm::Communicator &comm) {
    return orthogonality_error_u(result.states[static_cast<std::size_t>(comm.rank())], comm);
  })[0];
  out << "orthogonality: U " << std::scientific << std::setprecision(3) << u_error << ", V "
      << orthogonality_error_v(master) << std::defaultfloat << '\n';
  return 0;
}

struct EvaluateArgs
{
  std::string state;
  std::optional<Index> qtilde;
  std::string clip;
  std::string times = "all";
  std::string out;
  std::string functionals;
};

inline int cmd_evaluate(const EvaluateArgs &args, std::ostream &out)
{
  const fs::path dir(args.state);
  const store::Manifest manifest = store::read_manifest(dir);
  const Layout &layout = manifest.layout;
  const Index q_tilde = args.qtilde.value_or(manifest.rank);
  if (q_tilde < 1 || q_tilde > manifest.rank)
  {
    throw ArgumentError("--qtilde " + std::to_string(q_tilde) + " outside [1, " + std::to_string(manifest.rank) +
                        "] (stored rank)");
  }
  const auto times = parse_times(args.times, manifest.snapshots);
  std::optional<RealizabilityBounds> bounds;
  if (!args.clip.empty())
  {
    bounds = store::read_bounds(args.clip);
    bounds->Validate(layout.states());
  }
  std::vector<Functional> functionals;
  const fs::path functional_file = args.functionals.empty() ? dir / kFunctionalsFile : fs::path(args.functionals);
  if (fs::exists(functional_file))
  {
    functionals = store::read_functionals(functional_file, layout.states(), layout.total_dofs());
  }

  struct PartitionOut
  {
    std::vector<Fields> fields;
    std::vector<ClipStats> clips;
    Eigen::MatrixXd values;
  };
  auto parts = comm::run_spmd(layout.partitions(), [&](comm::Communicator &comm) {
    const int p = comm.rank();
    const ItSvdState state = store::read_state(dir, comm);
    std::vector<Eigen::VectorXd> weights;
    for (const auto &f : functionals)
    {
      weights.push_back(local_weights(f, layout, p));
    }
    PartitionOut po;
    po.values.resize(static_cast<Index>(times.size()), static_cast<Index>(functionals.size()));
    for (std::size_t i = 0; i < times.size(); i++)
    {
      Fields fields = reconstruct_column(state, times[i], q_tilde, manifest.scales);
      if (bounds)
      {
        po.clips.push_back(clip_realizability_inplace(fields, *bounds));
      }
      if (!weights.empty())
      {
        po.values.row(static_cast<Index>(i)) = evaluate_functionals(fields, weights, comm).transpose();
      }
      po.fields.push_back(std::move(fields));
    }
    return po;
  });

  const fs::path out_dir(args.out);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  nlohmann::json clip_json;
  clip_json["q_tilde"] = q_tilde;
  clip_json["enabled"] = bounds.has_value();
  clip_json["times"] = nlohmann::json::array();
  Index clipped_total = 0;
  for (std::size_t i = 0; i < times.size(); i++)
  {
    Fields global(layout.total_dofs(), layout.states());
    for (int p = 0; p < layout.partitions(); p++)
    {
      global.middleRows(layout.dof_offset(p), layout.local_dofs(p)) = parts[static_cast<std::size_t>(p)].fields[i];
    }
    store::write_matrix(out_dir / ("fields_" + std::to_string(times[i]) + ".bin"), global);
    if (bounds)
    {
      std::vector<Index> count(static_cast<std::size_t>(layout.states()), 0);
      std::vector<double> excursion(static_cast<std::size_t>(layout.states()), 0.0);
      for (const auto &part : parts)
      {
        const ClipStats &c = part.clips[i];
        for (std::size_t s = 0; s < count.size(); s++)
        {
          count[s] += c.count[s];
          excursion[s] = std::max(excursion[s], c.max_excursion[s]);
        }
      }
      for (Index c : count)
      {
        clipped_total += c;
      }
      clip_json["times"].push_back({{"t", times[i]}, {"count", count}, {"max_excursion", excursion}});
    }
  }
  clip_json["total"] = clipped_total;
  store::write_file_atomic(out_dir / "clip_stats.json", clip_json.dump(2) + "\n");
  store::FunctionalLog log{times, parts[0].values};
  store::write_functional_log(out_dir / kFunctionalLogFile, log);
  out << "evaluated " << times.size() << " time steps at q~=" << q_tilde << " (stored q=" << manifest.rank
      << "), clipped " << clipped_total << " values\n";
  return 0;
}

struct SpectrumArgs
{
  std::string state;
};

// CSV: i, s_i, eta^i = sum_{j<=i} s_j^2 / e.
inline int cmd_spectrum(const SpectrumArgs &args, std::ostream &out)
{
  const fs::path dir(args.state);
  const store::Manifest manifest = store::read_manifest(dir);
  // Reading on partition 0 alone would trip the partition check, so run the
  // stored partition count and keep the master's copy.
  const ItSvdState state = comm::run_spmd(manifest.layout.partitions(), [&](comm::Communicator &comm) {
    return store::read_state(dir, comm);
  })[0];
  const std::span<const double> s(state.s.data(), static_cast<std::size_t>(state.s.size()));
  out << "i,s,eta\n" << std::setprecision(17);
  for (std::size_t q = 1; q <= s.size(); q++)
  {
    out << q << ',' << s[q - 1] << ',' << retained_energy(s, q, 1, state.energy) << '\n';
  }
  out << std::defaultfloat;
  return 0;
}

struct CompareArgs
{
  std::string original;
  std::string reconstructed;
  std::string out;
  Index qtilde = 0;
};

inline int cmd_compare(const CompareArgs &args, std::ostream &out)
{
  const auto original = store::read_functional_log(args.original);
  const auto reconstructed = store::read_functional_log(args.reconstructed);
  if (original.values.cols() != reconstructed.values.cols())
  {
    throw DataError("functional logs have " + std::to_string(original.values.cols()) + " and " +
                    std::to_string(reconstructed.values.cols()) + " functionals");
  }
  std::map<Index, Index> row_of;
  for (std::size_t i = 0; i < original.times.size(); i++)
  {
    row_of[original.times[i]] = static_cast<Index>(i);
  }
  std::vector<Index> times;
  Eigen::MatrixXd f_orig(static_cast<Index>(reconstructed.times.size()), original.values.cols());
  Eigen::MatrixXd f_rec(f_orig.rows(), f_orig.cols());
  for (std::size_t i = 0; i < reconstructed.times.size(); i++)
  {
    const auto it = row_of.find(reconstructed.times[i]);
    if (it == row_of.end())
    {
      continue;
    }
    f_orig.row(static_cast<Index>(times.size())) = original.values.row(it->second);
    f_rec.row(static_cast<Index>(times.size())) = reconstructed.values.row(static_cast<Index>(i));
    times.push_back(reconstructed.times[i]);
  }
  if (times.empty())
  {
    throw DataError("functional logs share no time steps");
  }
  const auto n = static_cast<Index>(times.size());
  ErrorReport report;
  report.q_tilde = args.qtilde;
  append_functional_errors(report, times, f_orig.topRows(n), f_rec.topRows(n));
  const auto summary = report.Summary();
  if (!args.out.empty())
  {
    const fs::path dir(args.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ostringstream csv;
    report.WriteCsv(csv);
    store::write_file_atomic(dir / "errors.csv", csv.str());
    store::write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
  }
  out << summary.dump(2) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point

inline int exit_code(const std::exception &e)
{
  if (const auto *spmd = dynamic_cast<const comm::SpmdError *>(&e))
  {
    try
    {
      spmd->rethrow_cause();
    }
    catch (const comm::SpmdError &)
    {
      return 4;
    }
    catch (const std::exception &cause)
    {
      return exit_code(cause);
    }
    catch (...)
    {
      return 4;
    }
  }
  if (dynamic_cast<const ArgumentError *>(&e) != nullptr || dynamic_cast<const ConfigError *>(&e) != nullptr)
  {
    return 2;
  }
  if (dynamic_cast<const DataError *>(&e) != nullptr || dynamic_cast<const nlohmann::json::exception *>(&e) != nullptr ||
      dynamic_cast<const std::filesystem::filesystem_error *>(&e) != nullptr)
  {
    return 3;
  }
  return 4;
}

inline int run_cli(int argc, const char *const *argv, std::ostream &out = std::cout, std::ostream &err = std::cerr)
{
  CLI::App app{"Incremental, spatially partitioned truncated SVD of snapshot streams", "itsvd"};
  app.require_subcommand(1);

  ConstructArgs c;
  auto *construct = app.add_subcommand("construct", "build a factorization from a snapshot stream");
  construct->add_option("--input", c.input, "snapshot directory or synthetic:<spec>")->required();
  construct->add_option("--partitions", c.partitions, "spatial partitions P")->check(CLI::PositiveNumber);
  construct->add_option("--bunch", c.bunch, "bunch size b or 'auto'");
  auto *rank = construct->add_option("--rank", c.rank, "fixed truncation rank q")->check(CLI::PositiveNumber);
  auto *adaptive = construct->add_flag("--adaptive", c.adaptive, "energy-based adaptive truncation");
  auto *min_rank =
    construct->add_option("--min-rank", c.min_rank, "minimum rank o")->check(CLI::PositiveNumber)->needs(adaptive);
  auto *eta = construct->add_option("--eta", c.eta, "energy threshold eta_o")->check(CLI::Range(0.0, 1.0))->needs(adaptive);
  rank->excludes(adaptive);
  (void)min_rank;
  (void)eta;
  construct->add_option("--variant", c.variant, "update variant")->check(CLI::IsMember({"basic", "enhanced"}));
  construct->add_flag("--no-reortho", c.no_reortho, "skip the re-orthonormalization of [U Q_P]");
  construct->add_option("--mem-budget", c.mem_budget, "memory budget in bytes for --bunch auto")
    ->check(CLI::PositiveNumber);
  construct->add_option("--out", c.out, "output directory")->required();
  construct->add_option("--store-full", c.store_full, "also write the full-storage baseline here");
  construct->add_option("--functionals", c.functionals, "functional definitions (JSON)")->check(CLI::ExistingFile);

  EvaluateArgs e;
  auto *evaluate = app.add_subcommand("evaluate", "reconstruct snapshots at rank q~");
  evaluate->add_option("--state", e.state, "factorization directory")->required();
  evaluate->add_option("--qtilde", e.qtilde, "evaluation rank q~ (default: stored q)");
  evaluate->add_option("--clip", e.clip, "realizability bounds (JSON)")->check(CLI::ExistingFile);
  evaluate->add_option("--times", e.times, "'all', 'a:b' or 'a,b,c' (1-based)");
  evaluate->add_option("--out", e.out, "output directory")->required();
  evaluate->add_option("--functionals", e.functionals, "functional definitions (JSON)")->check(CLI::ExistingFile);

  SpectrumArgs s;
  auto *spectrum = app.add_subcommand("spectrum", "print singular values and cumulative energy as CSV");
  spectrum->add_option("--state", s.state, "factorization directory")->required();

  CompareArgs m;
  auto *compare = app.add_subcommand("compare", "functional errors between two functional logs");
  compare->add_option("--original", m.original, "original functional log (CSV)")->required()->check(CLI::ExistingFile);
  compare->add_option("--reconstructed", m.reconstructed, "reconstructed functional log (CSV)")
    ->required()
    ->check(CLI::ExistingFile);
  compare->add_option("--out", m.out, "directory for errors.csv and summary.json");
  compare->add_option("--qtilde", m.qtilde, "rank label recorded in the report");

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError &pe)
  {
    if (pe.get_exit_code() == 0)
    {
      out << app.help();
      return 0;
    }
    err << "itsvd: " << pe.what() << '\n';
    return 2;
  }

  try
  {
    if (construct->parsed())
    {
      return cmd_construct(c, out);
    }
    if (evaluate->parsed())
    {
      return cmd_evaluate(e, out);
    }
    if (spectrum->parsed())
    {
      return cmd_spectrum(s, out);
    }
    return cmd_compare(m, out);
  }
  catch (const std::exception &ex)
  {
    err << "itsvd: " << ex.what() << '\n';
    return exit_code(ex);
  }
}

}  // namespace itsvd::cli

#endif  // ITSVD_TOOLS_CLI_HPP
