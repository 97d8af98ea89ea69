// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ITSVD_STORE_HPP
#define ITSVD_STORE_HPP

// On-disk layout of a factorization directory:
//
//   U_<p>.bin      partition p's rows of U              (every partition)
//   SV_0.bin       s followed by V                      (partition 0)
//   manifest.json  dimensions, scales, policy, CRC-32s  (partition 0)
//
// Binary files start with the 8-byte magic "ITSVD\0\0\1" followed by two
// little-endian u64 dimensions (rows, cols) and row-major little-endian
// IEEE-754 doubles. U_<p>.bin stores a Y_p x q matrix. SV_0.bin stores
// dims (T_seen, q), then q singular values, then V row-major.
//
// A full-storage baseline directory holds one Y_p x 1 file Y_<p>_<t>.bin
// per partition and time step plus snapshots.json.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>
#include <zlib.h>

#include "itsvd/adaptivity.hpp"
#include "itsvd/comm.hpp"
#include "itsvd/datagen.hpp"
#include "itsvd/itsvd.hpp"
#include "itsvd/reconstruct.hpp"
#include "itsvd/snapshot.hpp"

namespace itsvd::store
{

namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;
inline constexpr std::string_view kMagic{"ITSVD\0\0\1", 8};
inline constexpr const char *kManifestName = "manifest.json";
inline constexpr const char *kSnapshotManifestName = "snapshots.json";

inline std::string u_file_name(int p) { return "U_" + std::to_string(p) + ".bin"; }
inline std::string sv_file_name() { return "SV_0.bin"; }
inline std::string snapshot_file_name(int p, Index t)
{
  return "Y_" + std::to_string(p) + "_" + std::to_string(t) + ".bin";
}

// ---------------------------------------------------------------------------
// Byte-level helpers

inline std::uint32_t crc32_of(std::string_view bytes)
{
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef *>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

inline std::string hex32(std::uint32_t v)
{
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << v;
  return os.str();
}

namespace detail
{

inline void PutU64(std::string &out, std::uint64_t v)
{
  for (int i = 0; i < 8; i++)
  {
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
  }
}

inline std::uint64_t GetU64(std::string_view in, std::size_t &pos)
{
  if (pos + 8 > in.size())
  {
    throw DataError("truncated binary file");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; i++)
  {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  }
  pos += 8;
  return v;
}

inline void PutF64(std::string &out, double v) { PutU64(out, std::bit_cast<std::uint64_t>(v)); }

inline double GetF64(std::string_view in, std::size_t &pos) { return std::bit_cast<double>(GetU64(in, pos)); }

inline void PutMatrixRowMajor(std::string &out, const Eigen::MatrixXd &m)
{
  for (Index i = 0; i < m.rows(); i++)
  {
    for (Index j = 0; j < m.cols(); j++)
    {
      PutF64(out, m(i, j));
    }
  }
}

inline Eigen::MatrixXd GetMatrixRowMajor(std::string_view in, std::size_t &pos, Index rows, Index cols)
{
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; i++)
  {
    for (Index j = 0; j < cols; j++)
    {
      m(i, j) = GetF64(in, pos);
    }
  }
  return m;
}

inline std::string Header(Index rows, Index cols)
{
  std::string out(kMagic);
  PutU64(out, static_cast<std::uint64_t>(rows));
  PutU64(out, static_cast<std::uint64_t>(cols));
  return out;
}

inline void CheckMagic(std::string_view in, const fs::path &path)
{
  if (in.size() < kMagic.size() || in.substr(0, kMagic.size()) != kMagic)
  {
    throw DataError("bad magic in " + path.string());
  }
}

}  // namespace detail

struct FileEntry
{
  std::uint32_t crc32 = 0;
  std::uint64_t bytes = 0;
};

// Writes `bytes` to `path` through a sibling .tmp file that is renamed on
// success.
inline FileEntry write_file_atomic(const fs::path &path, std::string_view bytes)
{
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os)
    {
      throw IoError("cannot open " + tmp.string() + " for writing");
    }
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    os.flush();
    if (!os)
    {
      throw IoError("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec)
  {
    throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
  return {crc32_of(bytes), bytes.size()};
}

inline std::string read_file(const fs::path &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is)
  {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Matrix file: magic, rows, cols, row-major payload.
inline FileEntry write_matrix(const fs::path &path, const Eigen::MatrixXd &m)
{
  std::string bytes = detail::Header(m.rows(), m.cols());
  detail::PutMatrixRowMajor(bytes, m);
  return write_file_atomic(path, bytes);
}

inline Eigen::MatrixXd parse_matrix(std::string_view bytes, const fs::path &path)
{
  detail::CheckMagic(bytes, path);
  std::size_t pos = kMagic.size();
  const auto rows = static_cast<Index>(detail::GetU64(bytes, pos));
  const auto cols = static_cast<Index>(detail::GetU64(bytes, pos));
  if (bytes.size() != pos + static_cast<std::size_t>(rows * cols) * 8)
  {
    throw DataError("size of " + path.string() + " does not match its header");
  }
  return detail::GetMatrixRowMajor(bytes, pos, rows, cols);
}

inline Eigen::MatrixXd read_matrix(const fs::path &path) { return parse_matrix(read_file(path), path); }

// ---------------------------------------------------------------------------
// Manifest

// Construction parameters recorded next to the factors.
struct ConstructionInfo
{
  Index bunch = 1;
  TruncationPolicy policy;
  UpdateVariant variant = UpdateVariant::enhanced;
  bool reorthonormalize = true;
};

inline std::uint32_t scales_checksum(const ReferenceScales &scales)
{
  std::string bytes;
  for (double r : scales.per_state_ref)
  {
    detail::PutF64(bytes, r);
  }
  detail::PutU64(bytes, static_cast<std::uint64_t>(scales.dof_scale));
  return crc32_of(bytes);
}

struct Manifest
{
  int format_version = kFormatVersion;
  Index rows = 0;       // N
  Index snapshots = 0;  // T_seen
  Index rank = 0;       // q
  Layout layout;
  ReferenceScales scales;
  double energy = 0.0;
  ConstructionInfo construction;
  std::map<std::string, FileEntry> files;

  nlohmann::json ToJson() const
  {
    nlohmann::json j;
    j["format_version"] = format_version;
    j["N"] = rows;
    j["T_seen"] = snapshots;
    j["q"] = rank;
    j["S"] = layout.states();
    j["P"] = layout.partitions();
    j["L"] = layout.local_dofs();
    j["phi_ref"] = scales.per_state_ref;
    j["dof_scale"] = scales.dof_scale;
    j["scales_crc32"] = hex32(scales_checksum(scales));
    j["energy"] = energy;
    const auto &pol = construction.policy;
    j["policy"] = {
      {"b", construction.bunch},
      {"mode", pol.mode == TruncationMode::fixed ? "fixed" : "adaptive"},
      {"q_max", pol.q_max == std::numeric_limits<Index>::max() ? nlohmann::json(nullptr) : nlohmann::json(pol.q_max)},
      {"o", pol.min_rank},
      {"eta_o", pol.eta_o},
      {"variant", to_string(construction.variant)},
      {"reortho", construction.reorthonormalize},
    };
    j["files"] = nlohmann::json::object();
    for (const auto &[name, entry] : files)
    {
      j["files"][name] = {{"crc32", hex32(entry.crc32)}, {"bytes", entry.bytes}};
    }
    return j;
  }

  static Manifest FromJson(const nlohmann::json &j)
  {
    Manifest m;
    try
    {
      m.format_version = j.at("format_version").get<int>();
      if (m.format_version != kFormatVersion)
      {
        throw VersionError("unsupported format version " + std::to_string(m.format_version) + " (expected " +
                           std::to_string(kFormatVersion) + ")");
      }
      m.rows = j.at("N").get<Index>();
      m.snapshots = j.at("T_seen").get<Index>();
      m.rank = j.at("q").get<Index>();
      m.layout = Layout(j.at("S").get<int>(), j.at("L").get<std::vector<Index>>());
      if (m.layout.partitions() != j.at("P").get<int>())
      {
        throw DataError("manifest P disagrees with its L list");
      }
      m.scales.per_state_ref = j.at("phi_ref").get<std::vector<double>>();
      m.scales.dof_scale = j.at("dof_scale").get<std::int64_t>();
      if (hex32(scales_checksum(m.scales)) != j.at("scales_crc32").get<std::string>())
      {
        throw ChecksumError("reference scales do not match their recorded checksum");
      }
      m.energy = j.at("energy").get<double>();
      const auto &pol = j.at("policy");
      m.construction.bunch = pol.at("b").get<Index>();
      m.construction.policy.mode =
        pol.at("mode").get<std::string>() == "fixed" ? TruncationMode::fixed : TruncationMode::adaptive;
      m.construction.policy.q_max =
        pol.at("q_max").is_null() ? std::numeric_limits<Index>::max() : pol.at("q_max").get<Index>();
      m.construction.policy.min_rank = pol.at("o").get<Index>();
      m.construction.policy.eta_o = pol.at("eta_o").get<double>();
      m.construction.variant =
        pol.at("variant").get<std::string>() == "basic" ? UpdateVariant::basic : UpdateVariant::enhanced;
      m.construction.reorthonormalize = pol.at("reortho").get<bool>();
      for (const auto &[name, entry] : j.at("files").items())
      {
        m.files[name] = {static_cast<std::uint32_t>(std::stoul(entry.at("crc32").get<std::string>(), nullptr, 16)),
                         entry.at("bytes").get<std::uint64_t>()};
      }
    }
    catch (const nlohmann::json::exception &e)
    {
      throw DataError(std::string("malformed manifest: ") + e.what());
    }
    if (m.rows != m.layout.global_rows())
    {
      throw DataError("manifest N disagrees with S and L");
    }
    return m;
  }
};

inline Manifest read_manifest(const fs::path &dir)
{
  const fs::path path = dir / kManifestName;
  if (!fs::exists(path))
  {
    throw IoError("no manifest at " + path.string());
  }
  nlohmann::json j;
  try
  {
    j = nlohmann::json::parse(read_file(path));
  }
  catch (const nlohmann::json::parse_error &e)
  {
    throw DataError("cannot parse " + path.string() + ": " + e.what());
  }
  return Manifest::FromJson(j);
}

// ---------------------------------------------------------------------------
// Factorization I/O (collective)

inline Manifest write_state(const ItSvdState &state, const Layout &layout, const ReferenceScales &scales,
                            const ConstructionInfo &info, const fs::path &dir, comm::Communicator &comm)
{
  if (state.empty() || state.snapshots() == 0)
  {
    throw ConfigError("cannot store an empty factorization");
  }
  if (layout.partitions() != comm.size())
  {
    throw PartitionMismatchError("layout has " + std::to_string(layout.partitions()) + " partitions, run has " +
                                 std::to_string(comm.size()));
  }
  const int p = comm.rank();
  if (state.u_local.rows() != layout.local_rows(p))
  {
    throw ArgumentError("U rows do not match the layout on partition " + std::to_string(p));
  }
  std::error_code ec;
  fs::create_directories(dir, ec);

  // Each partition contributes (crc, bytes) of its U file in its own slot.
  const FileEntry mine = write_matrix(dir / u_file_name(p), state.u_local);
  Eigen::MatrixXd entries = Eigen::MatrixXd::Zero(2, comm.size());
  entries(0, p) = static_cast<double>(mine.crc32);
  entries(1, p) = static_cast<double>(mine.bytes);
  comm.all_reduce_sum({entries.data(), static_cast<std::size_t>(entries.size())});

  Manifest m;
  m.rows = layout.global_rows();
  m.snapshots = state.snapshots();
  m.rank = state.rank();
  m.layout = layout;
  m.scales = scales;
  m.energy = state.energy;
  m.construction = info;
  for (int q = 0; q < comm.size(); q++)
  {
    m.files[u_file_name(q)] = {static_cast<std::uint32_t>(entries(0, q)), static_cast<std::uint64_t>(entries(1, q))};
  }
  Eigen::Vector2d sv_entry = Eigen::Vector2d::Zero();
  if (comm.is_master())
  {
    std::string bytes = detail::Header(state.snapshots(), state.rank());
    for (Index i = 0; i < state.rank(); i++)
    {
      detail::PutF64(bytes, state.s[i]);
    }
    detail::PutMatrixRowMajor(bytes, state.v);
    const FileEntry sv = write_file_atomic(dir / sv_file_name(), bytes);
    m.files[sv_file_name()] = sv;
    write_file_atomic(dir / kManifestName, m.ToJson().dump(2) + "\n");
    sv_entry << static_cast<double>(sv.crc32), static_cast<double>(sv.bytes);
  }
  comm.broadcast({sv_entry.data(), 2}, 0);
  m.files[sv_file_name()] = {static_cast<std::uint32_t>(sv_entry[0]), static_cast<std::uint64_t>(sv_entry[1])};
  return m;
}

inline ItSvdState read_state(const fs::path &dir, comm::Communicator &comm, Manifest *manifest_out = nullptr)
{
  const Manifest m = read_manifest(dir);
  if (m.layout.partitions() != comm.size())
  {
    throw PartitionMismatchError("factorization in " + dir.string() + " was written by " +
                                 std::to_string(m.layout.partitions()) + " partitions, reading with " +
                                 std::to_string(comm.size()));
  }
  auto verified = [&](const std::string &name) {
    const auto it = m.files.find(name);
    if (it == m.files.end())
    {
      throw DataError("manifest does not list " + name);
    }
    std::string bytes = read_file(dir / name);
    if (crc32_of(bytes) != it->second.crc32 || bytes.size() != it->second.bytes)
    {
      throw ChecksumError("checksum mismatch for " + (dir / name).string());
    }
    return bytes;
  };

  const int p = comm.rank();
  ItSvdState state;
  state.energy = m.energy;
  state.u_local = parse_matrix(verified(u_file_name(p)), dir / u_file_name(p));
  if (state.u_local.rows() != m.layout.local_rows(p) || state.u_local.cols() != m.rank)
  {
    throw DataError(u_file_name(p) + " has shape inconsistent with the manifest");
  }

  // Global data lives in one file; the master reads and broadcasts it.
  Eigen::VectorXd packed(m.rank + m.snapshots * m.rank);
  if (comm.is_master())
  {
    const std::string bytes = verified(sv_file_name());
    detail::CheckMagic(bytes, dir / sv_file_name());
    std::size_t pos = kMagic.size();
    const auto t_seen = static_cast<Index>(detail::GetU64(bytes, pos));
    const auto q = static_cast<Index>(detail::GetU64(bytes, pos));
    if (t_seen != m.snapshots || q != m.rank ||
        bytes.size() != pos + static_cast<std::size_t>(q + t_seen * q) * 8)
    {
      throw DataError(sv_file_name() + " has shape inconsistent with the manifest");
    }
    for (Index i = 0; i < packed.size(); i++)
    {
      packed[i] = detail::GetF64(bytes, pos);
    }
  }
  comm.broadcast({packed.data(), static_cast<std::size_t>(packed.size())}, 0);
  state.s = packed.head(m.rank);
  state.v.resize(m.snapshots, m.rank);
  for (Index i = 0; i < m.snapshots; i++)
  {
    for (Index j = 0; j < m.rank; j++)
    {
      state.v(i, j) = packed[m.rank + i * m.rank + j];
    }
  }
  if (manifest_out != nullptr)
  {
    *manifest_out = m;
  }
  return state;
}

// ---------------------------------------------------------------------------
// Full-storage baseline

// Writes every normalized snapshot column, one file per partition and time
// step. Returns the total number of bytes written.
inline std::uint64_t write_snapshots_full(const SnapshotStream &stream, const Layout &layout,
                                          const ReferenceScales &scales, const fs::path &dir)
{
  if (stream.states != layout.states() || stream.dofs != layout.total_dofs())
  {
    throw ArgumentError("stream shape does not match the layout");
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::uint64_t total = 0;
  for (Index t = 1; t <= stream.steps(); t++)
  {
    for (int p = 0; p < layout.partitions(); p++)
    {
      const auto y = assemble_state_vector(layout.Slice(stream.fields[static_cast<std::size_t>(t - 1)], p), scales, t, p);
      total += write_matrix(dir / snapshot_file_name(p, t), y.values).bytes;
    }
  }
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["T"] = stream.steps();
  j["S"] = layout.states();
  j["P"] = layout.partitions();
  j["L"] = layout.local_dofs();
  j["phi_ref"] = scales.per_state_ref;
  j["dof_scale"] = scales.dof_scale;
  total += write_file_atomic(dir / kSnapshotManifestName, j.dump(2) + "\n").bytes;
  return total;
}

struct StoredSnapshots
{
  SnapshotStream stream;  // raw global fields
  Layout layout;
  ReferenceScales scales;
};

inline StoredSnapshots read_snapshots_full(const fs::path &dir)
{
  const fs::path path = dir / kSnapshotManifestName;
  if (!fs::exists(path))
  {
    throw IoError("no snapshot manifest at " + path.string());
  }
  StoredSnapshots out;
  Index steps = 0;
  try
  {
    const auto j = nlohmann::json::parse(read_file(path));
    if (j.at("format_version").get<int>() != kFormatVersion)
    {
      throw VersionError("unsupported snapshot format version");
    }
    steps = j.at("T").get<Index>();
    out.layout = Layout(j.at("S").get<int>(), j.at("L").get<std::vector<Index>>());
    out.scales.per_state_ref = j.at("phi_ref").get<std::vector<double>>();
    out.scales.dof_scale = j.at("dof_scale").get<std::int64_t>();
  }
  catch (const nlohmann::json::exception &e)
  {
    throw DataError("malformed snapshot manifest: " + std::string(e.what()));
  }
  out.stream.states = out.layout.states();
  out.stream.dofs = out.layout.total_dofs();
  for (Index t = 1; t <= steps; t++)
  {
    Fields global(out.layout.total_dofs(), out.layout.states());
    for (int p = 0; p < out.layout.partitions(); p++)
    {
      const Eigen::MatrixXd y = read_matrix(dir / snapshot_file_name(p, t));
      if (y.rows() != out.layout.local_rows(p) || y.cols() != 1)
      {
        throw DataError(snapshot_file_name(p, t) + " has the wrong shape");
      }
      global.middleRows(out.layout.dof_offset(p), out.layout.local_dofs(p)) =
        disassemble_state_vector(y.col(0), out.scales);
    }
    out.stream.fields.push_back(std::move(global));
  }
  return out;
}

inline std::uint64_t directory_bytes(const fs::path &dir)
{
  if (!fs::is_directory(dir))
  {
    throw IoError("missing directory " + dir.string());
  }
  std::uint64_t total = 0;
  for (const auto &entry : fs::directory_iterator(dir))
  {
    if (entry.is_regular_file() && entry.path().extension() != ".tmp")
    {
      total += entry.file_size();
    }
  }
  return total;
}

// bytes(factorization) / bytes(full baseline)
inline double measure_disk_ratio(const fs::path &svd_dir, const fs::path &full_dir)
{
  const auto svd = directory_bytes(svd_dir);
  const auto full = directory_bytes(full_dir);
  if (svd == 0 || full == 0)
  {
    throw ConfigError("cannot form a storage ratio with an empty directory");
  }
  return static_cast<double>(svd) / static_cast<double>(full);
}

// ---------------------------------------------------------------------------
// Auxiliary inputs: functionals, realizability bounds, functional logs

// {"functionals": [{"name": "...", "weights": [...]},
//                  {"name": "...", "state": 0, "uniform": 0.01},
//                  {"name": "...", "state": 1, "dof": 42}]}
// Weight vectors are global, state-major (see Functional).
inline std::vector<Functional> parse_functionals(const nlohmann::json &j, int states, Index total_dofs)
{
  std::vector<Functional> out;
  try
  {
    for (const auto &entry : j.at("functionals"))
    {
      Functional f;
      f.name = entry.value("name", "F" + std::to_string(out.size()));
      f.weights = Eigen::VectorXd::Zero(states * total_dofs);
      if (entry.contains("weights"))
      {
        const auto w = entry.at("weights").get<std::vector<double>>();
        if (static_cast<Index>(w.size()) != f.weights.size())
        {
          throw ArgumentError("functional '" + f.name + "' needs " + std::to_string(f.weights.size()) + " weights");
        }
        f.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), f.weights.size());
      }
      else
      {
        const int state = entry.at("state").get<int>();
        if (state < 0 || state >= states)
        {
          throw ArgumentError("functional '" + f.name + "' references state " + std::to_string(state));
        }
        if (entry.contains("dof"))
        {
          const Index dof = entry.at("dof").get<Index>();
          if (dof < 0 || dof >= total_dofs)
          {
            throw ArgumentError("functional '" + f.name + "' DoF out of range");
          }
          f.weights[state * total_dofs + dof] = 1.0;
        }
        else
        {
          f.weights.segment(state * total_dofs, total_dofs).setConstant(entry.at("uniform").get<double>());
        }
      }
      out.push_back(std::move(f));
    }
  }
  catch (const nlohmann::json::exception &e)
  {
    throw DataError(std::string("malformed functional definition: ") + e.what());
  }
  return out;
}

inline std::vector<Functional> read_functionals(const fs::path &path, int states, Index total_dofs)
{
  try
  {
    return parse_functionals(nlohmann::json::parse(read_file(path)), states, total_dofs);
  }
  catch (const nlohmann::json::parse_error &e)
  {
    throw DataError("cannot parse " + path.string() + ": " + e.what());
  }
}

// {"alpha": 1e-16, "states": [{"state": 0, "lower": "alpha", "upper": 1.0},
//                             {"state": 1, "lower": 0.0}]}
inline RealizabilityBounds parse_bounds(const nlohmann::json &j)
{
  RealizabilityBounds bounds;
  try
  {
    bounds.alpha = j.value("alpha", RealizabilityBounds::kDefaultAlpha);
    auto value = [&](const nlohmann::json &v) -> double {
      if (v.is_string())
      {
        if (v.get<std::string>() != "alpha")
        {
          throw ArgumentError("bound must be a number or \"alpha\"");
        }
        return bounds.alpha;
      }
      return v.get<double>();
    };
    for (const auto &entry : j.at("states"))
    {
      StateBounds b;
      if (entry.contains("lower"))
      {
        b.lower = value(entry.at("lower"));
      }
      if (entry.contains("upper"))
      {
        b.upper = value(entry.at("upper"));
      }
      bounds.per_state[entry.at("state").get<int>()] = b;
    }
  }
  catch (const nlohmann::json::exception &e)
  {
    throw DataError(std::string("malformed bounds definition: ") + e.what());
  }
  return bounds;
}

inline RealizabilityBounds read_bounds(const fs::path &path)
{
  try
  {
    return parse_bounds(nlohmann::json::parse(read_file(path)));
  }
  catch (const nlohmann::json::parse_error &e)
  {
    throw DataError("cannot parse " + path.string() + ": " + e.what());
  }
}

// Functional history: rows are time steps, columns functionals.
struct FunctionalLog
{
  std::vector<Index> times;
  Eigen::MatrixXd values;
};

inline void write_functional_log(const fs::path &path, const FunctionalLog &log)
{
  std::ostringstream os;
  os.precision(17);
  os << "t,functional_id,value\n";
  for (std::size_t i = 0; i < log.times.size(); i++)
  {
    for (Index j = 0; j < log.values.cols(); j++)
    {
      os << log.times[i] << ',' << j << ',' << log.values(static_cast<Index>(i), j) << '\n';
    }
  }
  write_file_atomic(path, os.str());
}

inline FunctionalLog read_functional_log(const fs::path &path)
{
  std::istringstream is(read_file(path));
  std::string line;
  if (!std::getline(is, line) || line.rfind("t,functional_id,value", 0) != 0)
  {
    throw DataError(path.string() + " is not a functional log");
  }
  std::map<Index, std::map<Index, double>> table;
  Index width = 0;
  while (std::getline(is, line))
  {
    if (line.empty())
    {
      continue;
    }
    std::istringstream row(line);
    std::string t, id, value;
    if (!std::getline(row, t, ',') || !std::getline(row, id, ',') || !std::getline(row, value, ','))
    {
      throw DataError("malformed row in " + path.string() + ": " + line);
    }
    try
    {
      const Index j = std::stoll(id);
      table[std::stoll(t)][j] = std::stod(value);
      width = std::max(width, j + 1);
    }
    catch (const std::exception &)
    {
      throw DataError("malformed row in " + path.string() + ": " + line);
    }
  }
  FunctionalLog log;
  log.values.resize(static_cast<Index>(table.size()), width);
  Index i = 0;
  for (const auto &[t, row] : table)
  {
    if (static_cast<Index>(row.size()) != width)
    {
      throw DataError(path.string() + " misses functional values at t=" + std::to_string(t));
    }
    log.times.push_back(t);
    for (const auto &[j, v] : row)
    {
      log.values(i, j) = v;
    }
    i++;
  }
  return log;
}

}  // namespace itsvd::store

#endif  // ITSVD_STORE_HPP
