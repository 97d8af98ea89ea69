// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef ITSVD_COMM_HPP
#define ITSVD_COMM_HPP

// In-process SPMD harness with MPI-like collective semantics.
//
// run_spmd() launches P logical partitions, each receiving its own
// Communicator. Collectives (all_reduce_sum, broadcast) are barrier
// synchronized; every partition must issue the same sequence of collectives
// with identically shaped buffers. Reductions always sum in ascending
// partition order, so results are bitwise reproducible and identical on all
// partitions irrespective of thread scheduling.

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "itsvd/error.hpp"

namespace itsvd::comm
{

enum class Schedule
{
  threaded,     // one thread per partition, free-running between collectives
  round_robin,  // partitions take strict turns; only one executes at a time
};

// Raised by run_spmd() when a partition fails. Names the partition that
// failed first and the collective epoch it had reached.
class SpmdError : public ContractError
{
public:
  SpmdError(int partition, std::uint64_t epoch, std::exception_ptr cause)
    : ContractError(Describe(partition, epoch, cause)), partition_(partition), epoch_(epoch),
      cause_(std::move(cause))
  {
  }

  int partition() const { return partition_; }
  std::uint64_t epoch() const { return epoch_; }
  const std::exception_ptr &cause() const { return cause_; }

  [[noreturn]] void rethrow_cause() const { std::rethrow_exception(cause_); }

private:
  static std::string Describe(int partition, std::uint64_t epoch, const std::exception_ptr &cause)
  {
    std::ostringstream os;
    os << "partition " << partition << " failed at collective epoch " << epoch;
    try
    {
      if (cause)
      {
        std::rethrow_exception(cause);
      }
    }
    catch (const std::exception &e)
    {
      os << ": " << e.what();
    }
    catch (...)
    {
      os << ": unknown exception";
    }
    return os.str();
  }

  int partition_;
  std::uint64_t epoch_;
  std::exception_ptr cause_;
};

namespace detail
{

enum class Op : int
{
  all_reduce_sum = 1,
  broadcast = 2,
};

inline const char *OpName(Op op)
{
  return op == Op::all_reduce_sum ? "all_reduce_sum" : "broadcast";
}

struct Slot
{
  const double *data = nullptr;
  std::size_t size = 0;
  std::uint64_t epoch = 0;
  Op op = Op::all_reduce_sum;
  int root = -1;
};

// Thrown inside partitions that were blocked when a peer failed. Never
// escapes run_spmd().
struct CommunicatorFactory;

struct Aborted
{
};

class Rendezvous
{
public:
  Rendezvous(int count, Schedule schedule)
    : slots(static_cast<std::size_t>(count)), count_(count), schedule_(schedule),
      done_(static_cast<std::size_t>(count), false)
  {
  }

  // Round-robin: block until it is this partition's turn to run.
  void Begin(int p)
  {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return aborted_ || schedule_ == Schedule::threaded || turn_ == p; });
    if (aborted_)
    {
      throw Aborted{};
    }
  }

  void ArriveAndWait(int p)
  {
    std::unique_lock lock(mutex_);
    if (aborted_)
    {
      throw Aborted{};
    }
    for (int q = 0; q < count_; q++)
    {
      if (done_[static_cast<std::size_t>(q)])
      {
        std::ostringstream os;
        os << "partition " << p << " entered collective epoch " << slots[static_cast<std::size_t>(p)].epoch
           << " but partition " << q << " already returned";
        throw ContractError(os.str());
      }
    }
    const std::uint64_t generation = generation_;
    if (++arrived_ == count_)
    {
      arrived_ = 0;
      ++generation_;
      turn_ = 0;
    }
    else
    {
      turn_ = NextActive(p);
    }
    cv_.notify_all();
    cv_.wait(lock, [&] {
      return aborted_ ||
             (generation_ != generation && (schedule_ == Schedule::threaded || turn_ == p));
    });
    if (aborted_)
    {
      throw Aborted{};
    }
  }

  void Finish(int p)
  {
    std::unique_lock lock(mutex_);
    done_[static_cast<std::size_t>(p)] = true;
    if (arrived_ > 0 && !aborted_)
    {
      std::ostringstream os;
      os << "partition " << p << " returned while " << arrived_
         << " partition(s) wait in a collective";
      RecordAbort(p, slots[static_cast<std::size_t>(p)].epoch,
                  std::make_exception_ptr(ContractError(os.str())));
    }
    turn_ = NextActive(p);
    cv_.notify_all();
  }

  void Abort(int p, std::uint64_t epoch, std::exception_ptr cause)
  {
    std::unique_lock lock(mutex_);
    done_[static_cast<std::size_t>(p)] = true;
    RecordAbort(p, epoch, std::move(cause));
    cv_.notify_all();
  }

  bool aborted() const { return aborted_; }
  int failed_partition() const { return failed_partition_; }
  std::uint64_t failed_epoch() const { return failed_epoch_; }
  const std::exception_ptr &cause() const { return cause_; }

  // Written by partition p before ArriveAndWait(), read by all after it.
  std::vector<Slot> slots;

private:
  void RecordAbort(int p, std::uint64_t epoch, std::exception_ptr cause)
  {
    if (!aborted_)
    {
      aborted_ = true;
      failed_partition_ = p;
      failed_epoch_ = epoch;
      cause_ = std::move(cause);
    }
  }

  int NextActive(int p) const
  {
    for (int i = 1; i <= count_; i++)
    {
      const int q = (p + i) % count_;
      if (!done_[static_cast<std::size_t>(q)])
      {
        return q;
      }
    }
    return p;
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  int count_;
  Schedule schedule_;
  std::vector<bool> done_;
  int arrived_ = 0;
  std::uint64_t generation_ = 0;
  int turn_ = 0;
  bool aborted_ = false;
  int failed_partition_ = -1;
  std::uint64_t failed_epoch_ = 0;
  std::exception_ptr cause_;
};

}  // namespace detail

// Per-partition handle onto the collective context. A default-constructed
// Communicator is a standalone single partition for which every collective
// is the identity.
class Communicator
{
public:
  Communicator() = default;

  int rank() const { return rank_; }
  int size() const { return size_; }
  bool is_master() const { return rank_ == 0; }
  // Number of collectives issued so far by this partition.
  std::uint64_t epoch() const { return epoch_; }

  void all_reduce_sum(std::span<double> buf)
  {
    ++epoch_;
    if (rendezvous_ == nullptr)
    {
      return;
    }
    Post(buf, detail::Op::all_reduce_sum, -1);
    auto &slots = rendezvous_->slots;
    std::vector<double> acc(slots[0].data, slots[0].data + buf.size());
    for (std::size_t q = 1; q < slots.size(); q++)
    {
      const double *src = slots[q].data;
      for (std::size_t i = 0; i < acc.size(); i++)
      {
        acc[i] += src[i];
      }
    }
    rendezvous_->ArriveAndWait(rank_);
    std::copy(acc.begin(), acc.end(), buf.begin());
  }

  double all_reduce_sum(double value)
  {
    all_reduce_sum(std::span<double>(&value, 1));
    return value;
  }

  void broadcast(std::span<double> buf, int root)
  {
    if (root < 0 || root >= size_)
    {
      throw ArgumentError("broadcast root " + std::to_string(root) + " outside [0, " +
                          std::to_string(size_) + ")");
    }
    ++epoch_;
    if (rendezvous_ == nullptr)
    {
      return;
    }
    Post(buf, detail::Op::broadcast, root);
    std::vector<double> copy;
    if (rank_ != root)
    {
      const double *src = rendezvous_->slots[static_cast<std::size_t>(root)].data;
      copy.assign(src, src + buf.size());
    }
    rendezvous_->ArriveAndWait(rank_);
    if (rank_ != root)
    {
      std::copy(copy.begin(), copy.end(), buf.begin());
    }
  }

private:
  friend struct detail::CommunicatorFactory;

  Communicator(detail::Rendezvous *rendezvous, int rank, int size)
    : rendezvous_(rendezvous), rank_(rank), size_(size)
  {
  }

  void Post(std::span<double> buf, detail::Op op, int root)
  {
    auto &slots = rendezvous_->slots;
    slots[static_cast<std::size_t>(rank_)] = {buf.data(), buf.size(), epoch_, op, root};
    rendezvous_->ArriveAndWait(rank_);
    // Every partition sees the same slots, so every partition reaches the
    // same verdict and throws together.
    for (std::size_t q = 0; q < slots.size(); q++)
    {
      const auto &s = slots[q];
      if (s.epoch != epoch_ || s.op != op || s.size != buf.size() || s.root != root)
      {
        std::ostringstream os;
        os << "collective mismatch at epoch " << slots[0].epoch << ": partition 0 called "
           << detail::OpName(slots[0].op) << "[" << slots[0].size << "]";
        if (slots[0].op == detail::Op::broadcast)
        {
          os << " root " << slots[0].root;
        }
        os << ", partition " << q << " called " << detail::OpName(s.op) << "[" << s.size
           << "] at epoch " << s.epoch;
        if (s.op == detail::Op::broadcast)
        {
          os << " root " << s.root;
        }
        throw ContractError(os.str());
      }
    }
  }

  detail::Rendezvous *rendezvous_ = nullptr;
  int rank_ = 0;
  int size_ = 1;
  std::uint64_t epoch_ = 0;
};

namespace detail
{

struct CommunicatorFactory
{
  static Communicator Make(Rendezvous *rendezvous, int rank, int size) { return {rendezvous, rank, size}; }
};

}  // namespace detail

// Runs `worker(Communicator&)` on `count` logical partitions and returns the
// per-partition results in partition order (nothing for void workers).
// Throws SpmdError if any partition throws or the collective contract is
// violated.
template <typename Worker>
auto run_spmd(int count, Worker &&worker, Schedule schedule = Schedule::threaded)
{
  using Result = std::invoke_result_t<Worker &, Communicator &>;
  if (count < 1)
  {
    throw ArgumentError("run_spmd: partition count must be >= 1, got " + std::to_string(count));
  }

  detail::Rendezvous rendezvous(count, schedule);
  std::vector<Communicator> comms;
  comms.reserve(static_cast<std::size_t>(count));
  for (int p = 0; p < count; p++)
  {
    comms.push_back(detail::CommunicatorFactory::Make(count == 1 ? nullptr : &rendezvous, p, count));
  }

  using Stored = std::conditional_t<std::is_void_v<Result>, bool, Result>;
  std::vector<std::optional<Stored>> results(static_cast<std::size_t>(count));

  auto body = [&](int p) {
    Communicator &comm = comms[static_cast<std::size_t>(p)];
    try
    {
      rendezvous.Begin(p);
      if constexpr (std::is_void_v<Result>)
      {
        worker(comm);
        results[static_cast<std::size_t>(p)].emplace(true);
      }
      else
      {
        results[static_cast<std::size_t>(p)].emplace(worker(comm));
      }
      rendezvous.Finish(p);
    }
    catch (const detail::Aborted &)
    {
    }
    catch (...)
    {
      rendezvous.Abort(p, comm.epoch(), std::current_exception());
    }
  };

  if (count == 1)
  {
    body(0);
  }
  else
  {
    std::vector<std::jthread> threads;
    threads.reserve(static_cast<std::size_t>(count));
    for (int p = 0; p < count; p++)
    {
      threads.emplace_back(body, p);
    }
  }

  if (rendezvous.aborted())
  {
    throw SpmdError(rendezvous.failed_partition(), rendezvous.failed_epoch(), rendezvous.cause());
  }
  if constexpr (!std::is_void_v<Result>)
  {
    std::vector<Result> out;
    out.reserve(results.size());
    for (auto &r : results)
    {
      out.push_back(std::move(*r));
    }
    return out;
  }
}

}  // namespace itsvd::comm

#endif  // ITSVD_COMM_HPP
