#pragma once

#include <atomic>
#include <cstdint>

namespace recykl {

struct CounterSnapshot {
  std::uint64_t matvecs = 0;
  std::uint64_t precond_applications = 0;
  std::uint64_t reduced_assemblies = 0;
};

inline CounterSnapshot operator-(const CounterSnapshot& a, const CounterSnapshot& b) {
  return {a.matvecs - b.matvecs, a.precond_applications - b.precond_applications,
          a.reduced_assemblies - b.reduced_assemblies};
}

// Injected into every operation that touches A or M. Increments are atomic so
// one sink can be shared by concurrent solves.
struct Counters {
  std::atomic<std::uint64_t> matvecs{0};
  std::atomic<std::uint64_t> precond_applications{0};
  // Dense assemblies of a reduced matrix Y^T A Y; audited during stage 2.
  std::atomic<std::uint64_t> reduced_assemblies{0};

  CounterSnapshot snapshot() const {
    return {matvecs.load(), precond_applications.load(), reduced_assemblies.load()};
  }
};

inline void count_matvec(Counters* sink, std::uint64_t n = 1) {
  if (sink) sink->matvecs.fetch_add(n, std::memory_order_relaxed);
}

inline void count_precond(Counters* sink) {
  if (sink) sink->precond_applications.fetch_add(1, std::memory_order_relaxed);
}

inline void count_assembly(Counters* sink) {
  if (sink) sink->reduced_assemblies.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace recykl
