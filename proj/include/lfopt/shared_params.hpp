#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <span>

#include "lfopt/models.hpp"
#include "lfopt/vectors.hpp"

namespace lfopt {

static_assert(std::atomic<double>::is_always_lock_free, "per-cell word atomicity needs lock-free atomic<double>");

// Shared parameter vector written by all workers without locks.
//
// Each cell is loaded and stored atomically with relaxed ordering, so no
// scalar is ever torn. Nothing else is guaranteed: a snapshot may mix
// updates from different writers, and write_saxpy is a separate load and
// store per cell, so concurrent writers can overwrite each other.
class ParameterBlock {
 public:
  explicit ParameterBlock(std::size_t length);
  explicit ParameterBlock(const DenseVector& init);

  ParameterBlock(const ParameterBlock&) = delete;
  ParameterBlock& operator=(const ParameterBlock&) = delete;

  std::size_t size() const { return length_; }

  double load(std::size_t k) const { return cells_[k].load(std::memory_order_relaxed); }
  void store(std::size_t k, double v) { cells_[k].store(v, std::memory_order_relaxed); }

  // Cell-by-cell copy; not a linearizable snapshot under concurrent writers.
  DenseVector read_snapshot() const;
  void read_snapshot(DenseVector& out) const;

  // cell[k] <- cell[k] - step * g[k] for each k in g's support.
  void write_saxpy(double step, const GradientBuffer& g);
  void write_saxpy(double step, std::span<const double> g);

  // Requires no concurrent writers.
  void store_all(const DenseVector& v);

 private:
  std::size_t length_;
  std::unique_ptr<std::atomic<double>[]> cells_;
};

}  // namespace lfopt
