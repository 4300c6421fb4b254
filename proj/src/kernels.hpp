#pragma once

// Per-item kernels shared by the OpenMP loops and the serial reference loops.

#include <atomic>
#include <cstddef>
#include <exception>
#include <span>

#include "confret/retrieval.hpp"

namespace confret::kernels {

// Exceptions must not escape an OpenMP region; the first one is parked here
// and rethrown after the loop.
class ErrorSlot {
 public:
  template <typename F>
  void run(F&& body) noexcept {
    if (failed_.load(std::memory_order_relaxed)) return;
    try {
      body();
    } catch (...) {
#pragma omp critical(confret_error_slot)
      {
        if (!error_) error_ = std::current_exception();
        failed_.store(true, std::memory_order_relaxed);
      }
    }
  }

  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::exception_ptr error_;
  std::atomic<bool> failed_{false};
};

double query_norm(std::span<const double> query, const EmbeddingMatrix& corpus);
double cosine_at(std::span<const double> query, double query_norm, const EmbeddingMatrix& corpus,
                 std::size_t i);

}  // namespace confret::kernels
