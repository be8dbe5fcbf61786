#pragma once

#include <cstddef>
#include <functional>

namespace closedobs {

/// Worker count used by all internally parallel stages. Zero restores the
/// default (hardware concurrency).
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs body(i) for i in [0, n) on up to thread_count() threads. Work is split
/// into contiguous blocks, so results written by index are deterministic
/// regardless of the worker count. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)> &body);

} // namespace closedobs
