#pragma once

namespace gpl {

/// Keeps freed tape buffers in the heap instead of returning them to the
/// kernel. Training allocates many short-lived matrices just above glibc's
/// default mmap threshold; without this, page faults cost about as much as
/// the arithmetic. Idempotent; a no-op on non-glibc platforms.
void configure_allocator();

}  // namespace gpl
