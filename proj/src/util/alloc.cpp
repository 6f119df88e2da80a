#include "gpl/alloc.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace gpl {

void configure_allocator() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    mallopt(M_TOP_PAD, 64 << 20);
    return true;
  }();
  (void)done;
#endif
}

}  // namespace gpl
