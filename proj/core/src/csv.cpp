#include "hlsga/csv.hpp"

#include <cstdio>

namespace hlsga {

std::string format_g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace hlsga
