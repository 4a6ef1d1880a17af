#pragma once

#include <string>

namespace hlsga {

/// Shortest "%.9g" rendering used by every CSV writer.
std::string format_g9(double v);

}  // namespace hlsga
