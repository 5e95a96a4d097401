#pragma once

#include <cstdio>
#include <string>

namespace memshare::csv {

// 17 significant digits: enough to round-trip an IEEE double exactly, so
// emitted CSVs are replayable.
inline std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace memshare::csv
