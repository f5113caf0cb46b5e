#pragma once

// Scanpath text files: one `t,row,col,loss` line per fixation, t from 1,
// numbers in shortest round-trip decimal form.

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "fovex/config.hpp"
#include "fovex/error.hpp"
#include "fovex/scanpath.hpp"

namespace fovex {

inline std::string format_scanpath(const Scanpath& path) {
  std::ostringstream os;
  for (std::size_t i = 0; i < path.size(); ++i) {
    os << (i + 1) << ',' << format_double(path.fixations[i].row) << ',' << format_double(path.fixations[i].col) << ','
       << format_double(path.losses[i]) << '\n';
  }
  return os.str();
}

inline void write_scanpath(const std::string& file, const Scanpath& path) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + file + "' for writing");
  out << format_scanpath(path);
}

// Fixations and losses only; confidences are not stored in the file.
inline Scanpath read_scanpath(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open scanpath file '" + file + "'");
  Scanpath path;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    double v[4];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (int k = 0; k < 4; ++k) {
      const auto [q, ec] = std::from_chars(p, end, v[k]);
      if (ec != std::errc()) throw DataError(file + ":" + std::to_string(n) + ": expected t,row,col,loss");
      p = q;
      if (k < 3) {
        if (p == end || *p != ',') throw DataError(file + ":" + std::to_string(n) + ": expected t,row,col,loss");
        ++p;
      }
    }
    path.fixations.push_back({v[1], v[2]});
    path.losses.push_back(v[3]);
  }
  if (path.fixations.empty()) throw DataError("scanpath file '" + file + "' has no fixations");
  return path;
}

}  // namespace fovex
