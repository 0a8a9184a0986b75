#ifndef PEAKTRACK_TCK_HPP
#define PEAKTRACK_TCK_HPP

#include <string>
#include <vector>

#include "peaktrack/streamlines.hpp"

namespace pt {

// TCK track file I/O. Text header starting with "mrtrix tracks", key:value
// lines, END, then float32 LE (x,y,z) triplets at the declared offset.
// Streamlines are delimited by a NaN triplet, the stream ends with an Inf
// triplet. Coordinates are world mm.

std::vector<Streamline> read_tck_streamlines(const std::string& path);

inline Tractogram read_tck(const std::string& path, GridGeometry geometry) {
  return Tractogram{read_tck_streamlines(path), std::move(geometry)};
}

void write_tck(const Tractogram& t, const std::string& path);

} // namespace pt

#endif
