#ifndef PEAKTRACK_NIFTI_HPP
#define PEAKTRACK_NIFTI_HPP

#include <string>

#include "peaktrack/geometry.hpp"

namespace pt {

// NIfTI-1 volume I/O. Single-file .nii and .nii.gz, little-endian.
// sform is preferred for the affine, qform is the fallback, and a
// pixdim-scaled identity is used when neither is set. Writers emit the
// sform, float32 or uint8 payloads, and are atomic (temp file + rename).

GridGeometry read_nifti_geometry(const std::string& path);

BinaryMask read_mask(const std::string& path);
OrientationMap read_tom(const std::string& path);
PeakImage read_peaks(const std::string& path);

void write_mask(const BinaryMask& mask, const std::string& path);
void write_tom(const OrientationMap& tom, const std::string& path);
void write_peaks(const PeakImage& peaks, const std::string& path);

} // namespace pt

#endif
