#pragma once

#include <string>

#include "pmvc/frame.hpp"

namespace pmvc {

// Sequence directory layout: a descriptor `sequence.json` holding
// {"width": W, "height": H, "frames": N} next to one planar RGB24 file per
// frame, `frame_0000.rgb` onward (R plane, then G, then B, each row-major
// height*width bytes).
Video load_sequence(const std::string& dir);
void save_sequence(const std::string& dir, const Video& video);

// Single-frame PNG convenience I/O (8-bit RGB or RGBA in; RGB out).
Tensor load_png(const std::string& path);
void save_png(const std::string& path, const Tensor& frame);

}  // namespace pmvc
