#pragma once

#include <string>
#include <vector>

#include "pmvc/bd.hpp"
#include "pmvc/pipeline.hpp"

namespace pmvc {

// One rate-distortion measurement row, as written to CSV.
struct RdRow {
  std::string sequence;
  std::string mode;
  double tau_spatial = 0.0;
  double tau_temporal = 0.0;
  RdPoint point;
};

// Encodes the sequence once per threshold pair; rate is the actual serialized
// stream size and quality is measured against the encoder-side reconstruction
// (identical to the decoder's output by construction).
std::vector<RdRow> rd_sweep(ModelState& m, const CodecConfig& base,
                            const Video& video, const std::string& sequence_name,
                            const std::vector<Thresholds>& grid);

// CSV with header "sequence,mode,tau_spatial,tau_temporal,bpp,psnr_db,msssim".
std::string rd_csv(const std::vector<RdRow>& rows);
std::vector<RdRow> parse_rd_csv(const std::string& text);

std::vector<RdPoint> curve_of(const std::vector<RdRow>& rows);

}  // namespace pmvc
