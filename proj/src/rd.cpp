#include "pmvc/rd.hpp"

#include <cstdio>
#include <sstream>

#include "pmvc/error.hpp"
#include "pmvc/metrics.hpp"

namespace pmvc {

std::vector<RdRow> rd_sweep(ModelState& m, const CodecConfig& base,
                            const Video& video, const std::string& sequence_name,
                            const std::vector<Thresholds>& grid) {
  require(!grid.empty(), ErrorKind::kContract, "threshold grid is empty");
  std::vector<RdRow> rows;
  for (const Thresholds& th : grid) {
    CodecConfig cfg = base;
    cfg.thresholds = th;
    Codec codec(m, cfg);
    const EncodeResult enc = codec.encode(video);
    const auto bytes = serialize_stream(enc.doc);
    const double pixels = static_cast<double>(video.width) * video.height *
                          static_cast<double>(video.frames.size());
    const SequenceQuality q = sequence_quality(video, enc.recon);
    RdRow row;
    row.sequence = sequence_name;
    row.mode = mode_name(codec.prediction_mode());
    row.tau_spatial = th.tau_spatial;
    row.tau_temporal = th.tau_temporal;
    row.point = {static_cast<double>(bytes.size()) * 8.0 / pixels, q.psnr_db,
                 q.msssim};
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string rd_csv(const std::vector<RdRow>& rows) {
  std::string out = "sequence,mode,tau_spatial,tau_temporal,bpp,psnr_db,msssim\n";
  char line[256];
  for (const RdRow& r : rows) {
    std::snprintf(line, sizeof line, "%s,%s,%.6g,%.6g,%.10g,%.10g,%.10g\n",
                  r.sequence.c_str(), r.mode.c_str(), r.tau_spatial,
                  r.tau_temporal, r.point.bpp, r.point.psnr_db, r.point.msssim);
    out += line;
  }
  return out;
}

std::vector<RdRow> parse_rd_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::kFormat,
          "empty CSV");
  require(line == "sequence,mode,tau_spatial,tau_temporal,bpp,psnr_db,msssim",
          ErrorKind::kFormat, "unexpected CSV header");
  std::vector<RdRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    require(fields.size() == 7, ErrorKind::kFormat, "CSV row needs 7 fields");
    RdRow r;
    r.sequence = fields[0];
    r.mode = fields[1];
    try {
      r.tau_spatial = std::stod(fields[2]);
      r.tau_temporal = std::stod(fields[3]);
      r.point.bpp = std::stod(fields[4]);
      r.point.psnr_db = std::stod(fields[5]);
      r.point.msssim = std::stod(fields[6]);
    } catch (const std::exception&) {
      fail(ErrorKind::kFormat, "CSV row holds a non-numeric value");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<RdPoint> curve_of(const std::vector<RdRow>& rows) {
  std::vector<RdPoint> curve;
  for (const RdRow& r : rows) curve.push_back(r.point);
  return curve;
}

}  // namespace pmvc
