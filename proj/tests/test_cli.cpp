// End-to-end checks of the command-line tool, driven through the real binary
// named by the PMVC_BIN environment variable: synth -> train -> encode ->
// decode -> eval -> ablate, plus the exit-code contract for bad inputs.
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "pmvc/error.hpp"
#include "pmvc/frame_io.hpp"
#include "pmvc/metrics.hpp"
#include "pmvc/rd.hpp"

using namespace pmvc;
namespace fs = std::filesystem;

namespace {

const char* bin() {
  const char* b = std::getenv("PMVC_BIN");
  REQUIRE_MESSAGE(b != nullptr, "PMVC_BIN must point at the codec binary");
  return b;
}

struct RunResult {
  int code = -1;
  std::string out;  // stdout and stderr combined
};

RunResult run_cmd(const std::string& cmd) {
  FILE* p = popen((cmd + " 2>&1").c_str(), "r");
  REQUIRE(p != nullptr);
  RunResult r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

RunResult run(const std::string& args) {
  return run_cmd(std::string(bin()) + " " + args);
}

// Value of a "key=<number>" token in tool output.
double field(const std::string& out, const std::string& key) {
  const std::string tag = key + "=";
  const auto at = out.find(tag);
  REQUIRE_MESSAGE(at != std::string::npos, ("missing field " + key).c_str());
  return std::stod(out.substr(at + tag.size()));
}

fs::path scratch_dir(const char* tag) {
  const fs::path p = fs::temp_directory_path() / (std::string("pmvc_cli_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void dump_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::trunc);
  REQUIRE(out.good());
  out << text;
}

std::string slurp_text(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::string s((std::istreambuf_iterator<char>(in)),
                std::istreambuf_iterator<char>());
  return s;
}

}  // namespace

TEST_CASE("the full command flow holds together") {
  const fs::path dir = scratch_dir("flow");
  const std::string data = (dir / "data").string();

  // --- synth --------------------------------------------------------------
  RunResult r = run("synth --out " + data +
                    " --sequences 4 --frames 4 --width 64 --height 64 --seed 3");
  CHECK(r.code == 0);
  CHECK(r.out.find("wrote 4 sequences") != std::string::npos);
  CHECK(fs::exists(fs::path(data) / "seq0000_static_noise" / "sequence.json"));
  CHECK(fs::exists(fs::path(data) / "seq0003_zoom_noise" / "frame_0003.rgb"));

  // Same seed, second directory: identical bytes on disk.
  const std::string data2 = (dir / "data2").string();
  CHECK(run("synth --out " + data2 +
            " --sequences 1 --frames 4 --width 64 --height 64 --seed 3")
            .code == 0);
  CHECK(slurp_text(fs::path(data) / "seq0000_static_noise" / "frame_0000.rgb") ==
        slurp_text(fs::path(data2) / "seq0000_static_noise" / "frame_0000.rgb"));

  // --- train (deliberately tiny schedules) --------------------------------
  const fs::path cfg_path = dir / "train.cfg";
  dump_text(cfg_path,
            "arch = desk\n"
            "data_width = 64\n"
            "data_height = 64\n"
            "data_frames = 3\n"
            "data_sequences = 4\n"
            "batch = 4\n"
            "residual_blocks_per_seq = 1\n"
            "residual_epochs = 1\n"
            "predictor_epochs = 1\n"
            "joint_epochs = 1\n");
  const std::string model_a = (dir / "model_a.ckpt").string();
  const std::string model_b = (dir / "model_b.ckpt").string();
  const std::string log_csv = (dir / "train_log.csv").string();

  r = run("train --config " + cfg_path.string() + " --out " + model_a +
          " --log " + log_csv + " --seed 5 --mode nopred");
  CHECK(r.code == 0);
  CHECK(r.out.find("phase=residual") != std::string::npos);
  CHECK(r.out.find("phase=joint") != std::string::npos);
  CHECK(r.out.find("checkpoint=") != std::string::npos);
  CHECK(fs::exists(model_a));
  CHECK(slurp_text(log_csv).rfind("step,phase,lvcnn,lres,ltotal,lr\n", 0) == 0);

  r = run("train --config " + cfg_path.string() + " --out " + model_b +
          " --seed 5 --mode spatial");
  CHECK(r.code == 0);
  CHECK(r.out.find("phase=predictor") != std::string::npos);
  REQUIRE(fs::exists(model_b));

  // --- encode -------------------------------------------------------------
  const std::string seq = data + "/seq0001_translate_noise";
  const std::string stream = (dir / "clip.pmvc").string();
  r = run("encode --input " + seq + " --model " + model_a + " --output " +
          stream + " --tau-spatial 100 --tau-temporal 3 --stages 2");
  CHECK(r.code == 0);
  const double size_bytes = field(r.out, "size_bytes");
  const double total_bits = field(r.out, "total_bits");
  const double bpp = field(r.out, "bpp");
  const double enc_psnr = field(r.out, "psnr_db");
  CHECK(field(r.out, "frames") == 4.0);
  CHECK(double(fs::file_size(stream)) == size_bytes);
  CHECK(total_bits == 8.0 * size_bytes);
  // bpp is printed with six decimals; compare at that precision.
  CHECK(bpp == doctest::Approx(total_bits / (64.0 * 64.0 * 4.0)).epsilon(1e-5));

  // --- decode -------------------------------------------------------------
  const std::string out_seq = (dir / "decoded").string();
  r = run("decode --bitstream " + stream + " --model " + model_a +
          " --output " + out_seq);
  CHECK(r.code == 0);
  CHECK(r.out.find("decoded 4 frames") != std::string::npos);

  // The decoder must land exactly on the encoder-side reconstruction, so the
  // input-vs-decoded quality equals the figure the encoder printed.
  const Video original = load_sequence(seq);
  const Video decoded = load_sequence(out_seq);
  REQUIRE(decoded.frames.size() == original.frames.size());
  const SequenceQuality q = sequence_quality(original, decoded);
  CHECK(q.psnr_db == doctest::Approx(enc_psnr).epsilon(1e-6));

  // Decoding to a second directory writes identical frame bytes.
  const std::string out_seq2 = (dir / "decoded2").string();
  CHECK(run("decode --bitstream " + stream + " --model " + model_a +
            " --output " + out_seq2)
            .code == 0);
  CHECK(slurp_text(fs::path(out_seq) / "frame_0002.rgb") ==
        slurp_text(fs::path(out_seq2) / "frame_0002.rgb"));

  // Decoding with the wrong model is refused (stream is bound to weights).
  r = run("decode --bitstream " + stream + " --model " + model_b +
          " --output " + (dir / "nope").string());
  CHECK(r.code == int(ErrorKind::kModelMismatch));

  // A garbage bitstream is a format error once a valid model is in hand.
  dump_text(dir / "junk.pmvc", "this is not a stream");
  r = run("decode --bitstream " + (dir / "junk.pmvc").string() + " --model " +
          model_a + " --output " + (dir / "nope2").string());
  CHECK(r.code == int(ErrorKind::kFormat));

  // Out-of-range smoothing threshold: flagged after inputs load.
  r = run("encode --input " + seq + " --model " + model_a +
          " --output " + (dir / "z.pmvc").string() + " --beta 300");
  CHECK(r.code == int(ErrorKind::kUsage));

  // --- eval ---------------------------------------------------------------
  // The wide threshold ladder straddles this model's per-block error, so the
  // sweep genuinely modulates the stage counts (and with them the rate).
  const std::string rd_path = (dir / "rd.csv").string();
  const std::string gp_path = (dir / "rd.gp").string();
  r = run("eval --model " + model_a + " --dataset " + data +
          " --grid 5000,1500,500,150 --tau-temporal 3 --csv " + rd_path +
          " --plot " + gp_path + " --jobs 2");
  CHECK(r.code == 0);
  CHECK(r.out.find("wrote 16 rows") != std::string::npos);
  const auto rows = parse_rd_csv(slurp_text(rd_path));
  REQUIRE(rows.size() == 16);  // 4 sequences x 4 thresholds
  double loosest_bpp = 0.0, tightest_bpp = 0.0;
  int loose_n = 0, tight_n = 0;
  for (const RdRow& row : rows) {
    CHECK(row.mode == "nopred");
    CHECK(row.point.bpp > 0.0);
    CHECK(row.point.psnr_db > 0.0);
    if (row.tau_spatial == 5000.0) {
      loosest_bpp += row.point.bpp;
      ++loose_n;
    }
    if (row.tau_spatial == 150.0) {
      tightest_bpp += row.point.bpp;
      ++tight_n;
    }
  }
  REQUIRE(loose_n == 4);
  REQUIRE(tight_n == 4);
  CHECK(loosest_bpp / loose_n < tightest_bpp / tight_n);
  CHECK(slurp_text(gp_path).find("plot") != std::string::npos);

  // --- ablate -------------------------------------------------------------
  // A one-epoch model cannot produce usable delta-rate curves (its quality
  // barely moves across thresholds), so the table may legitimately end in one
  // of the curve-degeneracy contract errors; the trained-model ordering is
  // covered by the acceptance harness. Here the plumbing is under test:
  // sweeps run, the combined CSV parses, and mode binding is enforced.
  const std::string ab_csv = (dir / "ablate.csv").string();
  r = run("ablate --model nopred=" + model_a + " --model spatial=" + model_b +
          " --dataset " + data + " --grid 5000,1500,500,150 --csv " + ab_csv +
          " --jobs 2");
  const bool degenerate_curves =
      r.code == int(ErrorKind::kContract) &&
      (r.out.find("overlap") != std::string::npos ||
       r.out.find("degenerate") != std::string::npos);
  CHECK((r.code == 0 || degenerate_curves));
  if (r.code == 0) {
    CHECK(r.out.find("bd_rate_pct") != std::string::npos);
    CHECK(r.out.find("spatial") != std::string::npos);
  }
  // The per-sequence dump holds both sweeps under one header.
  const auto ab_rows = parse_rd_csv(slurp_text(ab_csv));
  CHECK(ab_rows.size() == 32);
  bool saw_spatial = false, saw_nopred = false;
  for (const RdRow& row : ab_rows) {
    saw_spatial = saw_spatial || row.mode == "spatial";
    saw_nopred = saw_nopred || row.mode == "nopred";
  }
  CHECK(saw_spatial);
  CHECK(saw_nopred);

  // A checkpoint registered under a different prediction mode is rejected
  // before any evaluation work starts.
  r = run("ablate --model nopred=" + model_b + " --model spatial=" + model_a +
          " --dataset " + data + " --grid 5000,1500,500,150");
  CHECK(r.code == int(ErrorKind::kModelMismatch));
}

TEST_CASE("bad invocations exit with the documented codes") {
  const fs::path dir = scratch_dir("errs");

  SUBCASE("no subcommand") { CHECK(run("").code == int(ErrorKind::kUsage)); }
  SUBCASE("unknown flag") {
    CHECK(run("encode --bogus 1").code == int(ErrorKind::kUsage));
  }
  SUBCASE("help exits cleanly") {
    const RunResult r = run("--help");
    CHECK(r.code == 0);
    for (const char* sub :
         {"encode", "decode", "train", "eval", "ablate", "synth"})
      CHECK(r.out.find(sub) != std::string::npos);
  }
  SUBCASE("missing model file") {
    CHECK(run("encode --input x --model " + (dir / "no.ckpt").string() +
              " --output y")
              .code == int(ErrorKind::kIo));
  }
  SUBCASE("missing train config") {
    CHECK(run("train --out m.ckpt --config " + (dir / "no.cfg").string()).code ==
          int(ErrorKind::kIo));
  }
  SUBCASE("dataset directory without sequences") {
    fs::create_directories(dir / "empty");
    CHECK(run("eval --model x --dataset " + (dir / "empty").string()).code ==
          int(ErrorKind::kIo));
  }
  SUBCASE("plot without csv") {
    CHECK(run("eval --model x --dataset y --plot p.gp").code ==
          int(ErrorKind::kUsage));
  }
  SUBCASE("ablation without an anchor") {
    CHECK(run("ablate --model spatial=x --dataset y").code ==
          int(ErrorKind::kUsage));
  }
  SUBCASE("malformed model list entry") {
    CHECK(run("ablate --model justapath --dataset y").code ==
          int(ErrorKind::kUsage));
  }
  SUBCASE("synthetic frames below the minimum size") {
    CHECK(run("synth --out " + (dir / "tiny").string() + " --width 8").code ==
          int(ErrorKind::kContract));
  }
  SUBCASE("non-numeric seed in the environment") {
    CHECK(run_cmd("PMVC_SEED=abc " + std::string(bin()) + " synth --out " +
                  (dir / "s").string())
              .code == int(ErrorKind::kUsage));
  }
}
