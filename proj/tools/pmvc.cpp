// Command-line front end: encode, decode, train, eval, ablate, synth.
#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "pmvc/bd.hpp"
#include "pmvc/bitstream.hpp"
#include "pmvc/error.hpp"
#include "pmvc/frame_io.hpp"
#include "pmvc/metrics.hpp"
#include "pmvc/pipeline.hpp"
#include "pmvc/rd.hpp"
#include "pmvc/synth.hpp"
#include "pmvc/train.hpp"

namespace {

using namespace pmvc;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("PMVC_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      fail(ErrorKind::kUsage, "PMVC_SEED is not a number");
    }
  }
  return 1;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

void write_file(const std::string& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write: " + path);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  require(static_cast<bool>(out), ErrorKind::kIo, "write failed: " + path);
}

std::vector<double> parse_grid(const std::string& grid) {
  std::vector<double> taus;
  std::string item;
  std::istringstream in(grid);
  while (std::getline(in, item, ',')) {
    try {
      taus.push_back(std::stod(item));
    } catch (const std::exception&) {
      fail(ErrorKind::kUsage, "grid entry is not a number: " + item);
    }
  }
  require(!taus.empty(), ErrorKind::kUsage, "threshold grid is empty");
  return taus;
}

// Sequence subdirectories of a dataset directory, sorted by name.
std::vector<std::string> dataset_entries(const std::string& dir) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), ErrorKind::kIo,
          "dataset directory not found: " + dir);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() &&
        fs::exists(e.path() / "sequence.json"))
      names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  require(!names.empty(), ErrorKind::kIo,
          "dataset directory holds no sequences: " + dir);
  return names;
}

struct EncodeArgs {
  std::string input, model, output;
  double tau_spatial = 100.0, tau_temporal = 3.0;
  int stages = 0;
  bool no_deblock = false, out_of_loop = false;
  int beta = 12, motion_range = 8;
};

int cmd_encode(const EncodeArgs& a) {
  ModelState model = ModelState::load(a.model);
  const Video video = load_sequence(a.input);
  CodecConfig cfg;
  cfg.thresholds = {a.tau_spatial, a.tau_temporal};
  cfg.deblock.enabled = !a.no_deblock;
  cfg.deblock.in_loop = !a.out_of_loop;
  require(a.beta >= 0 && a.beta <= 255, ErrorKind::kUsage,
          "--beta must be in [0, 255]");
  cfg.deblock.beta8 = static_cast<std::uint8_t>(a.beta);
  cfg.motion_range = a.motion_range;
  cfg.stages = a.stages;

  Codec codec(model, cfg);
  const EncodeResult res = codec.encode(video);
  const auto bytes = serialize_stream(res.doc);
  write_file(a.output, bytes.data(), bytes.size());

  const BitAccounting acc = account_stream(res.doc);
  require(acc.total_bits() == 8 * bytes.size(), ErrorKind::kContract,
          "bit accounting does not match the stream size");
  const SequenceQuality q = sequence_quality(video, res.recon);
  std::printf("frames=%u size_bytes=%zu bpp=%.6f\n", res.doc.header.frame_count,
              bytes.size(), acc.bpp(res.doc.header));
  std::printf(
      "header_bits=%llu flag_bits=%llu stage_count_bits=%llu code_bits=%llu "
      "padding_bits=%llu total_bits=%llu\n",
      static_cast<unsigned long long>(acc.header_bits),
      static_cast<unsigned long long>(acc.flag_bits),
      static_cast<unsigned long long>(acc.stage_count_bits),
      static_cast<unsigned long long>(acc.code_bits),
      static_cast<unsigned long long>(acc.padding_bits),
      static_cast<unsigned long long>(acc.total_bits()));
  std::printf("psnr_db=%.6f msssim=%.6f\n", q.psnr_db, q.msssim);
  return 0;
}

int cmd_decode(const std::string& bitstream, const std::string& model_path,
               const std::string& output) {
  ModelState model = ModelState::load(model_path);
  const StreamDocument doc = parse_stream(read_file(bitstream));
  Codec codec(model);
  const Video video = codec.decode(doc);
  save_sequence(output, video);
  std::printf("decoded %zu frames to %s\n", video.frames.size(),
              output.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_path,
              const std::string& log_path, std::uint64_t seed,
              const std::string& mode, bool with_moments) {
  Config file_cfg =
      config_path.empty() ? Config{} : Config::parse_file(config_path);
  TrainConfig cfg = train_config_from(file_cfg);
  cfg.seed = seed;
  cfg.data.seed = static_cast<std::uint64_t>(file_cfg.get_int(
      "data_seed", static_cast<int>(seed)));
  if (!mode.empty()) cfg.mode = mode_from_name(mode);

  const TrainResult res = train(cfg);
  res.model.save(out_path, with_moments);
  if (!log_path.empty()) {
    const std::string csv = train_log_csv(res.log);
    write_file(log_path, csv.data(), csv.size());
  }
  for (const PhaseReport& p : res.phases)
    std::printf("phase=%s val_before=%.6f val_after=%.6f\n", p.name.c_str(),
                p.val_before, p.val_after);
  std::printf("final_val=%.6f params=%zu checkpoint=%s\n", res.final_val,
              res.model.count(), out_path.c_str());
  return 0;
}

struct EvalArgs {
  std::string model, dataset, csv_path, plot_path;
  std::string grid = "200,100,50,25";
  double tau_temporal = 3.0;
  int jobs = 1;
};

std::vector<RdRow> eval_dataset(ModelState& model, const std::string& dataset,
                                const std::vector<std::string>& names,
                                const std::vector<Thresholds>& grid, int jobs) {
  std::vector<std::vector<RdRow>> per_seq(names.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= names.size()) return;
      const Video video = load_sequence(dataset + "/" + names[i]);
      per_seq[i] = rd_sweep(model, CodecConfig{}, video, names[i], grid);
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  std::vector<RdRow> rows;
  for (auto& part : per_seq)
    for (auto& r : part) rows.push_back(std::move(r));
  return rows;
}

int cmd_eval(const EvalArgs& a) {
  require(a.plot_path.empty() || !a.csv_path.empty(), ErrorKind::kUsage,
          "--plot needs --csv to reference");
  ModelState model = ModelState::load(a.model);
  const auto names = dataset_entries(a.dataset);
  std::vector<Thresholds> grid;
  for (double tau : parse_grid(a.grid)) grid.push_back({tau, a.tau_temporal});
  const std::vector<RdRow> rows =
      eval_dataset(model, a.dataset, names, grid, a.jobs);
  const std::string csv = rd_csv(rows);
  if (a.csv_path.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    write_file(a.csv_path, csv.data(), csv.size());
    std::printf("wrote %zu rows to %s\n", rows.size(), a.csv_path.c_str());
  }
  if (!a.plot_path.empty()) {
    std::string gp =
        "set datafile separator ','\n"
        "set xlabel 'bpp'\nset ylabel 'PSNR (dB)'\nset key bottom right\n"
        "plot '" + a.csv_path + "' every ::1 using 5:6 with points title 'RD points'\n";
    write_file(a.plot_path, gp.data(), gp.size());
  }
  return 0;
}

struct AblateArgs {
  std::vector<std::string> models;  // mode=checkpoint pairs
  std::string dataset;
  std::string grid = "200,100,50,25";
  double tau_temporal = 3.0;
  int jobs = 1;
  std::string csv_path;
};

int cmd_ablate(const AblateArgs& a) {
  std::map<std::string, std::string> paths;
  for (const std::string& spec : a.models) {
    const auto eq = spec.find('=');
    require(eq != std::string::npos, ErrorKind::kUsage,
            "--model entries must be mode=checkpoint");
    paths[spec.substr(0, eq)] = spec.substr(eq + 1);
  }
  require(paths.count("nopred") != 0, ErrorKind::kUsage,
          "ablation needs a nopred checkpoint as the anchor");
  const auto names = dataset_entries(a.dataset);
  std::vector<Thresholds> grid;
  for (double tau : parse_grid(a.grid)) grid.push_back({tau, a.tau_temporal});
  require(grid.size() >= 4, ErrorKind::kUsage,
          "delta metrics need at least 4 grid points");

  // Aggregate per mode: mean rate and quality over sequences at each tau.
  std::map<std::string, std::vector<RdPoint>> curves;
  std::string all_csv;
  for (const auto& [mode, path] : paths) {
    ModelState model = ModelState::load(path);
    const std::string declared = mode_name(infer_prediction_mode(model));
    require(declared == mode, ErrorKind::kModelMismatch,
            "checkpoint for '" + mode + "' holds a " + declared + " model");
    const std::vector<RdRow> rows =
        eval_dataset(model, a.dataset, names, grid, a.jobs);
    const std::string csv = rd_csv(rows);
    all_csv += all_csv.empty() ? csv : csv.substr(csv.find('\n') + 1);
    std::vector<RdPoint> curve(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) {
      double bpp = 0, ps = 0, ss = 0;
      int n = 0;
      for (const RdRow& r : rows)
        if (r.tau_spatial == grid[g].tau_spatial) {
          bpp += r.point.bpp;
          ps += r.point.psnr_db;
          ss += r.point.msssim;
          ++n;
        }
      curve[g] = {bpp / n, ps / n, ss / n};
    }
    curves[mode] = std::move(curve);
  }
  if (!a.csv_path.empty())
    write_file(a.csv_path, all_csv.data(), all_csv.size());

  const std::vector<RdPoint>& anchor = curves.at("nopred");
  std::printf("%-12s %12s %12s\n", "mode", "bd_rate_pct", "bd_psnr_db");
  for (const auto& [mode, curve] : curves) {
    if (mode == "nopred") continue;
    std::printf("%-12s %12.3f %12.3f\n", mode.c_str(), bd_rate(anchor, curve),
                bd_psnr(anchor, curve));
  }
  return 0;
}

int cmd_synth(const std::string& out_dir, int sequences, int frames, int width,
              int height, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.sequence_count = sequences;
  spec.frame_count = frames;
  spec.width = width;
  spec.height = height;
  spec.seed = seed;
  const auto dataset = generate_dataset(spec);
  std::filesystem::create_directories(out_dir);
  for (const LabeledVideo& lv : dataset)
    save_sequence(out_dir + "/" + lv.name, lv.video);
  std::printf("wrote %zu sequences to %s\n", dataset.size(), out_dir.c_str());
  return 0;
}

}  // namespace

int run_app(int argc, char** argv) {
  CLI::App app{"block-based learned video codec"};
  app.require_subcommand(1);

  EncodeArgs enc;
  auto* c_enc = app.add_subcommand("encode", "encode a sequence directory");
  c_enc->add_option("--input", enc.input, "sequence directory")->required();
  c_enc->add_option("--model", enc.model, "model checkpoint")->required();
  c_enc->add_option("--output", enc.output, "bitstream file")->required();
  c_enc->add_option("--tau-spatial", enc.tau_spatial, "stage-stop threshold");
  c_enc->add_option("--tau-temporal", enc.tau_temporal, "skip threshold");
  c_enc->add_option("--stages", enc.stages, "stage budget (1..8; 0 = model default)");
  c_enc->add_flag("--no-deblock", enc.no_deblock, "disable boundary smoothing");
  c_enc->add_flag("--out-of-loop", enc.out_of_loop, "smooth for display only");
  c_enc->add_option("--beta", enc.beta, "smoothing threshold (8-bit units)");
  c_enc->add_option("--motion-range", enc.motion_range, "search range in pixels");

  std::string dec_bitstream, dec_model, dec_output;
  auto* c_dec = app.add_subcommand("decode", "decode a bitstream");
  c_dec->add_option("--bitstream", dec_bitstream, "bitstream file")->required();
  c_dec->add_option("--model", dec_model, "model checkpoint")->required();
  c_dec->add_option("--output", dec_output, "output sequence directory")->required();

  std::string tr_config, tr_out, tr_log, tr_mode;
  std::uint64_t tr_seed = default_seed();
  bool tr_moments = false;
  auto* c_tr = app.add_subcommand("train", "train a model");
  c_tr->add_option("--config", tr_config, "key=value config file");
  c_tr->add_option("--out", tr_out, "checkpoint to write")->required();
  c_tr->add_option("--log", tr_log, "training log CSV");
  c_tr->add_option("--seed", tr_seed, "rng seed (env PMVC_SEED)");
  c_tr->add_option("--mode", tr_mode, "pmcnn|spatial|temporal|nopred");
  c_tr->add_flag("--with-moments", tr_moments, "store optimizer moments");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "rate-distortion sweep over a dataset");
  c_ev->add_option("--model", ev.model, "model checkpoint")->required();
  c_ev->add_option("--dataset", ev.dataset, "directory of sequences")->required();
  c_ev->add_option("--grid", ev.grid, "comma list of tau_spatial values");
  c_ev->add_option("--tau-temporal", ev.tau_temporal, "skip threshold");
  c_ev->add_option("--csv", ev.csv_path, "CSV output path");
  c_ev->add_option("--plot", ev.plot_path, "gnuplot script output path");
  c_ev->add_option("--jobs", ev.jobs, "parallel sequences");

  AblateArgs ab;
  auto* c_ab = app.add_subcommand("ablate", "delta-rate table across modes");
  c_ab->add_option("--model", ab.models, "mode=checkpoint (repeatable)")
      ->required();
  c_ab->add_option("--dataset", ab.dataset, "directory of sequences")->required();
  c_ab->add_option("--grid", ab.grid, "comma list of tau_spatial values");
  c_ab->add_option("--tau-temporal", ab.tau_temporal, "skip threshold");
  c_ab->add_option("--jobs", ab.jobs, "parallel sequences");
  c_ab->add_option("--csv", ab.csv_path, "per-sequence CSV output path");

  std::string sy_out;
  int sy_sequences = 16, sy_frames = 10, sy_width = 96, sy_height = 64;
  std::uint64_t sy_seed = default_seed();
  auto* c_sy = app.add_subcommand("synth", "generate a synthetic dataset");
  c_sy->add_option("--out", sy_out, "output directory")->required();
  c_sy->add_option("--sequences", sy_sequences, "sequence count");
  c_sy->add_option("--frames", sy_frames, "frames per sequence");
  c_sy->add_option("--width", sy_width, "frame width");
  c_sy->add_option("--height", sy_height, "frame height");
  c_sy->add_option("--seed", sy_seed, "rng seed (env PMVC_SEED)");

  try {
    app.parse(argc, argv);
    if (*c_enc) return cmd_encode(enc);
    if (*c_dec) return cmd_decode(dec_bitstream, dec_model, dec_output);
    if (*c_tr)
      return cmd_train(tr_config, tr_out, tr_log, tr_seed, tr_mode, tr_moments);
    if (*c_ev) return cmd_eval(ev);
    if (*c_ab) return cmd_ablate(ab);
    if (*c_sy)
      return cmd_synth(sy_out, sy_sequences, sy_frames, sy_width, sy_height,
                       sy_seed);
    return static_cast<int>(ErrorKind::kUsage);
  } catch (const CLI::CallForHelp&) {
    std::puts(app.help().c_str());
    return 0;
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", e.what());
    return static_cast<int>(ErrorKind::kUsage);
  }
}

int main(int argc, char** argv) {
  try {
    return run_app(argc, argv);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
