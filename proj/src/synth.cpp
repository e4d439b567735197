#include "pmvc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pmvc/error.hpp"

namespace pmvc {

namespace {

using Bytes = std::vector<std::uint8_t>;

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
}

inline std::size_t px(int w, int x, int y, int ch) {
  return (static_cast<std::size_t>(y) * w + x) * 3 + static_cast<std::size_t>(ch);
}

// Low-frequency noise: random values on a coarse grid, bilinearly upsampled.
Bytes texture_noise(int w, int h, Rng& rng) {
  const int cell = 8;
  const int gw = w / cell + 2, gh = h / cell + 2;
  std::vector<double> grid(static_cast<std::size_t>(gw) * gh * 3);
  for (double& g : grid) g = rng.uniform() * 255.0;
  Bytes img(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int gx = x / cell, gy = y / cell;
      const double fx = static_cast<double>(x % cell) / cell;
      const double fy = static_cast<double>(y % cell) / cell;
      for (int ch = 0; ch < 3; ++ch) {
        const auto at = [&](int cx, int cy) {
          return grid[(static_cast<std::size_t>(cy) * gw + cx) * 3 +
                      static_cast<std::size_t>(ch)];
        };
        const double v = (1 - fx) * (1 - fy) * at(gx, gy) +
                         fx * (1 - fy) * at(gx + 1, gy) +
                         (1 - fx) * fy * at(gx, gy + 1) +
                         fx * fy * at(gx + 1, gy + 1);
        img[px(w, x, y, ch)] = to_byte(v);
      }
    }
  return img;
}

Bytes texture_gradients(int w, int h, Rng& rng) {
  Bytes img(static_cast<std::size_t>(w) * h * 3);
  double a[3], b[3], c[3];
  for (int ch = 0; ch < 3; ++ch) {
    a[ch] = rng.uniform() * 4.0 - 2.0;
    b[ch] = rng.uniform() * 4.0 - 2.0;
    c[ch] = rng.uniform() * 255.0;
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch)
        img[px(w, x, y, ch)] = to_byte(c[ch] + a[ch] * x + b[ch] * y);
  return img;
}

Bytes texture_checker(int w, int h, Rng& rng) {
  const int cells[] = {8, 12, 16};
  const int cell = cells[rng.uniform_int(0, 2)];
  const int ox = rng.uniform_int(0, cell - 1), oy = rng.uniform_int(0, cell - 1);
  std::uint8_t c1[3], c2[3];
  for (int ch = 0; ch < 3; ++ch) {
    c1[ch] = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    c2[ch] = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  }
  Bytes img(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool odd = (((x + ox) / cell + (y + oy) / cell) & 1) != 0;
      for (int ch = 0; ch < 3; ++ch)
        img[px(w, x, y, ch)] = odd ? c1[ch] : c2[ch];
    }
  return img;
}

Bytes texture_blobs(int w, int h, Rng& rng) {
  std::uint8_t bg[3];
  for (int ch = 0; ch < 3; ++ch)
    bg[ch] = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  struct Blob {
    double cx, cy, r;
    double color[3];
  };
  std::vector<Blob> blobs(static_cast<std::size_t>(rng.uniform_int(6, 12)));
  for (Blob& bl : blobs) {
    bl.cx = rng.uniform() * w;
    bl.cy = rng.uniform() * h;
    bl.r = 6.0 + rng.uniform() * 14.0;
    for (double& col : bl.color) col = rng.uniform() * 255.0;
  }
  Bytes img(static_cast<std::size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        double v = bg[ch];
        for (const Blob& bl : blobs) {
          const double dx = x - bl.cx, dy = y - bl.cy;
          const double fall = std::exp(-(dx * dx + dy * dy) / (2.0 * bl.r * bl.r));
          v = v * (1.0 - fall) + bl.color[ch] * fall;
        }
        img[px(w, x, y, ch)] = to_byte(v);
      }
  return img;
}

Bytes make_texture(int w, int h, TextureKind kind, Rng& rng) {
  switch (kind) {
    case TextureKind::kNoise: return texture_noise(w, h, rng);
    case TextureKind::kGradients: return texture_gradients(w, h, rng);
    case TextureKind::kChecker: return texture_checker(w, h, rng);
    case TextureKind::kBlobs: return texture_blobs(w, h, rng);
  }
  fail(ErrorKind::kContract, "unknown texture kind");
}

Bytes shift_clamped(const Bytes& base, int w, int h, int dx, int dy) {
  Bytes out(base.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int sx = std::clamp(x - dx, 0, w - 1);
      const int sy = std::clamp(y - dy, 0, h - 1);
      for (int ch = 0; ch < 3; ++ch)
        out[px(w, x, y, ch)] = base[px(w, sx, sy, ch)];
    }
  return out;
}

}  // namespace

std::string motion_kind_name(MotionKind k) {
  switch (k) {
    case MotionKind::kStatic: return "static";
    case MotionKind::kTranslate: return "translate";
    case MotionKind::kLocalObject: return "localobject";
    case MotionKind::kZoom: return "zoom";
  }
  return "?";
}

std::string texture_kind_name(TextureKind k) {
  switch (k) {
    case TextureKind::kNoise: return "noise";
    case TextureKind::kGradients: return "gradients";
    case TextureKind::kChecker: return "checker";
    case TextureKind::kBlobs: return "blobs";
  }
  return "?";
}

Video make_sequence(int width, int height, int frame_count, MotionKind motion,
                    TextureKind texture, Rng rng) {
  require(width >= 16 && height >= 16 && frame_count >= 1, ErrorKind::kContract,
          "sequence spec out of range");
  Video video;
  video.width = width;
  video.height = height;

  Rng tex_rng = rng.split(1);
  const Bytes base = make_texture(width, height, texture, tex_rng);
  Rng motion_rng = rng.split(2);

  switch (motion) {
    case MotionKind::kStatic: {
      const Tensor frame = frame_from_rgb(base.data(), height, width);
      for (int t = 0; t < frame_count; ++t) video.frames.push_back(frame);
      break;
    }
    case MotionKind::kTranslate: {
      int dx = 0, dy = 0;
      while (dx == 0 && dy == 0) {
        dx = motion_rng.uniform_int(-3, 3);
        dy = motion_rng.uniform_int(-3, 3);
      }
      for (int t = 0; t < frame_count; ++t) {
        const Bytes img = shift_clamped(base, width, height, t * dx, t * dy);
        video.frames.push_back(frame_from_rgb(img.data(), height, width));
      }
      break;
    }
    case MotionKind::kLocalObject: {
      const int ow = std::max(8, width / 3), oh = std::max(8, height / 3);
      Rng obj_rng = rng.split(3);
      const TextureKind obj_tex =
          static_cast<TextureKind>(obj_rng.uniform_int(0, 3));
      const Bytes object = make_texture(ow, oh, obj_tex, obj_rng);
      const int x0 = motion_rng.uniform_int(0, width - ow);
      const int y0 = motion_rng.uniform_int(0, height - oh);
      int dx = 0, dy = 0;
      while (dx == 0 && dy == 0) {
        dx = motion_rng.uniform_int(-2, 2);
        dy = motion_rng.uniform_int(-2, 2);
      }
      for (int t = 0; t < frame_count; ++t) {
        Bytes img = base;
        const int ox = std::clamp(x0 + t * dx, 0, width - ow);
        const int oy = std::clamp(y0 + t * dy, 0, height - oh);
        for (int y = 0; y < oh; ++y)
          for (int x = 0; x < ow; ++x)
            for (int ch = 0; ch < 3; ++ch)
              img[px(width, ox + x, oy + y, ch)] = object[px(ow, x, y, ch)];
        video.frames.push_back(frame_from_rgb(img.data(), height, width));
      }
      break;
    }
    case MotionKind::kZoom: {
      const double rates[] = {-0.03, -0.02, -0.01, 0.01, 0.02, 0.03};
      const double rate = rates[motion_rng.uniform_int(0, 5)];
      const double cx = width / 2.0, cy = height / 2.0;
      for (int t = 0; t < frame_count; ++t) {
        const double s = 1.0 + rate * t;
        Bytes img(base.size());
        for (int y = 0; y < height; ++y)
          for (int x = 0; x < width; ++x) {
            const int sx = std::clamp(
                static_cast<int>(std::lround(cx + (x - cx) / s)), 0, width - 1);
            const int sy = std::clamp(
                static_cast<int>(std::lround(cy + (y - cy) / s)), 0, height - 1);
            for (int ch = 0; ch < 3; ++ch)
              img[px(width, x, y, ch)] = base[px(width, sx, sy, ch)];
          }
        video.frames.push_back(frame_from_rgb(img.data(), height, width));
      }
      break;
    }
  }
  return video;
}

std::vector<LabeledVideo> generate_dataset(const SyntheticSpec& spec) {
  require(spec.sequence_count >= 1 && spec.frame_count >= 1, ErrorKind::kContract,
          "dataset spec out of range");
  Rng base(spec.seed);
  std::vector<LabeledVideo> out;
  for (int i = 0; i < spec.sequence_count; ++i) {
    LabeledVideo lv;
    lv.motion = static_cast<MotionKind>(i % 4);
    lv.texture = static_cast<TextureKind>((i / 4) % 4);
    lv.video = make_sequence(spec.width, spec.height, spec.frame_count, lv.motion,
                             lv.texture, base.split(1000 + i));
    char name[96];
    std::snprintf(name, sizeof name, "seq%04d_%s_%s", i,
                  motion_kind_name(lv.motion).c_str(),
                  texture_kind_name(lv.texture).c_str());
    lv.name = name;
    out.push_back(std::move(lv));
  }
  return out;
}

}  // namespace pmvc
