#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmvc/frame.hpp"
#include "pmvc/rng.hpp"

namespace pmvc {

// Synthetic clip generator standing in for natural training footage. All
// content lives exactly on the 8-bit lattice and motion is integer or
// nearest-neighbor, so static content repeats bit-identically frame to frame.

enum class MotionKind { kStatic, kTranslate, kLocalObject, kZoom };
enum class TextureKind { kNoise, kGradients, kChecker, kBlobs };

std::string motion_kind_name(MotionKind k);
std::string texture_kind_name(TextureKind k);

struct SyntheticSpec {
  int width = 96;
  int height = 64;
  int frame_count = 8;
  int sequence_count = 200;
  std::uint64_t seed = 1;
};

struct LabeledVideo {
  Video video;
  MotionKind motion{};
  TextureKind texture{};
  std::string name;  // e.g. "seq0007_translate_checker"
};

// One clip; fully determined by its arguments.
Video make_sequence(int width, int height, int frame_count, MotionKind motion,
                    TextureKind texture, Rng rng);

// Deterministic dataset cycling through every motion x texture combination.
std::vector<LabeledVideo> generate_dataset(const SyntheticSpec& spec);

}  // namespace pmvc
