#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "flmn/dataset.hpp"
#include "flmn/rng.hpp"

namespace flmn::episodes {

// Rotation/translation applied to each image occurrence at native resolution,
// before downscaling.
struct AugmentationSpec {
  double max_rotation = M_PI / 16.0;  // radians, uniform in [-max, max]
  int max_shift = 10;                 // pixels, integer uniform in [-max, max] per axis
};

// One task sequence: T = classes * samples steps of (image, offset label,
// target). offset_labels[0] is the zero vector; offset_labels[t] is the
// one-hot of targets[t-1] afterwards.
struct Episode {
  int classes = 0;  // C: label slots
  int samples = 0;  // S: occurrences per class
  std::vector<Eigen::VectorXd> images;         // T, flattened pixels
  std::vector<Eigen::VectorXd> offset_labels;  // T, width C
  std::vector<int> targets;                    // T, in [0, C)
  std::vector<int> presentation;               // T, 1-based k-th presentation of the class

  int length() const { return static_cast<int>(images.size()); }
};

struct EpisodeBatch {
  int classes = 0;
  int samples = 0;
  std::vector<Episode> episodes;
};

// Samples `batch` episodes: per episode, picks C classes, S distinct samples
// each, shuffles the C*S sequence uniformly and assigns a fresh random
// class-to-label-slot permutation. Augmentation, when given, is applied per
// image occurrence at native resolution (the library must retain it).
EpisodeBatch make_episode_batch(const ClassLibrary& library, int classes_per_episode,
                                int samples_per_class, int batch,
                                const std::optional<AugmentationSpec>& augment,
                                std::uint64_t seed);

// Rotate by an angle drawn from the spec, shift by integer offsets, then
// downscale to 20x20. The Rng overload draws from an existing stream.
GrayImage augment_image(const GrayImage& native, const AugmentationSpec& spec, Rng& rng);
GrayImage augment_image(const GrayImage& native, const AugmentationSpec& spec, std::uint64_t seed);

// FNV-1a over the batch's images, labels and targets; used to verify that two
// runs consumed identical episode streams.
std::uint64_t episode_stream_hash(std::uint64_t running, const EpisodeBatch& batch);

}  // namespace flmn::episodes
