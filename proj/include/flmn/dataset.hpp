#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flmn/errors.hpp"

namespace flmn::episodes {

inline constexpr int kImageSide = 20;
inline constexpr int kImagePixels = kImageSide * kImageSide;

// Square grayscale raster in [0,1], ink high, stored row-major.
struct GrayImage {
  int side = 0;
  Eigen::VectorXd pixels;

  double at(int row, int col) const { return pixels[row * side + col]; }
  double& at(int row, int col) { return pixels[row * side + col]; }
};

// A set of labelled image classes. Episode generation consumes the 20x20
// images; `native`, when retained, holds the originals so augmentation can run
// before downscaling.
struct ClassLibrary {
  struct Entry {
    std::uint32_t id = 0;
    std::string name;
    std::vector<Eigen::VectorXd> images;  // each kImagePixels, in [0,1]
    std::vector<GrayImage> native;        // empty unless retained at load
  };
  std::vector<Entry> classes;

  std::size_t size() const { return classes.size(); }
  bool has_native() const;
  void validate_min_samples(std::size_t min_samples) const;
};

// Directory tree <root>/<alphabet>/<character>/*.png. Every class must supply
// at least `samples_per_class` images (Omniglot: 20). Downscaled by area
// interpolation; polarity normalized to ink=1, background=0.
ClassLibrary load_omniglot(const std::string& root, std::size_t samples_per_class = 20,
                           bool keep_native = false);

// Deterministic disjoint class split of sizes (n_train, total - n_train).
std::pair<ClassLibrary, ClassLibrary> split_classes(const ClassLibrary& lib, std::size_t n_train,
                                                    std::uint64_t seed);

// IDX pair (magic 2051 images / 2049 labels, big-endian). 28x28 inputs are
// downscaled to 20x20.
ClassLibrary load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// Deterministic per-class subsample.
ClassLibrary make_minimnist(const ClassLibrary& lib, std::size_t per_class, std::uint64_t seed);

// Random prototype classes with uniform pixel noise; any two prototypes differ
// in at least a quarter of their pixels.
ClassLibrary synthetic_library(std::size_t n_classes, std::size_t samples_per_class, int side,
                               double noise, std::uint64_t seed);

// Flat binary cache: "FLMNLIB1", u32 class count, then per class u32 id,
// u32 n, n x 400 float32 images row-major.
void save_library_cache(const std::string& path, const ClassLibrary& lib);
ClassLibrary load_library_cache(const std::string& path);

// Decoded single PNG as grayscale in [0,1] (no polarity fix).
GrayImage load_png_gray(const std::string& path);
void save_png_gray(const std::string& path, const GrayImage& img);

}  // namespace flmn::episodes
