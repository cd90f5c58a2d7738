#include "flmn/dataset.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

#include "flmn/image_ops.hpp"
#include "flmn/rng.hpp"

namespace fs = std::filesystem;

namespace flmn::episodes {

bool ClassLibrary::has_native() const {
  for (const auto& c : classes)
    if (c.native.size() != c.images.size()) return false;
  return !classes.empty();
}

void ClassLibrary::validate_min_samples(std::size_t min_samples) const {
  std::string offenders;
  for (const auto& c : classes) {
    if (c.images.size() < min_samples) {
      if (!offenders.empty()) offenders += ", ";
      offenders += c.name + " (" + std::to_string(c.images.size()) + ")";
    }
  }
  if (!offenders.empty())
    throw DatasetError("classes with fewer than " + std::to_string(min_samples) +
                       " samples: " + offenders);
}

// --- PNG -------------------------------------------------------------------

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

GrayImage load_png_gray(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw DatasetError("cannot open image file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DatasetError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DatasetError("libpng info init failed");
  }
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DatasetError("failed to decode PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 width = png_get_image_width(png, info);
  png_uint_32 height = png_get_image_height(png, info);
  png_byte color = png_get_color_type(png, info);
  png_byte depth = png_get_bit_depth(png, info);

  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
      color == PNG_COLOR_TYPE_PALETTE)
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);

  buffer.resize(static_cast<std::size_t>(width) * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y)
    rows[y] = buffer.data() + static_cast<std::size_t>(y) * width;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  if (width != height)
    throw DatasetError("expected a square image, got " + std::to_string(width) + "x" +
                       std::to_string(height) + ": " + path);

  GrayImage img;
  img.side = static_cast<int>(width);
  img.pixels.resize(static_cast<Eigen::Index>(width) * height);
  for (Eigen::Index i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = buffer[static_cast<std::size_t>(i)] / 255.0;
  return img;
}

void save_png_gray(const std::string& path, const GrayImage& img) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw DatasetError("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw DatasetError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DatasetError("libpng info init failed");
  }
  std::vector<png_byte> buffer(static_cast<std::size_t>(img.side) * img.side);
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.side));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DatasetError("failed to encode PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.side), static_cast<png_uint_32>(img.side),
               8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (Eigen::Index i = 0; i < img.pixels.size(); ++i) {
    double v = std::clamp(img.pixels[i], 0.0, 1.0);
    buffer[static_cast<std::size_t>(i)] = static_cast<png_byte>(std::lround(v * 255.0));
  }
  for (int y = 0; y < img.side; ++y)
    rows[static_cast<std::size_t>(y)] = buffer.data() + static_cast<std::size_t>(y) * img.side;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

// --- Omniglot ----------------------------------------------------------------

namespace {

// Ink high, background low.
void normalize_polarity(GrayImage& img) {
  if (img.pixels.mean() > 0.5) img.pixels = 1.0 - img.pixels.array();
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool dirs_only) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (dirs_only && !e.is_directory()) continue;
    if (!dirs_only && !e.is_regular_file()) continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

ClassLibrary load_omniglot(const std::string& root, std::size_t samples_per_class,
                           bool keep_native) {
  if (!fs::is_directory(root)) throw DatasetError("omniglot root is not a directory: " + root);
  ClassLibrary lib;
  std::uint32_t next_id = 0;
  for (const fs::path& alphabet : sorted_entries(root, true)) {
    for (const fs::path& character : sorted_entries(alphabet, true)) {
      ClassLibrary::Entry entry;
      entry.id = next_id++;
      entry.name = alphabet.filename().string() + "/" + character.filename().string();
      for (const fs::path& file : sorted_entries(character, false)) {
        if (file.extension() != ".png") continue;
        GrayImage native = load_png_gray(file.string());
        normalize_polarity(native);
        GrayImage small = native.side == kImageSide ? native : area_downscale(native, kImageSide);
        entry.images.push_back(small.pixels);
        if (keep_native) entry.native.push_back(std::move(native));
      }
      lib.classes.push_back(std::move(entry));
    }
  }
  if (lib.classes.empty()) throw DatasetError("no classes found under " + root);
  lib.validate_min_samples(samples_per_class);
  return lib;
}

std::pair<ClassLibrary, ClassLibrary> split_classes(const ClassLibrary& lib, std::size_t n_train,
                                                    std::uint64_t seed) {
  if (n_train == 0 || n_train >= lib.size())
    throw DatasetError("split requires 0 < n_train < " + std::to_string(lib.size()) + ", got " +
                       std::to_string(n_train));
  std::vector<std::size_t> idx(lib.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(derive_seed(seed, 0x51D));
  rng.shuffle(idx);
  ClassLibrary train, test;
  for (std::size_t i = 0; i < idx.size(); ++i)
    (i < n_train ? train : test).classes.push_back(lib.classes[idx[i]]);
  return {std::move(train), std::move(test)};
}

// --- MNIST IDX ---------------------------------------------------------------

namespace {

std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw DatasetError("truncated IDX file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace

ClassLibrary load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw DatasetError("cannot open IDX images file: " + images_path);
  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs) throw DatasetError("cannot open IDX labels file: " + labels_path);

  std::uint32_t magic_i = read_u32_be(imgs, images_path);
  if (magic_i != 2051)
    throw DatasetError("bad IDX image magic " + std::to_string(magic_i) + " in " + images_path);
  std::uint32_t n_images = read_u32_be(imgs, images_path);
  std::uint32_t rows = read_u32_be(imgs, images_path);
  std::uint32_t cols = read_u32_be(imgs, images_path);
  if (rows != cols) throw DatasetError("IDX images are not square: " + images_path);

  std::uint32_t magic_l = read_u32_be(labs, labels_path);
  if (magic_l != 2049)
    throw DatasetError("bad IDX label magic " + std::to_string(magic_l) + " in " + labels_path);
  std::uint32_t n_labels = read_u32_be(labs, labels_path);
  if (n_images != n_labels)
    throw DatasetError("IDX image count " + std::to_string(n_images) + " does not match label count " +
                       std::to_string(n_labels));

  std::vector<unsigned char> pixels(static_cast<std::size_t>(rows) * cols);
  std::vector<unsigned char> labels(n_labels);
  if (!labs.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(labels.size())))
    throw DatasetError("truncated IDX labels file: " + labels_path);

  std::map<unsigned char, ClassLibrary::Entry> by_label;
  for (std::uint32_t i = 0; i < n_images; ++i) {
    if (!imgs.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size())))
      throw DatasetError("truncated IDX images file: " + images_path);
    GrayImage img;
    img.side = static_cast<int>(rows);
    img.pixels.resize(static_cast<Eigen::Index>(rows) * cols);
    for (Eigen::Index j = 0; j < img.pixels.size(); ++j)
      img.pixels[j] = pixels[static_cast<std::size_t>(j)] / 255.0;
    normalize_polarity(img);
    GrayImage small = img.side == kImageSide ? img : area_downscale(img, kImageSide);
    by_label[labels[i]].images.push_back(small.pixels);
  }

  ClassLibrary lib;
  std::uint32_t id = 0;
  for (auto& [label, entry] : by_label) {
    entry.id = id++;
    entry.name = "digit-" + std::to_string(static_cast<int>(label));
    lib.classes.push_back(std::move(entry));
  }
  return lib;
}

ClassLibrary make_minimnist(const ClassLibrary& lib, std::size_t per_class, std::uint64_t seed) {
  if (per_class == 0) throw DatasetError("per_class must be positive");
  ClassLibrary out;
  for (std::size_t c = 0; c < lib.size(); ++c) {
    const auto& entry = lib.classes[c];
    if (entry.images.size() < per_class)
      throw DatasetError("class " + entry.name + " has only " +
                         std::to_string(entry.images.size()) + " samples, need " +
                         std::to_string(per_class));
    Rng rng(derive_seed(seed, c));
    std::vector<std::size_t> pick = rng.sample_without_replacement(entry.images.size(), per_class);
    ClassLibrary::Entry sub;
    sub.id = entry.id;
    sub.name = entry.name;
    for (std::size_t i : pick) sub.images.push_back(entry.images[i]);
    out.classes.push_back(std::move(sub));
  }
  return out;
}

// --- synthetic -----------------------------------------------------------------

ClassLibrary synthetic_library(std::size_t n_classes, std::size_t samples_per_class, int side,
                               double noise, std::uint64_t seed) {
  if (n_classes < 2) throw DatasetError("synthetic library needs at least 2 classes");
  const Eigen::Index pixels = static_cast<Eigen::Index>(side) * side;
  const double min_diff = 0.25 * static_cast<double>(pixels);
  Rng rng(derive_seed(seed, 0x5E7));

  std::vector<Eigen::VectorXd> prototypes;
  while (prototypes.size() < n_classes) {
    Eigen::VectorXd proto(pixels);
    for (Eigen::Index i = 0; i < pixels; ++i) proto[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    bool distinct = true;
    for (const auto& other : prototypes) {
      if ((proto - other).cwiseAbs().sum() < min_diff) {
        distinct = false;
        break;
      }
    }
    if (distinct) prototypes.push_back(std::move(proto));
  }

  ClassLibrary lib;
  for (std::size_t c = 0; c < n_classes; ++c) {
    ClassLibrary::Entry entry;
    entry.id = static_cast<std::uint32_t>(c);
    entry.name = "proto-" + std::to_string(c);
    for (std::size_t s = 0; s < samples_per_class; ++s) {
      Eigen::VectorXd img = prototypes[c];
      if (noise > 0.0)
        for (Eigen::Index i = 0; i < pixels; ++i)
          img[i] = std::clamp(img[i] + rng.uniform(-noise, noise), 0.0, 1.0);
      entry.images.push_back(std::move(img));
    }
    lib.classes.push_back(std::move(entry));
  }
  return lib;
}

// --- cache -----------------------------------------------------------------------

namespace {
constexpr char kCacheMagic[8] = {'F', 'L', 'M', 'N', 'L', 'I', 'B', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}
std::uint32_t read_u32(std::istream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) throw DatasetError("truncated cache: " + path);
  return v;
}
}  // namespace

void save_library_cache(const std::string& path, const ClassLibrary& lib) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot open cache for writing: " + path);
  out.write(kCacheMagic, sizeof(kCacheMagic));
  write_u32(out, static_cast<std::uint32_t>(lib.size()));
  std::vector<float> row(kImagePixels);
  for (const auto& entry : lib.classes) {
    write_u32(out, entry.id);
    write_u32(out, static_cast<std::uint32_t>(entry.images.size()));
    for (const auto& img : entry.images) {
      if (img.size() != kImagePixels)
        throw DatasetError("cache format stores " + std::to_string(kImagePixels) +
                           "-pixel images, class " + entry.name + " has " +
                           std::to_string(img.size()));
      for (int i = 0; i < kImagePixels; ++i) row[static_cast<std::size_t>(i)] = static_cast<float>(img[i]);
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(float)));
    }
  }
  if (!out) throw DatasetError("failed writing cache: " + path);
}

ClassLibrary load_library_cache(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open cache: " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCacheMagic, 8) != 0)
    throw DatasetError("bad cache magic in " + path);
  std::uint32_t count = read_u32(in, path);
  ClassLibrary lib;
  std::vector<float> row(kImagePixels);
  for (std::uint32_t c = 0; c < count; ++c) {
    ClassLibrary::Entry entry;
    entry.id = read_u32(in, path);
    entry.name = "class-" + std::to_string(entry.id);
    std::uint32_t n = read_u32(in, path);
    for (std::uint32_t i = 0; i < n; ++i) {
      if (!in.read(reinterpret_cast<char*>(row.data()),
                   static_cast<std::streamsize>(row.size() * sizeof(float))))
        throw DatasetError("truncated cache: " + path);
      Eigen::VectorXd img(kImagePixels);
      for (int j = 0; j < kImagePixels; ++j) img[j] = row[static_cast<std::size_t>(j)];
      entry.images.push_back(std::move(img));
    }
    lib.classes.push_back(std::move(entry));
  }
  return lib;
}

}  // namespace flmn::episodes
