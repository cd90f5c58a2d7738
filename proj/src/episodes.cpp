#include "flmn/episodes.hpp"

#include <string>

#include "flmn/image_ops.hpp"

namespace flmn::episodes {

GrayImage augment_image(const GrayImage& native, const AugmentationSpec& spec, Rng& rng) {
  double angle = rng.uniform(-spec.max_rotation, spec.max_rotation);
  int dx = static_cast<int>(rng.uniform_int(-static_cast<long long>(spec.max_shift),
                                            static_cast<long long>(spec.max_shift)));
  int dy = static_cast<int>(rng.uniform_int(-static_cast<long long>(spec.max_shift),
                                            static_cast<long long>(spec.max_shift)));
  GrayImage out = translate(rotate(native, angle), dx, dy);
  return out.side == kImageSide ? out : area_downscale(out, kImageSide);
}

GrayImage augment_image(const GrayImage& native, const AugmentationSpec& spec,
                        std::uint64_t seed) {
  Rng rng(seed);
  return augment_image(native, spec, rng);
}

EpisodeBatch make_episode_batch(const ClassLibrary& library, int classes_per_episode,
                                int samples_per_class, int batch,
                                const std::optional<AugmentationSpec>& augment,
                                std::uint64_t seed) {
  const std::size_t c_count = static_cast<std::size_t>(classes_per_episode);
  const std::size_t s_count = static_cast<std::size_t>(samples_per_class);
  if (classes_per_episode < 2)
    throw DatasetError("episodes need at least 2 classes, got " +
                       std::to_string(classes_per_episode));
  if (samples_per_class < 1) throw DatasetError("samples per class must be positive");
  if (batch < 1) throw DatasetError("batch size must be positive");
  if (library.size() < c_count)
    throw DatasetError("library has " + std::to_string(library.size()) +
                       " classes, episode needs " + std::to_string(classes_per_episode));
  library.validate_min_samples(s_count);
  if (augment.has_value() && !library.has_native())
    throw DatasetError("augmentation requires a library loaded with native-resolution images");

  EpisodeBatch out;
  out.classes = classes_per_episode;
  out.samples = samples_per_class;
  out.episodes.resize(static_cast<std::size_t>(batch));

  const int T = classes_per_episode * samples_per_class;
  for (int e = 0; e < batch; ++e) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(e)));
    Episode& ep = out.episodes[static_cast<std::size_t>(e)];
    ep.classes = classes_per_episode;
    ep.samples = samples_per_class;
    ep.images.reserve(static_cast<std::size_t>(T));
    ep.offset_labels.reserve(static_cast<std::size_t>(T));
    ep.targets.reserve(static_cast<std::size_t>(T));
    ep.presentation.reserve(static_cast<std::size_t>(T));

    // Which library classes take part, and which label slot each one gets.
    std::vector<std::size_t> picked = rng.sample_without_replacement(library.size(), c_count);
    std::vector<int> slot(c_count);
    for (std::size_t i = 0; i < c_count; ++i) slot[i] = static_cast<int>(i);
    rng.shuffle(slot);

    // Distinct samples per class, one per occurrence.
    std::vector<std::vector<std::size_t>> sample_idx(c_count);
    for (std::size_t i = 0; i < c_count; ++i) {
      const auto& entry = library.classes[picked[i]];
      sample_idx[i] = rng.sample_without_replacement(entry.images.size(), s_count);
    }

    // Uniformly shuffled occurrence sequence.
    std::vector<int> sequence;
    sequence.reserve(static_cast<std::size_t>(T));
    for (std::size_t i = 0; i < c_count; ++i)
      sequence.insert(sequence.end(), s_count, static_cast<int>(i));
    rng.shuffle(sequence);

    std::vector<int> seen(c_count, 0);
    for (int t = 0; t < T; ++t) {
      int ci = sequence[static_cast<std::size_t>(t)];
      const auto& entry = library.classes[picked[static_cast<std::size_t>(ci)]];
      std::size_t img = sample_idx[static_cast<std::size_t>(ci)]
                                  [static_cast<std::size_t>(seen[static_cast<std::size_t>(ci)])];
      if (augment.has_value())
        ep.images.push_back(augment_image(entry.native[img], *augment, rng).pixels);
      else
        ep.images.push_back(entry.images[img]);

      int target = slot[static_cast<std::size_t>(ci)];
      Eigen::VectorXd offset = Eigen::VectorXd::Zero(classes_per_episode);
      if (t > 0) offset[ep.targets.back()] = 1.0;
      ep.offset_labels.push_back(std::move(offset));
      ep.targets.push_back(target);
      seen[static_cast<std::size_t>(ci)] += 1;
      ep.presentation.push_back(seen[static_cast<std::size_t>(ci)]);
    }
  }
  return out;
}

namespace {
inline void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}
}  // namespace

std::uint64_t episode_stream_hash(std::uint64_t running, const EpisodeBatch& batch) {
  std::uint64_t h = running == 0 ? 0xcbf29ce484222325ULL : running;
  for (const Episode& ep : batch.episodes) {
    for (const auto& img : ep.images)
      fnv_bytes(h, img.data(), static_cast<std::size_t>(img.size()) * sizeof(double));
    for (const auto& lab : ep.offset_labels)
      fnv_bytes(h, lab.data(), static_cast<std::size_t>(lab.size()) * sizeof(double));
    for (int t : ep.targets) fnv_bytes(h, &t, sizeof(t));
  }
  return h;
}

}  // namespace flmn::episodes
