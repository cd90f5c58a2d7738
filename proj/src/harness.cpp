#include "flmn/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "flmn/csv.hpp"

namespace fs = std::filesystem;

namespace flmn::harness {

using controller::ModelConfig;
using controller::ModelKind;
using controller::ParamSet;
using episodes::ClassLibrary;
using episodes::EpisodeBatch;

// --- config ------------------------------------------------------------------

void TrainConfig::validate() const {
  model_kind();  // throws on bad name
  auto positive = [](auto v, const char* what) {
    if (v <= 0) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(episodes, "episodes");
  positive(batch, "batch");
  if (learning_rate < 0) throw ConfigError("learning_rate must be >= 0");
  positive(classes_per_episode, "classes_per_episode");
  positive(samples_per_class, "samples_per_class");
  positive(memory_rows, "memory_rows");
  positive(memory_width, "memory_width");
  positive(hidden_width, "hidden_width");
  positive(eval_cadence, "eval_cadence");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0,1)");
  if (memory_init <= 0.0) throw ConfigError("memory_init must be positive");
  if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
  if (dataset != "synthetic" && dataset != "omniglot")
    throw ConfigError("dataset must be synthetic or omniglot, got '" + dataset + "'");
  if (model_kind() == ModelKind::kFlmn && memory_rows % 2 != 0)
    throw ConfigError("memory_rows must be even for the split model (half per memory)");
}

ModelConfig TrainConfig::model_config() const {
  ModelConfig m;
  m.kind = model_kind();
  m.image_pixels = episodes::kImagePixels;
  m.label_width = classes_per_episode;
  m.hidden_width = hidden_width;
  m.memory_rows = m.kind == ModelKind::kFlmn ? memory_rows / 2 : memory_rows;
  m.memory_width = memory_width;
  m.gamma = gamma;
  m.memory_init = memory_init;
  return m;
}

std::optional<episodes::AugmentationSpec> TrainConfig::augmentation() const {
  if (!augment) return std::nullopt;
  return episodes::AugmentationSpec{};
}

namespace {

struct FieldDef {
  std::string key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

long long parse_ll(const std::string& v) {
  std::size_t pos = 0;
  long long x = std::stoll(v, &pos);
  if (pos != v.size()) throw std::invalid_argument(v);
  return x;
}

double parse_d(const std::string& v) {
  std::size_t pos = 0;
  double x = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument(v);
  return x;
}

bool parse_b(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument(v);
}

template <typename T>
FieldDef field(const char* key, T TrainConfig::*member) {
  FieldDef f;
  f.key = key;
  if constexpr (std::is_same_v<T, std::string>) {
    f.get = [member](const TrainConfig& c) { return c.*member; };
    f.set = [member](TrainConfig& c, const std::string& v) { c.*member = v; };
  } else if constexpr (std::is_same_v<T, bool>) {
    f.get = [member](const TrainConfig& c) { return (c.*member) ? "true" : "false"; };
    f.set = [member](TrainConfig& c, const std::string& v) { c.*member = parse_b(v); };
  } else if constexpr (std::is_same_v<T, double>) {
    f.get = [member](const TrainConfig& c) { return format_double(c.*member); };
    f.set = [member](TrainConfig& c, const std::string& v) { c.*member = parse_d(v); };
  } else {
    f.get = [member](const TrainConfig& c) { return std::to_string(c.*member); };
    f.set = [member](TrainConfig& c, const std::string& v) {
      c.*member = static_cast<T>(parse_ll(v));
    };
  }
  return f;
}

const std::vector<FieldDef>& fields() {
  static const std::vector<FieldDef> defs = {
      field("model", &TrainConfig::model),
      field("episodes", &TrainConfig::episodes),
      field("batch", &TrainConfig::batch),
      field("learning_rate", &TrainConfig::learning_rate),
      field("adam_beta1", &TrainConfig::adam_beta1),
      field("adam_beta2", &TrainConfig::adam_beta2),
      field("adam_eps", &TrainConfig::adam_eps),
      field("clip_norm", &TrainConfig::clip_norm),
      field("classes_per_episode", &TrainConfig::classes_per_episode),
      field("samples_per_class", &TrainConfig::samples_per_class),
      field("memory_rows", &TrainConfig::memory_rows),
      field("memory_width", &TrainConfig::memory_width),
      field("hidden_width", &TrainConfig::hidden_width),
      field("gamma", &TrainConfig::gamma),
      field("memory_init", &TrainConfig::memory_init),
      field("seed", &TrainConfig::seed),
      field("eval_cadence", &TrainConfig::eval_cadence),
      field("checkpoint_cadence", &TrainConfig::checkpoint_cadence),
      field("threads", &TrainConfig::threads),
      field("deterministic", &TrainConfig::deterministic),
      field("dataset", &TrainConfig::dataset),
      field("data_root", &TrainConfig::data_root),
      field("synthetic_classes", &TrainConfig::synthetic_classes),
      field("synthetic_samples", &TrainConfig::synthetic_samples),
      field("synthetic_noise", &TrainConfig::synthetic_noise),
      field("omniglot_train_classes", &TrainConfig::omniglot_train_classes),
      field("augment", &TrainConfig::augment),
      field("out_dir", &TrainConfig::out_dir),
  };
  return defs;
}

const FieldDef* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

void apply_config_override(TrainConfig& cfg, const std::string& key, const std::string& value,
                           const std::string& source) {
  const FieldDef* f = find_field(key);
  if (!f) throw ConfigError(source + ": unknown key '" + key + "'");
  try {
    f->set(cfg, value);
  } catch (const std::exception&) {
    throw ConfigError(source + ": bad value '" + value + "' for key '" + key + "'");
  }
}

TrainConfig parse_train_config(const std::string& text, const TrainConfig& base) {
  TrainConfig cfg = base;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    apply_config_override(cfg, key, value, "line " + std::to_string(line_no));
  }
  return cfg;
}

std::string serialize_train_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

// --- instance accuracy ----------------------------------------------------------

void InstanceAccuracyTable::record(int prediction, int target, int presentation) {
  std::size_t k = static_cast<std::size_t>(presentation - 1);
  if (k >= total.size()) throw Error("presentation index out of range");
  total[k] += 1;
  if (prediction == target) correct[k] += 1;
}

double InstanceAccuracyTable::accuracy(int presentation) const {
  std::size_t k = static_cast<std::size_t>(presentation - 1);
  if (k >= total.size() || total[k] == 0) return 0.0;
  return static_cast<double>(correct[k]) / static_cast<double>(total[k]);
}

// --- forward passes ----------------------------------------------------------------

BatchRunResult run_episode_batch(const ParamSet& params, const EpisodeBatch& batch,
                                 const ModelConfig& cfg) {
  BatchRunResult out;
  for (const auto& ep : batch.episodes) {
    controller::UnrolledEpisode run = controller::unroll_episode(cfg, params, ep);
    out.loss_sum += run.loss_value;
    out.predictions.push_back(run.predictions);
  }
  return out;
}

// --- checkpoint I/O -------------------------------------------------------------

namespace {

std::uint32_t crc32(const unsigned char* data, std::size_t n) {
  static std::uint32_t table[256];
  static bool init = false;
  if (!init) {
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      table[i] = c;
    }
    init = true;
  }
  std::uint32_t c = 0xffffffffu;
  for (std::size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xffu] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

constexpr char kCkptMagic[8] = {'F', 'L', 'M', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::string& s, std::uint32_t v) { s.append(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::string& s, std::uint64_t v) { s.append(reinterpret_cast<const char*>(&v), 8); }
void put_i64(std::string& s, std::int64_t v) { s.append(reinterpret_cast<const char*>(&v), 8); }

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw CheckpointError("checkpoint body truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, buf.data() + pos, 4);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, buf.data() + pos, 8);
    pos += 8;
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

void put_params(std::string& body, const ParamSet& p) {
  put_u32(body, static_cast<std::uint32_t>(p.count()));
  for (const auto& [name, t] : p.items) {
    put_u32(body, static_cast<std::uint32_t>(name.size()));
    body.append(name);
    put_u32(body, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put_u32(body, static_cast<std::uint32_t>(d));
    body.append(reinterpret_cast<const char*>(t.data.data()),
                static_cast<std::size_t>(t.data.size()) * sizeof(double));
  }
}

ParamSet read_params(Reader& r) {
  ParamSet p;
  std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    std::uint32_t rank = r.u32();
    diffmath::Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(r.u32()));
    diffmath::Tensor t = diffmath::Tensor::zeros(shape);
    std::size_t bytes = static_cast<std::size_t>(t.data.size()) * sizeof(double);
    r.need(bytes);
    std::memcpy(t.data.data(), r.buf.data() + r.pos, bytes);
    r.pos += bytes;
    p.add(name, std::move(t));
  }
  return p;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string body;
  std::string config_text = serialize_train_config(ckpt.config);
  put_u64(body, config_text.size());
  body.append(config_text);
  put_params(body, ckpt.params);
  put_params(body, ckpt.adam_m);
  put_params(body, ckpt.adam_v);
  put_i64(body, ckpt.adam_step);
  put_i64(body, ckpt.episode_counter);
  put_i64(body, ckpt.update_counter);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open checkpoint for writing: " + path);
  out.write(kCkptMagic, 8);
  std::uint32_t version = kCkptVersion;
  out.write(reinterpret_cast<const char*>(&version), 4);
  std::uint64_t len = body.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  std::uint32_t crc = crc32(reinterpret_cast<const unsigned char*>(body.data()), body.size());
  out.write(reinterpret_cast<const char*>(&crc), 4);
  if (!out) throw CheckpointError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw CheckpointError("not a checkpoint file (bad magic): " + path);
  std::uint32_t version = 0;
  if (!in.read(reinterpret_cast<char*>(&version), 4))
    throw CheckpointError("truncated checkpoint: " + path);
  if (version != kCkptVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " in " +
                          path);
  std::uint64_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), 8))
    throw CheckpointError("truncated checkpoint: " + path);
  std::string body(len, '\0');
  if (!in.read(body.data(), static_cast<std::streamsize>(len)))
    throw CheckpointError("truncated checkpoint body: " + path);
  std::uint32_t crc_stored = 0;
  if (!in.read(reinterpret_cast<char*>(&crc_stored), 4))
    throw CheckpointError("truncated checkpoint (missing checksum): " + path);
  std::uint32_t crc_actual =
      crc32(reinterpret_cast<const unsigned char*>(body.data()), body.size());
  if (crc_stored != crc_actual)
    throw CheckpointError("checkpoint checksum mismatch (corrupt file): " + path);

  Reader r(body);
  Checkpoint ckpt;
  ckpt.version = version;
  std::uint64_t cfg_len = r.u64();
  ckpt.config = parse_train_config(r.bytes(cfg_len));
  ckpt.params = read_params(r);
  ckpt.adam_m = read_params(r);
  ckpt.adam_v = read_params(r);
  ckpt.adam_step = r.i64();
  ckpt.episode_counter = r.i64();
  ckpt.update_counter = r.i64();
  return ckpt;
}

// --- datasets ------------------------------------------------------------------

ClassLibrary load_config_dataset(const TrainConfig& cfg, bool train_side) {
  if (cfg.dataset == "synthetic") {
    std::uint64_t s = derive_seed(cfg.seed, train_side ? 0xDA7A : 0xE7A1);
    return episodes::synthetic_library(static_cast<std::size_t>(cfg.synthetic_classes),
                                       static_cast<std::size_t>(cfg.synthetic_samples),
                                       episodes::kImageSide, cfg.synthetic_noise, s);
  }
  std::string root = cfg.data_root;
  if (root.empty()) {
    const char* env = std::getenv("FLMN_DATA_ROOT");
    if (env) root = std::string(env) + "/omniglot";
  }
  if (root.empty())
    throw DatasetError("omniglot dataset requires data_root (or FLMN_DATA_ROOT)");
  ClassLibrary lib = episodes::load_omniglot(root, 20, cfg.augment);
  auto [train, test] =
      episodes::split_classes(lib, static_cast<std::size_t>(cfg.omniglot_train_classes), cfg.seed);
  return train_side ? std::move(train) : std::move(test);
}

// --- training ---------------------------------------------------------------------

namespace {

std::string param_norms(const ParamSet& p) {
  std::string s;
  for (const auto& [name, t] : p.items) {
    if (!s.empty()) s += ", ";
    s += name + "=" + format_double(t.data.norm());
  }
  return s;
}

int resolve_threads(const TrainConfig& cfg) {
  if (cfg.deterministic) return 1;
  if (cfg.threads > 0) return std::min(cfg.threads, cfg.batch);
  unsigned hw = std::thread::hardware_concurrency();
  return std::max(1, std::min<int>(static_cast<int>(hw), cfg.batch));
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const ClassLibrary& library, const Checkpoint* resume) {
  cfg.validate();
  const ModelConfig mcfg = cfg.model_config();
  fs::create_directories(cfg.out_dir);

  ParamSet params, adam_m, adam_v;
  std::int64_t adam_step = 0, episode_ctr = 0, update_ctr = 0;
  if (resume) {
    params = resume->params;
    adam_m = resume->adam_m;
    adam_v = resume->adam_v;
    adam_step = resume->adam_step;
    episode_ctr = resume->episode_counter;
    update_ctr = resume->update_counter;
  } else {
    params = controller::init_params(mcfg, cfg.seed);
    adam_m = controller::zeros_like(params);
    adam_v = controller::zeros_like(params);
  }

  const int S = cfg.samples_per_class;
  TrainResult result;
  result.log_path = cfg.out_dir + "/metrics.csv";
  CsvWriter csv(result.log_path);
  std::vector<std::string> header = {"episode", "loss"};
  for (int k = 1; k <= S; ++k) header.push_back("inst" + std::to_string(k));
  csv.row(header);

  const std::int64_t total_updates = std::max<std::int64_t>(1, cfg.episodes / cfg.batch);
  const int n_threads = resolve_threads(cfg);
  const std::uint64_t stream_seed = derive_seed(cfg.seed, 0xBA7C4);

  InstanceAccuracyTable window(S);
  double window_loss = 0.0;
  std::int64_t window_episodes = 0;
  std::int64_t last_flush = episode_ctr;
  std::int64_t last_ckpt = episode_ctr;

  auto flush_row = [&] {
    if (window_episodes == 0) return;
    LogRow row;
    row.episode = episode_ctr;
    row.loss = window_loss / static_cast<double>(window_episodes);
    std::vector<std::string> cells = {std::to_string(row.episode), format_double(row.loss)};
    for (int k = 1; k <= S; ++k) {
      double a = window.accuracy(k);
      row.instance_accuracy.push_back(a);
      cells.push_back(format_double(a));
    }
    csv.row(cells);
    result.rows.push_back(std::move(row));
    window = InstanceAccuracyTable(S);
    window_loss = 0.0;
    window_episodes = 0;
    last_flush = episode_ctr;
  };

  ParamSet grads = controller::zeros_like(params);
  std::vector<ParamSet> thread_grads;
  for (int t = 0; t < n_threads; ++t) thread_grads.push_back(controller::zeros_like(params));

  for (; update_ctr < total_updates; ++update_ctr) {
    EpisodeBatch batch = episodes::make_episode_batch(
        library, cfg.classes_per_episode, S, cfg.batch, cfg.augmentation(),
        derive_seed(stream_seed, static_cast<std::uint64_t>(update_ctr)));
    result.stream_hash = episodes::episode_stream_hash(result.stream_hash, batch);

    const int B = static_cast<int>(batch.episodes.size());
    std::vector<double> ep_loss(static_cast<std::size_t>(B), 0.0);
    std::vector<std::vector<int>> ep_preds(static_cast<std::size_t>(B));

    for (auto& tg : thread_grads)
      for (auto& [name, t] : tg.items) t.data.setZero();

    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&](int tid) {
      try {
        for (int e = tid; e < B; e += n_threads) {
          controller::UnrolledEpisode run =
              controller::unroll_episode(mcfg, params, batch.episodes[static_cast<std::size_t>(e)]);
          ep_loss[static_cast<std::size_t>(e)] = run.loss_value;
          ep_preds[static_cast<std::size_t>(e)] = std::move(run.predictions);
          controller::accumulate_gradients(run, params, thread_grads[static_cast<std::size_t>(tid)]);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    };
    if (n_threads == 1) {
      worker(0);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker, t);
      for (auto& th : pool) th.join();
    }
    if (first_error) {
      try {
        std::rethrow_exception(first_error);
      } catch (const GraphError& e) {
        throw NumericError("training halted near episode " + std::to_string(episode_ctr) + ": " +
                           e.what() + "; parameter norms: " + param_norms(params));
      }
    }

    double batch_loss = 0.0;
    for (double l : ep_loss) batch_loss += l;
    if (!std::isfinite(batch_loss))
      throw NumericError("training halted: non-finite loss at episode " +
                         std::to_string(episode_ctr) +
                         "; parameter norms: " + param_norms(params));

    // Fixed-order reduction keeps results identical for any thread count.
    for (std::size_t i = 0; i < grads.items.size(); ++i) {
      auto& g = grads.items[i].second.data;
      g.setZero();
      for (const auto& tg : thread_grads) g += tg.items[i].second.data;
      g /= static_cast<double>(B);
    }

    if (cfg.clip_norm > 0.0) {
      double sq = 0.0;
      for (const auto& [name, t] : grads.items) sq += t.data.squaredNorm();
      double norm = std::sqrt(sq);
      if (norm > cfg.clip_norm) {
        double s = cfg.clip_norm / norm;
        for (auto& [name, t] : grads.items) t.data *= s;
      }
    }

    adam_step += 1;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam_step));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam_step));
    for (std::size_t i = 0; i < params.items.size(); ++i) {
      auto& p = params.items[i].second.data;
      auto& m = adam_m.items[i].second.data;
      auto& v = adam_v.items[i].second.data;
      const auto& g = grads.items[i].second.data;
      m = cfg.adam_beta1 * m + (1.0 - cfg.adam_beta1) * g;
      v = cfg.adam_beta2 * v + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
      p.array() -=
          cfg.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.adam_eps);
    }

    episode_ctr += B;
    window_episodes += B;
    for (int e = 0; e < B; ++e) {
      const auto& ep = batch.episodes[static_cast<std::size_t>(e)];
      window_loss += ep_loss[static_cast<std::size_t>(e)];
      for (int t = 0; t < ep.length(); ++t)
        window.record(ep_preds[static_cast<std::size_t>(e)][static_cast<std::size_t>(t)],
                      ep.targets[static_cast<std::size_t>(t)],
                      ep.presentation[static_cast<std::size_t>(t)]);
    }

    if (episode_ctr - last_flush >= cfg.eval_cadence) flush_row();

    if (cfg.checkpoint_cadence > 0 && episode_ctr - last_ckpt >= cfg.checkpoint_cadence) {
      Checkpoint ck{kCkptVersion, cfg, params, adam_m, adam_v, adam_step, episode_ctr,
                    update_ctr + 1};
      save_checkpoint(cfg.out_dir + "/ckpt_" + std::to_string(episode_ctr) + ".ckpt", ck);
      last_ckpt = episode_ctr;
    }
  }

  flush_row();
  result.checkpoint = Checkpoint{kCkptVersion, cfg,       params,      adam_m,
                                 adam_v,       adam_step, episode_ctr, update_ctr};
  save_checkpoint(cfg.out_dir + "/checkpoint.ckpt", result.checkpoint);
  result.episodes_run = episode_ctr;
  return result;
}

// --- evaluation ----------------------------------------------------------------

InstanceAccuracyTable evaluate(const ModelConfig& cfg, const ParamSet& params,
                               const ClassLibrary& library, int n_episodes,
                               int classes_per_episode, int samples_per_class, std::uint64_t seed,
                               const std::optional<episodes::AugmentationSpec>& augment) {
  if (static_cast<int>(library.size()) < classes_per_episode)
    throw DatasetError("library has " + std::to_string(library.size()) +
                       " classes, need " + std::to_string(classes_per_episode));
  if (cfg.label_width != classes_per_episode)
    throw ConfigError("model label width " + std::to_string(cfg.label_width) +
                      " does not match requested classes " + std::to_string(classes_per_episode));
  if (n_episodes <= 0) throw ConfigError("evaluation needs a positive episode count");

  InstanceAccuracyTable table(samples_per_class);
  controller::ValueRunner runner(cfg, params);

  const int chunk = 50;
  int remaining = n_episodes;
  std::uint64_t chunk_idx = 0;
  while (remaining > 0) {
    int n = std::min(chunk, remaining);
    EpisodeBatch batch =
        episodes::make_episode_batch(library, classes_per_episode, samples_per_class, n, augment,
                                     derive_seed(seed, chunk_idx++));
    for (const auto& ep : batch.episodes) {
      runner.reset();
      for (int t = 0; t < ep.length(); ++t) {
        Eigen::VectorXd logits = runner.step(ep.images[static_cast<std::size_t>(t)],
                                             ep.offset_labels[static_cast<std::size_t>(t)]);
        Eigen::Index arg = 0;
        logits.maxCoeff(&arg);
        table.record(static_cast<int>(arg), ep.targets[static_cast<std::size_t>(t)],
                     ep.presentation[static_cast<std::size_t>(t)]);
      }
    }
    remaining -= n;
  }
  table.episode_count = n_episodes;
  return table;
}

}  // namespace flmn::harness
