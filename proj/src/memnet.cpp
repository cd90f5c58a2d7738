#include "flmn/memnet.hpp"

#include <cmath>
#include <string>

namespace flmn::memnet {

namespace {
void require(bool cond, const std::string& msg) {
  if (!cond) throw Error("memnet: " + msg);
}
}  // namespace

void MemoryConfig::validate() const {
  require(rows > 0, "memory rows must be positive");
  require(width > 0, "memory width must be positive");
  require(gamma > 0.0 && gamma < 1.0, "gamma must lie in (0,1)");
  require(init_value > 0.0, "init_value must be positive");
}

MemoryState init_memory(const MemoryConfig& cfg, Eigen::Index label_width) {
  cfg.validate();
  require(label_width > 0, "label width must be positive");
  MemoryState s;
  s.features = MatrixXd::Constant(cfg.rows, cfg.width, cfg.init_value);
  s.labels = MatrixXd::Constant(cfg.rows, label_width, cfg.init_value);
  s.read_w = VectorXd::Constant(cfg.rows, 1.0 / static_cast<double>(cfg.rows));
  s.usage_w = VectorXd::Constant(cfg.rows, 1.0 / static_cast<double>(cfg.rows));
  s.least_used_w = VectorXd::Zero(cfg.rows);
  s.least_used_w[0] = 1.0;
  s.feature_write_w = VectorXd::Zero(cfg.rows);
  return s;
}

MannState init_mann_memory(const MemoryConfig& cfg) {
  cfg.validate();
  MannState s;
  s.memory = MatrixXd::Constant(cfg.rows, cfg.width, cfg.init_value);
  s.read_w = VectorXd::Constant(cfg.rows, 1.0 / static_cast<double>(cfg.rows));
  s.usage_w = VectorXd::Constant(cfg.rows, 1.0 / static_cast<double>(cfg.rows));
  s.least_used_w = VectorXd::Zero(cfg.rows);
  s.least_used_w[0] = 1.0;
  s.write_w = VectorXd::Zero(cfg.rows);
  return s;
}

VectorXd cosine_keys(const VectorXd& key, const MatrixXd& features, double eps) {
  require(key.size() == features.cols(),
          "key width " + std::to_string(key.size()) + " does not match memory width " +
              std::to_string(features.cols()));
  const double kn = key.norm() + eps;
  VectorXd sims(features.rows());
  for (Eigen::Index i = 0; i < features.rows(); ++i)
    sims[i] = features.row(i).dot(key) / (kn * (features.row(i).norm() + eps));
  return sims;
}

VectorXd read_weights(const VectorXd& similarities) {
  double m = similarities.maxCoeff();
  VectorXd e = (similarities.array() - m).exp();
  return e / e.sum();
}

VectorXd read_label(const VectorXd& read_w, const MatrixXd& labels) {
  require(read_w.size() == labels.rows(), "read weights length does not match label rows");
  return labels.transpose() * read_w;
}

VectorXd update_usage(const VectorXd& usage_prev, const VectorXd& write_w,
                      const VectorXd& read_w, double gamma) {
  require(usage_prev.size() == write_w.size() && usage_prev.size() == read_w.size(),
          "usage update length mismatch");
  return gamma * usage_prev + write_w + read_w;
}

VectorXd least_used(const VectorXd& usage) {
  Eigen::Index arg = 0;
  for (Eigen::Index i = 1; i < usage.size(); ++i)
    if (usage[i] < usage[arg]) arg = i;  // strict: ties keep the lowest index
  VectorXd w = VectorXd::Zero(usage.size());
  w[arg] = 1.0;
  return w;
}

VectorXd feature_write_weights(const VectorXd& read_w_prev, const VectorXd& least_used_w_prev,
                               double alpha) {
  require(read_w_prev.size() == least_used_w_prev.size(), "write-weight length mismatch");
  const double g = 1.0 / (1.0 + std::exp(-alpha));
  return g * read_w_prev + (1.0 - g) * least_used_w_prev;
}

MatrixXd write_feature(const MatrixXd& features_prev, const VectorXd& least_used_w_prev,
                       const VectorXd& write_w, const VectorXd& add) {
  require(least_used_w_prev.size() == features_prev.rows() &&
              write_w.size() == features_prev.rows(),
          "write weights length does not match memory rows");
  require(add.size() == features_prev.cols(), "add vector width does not match memory width");
  MatrixXd cleared =
      features_prev.array().colwise() * (1.0 - least_used_w_prev.array());
  return cleared + write_w * add.transpose();
}

VectorXd label_write_weights(const std::optional<VectorXd>& feature_write_w_prev,
                             Eigen::Index rows) {
  if (!feature_write_w_prev.has_value()) return VectorXd::Zero(rows);
  require(feature_write_w_prev->size() == rows, "label write weights length mismatch");
  return *feature_write_w_prev;
}

MatrixXd write_label(const MatrixXd& labels_prev, const VectorXd& label_write_w,
                     const VectorXd& add) {
  require(label_write_w.size() == labels_prev.rows(),
          "label write weights length does not match label rows");
  require(add.size() == labels_prev.cols(), "label add width does not match label memory width");
  return labels_prev + label_write_w * add.transpose();
}

FlmnStepResult flmn_memory_step(const MemoryState& s, const InterfaceVectors& iface, double alpha,
                                const MemoryConfig& cfg) {
  FlmnStepResult out;
  // Label write first, so the read below can retrieve the label carried in at
  // this step (the one belonging to the previous input).
  VectorXd w_wl = label_write_weights(s.feature_write_w, s.labels.rows());
  out.state.labels = write_label(s.labels, w_wl, iface.add_label);

  // Read against the feature memory as it stood before this step's write.
  VectorXd sims = cosine_keys(iface.key, s.features);
  out.state.read_w = read_weights(sims);
  out.read = read_label(out.state.read_w, out.state.labels);

  VectorXd w_wf = feature_write_weights(s.read_w, s.least_used_w, alpha);
  out.state.features = write_feature(s.features, s.least_used_w, w_wf, iface.add_feature);
  out.state.feature_write_w = w_wf;

  out.state.usage_w = update_usage(s.usage_w, w_wf, out.state.read_w, cfg.gamma);
  out.state.least_used_w = least_used(out.state.usage_w);
  return out;
}

MannStepResult mann_memory_step(const MannState& s, const VectorXd& key, const VectorXd& add,
                                double alpha, const MemoryConfig& cfg) {
  MannStepResult out;
  VectorXd sims = cosine_keys(key, s.memory);
  out.state.read_w = read_weights(sims);
  out.read = read_label(out.state.read_w, s.memory);

  VectorXd w_w = feature_write_weights(s.read_w, s.least_used_w, alpha);
  out.state.memory = write_feature(s.memory, s.least_used_w, w_w, add);
  out.state.write_w = w_w;

  out.state.usage_w = update_usage(s.usage_w, w_w, out.state.read_w, cfg.gamma);
  out.state.least_used_w = least_used(out.state.usage_w);
  return out;
}

std::int64_t memory_scalar_count(Eigen::Index rows, Eigen::Index width,
                                 std::optional<Eigen::Index> label_width) {
  std::int64_t n = static_cast<std::int64_t>(rows) * width;
  if (label_width.has_value()) n += static_cast<std::int64_t>(rows) * *label_width;
  return n;
}

}  // namespace flmn::memnet
