#pragma once

#include <Eigen/Dense>
#include <optional>

#include "flmn/errors.hpp"
#include "flmn/graph.hpp"

namespace flmn::memnet {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct MemoryConfig {
  Eigen::Index rows = 0;      // rows of each constructed memory matrix
  Eigen::Index width = 0;     // feature width M
  double gamma = 0.95;        // usage decay, in (0,1)
  double init_value = 1e-6;   // initial fill; keeps row norms defined at the first read

  void validate() const;
};

// Controller-produced vectors driving one memory step.
struct InterfaceVectors {
  VectorXd key;          // width
  VectorXd add_feature;  // width
  VectorXd add_label;    // label width
};

// Split-memory state. feature_write_w carries the previous step's feature
// write weights; it starts at zero, which encodes the no-label-write base case.
struct MemoryState {
  MatrixXd features;        // rows x width
  MatrixXd labels;          // rows x label width
  VectorXd read_w;          // simplex
  VectorXd usage_w;
  VectorXd least_used_w;    // one-hot
  VectorXd feature_write_w; // zero before the first step
};

// Single-matrix LRUA state for the baseline.
struct MannState {
  MatrixXd memory;          // rows x width
  VectorXd read_w;
  VectorXd usage_w;
  VectorXd least_used_w;
  VectorXd write_w;         // zero before the first step (kept for symmetry/inspection)
};

MemoryState init_memory(const MemoryConfig& cfg, Eigen::Index label_width);
MannState init_mann_memory(const MemoryConfig& cfg);

// Guarded cosine similarity of the key against each matrix row.
VectorXd cosine_keys(const VectorXd& key, const MatrixXd& features,
                     double eps = diffmath::kCosineEps);

// Softmax over row similarities.
VectorXd read_weights(const VectorXd& similarities);

// Convex combination of label rows.
VectorXd read_label(const VectorXd& read_w, const MatrixXd& labels);

// Decayed usage plus this step's write and read weights.
VectorXd update_usage(const VectorXd& usage_prev, const VectorXd& write_w,
                      const VectorXd& read_w, double gamma);

// One-hot at the minimum usage; ties break to the lowest index.
VectorXd least_used(const VectorXd& usage);

// sigmoid(alpha) * read_prev + (1 - sigmoid(alpha)) * least_used_prev.
VectorXd feature_write_weights(const VectorXd& read_w_prev, const VectorXd& least_used_w_prev,
                               double alpha);

// Clears the previously least-used row, then adds write_w(i) * add for every row.
MatrixXd write_feature(const MatrixXd& features_prev, const VectorXd& least_used_w_prev,
                       const VectorXd& write_w, const VectorXd& add);

// Recursive rule: this step's label write weights are the previous step's
// feature write weights; with no predecessor the result is all zeros.
VectorXd label_write_weights(const std::optional<VectorXd>& feature_write_w_prev,
                             Eigen::Index rows);

// Pure additive write, no clearing.
MatrixXd write_label(const MatrixXd& labels_prev, const VectorXd& label_write_w,
                     const VectorXd& add);

struct FlmnStepResult {
  MemoryState state;
  VectorXd read;  // label-width read memory r_t
};

// One full split-memory step: label write, read (against the feature memory as
// it stood before this step's feature write), then feature write and usage
// update. alpha is the learnable write gate.
FlmnStepResult flmn_memory_step(const MemoryState& s, const InterfaceVectors& iface, double alpha,
                                const MemoryConfig& cfg);

struct MannStepResult {
  MannState state;
  VectorXd read;  // width M
};

// LRUA step on a single matrix: read first, then clear-and-write, then usage.
MannStepResult mann_memory_step(const MannState& s, const VectorXd& key, const VectorXd& add,
                                double alpha, const MemoryConfig& cfg);

// Total stored scalars across a model's memory matrices, for balancing
// configurations against each other.
std::int64_t memory_scalar_count(Eigen::Index rows, Eigen::Index width,
                                 std::optional<Eigen::Index> label_width);

}  // namespace flmn::memnet
