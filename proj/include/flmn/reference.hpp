#pragma once

#include <Eigen/Dense>

namespace flmn::reference {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Straight-line re-derivations of the memory update rules and the LSTM cell,
// written with explicit loops and kept free of any library implementation
// code. Self-checks compare full traces against these.

struct DenseFlmn {
  int rows = 0, width = 0, label_width = 0;
  double gamma = 0.95;
  double eps = 1e-8;

  MatrixXd mem_f, mem_l;
  VectorXd w_r, w_u, w_lu, w_wf_prev;

  // Last-step intermediates, for fine-grained comparison.
  VectorXd sims, w_wl, w_wf, read;

  DenseFlmn(int rows, int width, int label_width, double gamma, double init_value);
  VectorXd step(const VectorXd& key, const VectorXd& add_f, const VectorXd& add_l, double alpha);
};

struct DenseMann {
  int rows = 0, width = 0;
  double gamma = 0.95;
  double eps = 1e-8;

  MatrixXd mem;
  VectorXd w_r, w_u, w_lu, w_w_prev;

  VectorXd sims, w_w, read;

  DenseMann(int rows, int width, double gamma, double init_value);
  VectorXd step(const VectorXd& key, const VectorXd& add, double alpha);
};

struct DenseLstmParams {
  MatrixXd Wi, Wf, Wo, Wg;
  VectorXd bi, bf, bo, bg;
};

struct DenseLstmState {
  VectorXd h, c;
};

// One cell update on the concatenation [x, h_prev].
DenseLstmState dense_lstm_step(const DenseLstmParams& p, const DenseLstmState& s,
                               const VectorXd& x);

}  // namespace flmn::reference
