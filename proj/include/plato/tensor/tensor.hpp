#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace plato::tensor {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

/// Trainable matrix with its gradient accumulator.
template <typename S>
struct Parameter {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
};

template <typename S>
class Tape;

/// Handle to a node on a tape. Batched values are (features x batch), column per item.
template <typename S>
class Var {
 public:
  Var() = default;
  Var(Tape<S>* tape, int id) : tape_(tape), id_(id) {}

  const Mat<S>& value() const;
  /// Gradient, allocated on first touch.
  Mat<S>& grad() const;
  bool needs_grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  S item() const;

  Tape<S>* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape<S>* tape_ = nullptr;
  int id_ = -1;
};

/// Reverse-mode tape. Nodes are appended in topological order; backward walks them in reverse.
template <typename S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<S> constant(Mat<S> value);
  /// Leaf whose gradient is kept on the tape (use for input sensitivities).
  Var<S> input(Mat<S> value);
  /// Leaf bound to a parameter: reads its value in place and accumulates into p.grad.
  Var<S> param(Parameter<S>& p);

  /// Seeds d(loss)=1 on a 1x1 node and propagates to every leaf.
  void backward(const Var<S>& loss);

  std::size_t size() const { return nodes_.size(); }

  // ---- for op implementations ----
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    const Mat<S>* ext_value = nullptr;
    Mat<S>* ext_grad = nullptr;
    bool needs_grad = false;
    /// Called with the node's own id once its gradient is complete.
    std::function<void(int)> backward;
  };

  Var<S> push(Mat<S> value, bool needs_grad, std::function<void(int)> backward = {});
  const Mat<S>& value(int id) const;
  Mat<S>& grad(int id);
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  bool has_grad(int id) const;

 private:
  std::deque<Node> nodes_;
};

// ---- primitives ----
// All throw InputError naming both shapes on mismatch.

template <typename S> Var<S> matmul(const Var<S>& a, const Var<S>& b);
/// W x + b with b (rows x 1) broadcast over columns.
template <typename S> Var<S> linear(const Var<S>& W, const Var<S>& x, const Var<S>& b);
template <typename S> Var<S> add_bias(const Var<S>& x, const Var<S>& b);
template <typename S> Var<S> add(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> sub(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> mul(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> scale(const Var<S>& a, S s);
template <typename S> Var<S> add_scalar(const Var<S>& a, S s);
template <typename S> Var<S> concat_rows(const std::vector<Var<S>>& parts);
template <typename S> Var<S> concat_cols(const std::vector<Var<S>>& parts);
template <typename S> Var<S> slice_rows(const Var<S>& a, Eigen::Index begin, Eigen::Index count);
template <typename S> Var<S> slice_cols(const Var<S>& a, Eigen::Index begin, Eigen::Index count);
/// Repeats the whole matrix side by side `times` times.
template <typename S> Var<S> tile_cols(const Var<S>& a, Eigen::Index times);
template <typename S> Var<S> tanh(const Var<S>& a);
template <typename S> Var<S> sigmoid(const Var<S>& a);
template <typename S> Var<S> relu(const Var<S>& a);
template <typename S> Var<S> exp(const Var<S>& a);
/// Reductions to 1x1.
template <typename S> Var<S> sum(const Var<S>& a);
template <typename S> Var<S> mean(const Var<S>& a);
template <typename S> Var<S> abs_mean(const Var<S>& a);
/// Mean of |a| over entries where mask is nonzero; mask is a constant of the same shape.
template <typename S> Var<S> masked_abs_mean(const Var<S>& a, const Mat<S>& mask);

// ---- recurrent ----

/// Stacked GRU weights, gate blocks ordered [reset; update; candidate].
template <typename S>
struct GRUWeights {
  Var<S> Wx;  ///< 3H x in
  Var<S> U;   ///< 3H x H
  Var<S> b;   ///< 3H x 1
};

/// Runs a GRU over T steps of `x` (in x T*B, step t in columns [t*B, (t+1)*B)).
/// Returns every hidden state at its input's time position. With `reverse` the
/// sequence is consumed from T-1 down to 0, so the final state sits in block 0.
///   r = sig(W_r x + U_r h + b_r), u = sig(W_u x + U_u h + b_u)
///   c = tanh(W_h x + U_h (r*h) + b_h),   h' = (1-u)*h + u*c
template <typename S>
Var<S> gru_sequence(const GRUWeights<S>& w, const Var<S>& x, const Var<S>& h0, Eigen::Index steps,
                    bool reverse = false);

template <typename S>
Var<S> gru_cell(const GRUWeights<S>& w, const Var<S>& x, const Var<S>& h);

/// concat(final forward state, final backward state): (2H x B).
template <typename S>
Var<S> bigru_encode(const GRUWeights<S>& fwd, const GRUWeights<S>& bwd, const Var<S>& x, Eigen::Index steps);

// ---- distributions ----

template <typename S>
struct DiagGaussian {
  Var<S> mu;         ///< dim x B
  Var<S> log_sigma;  ///< dim x B
};

/// KL(p || q) summed over dims, averaged over the batch columns.
template <typename S>
Var<S> kl_diag(const DiagGaussian<S>& p, const DiagGaussian<S>& q);

/// Closed form for one pair of diagonal Gaussians (no tape).
double kl_diag_value(const Eigen::VectorXd& mu_p, const Eigen::VectorXd& ls_p, const Eigen::VectorXd& mu_q,
                     const Eigen::VectorXd& ls_q);

/// mu + exp(log_sigma) * noise, with noise held constant.
template <typename S>
Var<S> reparam_sample(const DiagGaussian<S>& d, const Mat<S>& noise);

}  // namespace plato::tensor
