#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plato/common/rng.hpp"
#include "plato/tensor/tensor.hpp"

namespace plato::tensor {

/// Named parameters with stable addresses, kept in insertion order.
template <typename S>
class ParamSet {
 public:
  /// Throws UsageError on a duplicate name.
  Parameter<S>& add(const std::string& name, Mat<S> init);
  Parameter<S>& at(const std::string& name);
  const Parameter<S>& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  std::int64_t scalar_count() const;
  void zero_grad();

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Same names and shapes, values converted to T.
  template <typename T>
  ParamSet<T> cast() const {
    ParamSet<T> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<T>());
    return out;
  }

  /// Copies values from a set with identical names and shapes.
  template <typename T>
  void assign(const ParamSet<T>& other) {
    auto it = other.begin();
    for (auto& p : params_) {
      if (it == other.end() || it->name != p.name || it->value.rows() != p.value.rows() ||
          it->value.cols() != p.value.cols()) {
        throw_layout_mismatch(p.name);
      }
      p.value = it->value.template cast<S>();
      ++it;
    }
  }

 private:
  [[noreturn]] static void throw_layout_mismatch(const std::string& name);
  std::deque<Parameter<S>> params_;
};

// ---- initialization ----

/// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename S>
Mat<S> fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng);

/// Square orthogonal matrix from the QR of a Gaussian draw.
template <typename S>
Mat<S> orthogonal(Eigen::Index n, Rng& rng);

// ---- layers ----

enum class Activation { kNone, kRelu, kTanh };

struct LinearLayer {
  std::string W, b;
  int in = 0, out = 0;
};

template <typename S>
LinearLayer make_linear(ParamSet<S>& ps, const std::string& name, int in, int out, Rng& rng, double bias = 0.0);

template <typename S>
Var<S> apply(Tape<S>& t, ParamSet<S>& ps, const LinearLayer& l, const Var<S>& x);

struct MLP {
  std::vector<LinearLayer> layers;
  std::vector<Activation> acts;
};

/// Hidden layers use `hidden_act`; the last layer is linear.
template <typename S>
MLP make_mlp(ParamSet<S>& ps, const std::string& name, int in, const std::vector<int>& hidden, int out, Rng& rng,
             Activation hidden_act = Activation::kRelu);

template <typename S>
Var<S> apply(Tape<S>& t, ParamSet<S>& ps, const MLP& m, const Var<S>& x);

struct GRULayer {
  std::string Wx, U, b;
  int in = 0, hidden = 0;
};

/// Orthogonal recurrent blocks, fan-in uniform input weights, zero biases.
template <typename S>
GRULayer make_gru(ParamSet<S>& ps, const std::string& name, int in, int hidden, Rng& rng);

template <typename S>
GRUWeights<S> bind(Tape<S>& t, ParamSet<S>& ps, const GRULayer& g);

// ---- optimizer ----

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename S>
class Adam {
 public:
  Adam(ParamSet<S>& params, AdamConfig cfg = {});

  /// Bias-corrected update from the accumulated grads.
  void step();
  std::int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  ParamSet<S>& params_;
  AdamConfig cfg_;
  std::vector<Mat<S>> m_, v_;
  std::int64_t t_ = 0;
};

// ---- checkpoint ----

inline constexpr char kCheckpointMagic[10] = {'P', 'L', 'A', 'T', 'O', 'C', 'K', 'P', 'T', '1'};

/// Magic, u32 header length, JSON header (caller fields plus "params": [{name, shape}]),
/// then every parameter as column-major little-endian float32.
template <typename S>
void save_checkpoint(const std::string& path, const nlohmann::json& header, const ParamSet<S>& params);

struct Checkpoint {
  nlohmann::json header;
  ParamSet<float> params;
};

Checkpoint load_checkpoint(const std::string& path);

// ---- gradient check ----

struct GradcheckResult {
  double max_rel_error = 0.0;  ///< over parameters, ||analytic - numeric|| / max(||analytic||, ||numeric||)
  std::string worst_param;
  std::int64_t evaluations = 0;
};

/// Central differences of `loss` w.r.t. every parameter entry against one backward pass.
/// `loss` must build the same graph on each call (fixed noise).
GradcheckResult gradcheck(ParamSet<double>& params, const std::function<Var<double>(Tape<double>&)>& loss,
                          double h = 1e-5);

}  // namespace plato::tensor
