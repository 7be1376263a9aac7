#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "plato/common/rng.hpp"
#include "plato/playlog/playlog.hpp"
#include "plato/segment/segment.hpp"
#include "plato/sim/world.hpp"
#include "plato/tensor/nn.hpp"

namespace plato::models {

enum class Variant { kPLATO = 0, kPLATO_PRE, kPLATO_R, kLMP, kGCBC };

std::string_view to_string(Variant v);
/// Accepts PLATO, PLATO_PRE, PLATO_R, LMP, GCBC (case-insensitive, '-' or '_').
Variant variant_from_string(std::string_view name);

inline bool is_plato(Variant v) { return v == Variant::kPLATO || v == Variant::kPLATO_PRE || v == Variant::kPLATO_R; }
inline bool has_latent(Variant v) { return v != Variant::kGCBC; }

struct ModelConfig {
  double beta = 1e-3;
  double alpha = 1.0;
  int H_int = 20;  ///< 2 s at 10 Hz
  int H_pre = 20;
  int S = 10;      ///< soft boundary, H/2
  int latent_dim = 16;
  int policy_hidden = 64;
  int posterior_hidden = 128;
  int prior_width = 128;
  int prior_layers = 2;
  int resample_interval = 20;  ///< T, test-time steps between prior samples
  double lr = 3e-4;
  int batch_size = 64;
  int steps = 50000;
  bool float64 = false;  ///< training arithmetic; checkpoints are always float32
  bool prior_mean = false;  ///< use the prior mean instead of a sample at test time

  /// Block2D hyperparameter-table widths per variant (Play-GCBC uses a 128-wide policy).
  static ModelConfig defaults_for(Variant v);
  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Per-dimension state statistics used to whiten network inputs.
struct Normalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  static Normalizer fit(const playlog::PlayLog& log);
  static Normalizer identity(int dim);
};

void to_json(nlohmann::json& j, const Normalizer& n);
void from_json(const nlohmann::json& j, Normalizer& n);

/// Windows resolved into arrays. Columns are time-major: step t of item b is column t*B + b.
/// Actions are policy targets: (target - ego position, grab), so the MAE against them
/// equals the MAE against the raw recorded actions.
struct TrainBatch {
  int B = 0;
  int H_int = 0;
  int H_pre = 0;
  Eigen::MatrixXd int_states;   ///< state_dim x H_int*B (the LMP/GCBC window too)
  Eigen::MatrixXd int_actions;  ///< 3 x H_int*B
  Eigen::MatrixXd pre_states;   ///< state_dim x H_pre*B (PLATO only)
  Eigen::MatrixXd pre_actions;
  Eigen::MatrixXd pre_mask;     ///< 3 x H_pre*B, zero on padded steps
  Eigen::MatrixXd goal;         ///< object_dim x B
  std::vector<segment::WindowSample> samples;  ///< PLATO only
  std::vector<std::pair<int, int>> windows;    ///< (episode, start) for LMP/GCBC
};

/// Action target in policy space for a recorded step.
Eigen::Vector3d policy_target(const playlog::Episode& ep, int t);

TrainBatch plato_batch(const playlog::PlayLog& log, const segment::DatasetSegmentation& seg, Rng& rng,
                       const ModelConfig& cfg);

/// Uniform over all length-H_int windows in the log; the goal is the window's last object state.
TrainBatch window_batch(const playlog::PlayLog& log, Rng& rng, const ModelConfig& cfg);

struct LossParts {
  double total = 0;
  double L_int = 0;
  double L_pre = 0;
  double KL = 0;
};

/// Posterior, prior and policy for one variant.
template <typename S>
class Model {
 public:
  Model(Variant variant, const ModelConfig& cfg, const playlog::Dims& dims, const Normalizer& norm,
        std::uint64_t init_seed);

  Variant variant() const { return variant_; }
  const ModelConfig& config() const { return cfg_; }
  const playlog::Dims& dims() const { return dims_; }
  const Normalizer& normalizer() const { return norm_; }
  int state_dim() const { return dims_.robot + dims_.object; }
  int prior_input_dim() const;
  int posterior_input_dim() const { return state_dim(); }

  tensor::ParamSet<S> params;

  /// Training loss on the tape. `noise` (latent_dim x B) drives the reparameterized
  /// posterior sample. Throws UsageError if the batch does not match the variant.
  tensor::Var<S> loss(tensor::Tape<S>& t, const TrainBatch& batch, const Eigen::MatrixXd& noise,
                      LossParts* parts = nullptr);

  // Pieces exposed for tests and the actor.
  tensor::DiagGaussian<S> posterior(tensor::Tape<S>& t, const tensor::Var<S>& states, int steps);
  tensor::DiagGaussian<S> prior(tensor::Tape<S>& t, const tensor::Var<S>& input);
  /// Prior input for current observation `state` (raw, state_dim x B) and goal (object_dim x B).
  Eigen::MatrixXd prior_input(const Eigen::MatrixXd& state, const Eigen::MatrixXd& goal) const;
  struct PolicyVars {
    tensor::Var<S> out;     ///< 3 x steps*B
    tensor::Var<S> hidden;  ///< H x steps*B
  };
  /// Policy over raw states with the goal and latent z repeated at every step.
  PolicyVars policy(tensor::Tape<S>& t, const Eigen::MatrixXd& states, const Eigen::MatrixXd& goal,
                        const std::optional<tensor::Var<S>>& z, int steps, const tensor::Var<S>& h0);

  Eigen::MatrixXd normalize_states(const Eigen::MatrixXd& s) const;
  Eigen::MatrixXd normalize_objects(const Eigen::MatrixXd& o) const;

  nlohmann::json header() const;

  tensor::GRULayer policy_gru;
  tensor::LinearLayer policy_head;

 private:
  Variant variant_;
  ModelConfig cfg_;
  playlog::Dims dims_;
  Normalizer norm_;
  tensor::GRULayer post_fwd_, post_bwd_;
  tensor::LinearLayer post_mu_, post_ls_;
  tensor::MLP prior_;
};

extern template class Model<float>;
extern template class Model<double>;

using Bundle = Model<float>;

void save_bundle(const Bundle& m, const std::string& path, const nlohmann::json& extra = {});
/// Throws FormatError on a malformed or mismatched checkpoint.
Bundle load_bundle(const std::string& path, nlohmann::json* header = nullptr);

// ---- training ----

struct TrainOptions {
  std::uint64_t seed = 0;
  segment::SmoothingConfig smoothing;
  /// Receives "step,total,L_int,L_pre,KL" rows; header lines start with '#'.
  std::ostream* metrics = nullptr;
  std::function<void(int step, const LossParts&)> progress;
  /// Train on this fixed batch instead of sampling (capacity checks).
  const TrainBatch* fixed_batch = nullptr;
};

struct TrainResult {
  Bundle model;
  std::vector<LossParts> trace;
};

/// Adam over cfg.steps batches. Throws DataError when a PLATO variant finds no
/// usable interaction and NumericError (naming step and component) on a non-finite loss.
TrainResult train(const playlog::PlayLog& log, const ModelConfig& cfg, Variant variant, const TrainOptions& opt);

// ---- acting ----

/// Closed-loop controller for one episode against a fixed goal.
class Actor {
 public:
  /// `noise_seed` drives prior sampling; the same seed gives the same rollout.
  Actor(Bundle& model, const Eigen::VectorXd& goal_object, std::uint64_t noise_seed);

  sim::Action act(const Eigen::VectorXd& state);

  int prior_samples() const { return prior_samples_; }
  /// Latent in use (empty for GCBC).
  const Eigen::VectorXd& z() const { return z_; }

 private:
  Bundle& model_;
  Eigen::MatrixXd goal_;
  Rng noise_;
  Eigen::VectorXd z_;
  tensor::Mat<float> h_;
  int t_ = 0;
  int prior_samples_ = 0;
};

}  // namespace plato::models
