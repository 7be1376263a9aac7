#include "plato/tensor/nn.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/QR>

#include "plato/common/binary_io.hpp"
#include "plato/common/error.hpp"

namespace plato::tensor {

using nlohmann::json;

// ---- ParamSet ----

template <typename S>
Parameter<S>& ParamSet<S>::add(const std::string& name, Mat<S> init) {
  if (contains(name)) throw UsageError("duplicate parameter '" + name + "'");
  Parameter<S> p;
  p.name = name;
  p.grad = Mat<S>::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  params_.push_back(std::move(p));
  return params_.back();
}

template <typename S>
Parameter<S>& ParamSet<S>::at(const std::string& name) {
  for (auto& p : params_) {
    if (p.name == name) return p;
  }
  throw UsageError("no parameter '" + name + "'");
}

template <typename S>
const Parameter<S>& ParamSet<S>::at(const std::string& name) const {
  return const_cast<ParamSet*>(this)->at(name);
}

template <typename S>
bool ParamSet<S>::contains(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return true;
  }
  return false;
}

template <typename S>
std::int64_t ParamSet<S>::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename S>
void ParamSet<S>::zero_grad() {
  for (auto& p : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

template <typename S>
void ParamSet<S>::throw_layout_mismatch(const std::string& name) {
  throw FormatError(FormatError::Kind::kDimMismatch, "parameter layout differs at '" + name + "'");
}

// ---- init ----

template <typename S>
Mat<S> fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(cols, 1)));
  Mat<S> m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<S>(rng.uniform(-a, a));
  }
  return m;
}

template <typename S>
Mat<S> orthogonal(Eigen::Index n, Rng& rng) {
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // Sign fix so the draw is uniform over the orthogonal group.
  const Eigen::VectorXd d = qr.matrixQR().diagonal();
  for (Eigen::Index j = 0; j < n; ++j) {
    if (d(j) < 0) q.col(j) = -q.col(j);
  }
  return q.cast<S>();
}

// ---- layers ----

template <typename S>
LinearLayer make_linear(ParamSet<S>& ps, const std::string& name, int in, int out, Rng& rng, double bias) {
  LinearLayer l{name + ".W", name + ".b", in, out};
  ps.add(l.W, fan_in_uniform<S>(out, in, rng));
  ps.add(l.b, Mat<S>::Constant(out, 1, static_cast<S>(bias)));
  return l;
}

template <typename S>
Var<S> apply(Tape<S>& t, ParamSet<S>& ps, const LinearLayer& l, const Var<S>& x) {
  return linear(t.param(ps.at(l.W)), x, t.param(ps.at(l.b)));
}

template <typename S>
MLP make_mlp(ParamSet<S>& ps, const std::string& name, int in, const std::vector<int>& hidden, int out, Rng& rng,
             Activation hidden_act) {
  MLP m;
  int prev = in;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    m.layers.push_back(make_linear(ps, name + "." + std::to_string(i), prev, hidden[i], rng));
    m.acts.push_back(hidden_act);
    prev = hidden[i];
  }
  m.layers.push_back(make_linear(ps, name + ".out", prev, out, rng));
  m.acts.push_back(Activation::kNone);
  return m;
}

template <typename S>
Var<S> apply(Tape<S>& t, ParamSet<S>& ps, const MLP& m, const Var<S>& x) {
  Var<S> h = x;
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    h = apply(t, ps, m.layers[i], h);
    switch (m.acts[i]) {
      case Activation::kRelu: h = relu(h); break;
      case Activation::kTanh: h = tanh(h); break;
      case Activation::kNone: break;
    }
  }
  return h;
}

template <typename S>
GRULayer make_gru(ParamSet<S>& ps, const std::string& name, int in, int hidden, Rng& rng) {
  GRULayer g{name + ".Wx", name + ".U", name + ".b", in, hidden};
  ps.add(g.Wx, fan_in_uniform<S>(3 * hidden, in, rng));
  Mat<S> U(3 * hidden, hidden);
  for (int k = 0; k < 3; ++k) U.middleRows(k * hidden, hidden) = orthogonal<S>(hidden, rng);
  ps.add(g.U, std::move(U));
  ps.add(g.b, Mat<S>::Zero(3 * hidden, 1));
  return g;
}

template <typename S>
GRUWeights<S> bind(Tape<S>& t, ParamSet<S>& ps, const GRULayer& g) {
  return {t.param(ps.at(g.Wx)), t.param(ps.at(g.U)), t.param(ps.at(g.b))};
}

// ---- Adam ----

template <typename S>
Adam<S>::Adam(ParamSet<S>& params, AdamConfig cfg) : params_(params), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.push_back(Mat<S>::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Mat<S>::Zero(p.value.rows(), p.value.cols()));
  }
}

template <typename S>
void Adam<S>::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
  const S step = static_cast<S>(cfg_.lr / bc1);
  const S inv_sqrt_bc2 = static_cast<S>(1.0 / std::sqrt(bc2));
  const S eps = static_cast<S>(cfg_.eps);
  std::size_t i = 0;
  for (auto& p : params_) {
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
      throw InputError("adam: gradient shape mismatch for '" + p.name + "'");
    }
    auto m = m_[i].array();
    auto v = v_[i].array();
    const auto g = p.grad.array();
    m = b1 * m + (S(1) - b1) * g;
    v = b2 * v + (S(1) - b2) * g.square();
    p.value.array() -= step * m / (v.sqrt() * inv_sqrt_bc2 + eps);
    ++i;
  }
}

// ---- checkpoint ----

template <typename S>
void save_checkpoint(const std::string& path, const json& header, const ParamSet<S>& params) {
  json h = header;
  json list = json::array();
  for (const auto& p : params) list.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}});
  h["params"] = list;
  ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, sizeof kCheckpointMagic));
  w.str(h.dump());
  for (const auto& p : params) {
    const Mat<float> f = p.value.template cast<float>();
    for (Eigen::Index k = 0; k < f.size(); ++k) w.f32(f.data()[k]);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(FormatError::Kind::kIo, "cannot write checkpoint " + path);
  out.write(reinterpret_cast<const char*>(w.data().data()), static_cast<std::streamsize>(w.data().size()));
  if (!out) throw FormatError(FormatError::Kind::kIo, "write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::kIo, "cannot open checkpoint " + path);
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ByteReader r(bytes);
  if (bytes.size() < sizeof kCheckpointMagic ||
      r.bytes(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic)) {
    throw FormatError(FormatError::Kind::kMagic, path + " is not a PLATOCKPT1 checkpoint");
  }
  Checkpoint ck;
  try {
    ck.header = json::parse(r.str());
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::kMalformed, "checkpoint header: " + std::string(e.what()));
  }
  if (!ck.header.contains("params") || !ck.header["params"].is_array()) {
    throw FormatError(FormatError::Kind::kMalformed, "checkpoint header has no params table");
  }
  for (const auto& p : ck.header["params"]) {
    const auto rows = p["shape"][0].get<Eigen::Index>();
    const auto cols = p["shape"][1].get<Eigen::Index>();
    Mat<float> m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = r.f32();
    ck.params.add(p["name"].get<std::string>(), std::move(m));
  }
  if (r.remaining() != 0) throw FormatError(FormatError::Kind::kMalformed, "trailing bytes in checkpoint");
  return ck;
}

// ---- gradcheck ----

GradcheckResult gradcheck(ParamSet<double>& params, const std::function<Var<double>(Tape<double>&)>& loss,
                          double h) {
  params.zero_grad();
  {
    Tape<double> t;
    t.backward(loss(t));
  }
  auto eval = [&]() {
    Tape<double> t;
    return loss(t).item();
  };
  GradcheckResult res;
  for (auto& p : params) {
    Mat<double> numeric(p.value.rows(), p.value.cols());
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      double& x = p.value.data()[k];
      const double x0 = x;
      x = x0 + h;
      const double fp = eval();
      x = x0 - h;
      const double fm = eval();
      x = x0;
      numeric.data()[k] = (fp - fm) / (2 * h);
      res.evaluations += 2;
    }
    const double scale = std::max(p.grad.norm(), numeric.norm());
    const double rel = scale > 0 ? (p.grad - numeric).norm() / scale : 0.0;
    if (rel >= res.max_rel_error) {
      res.max_rel_error = rel;
      res.worst_param = p.name;
    }
  }
  return res;
}

// ---- instantiations ----

#define PLATO_NN_INSTANTIATE(S)                                                                              \
  template class ParamSet<S>;                                                                                \
  template Mat<S> fan_in_uniform<S>(Eigen::Index, Eigen::Index, Rng&);                                       \
  template Mat<S> orthogonal<S>(Eigen::Index, Rng&);                                                         \
  template LinearLayer make_linear(ParamSet<S>&, const std::string&, int, int, Rng&, double);                \
  template Var<S> apply(Tape<S>&, ParamSet<S>&, const LinearLayer&, const Var<S>&);                          \
  template MLP make_mlp(ParamSet<S>&, const std::string&, int, const std::vector<int>&, int, Rng&, Activation); \
  template Var<S> apply(Tape<S>&, ParamSet<S>&, const MLP&, const Var<S>&);                                  \
  template GRULayer make_gru(ParamSet<S>&, const std::string&, int, int, Rng&);                              \
  template GRUWeights<S> bind(Tape<S>&, ParamSet<S>&, const GRULayer&);                                      \
  template class Adam<S>;                                                                                    \
  template void save_checkpoint(const std::string&, const json&, const ParamSet<S>&);

PLATO_NN_INSTANTIATE(float)
PLATO_NN_INSTANTIATE(double)

#undef PLATO_NN_INSTANTIATE

}  // namespace plato::tensor
