#include "plato/tensor/tensor.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <sstream>

#include "plato/common/error.hpp"

namespace plato::tensor {

namespace {

template <typename S>
std::string shape(const Var<S>& v) {
  std::ostringstream os;
  os << "(" << v.rows() << "x" << v.cols() << ")";
  return os.str();
}

template <typename S>
[[noreturn]] void mismatch(const char* op, const Var<S>& a, const Var<S>& b) {
  throw InputError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
}

template <typename S>
Tape<S>* tape_of(const Var<S>& a) {
  if (!a.valid()) throw UsageError("tensor op on an unbound Var");
  return a.tape();
}

template <typename S>
void same_tape(const Var<S>& a, const Var<S>& b) {
  if (!a.valid() || !b.valid()) throw UsageError("tensor op on an unbound Var");
  if (a.tape() != b.tape()) throw UsageError("tensor op mixes two tapes");
}

template <typename S>
void same_shape(const char* op, const Var<S>& a, const Var<S>& b) {
  same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) mismatch(op, a, b);
}

template <typename S>
Mat<S> sigmoid_of(const Mat<S>& x) {
  // Through tanh so large |x| never overflows exp.
  return (S(0.5) * (S(0.5) * x.array()).tanh() + S(0.5)).matrix();
}

}  // namespace

// ---- Var / Tape ----

template <typename S>
const Mat<S>& Var<S>::value() const {
  return tape_->value(id_);
}

template <typename S>
Mat<S>& Var<S>::grad() const {
  return tape_->grad(id_);
}

template <typename S>
bool Var<S>::needs_grad() const {
  return tape_->needs_grad(id_);
}

template <typename S>
S Var<S>::item() const {
  const auto& v = value();
  if (v.size() != 1) throw UsageError("item() on a non-scalar " + shape(*this));
  return v(0, 0);
}

template <typename S>
Var<S> Tape<S>::push(Mat<S> value, bool needs_grad, std::function<void(int)> backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<S>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename S>
Var<S> Tape<S>::constant(Mat<S> value) {
  return push(std::move(value), false);
}

template <typename S>
Var<S> Tape<S>::input(Mat<S> value) {
  return push(std::move(value), true);
}

template <typename S>
Var<S> Tape<S>::param(Parameter<S>& p) {
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) {
    p.grad = Mat<S>::Zero(p.value.rows(), p.value.cols());
  }
  Node n;
  n.ext_value = &p.value;
  n.ext_grad = &p.grad;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var<S>(this, static_cast<int>(nodes_.size()) - 1);
}

template <typename S>
const Mat<S>& Tape<S>::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.ext_value ? *n.ext_value : n.value;
}

template <typename S>
Mat<S>& Tape<S>::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.ext_grad) return *n.ext_grad;
  const Mat<S>& v = n.value;
  if (n.grad.rows() != v.rows() || n.grad.cols() != v.cols()) n.grad = Mat<S>::Zero(v.rows(), v.cols());
  return n.grad;
}

template <typename S>
bool Tape<S>::has_grad(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.ext_grad || n.grad.size() != 0;
}

template <typename S>
void Tape<S>::backward(const Var<S>& loss) {
  if (loss.tape() != this) throw UsageError("backward: loss is on another tape");
  if (loss.value().size() != 1) throw UsageError("backward: loss must be 1x1, got " + shape(loss));
  if (!needs_grad(loss.id())) return;
  grad(loss.id()).array() += S(1);
  for (int i = loss.id(); i >= 0; --i) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.backward && has_grad(i)) n.backward(i);
  }
}

// ---- linear algebra ----

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  same_tape(a, b);
  if (a.cols() != b.rows()) mismatch("matmul", a, b);
  Tape<S>* t = tape_of(a);
  const int ia = a.id(), ib = b.id();
  Mat<S> out;
  out.noalias() = a.value() * b.value();
  return t->push(std::move(out), a.needs_grad() || b.needs_grad(), [t, ia, ib](int self) {
    const Mat<S>& g = t->grad(self);
    if (t->needs_grad(ia)) t->grad(ia).noalias() += g * t->value(ib).transpose();
    if (t->needs_grad(ib)) t->grad(ib).noalias() += t->value(ia).transpose() * g;
  });
}

template <typename S>
Var<S> linear(const Var<S>& W, const Var<S>& x, const Var<S>& b) {
  same_tape(W, x);
  same_tape(W, b);
  if (W.cols() != x.rows()) mismatch("linear", W, x);
  if (b.rows() != W.rows() || b.cols() != 1) mismatch("linear bias", W, b);
  Tape<S>* t = tape_of(W);
  const int iw = W.id(), ix = x.id(), ib = b.id();
  Mat<S> out;
  out.noalias() = W.value() * x.value();
  out.colwise() += b.value().col(0);
  const bool ng = W.needs_grad() || x.needs_grad() || b.needs_grad();
  return t->push(std::move(out), ng, [t, iw, ix, ib](int self) {
    const Mat<S>& g = t->grad(self);
    if (t->needs_grad(iw)) t->grad(iw).noalias() += g * t->value(ix).transpose();
    if (t->needs_grad(ix)) t->grad(ix).noalias() += t->value(iw).transpose() * g;
    if (t->needs_grad(ib)) t->grad(ib).col(0) += g.rowwise().sum();
  });
}

template <typename S>
Var<S> add_bias(const Var<S>& x, const Var<S>& b) {
  same_tape(x, b);
  if (b.rows() != x.rows() || b.cols() != 1) mismatch("add_bias", x, b);
  Tape<S>* t = tape_of(x);
  const int ix = x.id(), ib = b.id();
  Mat<S> out = x.value();
  out.colwise() += b.value().col(0);
  return t->push(std::move(out), x.needs_grad() || b.needs_grad(), [t, ix, ib](int self) {
    const Mat<S>& g = t->grad(self);
    if (t->needs_grad(ix)) t->grad(ix) += g;
    if (t->needs_grad(ib)) t->grad(ib).col(0) += g.rowwise().sum();
  });
}

// ---- elementwise ----

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  same_shape("add", a, b);
  Tape<S>* t = tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t->push(a.value() + b.value(), a.needs_grad() || b.needs_grad(), [t, ia, ib](int self) {
    const Mat<S>& g = t->grad(self);
    if (t->needs_grad(ia)) t->grad(ia) += g;
    if (t->needs_grad(ib)) t->grad(ib) += g;
  });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
  same_shape("sub", a, b);
  Tape<S>* t = tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t->push(a.value() - b.value(), a.needs_grad() || b.needs_grad(), [t, ia, ib](int self) {
    const Mat<S>& g = t->grad(self);
    if (t->needs_grad(ia)) t->grad(ia) += g;
    if (t->needs_grad(ib)) t->grad(ib) -= g;
  });
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
  same_shape("mul", a, b);
  Tape<S>* t = tape_of(a);
  const int ia = a.id(), ib = b.id();
  return t->push(a.value().cwiseProduct(b.value()), a.needs_grad() || b.needs_grad(), [t, ia, ib](int self) {
    const Mat<S>& g = t->grad(self);
    if (t->needs_grad(ia)) t->grad(ia) += g.cwiseProduct(t->value(ib));
    if (t->needs_grad(ib)) t->grad(ib) += g.cwiseProduct(t->value(ia));
  });
}

template <typename S>
Var<S> scale(const Var<S>& a, S s) {
  Tape<S>* t = tape_of(a);
  const int ia = a.id();
  return t->push(s * a.value(), a.needs_grad(), [t, ia, s](int self) { t->grad(ia) += s * t->grad(self); });
}

template <typename S>
Var<S> add_scalar(const Var<S>& a, S s) {
  Tape<S>* t = tape_of(a);
  const int ia = a.id();
  Mat<S> out = a.value().array() + s;
  return t->push(std::move(out), a.needs_grad(), [t, ia](int self) { t->grad(ia) += t->grad(self); });
}

template <typename S>
Var<S> tanh(const Var<S>& a) {
  Tape<S>* t = tape_of(a);
  const int ia = a.id();
  Mat<S> out = a.value().array().tanh();
  return t->push(std::move(out), a.needs_grad(), [t, ia](int self) {
    const Mat<S>& y = t->value(self);
    t->grad(ia).array() += t->grad(self).array() * (S(1) - y.array().square());
  });
}

template <typename S>
Var<S> sigmoid(const Var<S>& a) {
  Tape<S>* t = tape_of(a);
  const int ia = a.id();
  return t->push(sigmoid_of<S>(a.value()), a.needs_grad(), [t, ia](int self) {
    const Mat<S>& y = t->value(self);
    t->grad(ia).array() += t->grad(self).array() * y.array() * (S(1) - y.array());
  });
}

template <typename S>
Var<S> relu(const Var<S>& a) {
  Tape<S>* t = tape_of(a);
  const int ia = a.id();
  Mat<S> out = a.value().cwiseMax(S(0));
  return t->push(std::move(out), a.needs_grad(), [t, ia](int self) {
    const Mat<S>& x = t->value(ia);
    t->grad(ia).array() += (x.array() > S(0)).select(t->grad(self).array(), S(0));
  });
}

template <typename S>
Var<S> exp(const Var<S>& a) {
  Tape<S>* t = tape_of(a);
  const int ia = a.id();
  Mat<S> out = a.value().array().exp();
  return t->push(std::move(out), a.needs_grad(), [t, ia](int self) {
    t->grad(ia).array() += t->grad(self).array() * t->value(self).array();
  });
}

// ---- reshaping ----

template <typename S>
Var<S> concat_rows(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw InputError("concat_rows: no inputs");
  Tape<S>* t = tape_of(parts[0]);
  Eigen::Index rows = 0;
  bool ng = false;
  std::vector<int> ids;
  for (const auto& p : parts) {
    same_tape(parts[0], p);
    if (p.cols() != parts[0].cols()) mismatch("concat_rows", parts[0], p);
    rows += p.rows();
    ng = ng || p.needs_grad();
    ids.push_back(p.id());
  }
  Mat<S> out(rows, parts[0].cols());
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return t->push(std::move(out), ng, [t, ids](int self) {
    const Mat<S>& g = t->grad(self);
    Eigen::Index r0 = 0;
    for (int id : ids) {
      const Eigen::Index n = t->value(id).rows();
      if (t->needs_grad(id)) t->grad(id) += g.middleRows(r0, n);
      r0 += n;
    }
  });
}

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  if (parts.empty()) throw InputError("concat_cols: no inputs");
  Tape<S>* t = tape_of(parts[0]);
  Eigen::Index cols = 0;
  bool ng = false;
  std::vector<int> ids;
  for (const auto& p : parts) {
    same_tape(parts[0], p);
    if (p.rows() != parts[0].rows()) mismatch("concat_cols", parts[0], p);
    cols += p.cols();
    ng = ng || p.needs_grad();
    ids.push_back(p.id());
  }
  Mat<S> out(parts[0].rows(), cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  return t->push(std::move(out), ng, [t, ids](int self) {
    const Mat<S>& g = t->grad(self);
    Eigen::Index c0 = 0;
    for (int id : ids) {
      const Eigen::Index n = t->value(id).cols();
      if (t->needs_grad(id)) t->grad(id) += g.middleCols(c0, n);
      c0 += n;
    }
  });
}

template <typename S>
Var<S> slice_rows(const Var<S>& a, Eigen::Index begin, Eigen::Index count) {
  Tape<S>* t = tape_of(a);
  if (begin < 0 || count < 0 || begin + count > a.rows()) {
    throw InputError("slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(count) + ") outside " +
                     shape(a));
  }
  const int ia = a.id();
  return t->push(a.value().middleRows(begin, count), a.needs_grad(), [t, ia, begin, count](int self) {
    t->grad(ia).middleRows(begin, count) += t->grad(self);
  });
}

template <typename S>
Var<S> slice_cols(const Var<S>& a, Eigen::Index begin, Eigen::Index count) {
  Tape<S>* t = tape_of(a);
  if (begin < 0 || count < 0 || begin + count > a.cols()) {
    throw InputError("slice_cols: [" + std::to_string(begin) + ", +" + std::to_string(count) + ") outside " +
                     shape(a));
  }
  const int ia = a.id();
  return t->push(a.value().middleCols(begin, count), a.needs_grad(), [t, ia, begin, count](int self) {
    t->grad(ia).middleCols(begin, count) += t->grad(self);
  });
}

template <typename S>
Var<S> tile_cols(const Var<S>& a, Eigen::Index times) {
  Tape<S>* t = tape_of(a);
  if (times < 1) throw InputError("tile_cols: times must be >= 1");
  const int ia = a.id();
  const Eigen::Index c = a.cols();
  Mat<S> out = a.value().replicate(1, times);
  return t->push(std::move(out), a.needs_grad(), [t, ia, c, times](int self) {
    const Mat<S>& g = t->grad(self);
    Mat<S>& ga = t->grad(ia);
    for (Eigen::Index k = 0; k < times; ++k) ga += g.middleCols(k * c, c);
  });
}

// ---- reductions ----

template <typename S>
Var<S> sum(const Var<S>& a) {
  Tape<S>* t = tape_of(a);
  const int ia = a.id();
  Mat<S> out(1, 1);
  out(0, 0) = a.value().sum();
  return t->push(std::move(out), a.needs_grad(), [t, ia](int self) {
    t->grad(ia).array() += t->grad(self)(0, 0);
  });
}

template <typename S>
Var<S> mean(const Var<S>& a) {
  Tape<S>* t = tape_of(a);
  if (a.value().size() == 0) throw InputError("mean: empty input");
  const int ia = a.id();
  const S inv = S(1) / static_cast<S>(a.value().size());
  Mat<S> out(1, 1);
  out(0, 0) = a.value().sum() * inv;
  return t->push(std::move(out), a.needs_grad(), [t, ia, inv](int self) {
    t->grad(ia).array() += t->grad(self)(0, 0) * inv;
  });
}

template <typename S>
Var<S> abs_mean(const Var<S>& a) {
  Tape<S>* t = tape_of(a);
  if (a.value().size() == 0) throw InputError("abs_mean: empty input");
  const int ia = a.id();
  const S inv = S(1) / static_cast<S>(a.value().size());
  Mat<S> out(1, 1);
  out(0, 0) = a.value().cwiseAbs().sum() * inv;
  return t->push(std::move(out), a.needs_grad(), [t, ia, inv](int self) {
    const S g = t->grad(self)(0, 0) * inv;
    t->grad(ia).array() += g * t->value(ia).array().sign();
  });
}

template <typename S>
Var<S> masked_abs_mean(const Var<S>& a, const Mat<S>& mask) {
  Tape<S>* t = tape_of(a);
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) {
    throw InputError("masked_abs_mean: mask shape mismatch " + shape(a));
  }
  const Mat<S> m = (mask.array() != S(0)).template cast<S>();
  const S n = m.sum();
  if (n == S(0)) throw InputError("masked_abs_mean: mask selects nothing");
  const int ia = a.id();
  Mat<S> out(1, 1);
  out(0, 0) = (a.value().cwiseAbs().array() * m.array()).sum() / n;
  return t->push(std::move(out), a.needs_grad(), [t, ia, m, n](int self) {
    const S g = t->grad(self)(0, 0) / n;
    t->grad(ia).array() += g * t->value(ia).array().sign() * m.array();
  });
}

// ---- recurrent ----

template <typename S>
Var<S> gru_sequence(const GRUWeights<S>& w, const Var<S>& x, const Var<S>& h0, Eigen::Index steps, bool reverse) {
  same_tape(w.Wx, x);
  same_tape(w.U, x);
  same_tape(w.b, x);
  same_tape(h0, x);
  const Eigen::Index H = w.U.cols();
  if (w.U.rows() != 3 * H) throw InputError("gru: U must be 3H x H, got " + shape(w.U));
  if (w.Wx.rows() != 3 * H) mismatch("gru: Wx vs U", w.Wx, w.U);
  if (w.b.rows() != 3 * H || w.b.cols() != 1) mismatch("gru: b vs U", w.b, w.U);
  if (w.Wx.cols() != x.rows()) mismatch("gru: Wx vs x", w.Wx, x);
  if (steps < 1) throw InputError("gru: empty sequence");
  if (x.cols() % steps != 0) throw InputError("gru: " + shape(x) + " not divisible into " + std::to_string(steps) + " steps");
  const Eigen::Index B = x.cols() / steps;
  if (h0.rows() != H || h0.cols() != B) mismatch("gru: h0", h0, w.U);

  Tape<S>* t = tape_of(x);
  const Mat<S>& U = w.U.value();

  // Input projections for every step in one product.
  Mat<S> A;
  A.noalias() = w.Wx.value() * x.value();
  A.colwise() += w.b.value().col(0);

  auto order = [steps, reverse](Eigen::Index s) { return reverse ? steps - 1 - s : s; };

  Mat<S> Hs(H, steps * B), R(H, steps * B), Ug(H, steps * B), C(H, steps * B);
  Mat<S> h = h0.value();
  Mat<S> pre(2 * H, B), rh(H, B), cand(H, B);
  for (Eigen::Index s = 0; s < steps; ++s) {
    const Eigen::Index c0 = order(s) * B;
    pre = A.block(0, c0, 2 * H, B);
    pre.noalias() += U.topRows(2 * H) * h;
    const Mat<S> rz = sigmoid_of<S>(pre);
    rh = rz.topRows(H).cwiseProduct(h);
    cand = A.block(2 * H, c0, H, B);
    cand.noalias() += U.bottomRows(H) * rh;
    cand = cand.array().tanh();
    h += rz.bottomRows(H).cwiseProduct(cand - h);
    R.middleCols(c0, B) = rz.topRows(H);
    Ug.middleCols(c0, B) = rz.bottomRows(H);
    C.middleCols(c0, B) = cand;
    Hs.middleCols(c0, B) = h;
  }

  const int iwx = w.Wx.id(), iu = w.U.id(), ib = w.b.id(), ix = x.id(), ih = h0.id();
  const bool ng = w.Wx.needs_grad() || w.U.needs_grad() || w.b.needs_grad() || x.needs_grad() || h0.needs_grad();
  auto cache = std::make_shared<std::array<Mat<S>, 3>>(std::array<Mat<S>, 3>{std::move(R), std::move(Ug), std::move(C)});
  return t->push(std::move(Hs), ng, [=](int self) {
    const Mat<S>& dH = t->grad(self);
    const Mat<S>& Hs = t->value(self);
    const Mat<S>& U = t->value(iu);
    const Mat<S>& h_init = t->value(ih);
    const auto& [R, Ug, C] = *cache;

    Mat<S> dA(3 * H, steps * B);
    Mat<S> dU = Mat<S>::Zero(3 * H, H);
    Mat<S> dh = Mat<S>::Zero(H, B);
    Mat<S> dhp(H, B), drh(H, B), rh(H, B);
    for (Eigen::Index s = steps - 1; s >= 0; --s) {
      const Eigen::Index c0 = order(s) * B;
      const auto hp = s == 0 ? h_init.middleCols(0, B) : Hs.middleCols(order(s - 1) * B, B);
      const auto r = R.middleCols(c0, B);
      const auto u = Ug.middleCols(c0, B);
      const auto c = C.middleCols(c0, B);
      dh += dH.middleCols(c0, B);

      auto dac = dA.block(2 * H, c0, H, B);
      dac = (dh.array() * u.array() * (S(1) - c.array().square())).matrix();
      dhp = (dh.array() * (S(1) - u.array())).matrix();
      rh = r.cwiseProduct(hp);
      dU.bottomRows(H).noalias() += dac * rh.transpose();
      drh.noalias() = U.bottomRows(H).transpose() * dac;
      dhp += drh.cwiseProduct(r);

      dA.block(0, c0, H, B) = (drh.array() * hp.array() * r.array() * (S(1) - r.array())).matrix();
      dA.block(H, c0, H, B) = (dh.array() * (c - hp).array() * u.array() * (S(1) - u.array())).matrix();
      const auto drz = dA.block(0, c0, 2 * H, B);
      dU.topRows(2 * H).noalias() += drz * hp.transpose();
      dhp.noalias() += U.topRows(2 * H).transpose() * drz;
      dh = dhp;
    }
    if (t->needs_grad(ih)) t->grad(ih) += dh;
    if (t->needs_grad(iu)) t->grad(iu) += dU;
    if (t->needs_grad(iwx)) t->grad(iwx).noalias() += dA * t->value(ix).transpose();
    if (t->needs_grad(ib)) t->grad(ib).col(0) += dA.rowwise().sum();
    if (t->needs_grad(ix)) t->grad(ix).noalias() += t->value(iwx).transpose() * dA;
  });
}

template <typename S>
Var<S> gru_cell(const GRUWeights<S>& w, const Var<S>& x, const Var<S>& h) {
  return gru_sequence(w, x, h, 1, false);
}

template <typename S>
Var<S> bigru_encode(const GRUWeights<S>& fwd, const GRUWeights<S>& bwd, const Var<S>& x, Eigen::Index steps) {
  if (steps < 1) throw InputError("bigru_encode: empty sequence");
  if (x.cols() % steps != 0) throw InputError("bigru_encode: " + shape(x) + " not divisible into steps");
  const Eigen::Index B = x.cols() / steps;
  Tape<S>* t = tape_of(x);
  const Var<S> hf0 = t->constant(Mat<S>::Zero(fwd.U.cols(), B));
  const Var<S> hb0 = t->constant(Mat<S>::Zero(bwd.U.cols(), B));
  const Var<S> hf = gru_sequence(fwd, x, hf0, steps, false);
  const Var<S> hb = gru_sequence(bwd, x, hb0, steps, true);
  return concat_rows<S>({slice_cols(hf, (steps - 1) * B, B), slice_cols(hb, 0, B)});
}

// ---- distributions ----

template <typename S>
Var<S> kl_diag(const DiagGaussian<S>& p, const DiagGaussian<S>& q) {
  same_shape("kl_diag mu", p.mu, q.mu);
  same_shape("kl_diag log_sigma", p.log_sigma, q.log_sigma);
  same_shape("kl_diag p", p.mu, p.log_sigma);
  // log(sq/sp) + (sp^2 + (mp-mq)^2) / (2 sq^2) - 1/2, per dim.
  const Var<S> log_ratio = sub(q.log_sigma, p.log_sigma);
  const Var<S> d = sub(p.mu, q.mu);
  const Var<S> num = add(exp(scale(p.log_sigma, S(2))), mul(d, d));
  const Var<S> quad = scale(mul(num, exp(scale(q.log_sigma, S(-2)))), S(0.5));
  const auto dims = static_cast<S>(p.mu.rows());
  const auto batch = static_cast<S>(p.mu.cols());
  return add_scalar(scale(sum(add(log_ratio, quad)), S(1) / batch), S(-0.5) * dims);
}

double kl_diag_value(const Eigen::VectorXd& mu_p, const Eigen::VectorXd& ls_p, const Eigen::VectorXd& mu_q,
                     const Eigen::VectorXd& ls_q) {
  if (mu_p.size() != ls_p.size() || mu_p.size() != mu_q.size() || mu_p.size() != ls_q.size()) {
    throw InputError("kl_diag_value: dimension mismatch");
  }
  const Eigen::ArrayXd var_ratio = (2.0 * (ls_p - ls_q).array()).exp();
  const Eigen::ArrayXd d2 = (mu_p - mu_q).array().square() * (-2.0 * ls_q.array()).exp();
  return ((ls_q - ls_p).array() + 0.5 * (var_ratio + d2) - 0.5).sum();
}

template <typename S>
Var<S> reparam_sample(const DiagGaussian<S>& d, const Mat<S>& noise) {
  same_shape("reparam_sample", d.mu, d.log_sigma);
  if (noise.rows() != d.mu.rows() || noise.cols() != d.mu.cols()) {
    throw InputError("reparam_sample: noise shape mismatch with " + shape(d.mu));
  }
  Tape<S>* t = tape_of(d.mu);
  return add(d.mu, mul(exp(d.log_sigma), t->constant(noise)));
}

// ---- instantiations ----

#define PLATO_TENSOR_INSTANTIATE(S)                                                                   \
  template class Var<S>;                                                                              \
  template class Tape<S>;                                                                             \
  template Var<S> matmul(const Var<S>&, const Var<S>&);                                               \
  template Var<S> linear(const Var<S>&, const Var<S>&, const Var<S>&);                                \
  template Var<S> add_bias(const Var<S>&, const Var<S>&);                                             \
  template Var<S> add(const Var<S>&, const Var<S>&);                                                  \
  template Var<S> sub(const Var<S>&, const Var<S>&);                                                  \
  template Var<S> mul(const Var<S>&, const Var<S>&);                                                  \
  template Var<S> scale(const Var<S>&, S);                                                            \
  template Var<S> add_scalar(const Var<S>&, S);                                                       \
  template Var<S> concat_rows(const std::vector<Var<S>>&);                                            \
  template Var<S> concat_cols(const std::vector<Var<S>>&);                                            \
  template Var<S> slice_rows(const Var<S>&, Eigen::Index, Eigen::Index);                              \
  template Var<S> slice_cols(const Var<S>&, Eigen::Index, Eigen::Index);                              \
  template Var<S> tile_cols(const Var<S>&, Eigen::Index);                                             \
  template Var<S> tanh(const Var<S>&);                                                                \
  template Var<S> sigmoid(const Var<S>&);                                                             \
  template Var<S> relu(const Var<S>&);                                                                \
  template Var<S> exp(const Var<S>&);                                                                 \
  template Var<S> sum(const Var<S>&);                                                                 \
  template Var<S> mean(const Var<S>&);                                                                \
  template Var<S> abs_mean(const Var<S>&);                                                            \
  template Var<S> masked_abs_mean(const Var<S>&, const Mat<S>&);                                      \
  template Var<S> gru_sequence(const GRUWeights<S>&, const Var<S>&, const Var<S>&, Eigen::Index, bool); \
  template Var<S> gru_cell(const GRUWeights<S>&, const Var<S>&, const Var<S>&);                       \
  template Var<S> bigru_encode(const GRUWeights<S>&, const GRUWeights<S>&, const Var<S>&, Eigen::Index); \
  template Var<S> kl_diag(const DiagGaussian<S>&, const DiagGaussian<S>&);                            \
  template Var<S> reparam_sample(const DiagGaussian<S>&, const Mat<S>&);

PLATO_TENSOR_INSTANTIATE(float)
PLATO_TENSOR_INSTANTIATE(double)

#undef PLATO_TENSOR_INSTANTIATE

}  // namespace plato::tensor
