#include "mecole/nn.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "mecole/error.hpp"

namespace mecole::nn {

Parameter& ParameterStore::add(std::string name, Matrix init) {
  if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  params_.push_back({std::move(name), std::move(init), Matrix()});
  return params_.back();
}

Parameter* ParameterStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.grad = Matrix();
}

double ParameterStore::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_)
    for (double g : p.grad.data()) s += g * g;
  return std::sqrt(s);
}

Matrix glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix w(fan_in, fan_out);
  for (double& x : w.data()) x = u(rng);
  return w;
}

Var activate(Var x, Activation act) {
  switch (act) {
    case Activation::identity:
      return x;
    case Activation::relu:
      return ad::relu(x);
    case Activation::tanh:
      return ad::tanh(x);
    case Activation::sigmoid:
      return ad::sigmoid(x);
  }
  return x;
}

Var gcn_layer(const SparseMatrix& adjacency, Var h, Var w, Activation act) {
  if (h.cols() != w.rows()) throw NumericError("gcn_layer: H cols must equal W rows");
  if (adjacency.cols != h.rows()) throw NumericError("gcn_layer: adjacency does not match node count");
  return activate(ad::spmm(adjacency, ad::matmul(h, w)), act);
}

GcnTower::GcnTower(ParameterStore& store, const std::string& prefix, std::size_t in_dim, std::size_t hidden,
                   std::size_t out_dim, std::size_t channels, std::mt19937_64& rng, Activation hidden_act,
                   Activation out_act)
    : out_dim_(out_dim), channels_(channels), hidden_act_(hidden_act), out_act_(out_act) {
  if (channels == 0) throw ConfigError("GcnTower: at least one channel required");
  w1_ = &store.add(prefix + ".w1", glorot(in_dim, hidden, rng));
  w2_ = &store.add(prefix + ".w2", glorot(hidden, out_dim, rng));
  if (channels > 1) mix_ = &store.add(prefix + ".mix", Matrix(1, channels, 0.0));
}

Var GcnTower::propagate(std::span<const SparseMatrix* const> channels, Var hw, Var mix) const {
  if (channels.size() == 1) return ad::spmm(*channels[0], hw);
  Var weights = ad::softmax_rows(mix);
  Var out = ad::scale_by(ad::select(weights, 0, 0), ad::spmm(*channels[0], hw));
  for (std::size_t c = 1; c < channels.size(); ++c) {
    out = ad::add(out, ad::scale_by(ad::select(weights, 0, c), ad::spmm(*channels[c], hw)));
  }
  return out;
}

Var GcnTower::forward(Tape& tape, std::span<const SparseMatrix* const> channels, Var x) const {
  if (channels.size() != channels_) throw ConfigError("GcnTower: channel count mismatch");
  Var mix = mix_ ? tape.parameter(*mix_) : Var{};
  Var w1 = tape.parameter(*w1_);
  Var w2 = tape.parameter(*w2_);
  if (x.cols() != w1.rows()) throw NumericError("GcnTower: feature dimension mismatch");
  Var h = activate(propagate(channels, ad::matmul(x, w1), mix), hidden_act_);
  return activate(propagate(channels, ad::matmul(h, w2), mix), out_act_);
}

void Adam::step(ParameterStore& store) {
  auto& params = store.all();
  if (state_.m.size() != params.size()) {
    state_.m.clear();
    state_.v.clear();
    for (const auto& p : params) {
      state_.m.emplace_back(p.value.rows(), p.value.cols());
      state_.v.emplace_back(p.value.rows(), p.value.cols());
    }
  }
  for (const auto& p : params) {
    if (p.grad.empty() || !p.grad.same_shape(p.value)) {
      throw NumericError("adam: parameter '" + p.name + "' has no gradient");
    }
  }
  double factor = 1.0;
  if (opts_.clip_norm > 0.0) {
    const double norm = store.grad_norm();
    if (norm > opts_.clip_norm) factor = opts_.clip_norm / norm;
  }
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double bc1 = 1.0 - std::pow(opts_.beta1, t);
  const double bc2 = 1.0 - std::pow(opts_.beta2, t);
  std::size_t i = 0;
  for (auto& p : params) {
    auto& m = state_.m[i].data();
    auto& v = state_.v[i].data();
    ++i;
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad.data()[k] * factor;
      m[k] = opts_.beta1 * m[k] + (1.0 - opts_.beta1) * g;
      v[k] = opts_.beta2 * v[k] + (1.0 - opts_.beta2) * g * g;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p.value.data()[k] -= opts_.lr * mhat / (std::sqrt(vhat) + opts_.eps);
    }
  }
}

namespace {
constexpr const char* kMagic = "MECOLE-CHECKPOINT";
constexpr int kVersion = 1;
}  // namespace

void save_checkpoint(const ParameterStore& store, std::ostream& out) {
  out << kMagic << ' ' << kVersion << '\n' << store.size() << '\n';
  out << std::setprecision(17);
  for (const auto& p : store.all()) {
    out << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
    for (std::size_t r = 0; r < p.value.rows(); ++r) {
      for (std::size_t c = 0; c < p.value.cols(); ++c) out << (c ? " " : "") << p.value(r, c);
      out << '\n';
    }
  }
}

void save_checkpoint(const ParameterStore& store, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  save_checkpoint(store, out);
}

std::map<std::string, Matrix> read_checkpoint(std::istream& in) {
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> magic >> version) || magic != kMagic) throw DataError("checkpoint: bad magic");
  if (version != kVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  if (!(in >> count)) throw DataError("checkpoint: missing array count");
  std::map<std::string, Matrix> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(in >> name >> rows >> cols)) throw DataError("checkpoint: truncated header");
    Matrix m(rows, cols);
    for (double& x : m.data())
      if (!(in >> x)) throw DataError("checkpoint: truncated data for '" + name + "'");
    out.emplace(std::move(name), std::move(m));
  }
  return out;
}

void load_checkpoint(ParameterStore& store, std::istream& in) {
  auto arrays = read_checkpoint(in);
  for (auto& p : store.all()) {
    auto it = arrays.find(p.name);
    if (it == arrays.end()) throw DataError("checkpoint: missing parameter '" + p.name + "'");
    if (!it->second.same_shape(p.value)) throw DataError("checkpoint: shape mismatch for '" + p.name + "'");
    p.value = it->second;
  }
}

void load_checkpoint(ParameterStore& store, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  load_checkpoint(store, in);
}

}  // namespace mecole::nn
