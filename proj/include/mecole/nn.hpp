#pragma once

#include <cstddef>
#include <deque>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mecole/autodiff.hpp"
#include "mecole/sparse.hpp"

namespace mecole::nn {

using ad::Parameter;
using ad::Tape;
using ad::Var;

// Owns parameters at stable addresses, in registration order.
class ParameterStore {
 public:
  Parameter& add(std::string name, Matrix init);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  std::deque<Parameter>& all() { return params_; }
  const std::deque<Parameter>& all() const { return params_; }
  std::size_t size() const { return params_.size(); }

  void zero_grad();
  double grad_norm() const;

 private:
  std::deque<Parameter> params_;
};

// Uniform Glorot initialization.
Matrix glorot(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

enum class Activation { identity, relu, tanh, sigmoid };

Var activate(Var x, Activation act);

// act(A * H * W)
Var gcn_layer(const SparseMatrix& adjacency, Var h, Var w, Activation act);

// Two-layer GCN over one or more adjacency channels. With several channels
// the propagated signal is a softmax-weighted mix; the mixing logits are a
// learned 1 x C parameter.
class GcnTower {
 public:
  GcnTower() = default;
  GcnTower(ParameterStore& store, const std::string& prefix, std::size_t in_dim, std::size_t hidden,
           std::size_t out_dim, std::size_t channels, std::mt19937_64& rng,
           Activation hidden_act = Activation::tanh, Activation out_act = Activation::identity);

  Var forward(Tape& tape, std::span<const SparseMatrix* const> channels, Var x) const;

  std::size_t out_dim() const { return out_dim_; }
  std::size_t channels() const { return channels_; }

 private:
  Var propagate(std::span<const SparseMatrix* const> channels, Var hw, Var mix) const;

  Parameter* w1_ = nullptr;
  Parameter* w2_ = nullptr;
  Parameter* mix_ = nullptr;
  std::size_t out_dim_ = 0;
  std::size_t channels_ = 1;
  Activation hidden_act_ = Activation::tanh;
  Activation out_act_ = Activation::identity;
};

struct AdamOptions {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // global gradient-norm clip; <= 0 disables
};

struct OptimizerState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::size_t step = 0;
};

class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  // One update over every parameter in the store. Throws NumericError if a
  // registered parameter has no gradient.
  void step(ParameterStore& store);

  const OptimizerState& state() const { return state_; }
  const AdamOptions& options() const { return opts_; }

 private:
  AdamOptions opts_;
  OptimizerState state_;
};

// Text checkpoint of named arrays:
//   MECOLE-CHECKPOINT 1
//   <count>
//   then per array a header "<name> <rows> <cols>" followed by one line per
//   row with values printed to 17 significant digits.
void save_checkpoint(const ParameterStore& store, std::ostream& out);
void save_checkpoint(const ParameterStore& store, const std::string& path);
std::map<std::string, Matrix> read_checkpoint(std::istream& in);
// Copies matching arrays into the store; every store parameter must be present
// with the same shape.
void load_checkpoint(ParameterStore& store, std::istream& in);
void load_checkpoint(ParameterStore& store, const std::string& path);

}  // namespace mecole::nn
