#include "robust_te/policy.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "robust_te/errors.hpp"

namespace robust_te {

namespace {

using Index = Eigen::Index;
Index idx(std::size_t i) { return static_cast<Index>(i); }

constexpr const char* kMagic = "robust-te-policy";
constexpr int kFormatVersion = 1;

struct Layout {
  Index conv_w, conv_b, fc_w, fc_b, out_w, out_b, total;
};

Layout layout_of(const PolicyShape& s) {
  const Index patch = idx(s.channels * kKernel * kKernel);
  const Index flat = idx(s.filters * s.grid * s.grid);
  Layout l{};
  l.conv_w = 0;
  l.conv_b = l.conv_w + idx(s.filters) * patch;
  l.fc_w = l.conv_b + idx(s.filters);
  l.fc_b = l.fc_w + idx(s.hidden) * flat;
  l.out_w = l.fc_b + idx(s.hidden);
  l.out_b = l.out_w + idx(s.outputs * s.hidden);
  l.total = l.out_b + idx(s.outputs);
  return l;
}

double leaky(double x) { return x > 0.0 ? x : kLeakySlope * x; }
double leaky_grad(double x) { return x > 0.0 ? 1.0 : kLeakySlope; }

}  // namespace

std::size_t PolicyShape::parameter_count() const {
  return static_cast<std::size_t>(layout_of(*this).total);
}

double lr_schedule(std::size_t step, const OptimizerSettings& s) {
  const double decays = s.lr_decay_every == 0
                            ? 0.0
                            : static_cast<double>(step / s.lr_decay_every);
  return std::max(s.lr_min, s.lr_initial * std::pow(s.lr_decay, decays));
}

PolicyModel::PolicyModel(const PolicyShape& shape, std::uint64_t seed, OptimizerSettings settings)
    : shape_(shape), settings_(settings) {
  if (shape.channels == 0 || shape.grid == 0 || shape.filters == 0 || shape.hidden == 0 ||
      shape.outputs == 0) {
    throw PreconditionError("policy shape dimensions must be positive");
  }
  params_.resize(layout_of(shape).total);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-kInitRange, kInitRange);
  for (Index i = 0; i < params_.size(); ++i) params_(i) = dist(rng);
}

void PolicyModel::check_state(const AgentState& state) const {
  if (state.channels != shape_.channels || state.grid != shape_.grid ||
      static_cast<std::size_t>(state.values.size()) !=
          shape_.channels * shape_.grid * shape_.grid) {
    throw PreconditionError("state shape does not match the policy model");
  }
}

Eigen::VectorXd PolicyModel::logits(const AgentState& state, Cache* cache) const {
  check_state(state);
  const Layout l = layout_of(shape_);
  const Index n = idx(shape_.grid);
  const Index cells = n * n;
  const Index patch = idx(shape_.channels * kKernel * kKernel);
  const Index filters = idx(shape_.filters);
  const Index hidden = idx(shape_.hidden);
  const Index outputs = idx(shape_.outputs);

  Eigen::MatrixXd patches = Eigen::MatrixXd::Zero(patch, cells);
  for (Index ch = 0; ch < idx(shape_.channels); ++ch) {
    for (Index ki = 0; ki < 3; ++ki) {
      for (Index kj = 0; kj < 3; ++kj) {
        const Index row = ch * 9 + ki * 3 + kj;
        for (Index i = 0; i < n; ++i) {
          const Index si = i + ki - 1;
          if (si < 0 || si >= n) continue;
          for (Index j = 0; j < n; ++j) {
            const Index sj = j + kj - 1;
            if (sj < 0 || sj >= n) continue;
            patches(row, i * n + j) = state.values(ch * cells + si * n + sj);
          }
        }
      }
    }
  }

  Eigen::Map<const Eigen::MatrixXd> conv_w(params_.data() + l.conv_w, filters, patch);
  Eigen::Map<const Eigen::VectorXd> conv_b(params_.data() + l.conv_b, filters);
  Eigen::Map<const Eigen::MatrixXd> fc_w(params_.data() + l.fc_w, hidden, filters * cells);
  Eigen::Map<const Eigen::VectorXd> fc_b(params_.data() + l.fc_b, hidden);
  Eigen::Map<const Eigen::MatrixXd> out_w(params_.data() + l.out_w, outputs, hidden);
  Eigen::Map<const Eigen::VectorXd> out_b(params_.data() + l.out_b, outputs);

  Eigen::MatrixXd conv_pre = conv_w * patches;
  conv_pre.colwise() += conv_b;
  Eigen::MatrixXd conv_act = conv_pre.unaryExpr(&leaky);
  Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(conv_act.data(), conv_act.size());
  Eigen::VectorXd hidden_pre = fc_w * flat + fc_b;
  Eigen::VectorXd hidden_act = hidden_pre.unaryExpr(&leaky);
  Eigen::VectorXd z = out_w * hidden_act + out_b;

  if (cache) {
    cache->patches = std::move(patches);
    cache->conv_pre = std::move(conv_pre);
    cache->flat = std::move(flat);
    cache->hidden_pre = std::move(hidden_pre);
    cache->hidden = std::move(hidden_act);
    cache->logits = z;
  }
  return z;
}

Eigen::VectorXd PolicyModel::probabilities(const AgentState& state) const {
  return softmax(logits(state));
}

Eigen::VectorXd PolicyModel::backward(const Cache& cache, const Eigen::VectorXd& grad_logits) const {
  const Layout l = layout_of(shape_);
  const Index cells = idx(shape_.grid * shape_.grid);
  const Index patch = idx(shape_.channels * kKernel * kKernel);
  const Index filters = idx(shape_.filters);
  const Index hidden = idx(shape_.hidden);
  const Index outputs = idx(shape_.outputs);

  Eigen::Map<const Eigen::MatrixXd> fc_w(params_.data() + l.fc_w, hidden, filters * cells);
  Eigen::Map<const Eigen::MatrixXd> out_w(params_.data() + l.out_w, outputs, hidden);

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());
  Eigen::Map<Eigen::MatrixXd> g_conv_w(grad.data() + l.conv_w, filters, patch);
  Eigen::Map<Eigen::VectorXd> g_conv_b(grad.data() + l.conv_b, filters);
  Eigen::Map<Eigen::MatrixXd> g_fc_w(grad.data() + l.fc_w, hidden, filters * cells);
  Eigen::Map<Eigen::VectorXd> g_fc_b(grad.data() + l.fc_b, hidden);
  Eigen::Map<Eigen::MatrixXd> g_out_w(grad.data() + l.out_w, outputs, hidden);
  Eigen::Map<Eigen::VectorXd> g_out_b(grad.data() + l.out_b, outputs);

  g_out_w.noalias() = grad_logits * cache.hidden.transpose();
  g_out_b = grad_logits;
  const Eigen::VectorXd g_hidden =
      (out_w.transpose() * grad_logits).cwiseProduct(cache.hidden_pre.unaryExpr(&leaky_grad));
  g_fc_w.noalias() = g_hidden * cache.flat.transpose();
  g_fc_b = g_hidden;
  const Eigen::VectorXd g_flat = fc_w.transpose() * g_hidden;
  const Eigen::MatrixXd g_conv =
      Eigen::Map<const Eigen::MatrixXd>(g_flat.data(), filters, cells)
          .cwiseProduct(cache.conv_pre.unaryExpr(&leaky_grad));
  g_conv_w.noalias() = g_conv * cache.patches.transpose();
  g_conv_b = g_conv.rowwise().sum();
  return grad;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

void save_model(const PolicyModel& model, std::ostream& out) {
  const PolicyShape& s = model.shape();
  const OptimizerSettings& o = model.settings();
  out << kMagic << ' ' << kFormatVersion << "\n";
  out << "shape " << s.channels << ' ' << s.grid << ' ' << s.filters << ' ' << s.hidden << ' '
      << s.outputs << "\n";
  out << std::hexfloat;
  out << "optimizer " << o.lr_initial << ' ' << o.lr_decay << ' ' << o.lr_decay_every << ' '
      << o.lr_min << ' ' << o.entropy_beta << "\n";
  out << "step " << model.step() << "\n";
  out << "params " << model.parameters().size() << "\n";
  for (Index i = 0; i < model.parameters().size(); ++i) out << model.parameters()(i) << "\n";
  out << std::defaultfloat;
  if (!out) throw DataError("failed to write model checkpoint");
}

namespace {

double read_hex(std::istream& in) {
  std::string tok;
  if (!(in >> tok)) throw DataError("checkpoint truncated");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size()) throw DataError("checkpoint: bad number '" + tok + "'");
  return v;
}

void expect(std::istream& in, const std::string& word) {
  std::string tok;
  if (!(in >> tok) || tok != word) throw DataError("checkpoint: expected '" + word + "'");
}

}  // namespace

PolicyModel load_model(std::istream& in) {
  expect(in, kMagic);
  int version = 0;
  if (!(in >> version) || version != kFormatVersion) {
    throw DataError("checkpoint: unsupported format version");
  }
  PolicyShape s;
  expect(in, "shape");
  if (!(in >> s.channels >> s.grid >> s.filters >> s.hidden >> s.outputs)) {
    throw DataError("checkpoint: bad shape line");
  }
  OptimizerSettings o;
  expect(in, "optimizer");
  o.lr_initial = read_hex(in);
  o.lr_decay = read_hex(in);
  if (!(in >> o.lr_decay_every)) throw DataError("checkpoint: bad optimizer line");
  o.lr_min = read_hex(in);
  o.entropy_beta = read_hex(in);
  std::size_t step = 0;
  expect(in, "step");
  if (!(in >> step)) throw DataError("checkpoint: bad step");
  std::size_t count = 0;
  expect(in, "params");
  if (!(in >> count)) throw DataError("checkpoint: bad parameter count");

  PolicyModel model(s, 0, o);
  if (count != s.parameter_count()) throw DataError("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < count; ++i) model.parameters()(idx(i)) = read_hex(in);
  model.set_step(step);
  return model;
}

void save_model_file(const PolicyModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path);
  save_model(model, out);
}

PolicyModel load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path);
  return load_model(in);
}

}  // namespace robust_te
