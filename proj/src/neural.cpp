#include "eventcast/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "text.hpp"

namespace eventcast::neural {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstVec = Eigen::Map<const VectorXd>;

const double kLn2 = std::numbers::ln2;

VectorXd relu(const VectorXd& a) { return a.cwiseMax(0.0); }
VectorXd relu_mask(const VectorXd& a) { return (a.array() > 0.0).cast<double>(); }
VectorXd sigmoid_vec(const VectorXd& a) {
  return a.unaryExpr([](double v) { return sigmoid(v); });
}

std::size_t gate_count(const NetSpec& spec) { return spec.cell == Cell::Gated ? 4 : 1; }

// Column j of the Δt x m instance as a Δt-vector.
VectorXd feature_column(std::span<const double> x, const NetSpec& spec, std::size_t j) {
  VectorXd col(static_cast<Eigen::Index>(spec.steps));
  for (std::size_t d = 0; d < spec.steps; ++d) col[static_cast<Eigen::Index>(d)] = x[d * spec.inputs + j];
  return col;
}

ConstVec day(std::span<const double> x, const NetSpec& spec, std::size_t d) {
  return ConstVec(x.data() + d * spec.inputs, static_cast<Eigen::Index>(spec.inputs));
}

void check_input(std::span<const double> x, const NetSpec& spec) {
  if (x.size() != spec.input_length())
    throw std::invalid_argument("network input length " + std::to_string(x.size()) +
                                " != " + std::to_string(spec.input_length()));
}

struct RecurrentTape {
  std::vector<VectorXd> h;      // h[0] = 0, h[t+1] after step t
  std::vector<VectorXd> c;      // gated only
  std::vector<VectorXd> gates;  // post-activation gates per step (i, f, g, o) or tanh output
};

RecurrentTape run_recurrent(std::span<const double> x, const NetSpec& spec, const Params& p) {
  const auto H = static_cast<Eigen::Index>(spec.hidden);
  const MatrixXd& Wx = p.tensors[0];
  const MatrixXd& Wh = p.tensors[1];
  const VectorXd bh = p.tensors[2].col(0);
  RecurrentTape tape;
  tape.h.push_back(VectorXd::Zero(H));
  tape.c.push_back(VectorXd::Zero(H));
  for (std::size_t t = 0; t < spec.steps; ++t) {
    const VectorXd pre = Wx * day(x, spec, t) + Wh * tape.h.back() + bh;
    if (spec.cell == Cell::Simple) {
      VectorXd h = pre.array().tanh();
      tape.gates.push_back(h);
      tape.h.push_back(std::move(h));
      continue;
    }
    VectorXd act(4 * H);
    act.segment(0, H) = sigmoid_vec(pre.segment(0, H));
    act.segment(H, H) = sigmoid_vec(pre.segment(H, H));
    act.segment(2 * H, H) = pre.segment(2 * H, H).array().tanh();
    act.segment(3 * H, H) = sigmoid_vec(pre.segment(3 * H, H));
    VectorXd c = act.segment(H, H).cwiseProduct(tape.c.back()) +
                 act.segment(0, H).cwiseProduct(act.segment(2 * H, H));
    VectorXd h = act.segment(3 * H, H).cwiseProduct(VectorXd(c.array().tanh()));
    tape.gates.push_back(std::move(act));
    tape.c.push_back(std::move(c));
    tape.h.push_back(std::move(h));
  }
  return tape;
}

// Accumulates the gradient of one instance given dL/dz at the output logit.
void accumulate(std::span<const double> x, double dz, const NetSpec& spec, const Params& p,
                Params& g) {
  switch (spec.arch) {
    case Architecture::Ffnn1: {
      const ConstVec in(x.data(), static_cast<Eigen::Index>(x.size()));
      const VectorXd a = p.tensors[0] * in + p.tensors[1].col(0);
      const VectorXd h = relu(a);
      g.tensors[2] += dz * h.transpose();
      g.tensors[3](0, 0) += dz;
      const VectorXd da = (p.tensors[2].row(0).transpose() * dz).cwiseProduct(relu_mask(a));
      g.tensors[0] += da * in.transpose();
      g.tensors[1].col(0) += da;
      return;
    }
    case Architecture::Ffnn2: {
      const auto hw = static_cast<Eigen::Index>(spec.feature_width);
      VectorXd G(static_cast<Eigen::Index>(spec.inputs) * hw);
      std::vector<VectorXd> cols, pre;
      for (std::size_t j = 0; j < spec.inputs; ++j) {
        const auto r0 = static_cast<Eigen::Index>(j) * hw;
        cols.push_back(feature_column(x, spec, j));
        pre.push_back(p.tensors[0].middleRows(r0, hw) * cols.back() + p.tensors[1].col(0).segment(r0, hw));
        G.segment(r0, hw) = relu(pre.back());
      }
      const VectorXd a = p.tensors[2] * G + p.tensors[3].col(0);
      const VectorXd h = relu(a);
      g.tensors[4] += dz * h.transpose();
      g.tensors[5](0, 0) += dz;
      const VectorXd da = (p.tensors[4].row(0).transpose() * dz).cwiseProduct(relu_mask(a));
      g.tensors[2] += da * G.transpose();
      g.tensors[3].col(0) += da;
      const VectorXd dG = p.tensors[2].transpose() * da;
      for (std::size_t j = 0; j < spec.inputs; ++j) {
        const auto r0 = static_cast<Eigen::Index>(j) * hw;
        const VectorXd du = dG.segment(r0, hw).cwiseProduct(relu_mask(pre[j]));
        g.tensors[0].middleRows(r0, hw) += du * cols[j].transpose();
        g.tensors[1].col(0).segment(r0, hw) += du;
      }
      return;
    }
    case Architecture::Recurrent: {
      const auto H = static_cast<Eigen::Index>(spec.hidden);
      const auto tape = run_recurrent(x, spec, p);
      g.tensors[3] += dz * tape.h.back().transpose();
      g.tensors[4](0, 0) += dz;
      VectorXd dh = p.tensors[3].row(0).transpose() * dz;
      VectorXd dc = VectorXd::Zero(H);
      for (std::size_t t = spec.steps; t-- > 0;) {
        VectorXd dpre;
        if (spec.cell == Cell::Simple) {
          const VectorXd& h = tape.h[t + 1];
          dpre = dh.cwiseProduct(VectorXd((1.0 - h.array().square())));
        } else {
          const VectorXd& act = tape.gates[t];
          const VectorXd i = act.segment(0, H), f = act.segment(H, H), gg = act.segment(2 * H, H),
                         o = act.segment(3 * H, H);
          const VectorXd tc = tape.c[t + 1].array().tanh();
          dc += dh.cwiseProduct(o).cwiseProduct(VectorXd(1.0 - tc.array().square()));
          dpre.resize(4 * H);
          dpre.segment(0, H) = dc.cwiseProduct(gg).cwiseProduct(VectorXd(i.array() * (1.0 - i.array())));
          dpre.segment(H, H) =
              dc.cwiseProduct(tape.c[t]).cwiseProduct(VectorXd(f.array() * (1.0 - f.array())));
          dpre.segment(2 * H, H) = dc.cwiseProduct(i).cwiseProduct(VectorXd(1.0 - gg.array().square()));
          dpre.segment(3 * H, H) = dh.cwiseProduct(tc).cwiseProduct(VectorXd(o.array() * (1.0 - o.array())));
          dc = dc.cwiseProduct(f);
        }
        g.tensors[0] += dpre * day(x, spec, t).transpose();
        g.tensors[1] += dpre * tape.h[t].transpose();
        g.tensors[2].col(0) += dpre;
        dh = p.tensors[1].transpose() * dpre;
      }
      return;
    }
  }
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

std::string arch_name(Architecture a) {
  switch (a) {
    case Architecture::Ffnn1: return "ffnn1";
    case Architecture::Ffnn2: return "ffnn2";
    case Architecture::Recurrent: return "recurrent";
  }
  return "?";
}

}  // namespace

void NetSpec::validate() const {
  if (inputs < 1 || steps < 1 || hidden < 1)
    throw std::invalid_argument("NetSpec: inputs, steps and hidden must be >= 1");
  if (arch == Architecture::Ffnn2 && feature_width < 1)
    throw std::invalid_argument("NetSpec: feature_width must be >= 1");
}

std::string NetSpec::describe() const {
  std::ostringstream s;
  s << arch_name(arch) << " inputs=" << inputs << " steps=" << steps << " hidden=" << hidden;
  if (arch == Architecture::Ffnn2) s << " feature_width=" << feature_width;
  if (arch == Architecture::Recurrent) s << " cell=" << (cell == Cell::Gated ? "gated" : "simple");
  return s.str();
}

std::size_t Params::size() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

Params Params::zeros_like() const {
  Params z{tensors, names};
  for (auto& t : z.tensors) t.setZero();
  return z;
}

std::vector<double> Params::flat() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& t : tensors) out.insert(out.end(), t.data(), t.data() + t.size());
  return out;
}

void Params::set_flat(std::span<const double> values) {
  if (values.size() != size()) throw std::invalid_argument("Params::set_flat: size mismatch");
  std::size_t k = 0;
  for (auto& t : tensors)
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = values[k++];
}

bool operator==(const Params& a, const Params& b) {
  if (a.tensors.size() != b.tensors.size() || a.names != b.names) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i)
    if (a.tensors[i].rows() != b.tensors[i].rows() || a.tensors[i].cols() != b.tensors[i].cols() ||
        a.tensors[i] != b.tensors[i])
      return false;
  return true;
}

Params make_params(const NetSpec& spec) {
  spec.validate();
  const auto m = static_cast<Eigen::Index>(spec.inputs);
  const auto dt = static_cast<Eigen::Index>(spec.steps);
  const auto k = static_cast<Eigen::Index>(spec.hidden);
  Params p;
  auto add = [&](std::string name, Eigen::Index r, Eigen::Index c) {
    p.names.push_back(std::move(name));
    p.tensors.push_back(MatrixXd::Zero(r, c));
  };
  switch (spec.arch) {
    case Architecture::Ffnn1:
      add("W0", k, m * dt);
      add("b0", k, 1);
      add("W", 1, k);
      add("b", 1, 1);
      break;
    case Architecture::Ffnn2: {
      const auto hw = static_cast<Eigen::Index>(spec.feature_width);
      add("Wf", m * hw, dt);
      add("bf", m * hw, 1);
      add("W0", k, m * hw);
      add("b0", k, 1);
      add("W", 1, k);
      add("b", 1, 1);
      break;
    }
    case Architecture::Recurrent: {
      const auto G = static_cast<Eigen::Index>(gate_count(spec));
      add("Wx", G * k, m);
      add("Wh", G * k, k);
      add("bh", G * k, 1);
      add("W", 1, k);
      add("b", 1, 1);
      break;
    }
  }
  return p;
}

void check_params(const NetSpec& spec, const Params& params) {
  const auto expected = make_params(spec);
  if (params.tensors.size() != expected.tensors.size())
    throw std::invalid_argument("parameter set does not match architecture " + spec.describe());
  for (std::size_t i = 0; i < expected.tensors.size(); ++i)
    if (params.tensors[i].rows() != expected.tensors[i].rows() ||
        params.tensors[i].cols() != expected.tensors[i].cols())
      throw std::invalid_argument("parameter " + expected.names[i] + " has the wrong shape");
}

Params init_params(const NetSpec& spec, std::uint64_t seed) {
  Params p = make_params(spec);
  Rng rng(seed);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    auto& t = p.tensors[i];
    if (t.cols() == 1 && p.names[i][0] == 'b') continue;
    // Ffnn2's Wf is a stack of per-feature Δt-input layers.
    const double fan_in = static_cast<double>(t.cols());
    const double limit = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index c = 0; c < t.cols(); ++c)
      for (Eigen::Index r = 0; r < t.rows(); ++r) t(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
  }
  return p;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double forward_ffnn1(std::span<const double> x, const NetSpec& spec, const Params& p) {
  check_input(x, spec);
  check_params(spec, p);
  const ConstVec in(x.data(), static_cast<Eigen::Index>(x.size()));
  const VectorXd h = relu(p.tensors[0] * in + p.tensors[1].col(0));
  return sigmoid((p.tensors[2] * h)(0) + p.tensors[3](0, 0));
}

double forward_ffnn2(std::span<const double> x, const NetSpec& spec, const Params& p) {
  check_input(x, spec);
  check_params(spec, p);
  const auto hw = static_cast<Eigen::Index>(spec.feature_width);
  VectorXd G(static_cast<Eigen::Index>(spec.inputs) * hw);
  for (std::size_t j = 0; j < spec.inputs; ++j) {
    const auto r0 = static_cast<Eigen::Index>(j) * hw;
    G.segment(r0, hw) = relu(p.tensors[0].middleRows(r0, hw) * feature_column(x, spec, j) +
                             p.tensors[1].col(0).segment(r0, hw));
  }
  const VectorXd h = relu(p.tensors[2] * G + p.tensors[3].col(0));
  return sigmoid((p.tensors[4] * h)(0) + p.tensors[5](0, 0));
}

Eigen::VectorXd recurrent_state(std::span<const double> x, const NetSpec& spec, const Params& p) {
  if (x.empty()) throw std::invalid_argument("recurrent network needs a non-empty sequence");
  check_input(x, spec);
  check_params(spec, p);
  return run_recurrent(x, spec, p).h.back();
}

double forward_recurrent(std::span<const double> x, const NetSpec& spec, const Params& p) {
  const VectorXd h = recurrent_state(x, spec, p);
  return sigmoid((p.tensors[3] * h)(0) + p.tensors[4](0, 0));
}

double forward(std::span<const double> x, const NetSpec& spec, const Params& params) {
  switch (spec.arch) {
    case Architecture::Ffnn1: return forward_ffnn1(x, spec, params);
    case Architecture::Ffnn2: return forward_ffnn2(x, spec, params);
    case Architecture::Recurrent: return forward_recurrent(x, spec, params);
  }
  throw std::logic_error("unknown architecture");
}

double weighted_bce(std::span<const int> y, std::span<const double> p, double alpha) {
  if (y.size() != p.size() || y.empty()) throw std::invalid_argument("weighted_bce: bad lengths");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = clamp_prob(p[i]);
    sum += y[i] ? (1.0 - alpha) * std::log2(q) : alpha * std::log2(1.0 - q);
  }
  return -sum / static_cast<double>(y.size());
}

double bce(std::span<const int> y, std::span<const double> p) {
  if (y.size() != p.size() || y.empty()) throw std::invalid_argument("bce: bad lengths");
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = clamp_prob(p[i]);
    sum += y[i] ? std::log2(q) : std::log2(1.0 - q);
  }
  return -sum / static_cast<double>(y.size());
}

double positive_fraction(std::span<const int> y) {
  if (y.empty()) throw std::invalid_argument("positive_fraction: empty labels");
  const auto pos = std::count_if(y.begin(), y.end(), [](int v) { return v != 0; });
  return static_cast<double>(pos) / static_cast<double>(y.size());
}

LossAndGrad backward(const Matrix& X, std::span<const int> y, std::span<const std::size_t> rows,
                     const NetSpec& spec, const Params& params, const LossConfig& loss) {
  if (rows.empty()) throw std::invalid_argument("backward: empty batch");
  check_params(spec, params);
  LossAndGrad out{0.0, params.zeros_like()};
  const double n = static_cast<double>(rows.size());
  const double a = loss.alpha;
  for (auto r : rows) {
    const auto x = X.row(r);
    const double p = forward(x, spec, params);
    const double q = clamp_prob(p);
    out.loss += y[r] ? -(1.0 - a) * std::log2(q) : -a * std::log2(1.0 - q);
    // d/dz of the per-instance term, with p = sigmoid(z).
    const double dz = y[r] ? -(1.0 - a) * (1.0 - p) / kLn2 : a * p / kLn2;
    accumulate(x, dz / n, spec, params, out.grad);
  }
  out.loss /= n;
  return out;
}

double batch_loss(const Matrix& X, std::span<const int> y, std::span<const std::size_t> rows,
                  const NetSpec& spec, const Params& params, const LossConfig& loss) {
  std::vector<int> labels;
  std::vector<double> probs;
  for (auto r : rows) {
    labels.push_back(y[r]);
    probs.push_back(forward(X.row(r), spec, params));
  }
  return weighted_bce(labels, probs, loss.alpha);
}

double effective_rate(const OptimizerConfig& config, std::size_t iteration) {
  return config.learning_rate / (1.0 + config.decay * static_cast<double>(iteration));
}

Params lookahead(const Params& params, const OptimizerState& state, const OptimizerConfig& config) {
  Params out = params;
  if (state.velocity.tensors.empty()) return out;
  for (std::size_t i = 0; i < out.tensors.size(); ++i)
    out.tensors[i] += config.momentum * state.velocity.tensors[i];
  return out;
}

void sgd_step(Params& params, const Params& grad, OptimizerState& state,
              const OptimizerConfig& config) {
  if (grad.tensors.size() != params.tensors.size())
    throw std::invalid_argument("sgd_step: gradient does not match parameters");
  if (state.velocity.tensors.empty()) state.velocity = params.zeros_like();
  const double lr = effective_rate(config, state.iteration);
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    if (grad.tensors[i].rows() != params.tensors[i].rows() ||
        grad.tensors[i].cols() != params.tensors[i].cols())
      throw std::invalid_argument("sgd_step: shape mismatch for " + params.names[i]);
    state.velocity.tensors[i] = config.momentum * state.velocity.tensors[i] - lr * grad.tensors[i];
    params.tensors[i] += state.velocity.tensors[i];
  }
  ++state.iteration;
}

std::vector<double> TrainedNet::predict(const Matrix& X) const {
  std::vector<double> out(X.rows());
  for (std::size_t r = 0; r < X.rows(); ++r) out[r] = predict(X.row(r));
  return out;
}

TrainedNet train(const Matrix& X, std::span<const int> y, const NetSpec& spec,
                 const LossConfig& loss, const OptimizerConfig& optimizer, std::uint64_t seed) {
  spec.validate();
  if (X.rows() == 0) throw std::invalid_argument("train: no training rows");
  if (X.cols() != spec.input_length())
    throw std::invalid_argument("train: row width does not match the network input");
  if (optimizer.batch_size == 0) throw std::invalid_argument("train: batch size must be >= 1");

  TrainedNet net{spec, init_params(spec, mix_seed(seed, 0)), seed, {}};
  OptimizerState state;
  std::vector<std::size_t> order(X.rows());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < optimizer.epochs; ++epoch) {
    Rng rng(mix_seed(seed, 1 + epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += optimizer.batch_size) {
      const std::size_t end = std::min(order.size(), start + optimizer.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      const auto ahead = lookahead(net.params, state, optimizer);
      const auto lg = backward(X, y, batch, spec, ahead, loss);
      sgd_step(net.params, lg.grad, state, optimizer);
    }
    const double l = batch_loss(X, y, order, spec, net.params, loss);
    if (!std::isfinite(l))
      throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                               " (non-finite loss) for " + spec.describe());
    net.epoch_loss.push_back(l);
  }
  return net;
}

std::string save_checkpoint(const TrainedNet& net) {
  std::ostringstream out;
  const auto& s = net.spec;
  out << "eventcast-net v1\n"
      << "arch " << arch_name(s.arch) << "\ninputs " << s.inputs << "\nsteps " << s.steps
      << "\nhidden " << s.hidden << "\nfeature_width " << s.feature_width << "\ncell "
      << (s.cell == Cell::Gated ? "gated" : "simple") << "\nseed " << net.seed << "\n";
  for (std::size_t i = 0; i < net.params.tensors.size(); ++i) {
    const auto& t = net.params.tensors[i];
    out << "tensor " << net.params.names[i] << ' ' << t.rows() << ' ' << t.cols() << '\n';
    for (Eigen::Index k = 0; k < t.size(); ++k) out << text::shortest(t.data()[k]) << '\n';
  }
  return out.str();
}

TrainedNet load_checkpoint(const std::string& content) {
  std::istringstream in(content);
  std::string magic, version, key, arch, cell;
  if (!(in >> magic >> version) || magic != "eventcast-net" || version != "v1")
    throw std::runtime_error("not an eventcast-net v1 checkpoint");
  TrainedNet net;
  in >> key >> arch >> key >> net.spec.inputs >> key >> net.spec.steps >> key >> net.spec.hidden >>
      key >> net.spec.feature_width >> key >> cell >> key >> net.seed;
  if (!in) throw std::runtime_error("checkpoint: bad header");
  if (arch == "ffnn1") net.spec.arch = Architecture::Ffnn1;
  else if (arch == "ffnn2") net.spec.arch = Architecture::Ffnn2;
  else if (arch == "recurrent") net.spec.arch = Architecture::Recurrent;
  else throw std::runtime_error("checkpoint: unknown architecture " + arch);
  net.spec.cell = cell == "simple" ? Cell::Simple : Cell::Gated;
  net.params = make_params(net.spec);
  for (std::size_t i = 0; i < net.params.tensors.size(); ++i) {
    std::string name;
    Eigen::Index r = 0, c = 0;
    if (!(in >> key >> name >> r >> c) || key != "tensor" || name != net.params.names[i])
      throw std::runtime_error("checkpoint: unexpected tensor");
    auto& t = net.params.tensors[i];
    if (r != t.rows() || c != t.cols()) throw std::runtime_error("checkpoint: tensor shape mismatch");
    for (Eigen::Index k = 0; k < t.size(); ++k) {
      std::string v;
      in >> v;
      t.data()[k] = text::to_double(v).value();
    }
  }
  return net;
}

std::string epoch_loss_csv(const TrainedNet& net) {
  std::string out = "epoch,loss\n";
  for (std::size_t e = 0; e < net.epoch_loss.size(); ++e)
    out += std::to_string(e + 1) + "," + text::shortest(net.epoch_loss[e]) + "\n";
  return out;
}

}  // namespace eventcast::neural
