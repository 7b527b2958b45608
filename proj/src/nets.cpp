#include "crowdship/nets.hpp"

#include <cstring>
#include <fstream>

namespace crowdship {

void MlpShape::validate() const {
  if (num_locations < 1 || embed_dim < 1 || num_features < 0 || hidden < 1 ||
      hidden_layers < 1)
    throw std::invalid_argument("invalid network shape");
}

long MlpShape::param_count() const {
  long n = static_cast<long>(num_locations) * embed_dim;     // embeddings
  n += static_cast<long>(hidden) * input_dim() + hidden;     // first layer
  for (int l = 1; l < hidden_layers; ++l)
    n += static_cast<long>(hidden) * hidden + hidden;
  n += hidden + 1;  // head
  return n;
}

long Mlp::layer_w_off(int l) const {
  long off = static_cast<long>(shape_.num_locations) * shape_.embed_dim;
  for (int i = 0; i < l; ++i) {
    int in = i == 0 ? shape_.input_dim() : shape_.hidden;
    off += static_cast<long>(shape_.hidden) * in + shape_.hidden;
  }
  return off;
}

long Mlp::layer_b_off(int l) const {
  int in = l == 0 ? shape_.input_dim() : shape_.hidden;
  return layer_w_off(l) + static_cast<long>(shape_.hidden) * in;
}

long Mlp::head_w_off() const { return layer_w_off(shape_.hidden_layers); }
long Mlp::head_b_off() const { return head_w_off() + shape_.hidden; }

Mlp Mlp::initialized(const MlpShape& shape, std::uint64_t seed) {
  shape.validate();
  Mlp net;
  net.shape_ = shape;
  net.params_.resize(shape.param_count());
  RandomStream rng(seed);
  // Embeddings: small Gaussian.
  long ne = static_cast<long>(shape.num_locations) * shape.embed_dim;
  for (long i = 0; i < ne; ++i) net.params_[i] = 0.1 * rng.normal();
  // Linear layers and head: uniform +-1/sqrt(fan_in), biases included.
  for (int l = 0; l <= shape.hidden_layers; ++l) {
    int fan_in = l == 0 ? shape.input_dim()
                        : shape.hidden;  // head fan_in is hidden too
    int fan_out = l == shape.hidden_layers ? 1 : shape.hidden;
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    long begin = net.layer_w_off(l);
    long count = static_cast<long>(fan_out) * fan_in + fan_out;
    for (long i = 0; i < count; ++i)
      net.params_[begin + i] = bound * (2.0 * rng.uniform() - 1.0);
  }
  return net;
}

Mlp Mlp::from_params(const MlpShape& shape, Eigen::VectorXd params) {
  shape.validate();
  if (params.size() != shape.param_count())
    throw std::invalid_argument("parameter vector size does not match shape");
  Mlp net;
  net.shape_ = shape;
  net.params_ = std::move(params);
  return net;
}

namespace {

inline void elu_inplace(Eigen::MatrixXd& m) {
  // ELU with alpha = 1.
  m = m.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
}

// Derivative recovered from the activation output: 1 past zero, y+1 below.
inline Eigen::MatrixXd elu_grad_from_output(const Eigen::MatrixXd& y) {
  return y.unaryExpr([](double v) { return v > 0.0 ? 1.0 : v + 1.0; });
}

}  // namespace

Eigen::VectorXd Mlp::forward(const std::vector<int>& locations,
                             const Eigen::MatrixXd& features,
                             Tape& tape) const {
  const int B = static_cast<int>(locations.size());
  if (features.cols() != B || features.rows() != shape_.num_features)
    throw std::invalid_argument("feature matrix shape mismatch");
  tape.locations = locations;
  tape.input.resize(shape_.input_dim(), B);
  Eigen::Map<const Eigen::MatrixXd> embed(params_.data(), shape_.embed_dim,
                                          shape_.num_locations);
  for (int b = 0; b < B; ++b) {
    int loc = locations[b];
    if (loc < 0 || loc >= shape_.num_locations)
      throw std::out_of_range("location id outside embedding table");
    tape.input.col(b).head(shape_.embed_dim) = embed.col(loc);
    tape.input.col(b).tail(shape_.num_features) = features.col(b);
  }

  tape.hidden.resize(shape_.hidden_layers);
  const Eigen::MatrixXd* prev = &tape.input;
  for (int l = 0; l < shape_.hidden_layers; ++l) {
    int in = l == 0 ? shape_.input_dim() : shape_.hidden;
    Eigen::Map<const Eigen::MatrixXd> W(params_.data() + layer_w_off(l),
                                        shape_.hidden, in);
    Eigen::Map<const Eigen::VectorXd> bias(params_.data() + layer_b_off(l),
                                           shape_.hidden);
    tape.hidden[l].noalias() = W * (*prev);
    tape.hidden[l].colwise() += bias;
    elu_inplace(tape.hidden[l]);
    prev = &tape.hidden[l];
  }
  Eigen::Map<const Eigen::VectorXd> w(params_.data() + head_w_off(),
                                      shape_.hidden);
  double b0 = params_[head_b_off()];
  tape.output = (prev->transpose() * w).array() + b0;
  return tape.output;
}

Eigen::VectorXd Mlp::forward(const std::vector<int>& locations,
                             const Eigen::MatrixXd& features) const {
  Tape tape;
  return forward(locations, features, tape);
}

double Mlp::forward_one(int location, const std::vector<double>& feats) const {
  if (static_cast<int>(feats.size()) != shape_.num_features)
    throw std::invalid_argument("feature vector size mismatch");
  Eigen::MatrixXd f(shape_.num_features, 1);
  for (int i = 0; i < shape_.num_features; ++i) f(i, 0) = feats[i];
  return forward(std::vector<int>{location}, f)(0);
}

void Mlp::backward(const Tape& tape, const Eigen::VectorXd& upstream,
                   Eigen::VectorXd& grad) const {
  const int B = static_cast<int>(tape.locations.size());
  if (upstream.size() != B)
    throw std::invalid_argument("upstream gradient size mismatch");
  if (grad.size() != params_.size())
    throw std::invalid_argument("gradient buffer size mismatch");

  const Eigen::MatrixXd& last = tape.hidden[shape_.hidden_layers - 1];
  // Head.
  Eigen::Map<Eigen::VectorXd> gw(grad.data() + head_w_off(), shape_.hidden);
  gw.noalias() += last * upstream;
  grad[head_b_off()] += upstream.sum();

  Eigen::Map<const Eigen::VectorXd> w(params_.data() + head_w_off(),
                                      shape_.hidden);
  Eigen::MatrixXd delta = w * upstream.transpose();  // hidden x B

  for (int l = shape_.hidden_layers - 1; l >= 0; --l) {
    delta.array() *= elu_grad_from_output(tape.hidden[l]).array();
    int in = l == 0 ? shape_.input_dim() : shape_.hidden;
    const Eigen::MatrixXd& below = l == 0 ? tape.input : tape.hidden[l - 1];
    Eigen::Map<Eigen::MatrixXd> gW(grad.data() + layer_w_off(l), shape_.hidden,
                                   in);
    gW.noalias() += delta * below.transpose();
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + layer_b_off(l), shape_.hidden);
    gb.noalias() += delta.rowwise().sum();
    if (l > 0) {
      Eigen::Map<const Eigen::MatrixXd> W(params_.data() + layer_w_off(l),
                                          shape_.hidden, in);
      Eigen::MatrixXd next_delta;
      next_delta.noalias() = W.transpose() * delta;
      delta = std::move(next_delta);
    } else {
      Eigen::Map<const Eigen::MatrixXd> W(params_.data() + layer_w_off(0),
                                          shape_.hidden, shape_.input_dim());
      Eigen::MatrixXd din = W.transpose() * delta;  // input_dim x B
      Eigen::Map<Eigen::MatrixXd> gembed(grad.data(), shape_.embed_dim,
                                         shape_.num_locations);
      for (int b = 0; b < B; ++b)
        gembed.col(tape.locations[b]) += din.col(b).head(shape_.embed_dim);
    }
  }
}

void AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (params.size() != grad.size())
    throw std::invalid_argument("adam: size mismatch");
  if (!grad.allFinite())
    throw std::runtime_error("adam: non-finite gradient");
  if (m.size() != params.size()) {
    m = Eigen::VectorXd::Zero(params.size());
    v = Eigen::VectorXd::Zero(params.size());
    t = 0;
  }
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  double mhat = 1.0 - std::pow(beta1, static_cast<double>(t));
  double vhat = 1.0 - std::pow(beta2, static_cast<double>(t));
  params.array() -=
      lr * (m.array() / mhat) / ((v.array() / vhat).sqrt() + eps);
}

TargetPair TargetPair::make(const MlpShape& shape, std::uint64_t seed,
                            double tau_value) {
  if (tau_value < 0.0 || tau_value > 1.0)
    throw std::invalid_argument("tau must lie in [0,1]");
  TargetPair pair;
  pair.online = Mlp::initialized(shape, seed);
  pair.target = pair.online;
  pair.tau = tau_value;
  return pair;
}

void TargetPair::soft_update() {
  target.params() = tau * online.params() + (1.0 - tau) * target.params();
}

SumTree::SumTree(std::size_t capacity) : cap_(capacity) {
  while (base_ < capacity) base_ <<= 1;
  tree_.assign(2 * base_, 0.0);
}

void SumTree::set(std::size_t i, double value) {
  if (i >= cap_) throw std::out_of_range("sum tree index");
  std::size_t node = base_ + i;
  tree_[node] = value;
  for (node >>= 1; node >= 1; node >>= 1)
    tree_[node] = tree_[2 * node] + tree_[2 * node + 1];
}

double SumTree::get(std::size_t i) const {
  if (i >= cap_) throw std::out_of_range("sum tree index");
  return tree_[base_ + i];
}

double SumTree::total() const { return tree_[1]; }

std::size_t SumTree::find_prefix(double mass) const {
  std::size_t node = 1;
  while (node < base_) {
    if (mass < tree_[2 * node] || tree_[2 * node + 1] <= 0.0) {
      node = 2 * node;
    } else {
      mass -= tree_[2 * node];
      node = 2 * node + 1;
    }
  }
  return node - base_;
}

namespace {

constexpr char kMagic[8] = {'C', 'S', 'H', 'P', 'N', 'E', 'T', '1'};

nlohmann::ordered_json shape_to_json(const MlpShape& s) {
  return {{"num_locations", s.num_locations}, {"embed_dim", s.embed_dim},
          {"num_features", s.num_features},   {"hidden", s.hidden},
          {"hidden_layers", s.hidden_layers}};
}

MlpShape shape_from_json(const nlohmann::json& j) {
  MlpShape s;
  s.num_locations = j.at("num_locations").get<int>();
  s.embed_dim = j.at("embed_dim").get<int>();
  s.num_features = j.at("num_features").get<int>();
  s.hidden = j.at("hidden").get<int>();
  s.hidden_layers = j.at("hidden_layers").get<int>();
  return s;
}

void write_params(std::ofstream& out, const Eigen::VectorXd& p) {
  out.write(reinterpret_cast<const char*>(p.data()),
            static_cast<std::streamsize>(p.size() * sizeof(double)));
}

}  // namespace

void save_checkpoint(const std::string& path, const TargetPair& pair,
                     const nlohmann::ordered_json& meta) {
  nlohmann::ordered_json header;
  header["format"] = 1;
  header["shape"] = shape_to_json(pair.online.shape());
  header["tau"] = pair.tau;
  header["param_count"] = pair.online.params().size();
  header["meta"] = meta;
  std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  write_params(out, pair.online.params());
  write_params(out, pair.target.params());
  if (!out) throw std::runtime_error("short write on checkpoint: " + path);
}

TargetPair load_checkpoint(const std::string& path,
                           nlohmann::json* meta_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  std::uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string htext(hlen, '\0');
  in.read(htext.data(), hlen);
  if (!in) throw std::runtime_error("truncated checkpoint header: " + path);
  auto header = nlohmann::json::parse(htext);
  MlpShape shape = shape_from_json(header.at("shape"));
  long n = shape.param_count();
  if (header.at("param_count").get<long>() != n)
    throw std::runtime_error("checkpoint field param_count disagrees with shape: " + path);

  auto read_vec = [&](Eigen::VectorXd& v) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  };
  TargetPair pair;
  Eigen::VectorXd online, target;
  read_vec(online);
  read_vec(target);
  if (!in) throw std::runtime_error("truncated checkpoint params: " + path);
  pair.online = Mlp::from_params(shape, std::move(online));
  pair.target = Mlp::from_params(shape, std::move(target));
  pair.tau = header.at("tau").get<double>();
  if (meta_out) *meta_out = header.value("meta", nlohmann::json::object());
  return pair;
}

}  // namespace crowdship
