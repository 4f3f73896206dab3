#include "sigsim/mlp.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>

#include "sigsim/errors.hpp"
#include "sigsim/random.hpp"
#include "sigsim/util.hpp"

namespace sigsim {

void TrainConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0 || !(learning_rate > 0.0)) {
    throw DataError("train config fields must be positive");
  }
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw DataError("validation_fraction must be in (0, 1)");
  }
}

MlpNetwork::MlpNetwork(std::vector<int> layer_sizes) : layer_sizes_(std::move(layer_sizes)) {
  if (layer_sizes_.size() < 2) throw DimensionMismatch("network needs at least two layers");
  for (int s : layer_sizes_) {
    if (s <= 0) throw DimensionMismatch("layer sizes must be positive");
  }
  for (size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    weights_.push_back(Eigen::MatrixXd::Zero(layer_sizes_[l + 1], layer_sizes_[l]));
    biases_.push_back(Eigen::VectorXd::Zero(layer_sizes_[l + 1]));
  }
  mean_ = Eigen::VectorXd::Zero(layer_sizes_.front());
  scale_ = Eigen::VectorXd::Ones(layer_sizes_.front());
}

MlpNetwork MlpNetwork::random_init(std::vector<int> layer_sizes, uint64_t seed) {
  MlpNetwork net(std::move(layer_sizes));
  Rng rng(seed);
  for (size_t l = 0; l < net.weights_.size(); ++l) {
    const double bound = std::sqrt(6.0 / net.layer_sizes_[l]);
    for (Eigen::Index i = 0; i < net.weights_[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < net.weights_[l].cols(); ++j) {
        net.weights_[l](i, j) = rng.uniform(-bound, bound);
      }
    }
  }
  return net;
}

void MlpNetwork::set_normalization(Eigen::VectorXd mean, Eigen::VectorXd scale) {
  if (mean.size() != input_size() || scale.size() != input_size()) {
    throw DimensionMismatch("normalization vectors must match input size");
  }
  mean_ = std::move(mean);
  scale_ = std::move(scale);
}

Eigen::VectorXd MlpNetwork::normalize(const Eigen::VectorXd& x) const {
  return (x - mean_).cwiseProduct(scale_);
}

double MlpNetwork::forward(const Eigen::VectorXd& x) const {
  if (x.size() != input_size()) {
    throw DimensionMismatch("input has " + std::to_string(x.size()) + " features, network expects " +
                            std::to_string(input_size()));
  }
  Eigen::VectorXd a = normalize(x);
  for (size_t l = 0; l < weights_.size(); ++l) {
    a = (weights_[l] * a + biases_[l]).eval();
    if (l + 1 < weights_.size()) a = a.cwiseMax(0.0);
  }
  return a[0];
}

Eigen::RowVectorXd MlpNetwork::forward_normalized_batch(const Eigen::MatrixXd& x_norm) const {
  Eigen::MatrixXd a = x_norm;
  for (size_t l = 0; l < weights_.size(); ++l) {
    a = ((weights_[l] * a).colwise() + biases_[l]).eval();
    if (l + 1 < weights_.size()) a = a.cwiseMax(0.0);
  }
  return a.row(0);
}

bool MlpNetwork::operator==(const MlpNetwork& other) const {
  if (layer_sizes_ != other.layer_sizes_) return false;
  for (size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l] != other.weights_[l] || biases_[l] != other.biases_[l]) return false;
  }
  return mean_ == other.mean_ && scale_ == other.scale_;
}

void MlpNetwork::check_dimensions() const {
  if (layer_sizes_.size() < 2 || weights_.size() != layer_sizes_.size() - 1 ||
      biases_.size() != weights_.size()) {
    throw CorruptModel("inconsistent layer structure");
  }
  for (size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].rows() != layer_sizes_[l + 1] || weights_[l].cols() != layer_sizes_[l] ||
        biases_[l].size() != layer_sizes_[l + 1]) {
      throw CorruptModel("weight matrix dimensions do not chain");
    }
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) {
      throw CorruptModel("non-finite parameters");
    }
  }
}

namespace {

constexpr char kMagic[7] = {'S', 'I', 'G', 'M', 'L', 'P', '1'};

void append_bytes(std::string& buf, const void* data, size_t n) {
  buf.append(static_cast<const char*>(data), n);
}

void append_u32(std::string& buf, uint32_t v) { append_bytes(buf, &v, sizeof v); }

void append_f64s(std::string& buf, const double* data, size_t n) {
  append_bytes(buf, data, n * sizeof(double));
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  void read(void* out, size_t n) {
    if (pos + n > buf.size()) throw CorruptModel("model file truncated");
    std::memcpy(out, buf.data() + pos, n);
    pos += n;
  }
  uint32_t read_u32() {
    uint32_t v = 0;
    read(&v, sizeof v);
    return v;
  }
};

}  // namespace

void MlpNetwork::save(const std::string& path) const {
  std::string buf;
  append_bytes(buf, kMagic, sizeof kMagic);
  append_u32(buf, static_cast<uint32_t>(layer_sizes_.size()));
  for (int s : layer_sizes_) append_u32(buf, static_cast<uint32_t>(s));
  append_f64s(buf, mean_.data(), static_cast<size_t>(mean_.size()));
  append_f64s(buf, scale_.data(), static_cast<size_t>(scale_.size()));
  for (size_t l = 0; l < weights_.size(); ++l) {
    // row-major on disk
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = weights_[l];
    append_f64s(buf, rm.data(), static_cast<size_t>(rm.size()));
    append_f64s(buf, biases_[l].data(), static_cast<size_t>(biases_[l].size()));
  }
  const uint64_t checksum = fnv1a64(buf);
  append_bytes(buf, &checksum, sizeof checksum);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write model file: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("write failed: " + path);
}

MlpNetwork MlpNetwork::load(const std::string& path) {
  const std::string buf = read_text_file(path);
  if (buf.size() < sizeof kMagic + sizeof(uint64_t)) throw CorruptModel("model file truncated");
  if (std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatVersionMismatch("not a recognized model file: " + path);
  }
  const uint64_t stored_checksum = [&] {
    uint64_t v = 0;
    std::memcpy(&v, buf.data() + buf.size() - sizeof v, sizeof v);
    return v;
  }();
  if (fnv1a64(std::string_view(buf.data(), buf.size() - sizeof(uint64_t))) != stored_checksum) {
    throw CorruptModel("model checksum mismatch: " + path);
  }

  Reader rd{buf, sizeof kMagic};
  const uint32_t n_layers = rd.read_u32();
  if (n_layers < 2 || n_layers > 64) throw CorruptModel("implausible layer count");
  std::vector<int> sizes(n_layers);
  for (uint32_t i = 0; i < n_layers; ++i) {
    const uint32_t s = rd.read_u32();
    if (s == 0 || s > 1000000) throw CorruptModel("implausible layer size");
    sizes[i] = static_cast<int>(s);
  }
  MlpNetwork net(sizes);
  rd.read(net.mean_.data(), static_cast<size_t>(net.mean_.size()) * sizeof(double));
  rd.read(net.scale_.data(), static_cast<size_t>(net.scale_.size()) * sizeof(double));
  for (size_t l = 0; l < net.weights_.size(); ++l) {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(sizes[l + 1], sizes[l]);
    rd.read(rm.data(), static_cast<size_t>(rm.size()) * sizeof(double));
    net.weights_[l] = rm;
    rd.read(net.biases_[l].data(), static_cast<size_t>(net.biases_[l].size()) * sizeof(double));
  }
  if (rd.pos != buf.size() - sizeof(uint64_t)) throw CorruptModel("trailing bytes in model file");
  net.check_dimensions();
  return net;
}

std::vector<int> default_transfer_layers() { return {3, 10, 10, 5, 1}; }

double evaluate_mse(const MlpNetwork& net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw DimensionMismatch("X/y row mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double d = net.forward(X.row(i).transpose()) - y[i];
    acc += d * d;
  }
  return X.rows() > 0 ? acc / static_cast<double>(X.rows()) : 0.0;
}

TrainResult train(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const std::vector<int>& layer_sizes, const TrainConfig& cfg) {
  cfg.validate();
  if (X.rows() != y.size()) throw DimensionMismatch("X/y row mismatch");
  if (X.rows() < 10) throw DataError("training needs at least 10 samples");
  if (layer_sizes.empty() || layer_sizes.front() != X.cols() || layer_sizes.back() != 1) {
    throw DimensionMismatch("layer sizes must run from feature count to 1");
  }
  if (!X.allFinite() || !y.allFinite()) throw DataError("training data must be finite");

  const Eigen::Index n = X.rows();
  const Eigen::Index d = X.cols();

  TrainResult result;

  // Constant targets: training is pointless, return the constant predictor.
  bool constant = true;
  for (Eigen::Index i = 1; i < n && constant; ++i) {
    if (std::abs(y[i] - y[0]) > 1e-12) constant = false;
  }
  if (constant) {
    std::cerr << "warning: degenerate training data (constant target " << y[0]
              << "), returning constant predictor\n";
    MlpNetwork net(layer_sizes);
    net.biases().back()[0] = y[0];
    result.net = std::move(net);
    result.degenerate = true;
    return result;
  }

  Rng rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  const Eigen::Index n_val = std::max<Eigen::Index>(
      1, static_cast<Eigen::Index>(std::llround(cfg.validation_fraction * static_cast<double>(n))));
  const Eigen::Index n_train = n - n_val;
  if (n_train < 2) throw DataError("validation fraction leaves too few training samples");

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < n_train; ++i) mean += X.row(order[static_cast<size_t>(i)]).transpose();
  mean /= static_cast<double>(n_train);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < n_train; ++i) {
    const Eigen::VectorXd c = X.row(order[static_cast<size_t>(i)]).transpose() - mean;
    var += c.cwiseProduct(c);
  }
  var /= static_cast<double>(n_train);
  Eigen::VectorXd scale(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt(var[j]);
    scale[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }

  MlpNetwork net = MlpNetwork::random_init(layer_sizes, rng.next_u64());
  net.set_normalization(mean, scale);

  // Targets are standardized for training and the affine map is folded back
  // into the linear output layer afterwards, so small-magnitude targets do
  // not slow the optimizer down.
  double y_mean = 0.0;
  for (Eigen::Index i = 0; i < n_train; ++i) y_mean += y[order[static_cast<size_t>(i)]];
  y_mean /= static_cast<double>(n_train);
  double y_var = 0.0;
  for (Eigen::Index i = 0; i < n_train; ++i) {
    const double c = y[order[static_cast<size_t>(i)]] - y_mean;
    y_var += c * c;
  }
  const double y_std = std::max(std::sqrt(y_var / static_cast<double>(n_train)), 1e-12);

  // Pre-normalized columns for batched passes.
  Eigen::MatrixXd train_x(d, n_train);
  Eigen::VectorXd train_y(n_train);
  for (Eigen::Index i = 0; i < n_train; ++i) {
    train_x.col(i) = net.normalize(X.row(order[static_cast<size_t>(i)]).transpose());
    train_y[i] = (y[order[static_cast<size_t>(i)]] - y_mean) / y_std;
  }
  Eigen::MatrixXd val_x(d, n_val);
  Eigen::VectorXd val_y(n_val);
  for (Eigen::Index i = 0; i < n_val; ++i) {
    val_x.col(i) = net.normalize(X.row(order[static_cast<size_t>(n_train + i)]).transpose());
    val_y[i] = y[order[static_cast<size_t>(n_train + i)]];
  }

  auto& weights = net.weights();
  auto& biases = net.biases();
  const size_t n_layers = weights.size();
  std::vector<Eigen::MatrixXd> m_w(n_layers), v_w(n_layers);
  std::vector<Eigen::VectorXd> m_b(n_layers), v_b(n_layers);
  for (size_t l = 0; l < n_layers; ++l) {
    m_w[l] = Eigen::MatrixXd::Zero(weights[l].rows(), weights[l].cols());
    v_w[l] = m_w[l];
    m_b[l] = Eigen::VectorXd::Zero(biases[l].size());
    v_b[l] = m_b[l];
  }

  std::vector<Eigen::Index> batch_order(static_cast<size_t>(n_train));
  std::iota(batch_order.begin(), batch_order.end(), 0);

  std::vector<Eigen::MatrixXd> activations(n_layers + 1);
  std::vector<Eigen::MatrixXd> pre(n_layers);
  long step = 0;
  constexpr double kAdamEps = 1e-8;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(batch_order);
    double epoch_loss = 0.0;
    Eigen::Index seen = 0;
    for (Eigen::Index start = 0; start < n_train; start += cfg.batch_size) {
      const Eigen::Index bs = std::min<Eigen::Index>(cfg.batch_size, n_train - start);
      Eigen::MatrixXd xb(d, bs);
      Eigen::VectorXd yb(bs);
      for (Eigen::Index i = 0; i < bs; ++i) {
        xb.col(i) = train_x.col(batch_order[static_cast<size_t>(start + i)]);
        yb[i] = train_y[batch_order[static_cast<size_t>(start + i)]];
      }

      activations[0] = xb;
      for (size_t l = 0; l < n_layers; ++l) {
        pre[l] = (weights[l] * activations[l]).colwise() + biases[l];
        activations[l + 1] = l + 1 < n_layers ? pre[l].cwiseMax(0.0) : pre[l];
      }
      const Eigen::RowVectorXd err = activations[n_layers].row(0) - yb.transpose();
      epoch_loss += err.squaredNorm();
      seen += bs;

      Eigen::MatrixXd delta = (2.0 / static_cast<double>(bs)) * err;
      ++step;
      const double corr1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double corr2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (size_t li = n_layers; li-- > 0;) {
        const Eigen::MatrixXd grad_w = delta * activations[li].transpose();
        const Eigen::VectorXd grad_b = delta.rowwise().sum();
        if (li > 0) {
          delta = (weights[li].transpose() * delta)
                      .cwiseProduct((pre[li - 1].array() > 0.0).cast<double>().matrix());
        }
        m_w[li] = cfg.beta1 * m_w[li] + (1.0 - cfg.beta1) * grad_w;
        v_w[li] = cfg.beta2 * v_w[li] + (1.0 - cfg.beta2) * grad_w.cwiseProduct(grad_w);
        m_b[li] = cfg.beta1 * m_b[li] + (1.0 - cfg.beta1) * grad_b;
        v_b[li] = cfg.beta2 * v_b[li] + (1.0 - cfg.beta2) * grad_b.cwiseProduct(grad_b);
        weights[li] -= (cfg.learning_rate / corr1) *
                       (m_w[li].array() / ((v_w[li].array() / corr2).sqrt() + kAdamEps)).matrix();
        biases[li] -= (cfg.learning_rate / corr1) *
                      (m_b[li].array() / ((v_b[li].array() / corr2).sqrt() + kAdamEps)).matrix();
      }
    }
    result.epoch_train_mse.push_back(epoch_loss * y_std * y_std / static_cast<double>(seen));
  }

  weights.back() *= y_std;
  biases.back() = biases.back() * y_std + Eigen::VectorXd::Constant(1, y_mean);

  const Eigen::RowVectorXd train_pred = net.forward_normalized_batch(train_x);
  result.train_mse =
      (train_pred.transpose() - (train_y * y_std + Eigen::VectorXd::Constant(n_train, y_mean)))
          .squaredNorm() /
      static_cast<double>(n_train);
  const Eigen::RowVectorXd val_pred = net.forward_normalized_batch(val_x);
  result.val_mse = (val_pred.transpose() - val_y).squaredNorm() / static_cast<double>(n_val);
  result.net = std::move(net);
  return result;
}

}  // namespace sigsim
