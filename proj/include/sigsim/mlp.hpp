#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace sigsim {

struct TrainConfig {
  int epochs = 2000;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double validation_fraction = 0.1;
  uint64_t seed = 1;

  void validate() const;
};

// Scalar-output perceptron with ReLU hidden layers and identity output.
// Inputs are normalized internally with the affine map captured at training
// time, so forward() takes raw feature vectors.
class MlpNetwork {
 public:
  MlpNetwork() = default;
  explicit MlpNetwork(std::vector<int> layer_sizes);  // zero weights

  static MlpNetwork random_init(std::vector<int> layer_sizes, uint64_t seed);

  double forward(const Eigen::VectorXd& x) const;

  int input_size() const { return layer_sizes_.empty() ? 0 : layer_sizes_.front(); }
  const std::vector<int>& layer_sizes() const { return layer_sizes_; }

  void set_normalization(Eigen::VectorXd mean, Eigen::VectorXd scale);

  void save(const std::string& path) const;
  static MlpNetwork load(const std::string& path);

  bool operator==(const MlpNetwork& other) const;

  // Training internals need direct access.
  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }
  const Eigen::VectorXd& input_mean() const { return mean_; }
  const Eigen::VectorXd& input_scale() const { return scale_; }

  // Batched forward over normalized columns; used by training and tests.
  Eigen::RowVectorXd forward_normalized_batch(const Eigen::MatrixXd& x_norm) const;
  Eigen::VectorXd normalize(const Eigen::VectorXd& x) const;

 private:
  void check_dimensions() const;

  std::vector<int> layer_sizes_;
  std::vector<Eigen::MatrixXd> weights_;  // weights_[l]: sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd scale_;
};

// The architecture used for every transfer predictor.
std::vector<int> default_transfer_layers();  // {3, 10, 10, 5, 1}

struct TrainResult {
  MlpNetwork net;
  double train_mse = 0.0;
  double val_mse = 0.0;
  bool degenerate = false;  // all targets identical: constant predictor
  std::vector<double> epoch_train_mse;
};

// Minimizes mean squared error with Adam. Deterministic given cfg.seed.
// X is one sample per row. Requires >= 10 samples.
TrainResult train(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const std::vector<int>& layer_sizes, const TrainConfig& cfg);

// Mean squared error of net over (X, y).
double evaluate_mse(const MlpNetwork& net, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

}  // namespace sigsim
