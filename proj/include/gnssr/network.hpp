#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gnssr/conditioning.hpp"
#include "gnssr/rng.hpp"

namespace gnssr::nn {

// Activation map layout through the convolutional stack: (channels, B * P)
// where P is the number of pixels per sample; column b*P + p holds pixel p
// of sample b. Dense layers use (features, B).

inline constexpr int kDdmPixels = io::kDelayBins * io::kDopplerBins;  // 187

double leaky_relu(double x, double slope);
double softplus(double x);   // numerically stable
double sigmoid(double x);

// 3x3 same-padding convolution over the fixed DDM geometry, via column
// gathering and one matrix product per call.
class Conv2D {
 public:
  Conv2D(int in_channels, int out_channels, Rng& rng);

  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x);
  // dy -> dx; accumulates weight gradients.
  const Eigen::MatrixXd& backward(const Eigen::MatrixXd& dy);

  int in_channels() const { return cin_; }
  int out_channels() const { return cout_; }

  Eigen::MatrixXd weight;  // (cout, 9*cin), tap-major blocks of cin
  Eigen::MatrixXd bias;    // (cout, 1)
  Eigen::MatrixXd dweight, dbias;

 private:
  int cin_, cout_;
  Eigen::MatrixXd cols_, y_, dcols_, dx_;
};

class Dense {
 public:
  Dense(int in, int out, Rng& rng, double weight_scale = -1.0,
        double bias_init = 0.0);

  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x);
  const Eigen::MatrixXd& backward(const Eigen::MatrixXd& dy);

  Eigen::MatrixXd weight;  // (out, in)
  Eigen::MatrixXd bias;    // (out, 1)
  Eigen::MatrixXd dweight, dbias;

 private:
  Eigen::MatrixXd x_, y_, dx_;
};

class LeakyRelu {
 public:
  explicit LeakyRelu(double slope) : slope_(slope) {}
  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x);
  const Eigen::MatrixXd& backward(const Eigen::MatrixXd& dy);

 private:
  double slope_;
  Eigen::MatrixXd y_, dx_;
};

// Inverted dropout: scaling at train time, identity at evaluation.
class Dropout {
 public:
  explicit Dropout(double p);
  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x, bool training,
                                 Rng* rng);
  const Eigen::MatrixXd& backward(const Eigen::MatrixXd& dy);

 private:
  double p_;
  bool active_ = false;
  Eigen::MatrixXd mask_, y_, dx_;
};

// 2x2 stride-2 max pooling over the 17x11 grid (trailing row/column
// dropped), giving 8x5 = 40 pixels per sample.
class MaxPool2 {
 public:
  static constexpr int kOutRows = io::kDelayBins / 2;     // 8
  static constexpr int kOutCols = io::kDopplerBins / 2;   // 5
  static constexpr int kOutPixels = kOutRows * kOutCols;  // 40

  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x);
  const Eigen::MatrixXd& backward(const Eigen::MatrixXd& dy);

 private:
  Eigen::MatrixXd y_, dx_;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> argmax_;
  Eigen::Index in_cols_ = 0;
};

// Channel-preserving residual unit with an identity skip:
//   y = act(x + conv2(act(conv1(x))))
// With both convolutions zeroed the block reduces to act(x).
class ResidualBlock {
 public:
  ResidualBlock(int channels, double slope, Rng& rng);

  const Eigen::MatrixXd& forward(const Eigen::MatrixXd& x);
  const Eigen::MatrixXd& backward(const Eigen::MatrixXd& dy);

  Conv2D conv1, conv2;
  LeakyRelu act_mid;

 private:
  double slope_;
  Eigen::MatrixXd y_, dx_;
};

struct NetworkConfig {
  bool use_ddm_branch = true;
  int ancillary_inputs = cond::kAncillaryFeatures;  // 0 removes the branch
  std::array<int, 2> channels{6, 10};  // stem block, deep block
  int ancillary_dense = 24;
  std::array<int, 2> head_dense{48, 24};
  double leaky_slope = 0.01;
  double dropout = 0.02;
  double output_bias_init = -1.5;
  std::uint64_t init_seed = 1;

  void validate() const;
  // Architecture fingerprint; excludes the initialization seed.
  std::uint64_t config_hash() const;
};

struct NamedTensor {
  std::string name;
  Eigen::MatrixXd value;
};

struct ModelWeights {
  NetworkConfig config;
  std::vector<NamedTensor> tensors;
  std::map<std::string, std::string> meta;

  void save(const std::filesystem::path& path) const;
  static ModelWeights load(const std::filesystem::path& path);
  std::uint64_t content_hash() const;  // over tensor names and values
};

// Residual regression network: DDM branch (stem conv, residual block,
// transition conv, residual block, max pool) concatenated with a dense
// ancillary branch, followed by two dropout-regularized dense layers and a
// softplus output node.
class Network {
 public:
  explicit Network(const NetworkConfig& cfg);

  const NetworkConfig& config() const { return cfg_; }

  // ddm: (187, B) normalized DDMs (ignored when the branch is off);
  // anc: (ancillary_inputs, B). Returns (B) predictions, always > 0.
  Eigen::VectorXd forward(const Eigen::MatrixXd& ddm,
                          const Eigen::MatrixXd& anc, bool training = false,
                          Rng* rng = nullptr);
  // dpred: (B) loss gradient w.r.t. predictions.
  void backward(const Eigen::VectorXd& dpred);
  void zero_grads();

  struct ParamRef {
    std::string name;
    Eigen::MatrixXd* value;
    Eigen::MatrixXd* grad;
  };
  std::vector<ParamRef> params();
  std::size_t parameter_count() const;

  ModelWeights export_weights() const;
  void import_weights(const ModelWeights& w);
  static Network from_weights(const ModelWeights& w);

  // Batched inference over a dataset.
  Eigen::VectorXd predict(const cond::Dataset& data, int batch_size = 512);

 private:
  struct Stack;
  NetworkConfig cfg_;
  std::vector<std::unique_ptr<Conv2D>> convs_;      // stem, transition
  std::vector<std::unique_ptr<ResidualBlock>> blocks_;
  std::vector<std::unique_ptr<LeakyRelu>> conv_acts_;
  MaxPool2 pool_;
  std::unique_ptr<Dense> anc_dense_;
  std::unique_ptr<LeakyRelu> anc_act_;
  std::vector<std::unique_ptr<Dense>> head_;
  std::vector<std::unique_ptr<LeakyRelu>> head_acts_;
  std::vector<std::unique_ptr<Dropout>> head_drops_;
  std::unique_ptr<Dense> out_;
  Eigen::MatrixXd flat_, concat_, dflat_, dddm_unused_;
  Eigen::MatrixXd out_x_;  // softplus pre-activation
  Eigen::VectorXd pred_;
  Eigen::Index last_batch_ = 0;
};

}  // namespace gnssr::nn
