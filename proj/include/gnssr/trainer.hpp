#pragma once

#include <cstdint>
#include <vector>

#include "gnssr/network.hpp"

namespace gnssr::nn {

enum class Optimizer { kAdam, kSgd };

struct TrainConfig {
  int epochs = 30;
  int batch_size = 256;
  double lr = 3e-4;
  Optimizer optimizer = Optimizer::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t shuffle_seed = 7;
  bool shuffle = true;
};

double mse_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& target);
Eigen::VectorXd mse_grad(const Eigen::VectorXd& pred,
                         const Eigen::VectorXd& target);

double evaluate_loss(Network& net, const cond::Dataset& data,
                     int batch_size = 512);

// First-moment/second-moment optimizer state over a network's parameters.
// kSgd ignores the moment buffers and applies plain gradient descent.
class OptimizerState {
 public:
  OptimizerState(Network& net, const TrainConfig& cfg);
  void step(double lr);

 private:
  Network* net_;
  TrainConfig cfg_;
  long t_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

struct EpochStats {
  double train_loss = 0.0;
  double dev_loss = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> curve;
  int best_epoch = -1;  // 0-based index into curve
  double best_dev_loss = 0.0;
  ModelWeights best_weights;   // snapshot at the best dev epoch
  ModelWeights final_weights;  // after the last epoch
};

// Mini-batch training with a fixed learning rate; deterministic for a given
// seed. Snapshots the weights at the epoch with the lowest dev loss.
TrainResult train_network(Network& net, const cond::Dataset& train,
                          const cond::Dataset& dev, const TrainConfig& cfg);

// ------------------------------------------------- learning-rate range scan

struct LrFinderConfig {
  double lr_min = 1e-8;
  double lr_max = 1.0;
  int steps = 100;           // geometric ladder from lr_min to lr_max
  double smoothing = 0.98;   // EMA factor on the loss trace
  double blowup_factor = 4.0;
};

struct LrRangeResult {
  std::vector<double> lrs;       // ladder actually visited
  std::vector<double> losses;    // raw batch loss at each step
  std::vector<double> smoothed;  // bias-corrected EMA
  int steepest_index = -1;       // fastest smoothed-loss descent
  int stop_index = -1;           // first step considered blown up, -1 if none
  double lr_low = 0.0;           // steepest-descent lr / 10
  double lr_high = 0.0;          // last lr before blow-up
};

// Anything that can take one optimizer step at a prescribed learning rate
// and report the pre-step batch loss.
class SweepModel {
 public:
  virtual ~SweepModel() = default;
  virtual double sweep_step(double lr) = 0;
};

LrRangeResult lr_sweep(SweepModel& model, const LrFinderConfig& cfg);

// Runs the scan on a fresh copy of the given initial weights; the caller's
// network state is not touched.
LrRangeResult find_lr_range(const ModelWeights& init,
                            const cond::Dataset& train,
                            const TrainConfig& base,
                            const LrFinderConfig& cfg);

}  // namespace gnssr::nn
