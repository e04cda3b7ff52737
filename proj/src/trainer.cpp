#include "gnssr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gnssr::nn {

double mse_loss(const Eigen::VectorXd& pred, const Eigen::VectorXd& target) {
  if (pred.size() != target.size() || pred.size() == 0)
    throw std::invalid_argument("mse_loss: size mismatch");
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

Eigen::VectorXd mse_grad(const Eigen::VectorXd& pred,
                         const Eigen::VectorXd& target) {
  if (pred.size() != target.size() || pred.size() == 0)
    throw std::invalid_argument("mse_grad: size mismatch");
  return 2.0 / static_cast<double>(pred.size()) * (pred - target);
}

double evaluate_loss(Network& net, const cond::Dataset& data, int batch_size) {
  const Eigen::Index n = data.size();
  if (n == 0) throw std::invalid_argument("evaluate_loss: empty dataset");
  if (data.target.size() != n)
    throw std::invalid_argument("evaluate_loss: dataset has no targets");
  if (batch_size <= 0) throw std::invalid_argument("evaluate_loss: batch_size");
  double acc = 0.0;
  for (Eigen::Index off = 0; off < n; off += batch_size) {
    const Eigen::Index nb = std::min<Eigen::Index>(batch_size, n - off);
    const Eigen::VectorXd pred =
        net.forward(data.ddm.cols() > 0
                        ? Eigen::MatrixXd(data.ddm.middleCols(off, nb))
                        : Eigen::MatrixXd(),
                    data.ancillary.rows() > 0
                        ? Eigen::MatrixXd(data.ancillary.middleCols(off, nb))
                        : Eigen::MatrixXd(0, nb),
                    false, nullptr);
    acc += (pred - data.target.segment(off, nb)).squaredNorm();
  }
  return acc / static_cast<double>(n);
}

OptimizerState::OptimizerState(Network& net, const TrainConfig& cfg)
    : net_(&net), cfg_(cfg) {
  if (cfg.optimizer == Optimizer::kAdam) {
    if (!(cfg.beta1 >= 0 && cfg.beta1 < 1) ||
        !(cfg.beta2 >= 0 && cfg.beta2 < 1) || !(cfg.eps > 0))
      throw std::invalid_argument("OptimizerState: bad Adam constants");
    for (const auto& p : net.params()) {
      m_.push_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
      v_.push_back(Eigen::MatrixXd::Zero(p.value->rows(), p.value->cols()));
    }
  }
}

void OptimizerState::step(double lr) {
  if (!(lr > 0) || !std::isfinite(lr))
    throw std::invalid_argument("OptimizerState::step: lr must be positive");
  auto params = net_->params();
  if (cfg_.optimizer == Optimizer::kSgd) {
    for (auto& p : params) *p.value -= lr * *p.grad;
    return;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * *p.grad;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad->cwiseAbs2();
    p.value->noalias() -=
        (lr / c1) * (m_[i].array() / ((v_[i].array() / c2).sqrt() + cfg_.eps))
                        .matrix();
  }
}

namespace {

void gather_batch(const cond::Dataset& data, const std::vector<int>& idx,
                  Eigen::Index off, Eigen::Index nb, Eigen::MatrixXd& ddm,
                  Eigen::MatrixXd& anc, Eigen::VectorXd& tgt) {
  ddm.resize(data.ddm.rows(), nb);
  anc.resize(data.ancillary.rows(), nb);
  tgt.resize(nb);
  for (Eigen::Index j = 0; j < nb; ++j) {
    const int s = idx[static_cast<std::size_t>(off + j)];
    if (ddm.rows() > 0) ddm.col(j) = data.ddm.col(s);
    if (anc.rows() > 0) anc.col(j) = data.ancillary.col(s);
    tgt[j] = data.target[s];
  }
}

void check_train_inputs(const Network& net, const cond::Dataset& d,
                        const char* what) {
  if (d.size() == 0)
    throw std::invalid_argument(std::string(what) + " dataset is empty");
  if (d.target.size() != d.size())
    throw std::invalid_argument(std::string(what) + " dataset has no targets");
  if (net.config().ancillary_inputs != static_cast<int>(d.ancillary.rows()))
    throw std::invalid_argument(std::string(what) +
                                " ancillary width does not match the network");
}

}  // namespace

TrainResult train_network(Network& net, const cond::Dataset& train,
                          const cond::Dataset& dev, const TrainConfig& cfg) {
  if (cfg.epochs <= 0 || cfg.batch_size <= 0 || !(cfg.lr > 0))
    throw std::invalid_argument("train_network: bad schedule");
  check_train_inputs(net, train, "train");
  check_train_inputs(net, dev, "dev");

  const Eigen::Index n = train.size();
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng shuffle_rng(cfg.shuffle_seed);
  Rng drop_rng(cfg.shuffle_seed ^ 0x5851f42d4c957f2dULL);

  OptimizerState opt(net, cfg);
  TrainResult res;
  Eigen::MatrixXd bd, ba;
  Eigen::VectorXd bt;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) shuffle_rng.shuffle(idx);
    double acc = 0.0;
    for (Eigen::Index off = 0; off < n; off += cfg.batch_size) {
      const Eigen::Index nb = std::min<Eigen::Index>(cfg.batch_size, n - off);
      gather_batch(train, idx, off, nb, bd, ba, bt);
      const Eigen::VectorXd pred = net.forward(bd, ba, true, &drop_rng);
      acc += (pred - bt).squaredNorm();
      net.zero_grads();
      net.backward(mse_grad(pred, bt));
      opt.step(cfg.lr);
    }
    EpochStats st;
    st.train_loss = acc / static_cast<double>(n);
    st.dev_loss = evaluate_loss(net, dev);
    res.curve.push_back(st);
    if (res.best_epoch < 0 || st.dev_loss < res.best_dev_loss) {
      res.best_epoch = epoch;
      res.best_dev_loss = st.dev_loss;
      res.best_weights = net.export_weights();
    }
  }
  res.final_weights = net.export_weights();
  return res;
}

LrRangeResult lr_sweep(SweepModel& model, const LrFinderConfig& cfg) {
  if (cfg.steps < 2 || !(cfg.lr_min > 0) || !(cfg.lr_max > cfg.lr_min) ||
      !(cfg.smoothing >= 0 && cfg.smoothing < 1) || !(cfg.blowup_factor > 1))
    throw std::invalid_argument("lr_sweep: bad finder configuration");

  LrRangeResult r;
  const double ratio = cfg.lr_max / cfg.lr_min;
  double ema = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < cfg.steps; ++i) {
    const double lr =
        cfg.lr_min * std::pow(ratio, static_cast<double>(i) /
                                         static_cast<double>(cfg.steps - 1));
    const double loss = model.sweep_step(lr);
    r.lrs.push_back(lr);
    r.losses.push_back(loss);
    if (!std::isfinite(loss)) {
      r.smoothed.push_back(loss);
      r.stop_index = i;
      break;
    }
    ema = cfg.smoothing * ema + (1.0 - cfg.smoothing) * loss;
    const double sm =
        ema / (1.0 - std::pow(cfg.smoothing, static_cast<double>(i + 1)));
    r.smoothed.push_back(sm);
    if (i > 0 && sm > cfg.blowup_factor * best) {
      r.stop_index = i;
      break;
    }
    best = std::min(best, sm);
  }

  const int last = static_cast<int>(r.smoothed.size()) - 1;
  const int last_good = (r.stop_index >= 0) ? r.stop_index - 1 : last;
  double steepest = 0.0;
  int min_at = 0;
  for (int i = 1; i <= last_good; ++i) {
    const double d = r.smoothed[static_cast<std::size_t>(i)] -
                     r.smoothed[static_cast<std::size_t>(i - 1)];
    if (d < steepest) {
      steepest = d;
      r.steepest_index = i;
    }
    if (r.smoothed[static_cast<std::size_t>(i)] <
        r.smoothed[static_cast<std::size_t>(min_at)])
      min_at = i;
  }
  if (r.steepest_index < 0) r.steepest_index = min_at;  // monotone climb
  r.lr_high = (last_good >= 0) ? r.lrs[static_cast<std::size_t>(last_good)]
                               : r.lrs.front();
  r.lr_low = r.lrs[static_cast<std::size_t>(r.steepest_index)] / 10.0;
  if (r.lr_low > r.lr_high) r.lr_low = r.lr_high / 10.0;
  return r;
}

namespace {

class NetworkSweep final : public SweepModel {
 public:
  NetworkSweep(Network& net, const cond::Dataset& train,
               const TrainConfig& base)
      : net_(net),
        train_(train),
        opt_(net, base),
        drop_rng_(base.shuffle_seed ^ 0x9e3779b97f4a7c15ULL),
        batch_(base.batch_size) {
    idx_.resize(static_cast<std::size_t>(train.size()));
    std::iota(idx_.begin(), idx_.end(), 0);
    Rng rng(base.shuffle_seed);
    if (base.shuffle) rng.shuffle(idx_);
  }

  double sweep_step(double lr) override {
    const Eigen::Index n = train_.size();
    const Eigen::Index nb = std::min<Eigen::Index>(batch_, n - off_);
    gather_batch(train_, idx_, off_, nb, bd_, ba_, bt_);
    off_ += nb;
    if (off_ >= n) off_ = 0;
    const Eigen::VectorXd pred = net_.forward(bd_, ba_, true, &drop_rng_);
    const double loss = mse_loss(pred, bt_);
    if (!std::isfinite(loss)) return loss;
    net_.zero_grads();
    net_.backward(mse_grad(pred, bt_));
    opt_.step(lr);
    return loss;
  }

 private:
  Network& net_;
  const cond::Dataset& train_;
  OptimizerState opt_;
  Rng drop_rng_;
  Eigen::Index batch_, off_ = 0;
  std::vector<int> idx_;
  Eigen::MatrixXd bd_, ba_;
  Eigen::VectorXd bt_;
};

}  // namespace

LrRangeResult find_lr_range(const ModelWeights& init,
                            const cond::Dataset& train,
                            const TrainConfig& base,
                            const LrFinderConfig& cfg) {
  if (base.batch_size <= 0)
    throw std::invalid_argument("find_lr_range: bad batch size");
  Network net = Network::from_weights(init);
  check_train_inputs(net, train, "train");
  NetworkSweep sweep(net, train, base);
  return lr_sweep(sweep, cfg);
}

}  // namespace gnssr::nn
