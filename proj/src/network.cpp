#include "gnssr/network.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "gnssr/container.hpp"
#include "gnssr/hashing.hpp"

namespace gnssr::nn {

namespace {

constexpr int kH = io::kDelayBins;
constexpr int kW = io::kDopplerBins;

// nbr[p][k]: source pixel for tap k of output pixel p, -1 for padding.
const std::array<std::array<int, 9>, kDdmPixels>& neighbor_table() {
  static const auto table = [] {
    std::array<std::array<int, 9>, kDdmPixels> t{};
    for (int r = 0; r < kH; ++r) {
      for (int c = 0; c < kW; ++c) {
        const int p = r * kW + c;
        for (int k = 0; k < 9; ++k) {
          const int rr = r + k / 3 - 1;
          const int cc = c + k % 3 - 1;
          t[p][k] = (rr >= 0 && rr < kH && cc >= 0 && cc < kW)
                        ? rr * kW + cc
                        : -1;
        }
      }
    }
    return t;
  }();
  return table;
}

Eigen::Index batch_of(const Eigen::MatrixXd& x, int pixels,
                      const char* where) {
  if (x.cols() % pixels != 0) {
    throw std::invalid_argument(std::string(where) +
                                ": column count not a multiple of " +
                                std::to_string(pixels));
  }
  return x.cols() / pixels;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double leaky_relu(double x, double slope) { return x > 0.0 ? x : slope * x; }

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

// ----------------------------------------------------------------- Conv2D

Conv2D::Conv2D(int in_channels, int out_channels, Rng& rng)
    : cin_(in_channels), cout_(out_channels) {
  if (cin_ < 1 || cout_ < 1) {
    throw std::invalid_argument("conv channels must be positive");
  }
  const double scale = std::sqrt(2.0 / (9.0 * cin_));
  weight.resize(cout_, 9 * cin_);
  for (Eigen::Index i = 0; i < weight.size(); ++i) {
    weight.data()[i] = rng.normal(0.0, scale);
  }
  bias = Eigen::MatrixXd::Zero(cout_, 1);
  dweight = Eigen::MatrixXd::Zero(cout_, 9 * cin_);
  dbias = Eigen::MatrixXd::Zero(cout_, 1);
}

const Eigen::MatrixXd& Conv2D::forward(const Eigen::MatrixXd& x) {
  if (x.rows() != cin_) {
    throw std::invalid_argument("conv input has " + std::to_string(x.rows()) +
                                " channels, want " + std::to_string(cin_));
  }
  const Eigen::Index b = batch_of(x, kDdmPixels, "conv");
  const auto& nbr = neighbor_table();
  cols_.resize(9 * cin_, x.cols());
  const double* xd = x.data();
  double* cd = cols_.data();
  const std::size_t colbytes = sizeof(double) * static_cast<std::size_t>(cin_);
  for (Eigen::Index bb = 0; bb < b; ++bb) {
    const Eigen::Index base = bb * kDdmPixels;
    for (int p = 0; p < kDdmPixels; ++p) {
      double* dst = cd + (base + p) * 9 * cin_;
      for (int k = 0; k < 9; ++k, dst += cin_) {
        const int q = nbr[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)];
        if (q >= 0) {
          std::memcpy(dst, xd + (base + q) * cin_, colbytes);
        } else {
          std::memset(dst, 0, colbytes);
        }
      }
    }
  }
  y_.noalias() = weight * cols_;
  y_.colwise() += bias.col(0);
  return y_;
}

const Eigen::MatrixXd& Conv2D::backward(const Eigen::MatrixXd& dy) {
  if (dy.rows() != cout_ || dy.cols() != cols_.cols()) {
    throw std::invalid_argument("conv backward shape mismatch");
  }
  dweight.noalias() += dy * cols_.transpose();
  dbias.col(0).noalias() += dy.rowwise().sum();
  dcols_.noalias() = weight.transpose() * dy;
  dx_.setZero(cin_, dy.cols());
  const auto& nbr = neighbor_table();
  const Eigen::Index b = dy.cols() / kDdmPixels;
  double* xd = dx_.data();
  const double* cd = dcols_.data();
  for (Eigen::Index bb = 0; bb < b; ++bb) {
    const Eigen::Index base = bb * kDdmPixels;
    for (int p = 0; p < kDdmPixels; ++p) {
      const double* src = cd + (base + p) * 9 * cin_;
      for (int k = 0; k < 9; ++k, src += cin_) {
        const int q = nbr[static_cast<std::size_t>(p)][static_cast<std::size_t>(k)];
        if (q < 0) continue;
        double* dst = xd + (base + q) * cin_;
        for (int ci = 0; ci < cin_; ++ci) dst[ci] += src[ci];
      }
    }
  }
  return dx_;
}

// ------------------------------------------------------------------ Dense

Dense::Dense(int in, int out, Rng& rng, double weight_scale, double bias_init) {
  if (in < 1 || out < 1) {
    throw std::invalid_argument("dense layer dimensions must be positive");
  }
  const double scale =
      weight_scale > 0.0 ? weight_scale : std::sqrt(2.0 / in);
  weight.resize(out, in);
  for (Eigen::Index i = 0; i < weight.size(); ++i) {
    weight.data()[i] = rng.normal(0.0, scale);
  }
  bias = Eigen::MatrixXd::Constant(out, 1, bias_init);
  dweight = Eigen::MatrixXd::Zero(out, in);
  dbias = Eigen::MatrixXd::Zero(out, 1);
}

const Eigen::MatrixXd& Dense::forward(const Eigen::MatrixXd& x) {
  if (x.rows() != weight.cols()) {
    throw std::invalid_argument("dense input has " + std::to_string(x.rows()) +
                                " features, want " +
                                std::to_string(weight.cols()));
  }
  x_ = x;
  y_.noalias() = weight * x;
  y_.colwise() += bias.col(0);
  return y_;
}

const Eigen::MatrixXd& Dense::backward(const Eigen::MatrixXd& dy) {
  dweight.noalias() += dy * x_.transpose();
  dbias.col(0).noalias() += dy.rowwise().sum();
  dx_.noalias() = weight.transpose() * dy;
  return dx_;
}

// -------------------------------------------------------------- LeakyRelu

const Eigen::MatrixXd& LeakyRelu::forward(const Eigen::MatrixXd& x) {
  y_ = x.unaryExpr([s = slope_](double v) { return leaky_relu(v, s); });
  return y_;
}

const Eigen::MatrixXd& LeakyRelu::backward(const Eigen::MatrixXd& dy) {
  dx_ = dy.cwiseProduct(y_.unaryExpr(
      [s = slope_](double v) { return v > 0.0 ? 1.0 : s; }));
  return dx_;
}

// ---------------------------------------------------------------- Dropout

Dropout::Dropout(double p) : p_(p) {
  if (p < 0.0 || p >= 1.0) {
    throw std::invalid_argument("dropout probability must be in [0, 1)");
  }
}

const Eigen::MatrixXd& Dropout::forward(const Eigen::MatrixXd& x,
                                        bool training, Rng* rng) {
  active_ = training && p_ > 0.0;
  if (!active_) {
    y_ = x;
    return y_;
  }
  if (rng == nullptr) {
    throw std::invalid_argument("dropout in training mode needs an rng");
  }
  const double keep = 1.0 - p_;
  mask_.resize(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask_.size(); ++i) {
    mask_.data()[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
  }
  y_ = x.cwiseProduct(mask_);
  return y_;
}

const Eigen::MatrixXd& Dropout::backward(const Eigen::MatrixXd& dy) {
  if (!active_) {
    dx_ = dy;
    return dx_;
  }
  dx_ = dy.cwiseProduct(mask_);
  return dx_;
}

// --------------------------------------------------------------- MaxPool2

const Eigen::MatrixXd& MaxPool2::forward(const Eigen::MatrixXd& x) {
  const Eigen::Index b = batch_of(x, kDdmPixels, "pool");
  const Eigen::Index ch = x.rows();
  in_cols_ = x.cols();
  y_.resize(ch, b * kOutPixels);
  argmax_.resize(ch, b * kOutPixels);
  for (Eigen::Index bb = 0; bb < b; ++bb) {
    for (int orow = 0; orow < kOutRows; ++orow) {
      for (int ocol = 0; ocol < kOutCols; ++ocol) {
        const Eigen::Index oc =
            bb * kOutPixels + orow * kOutCols + ocol;
        for (Eigen::Index c = 0; c < ch; ++c) {
          double best = -std::numeric_limits<double>::infinity();
          int best_p = -1;
          for (int dr = 0; dr < 2; ++dr) {
            for (int dc = 0; dc < 2; ++dc) {
              const int p = (2 * orow + dr) * kW + (2 * ocol + dc);
              const double v = x(c, bb * kDdmPixels + p);
              if (v > best) {
                best = v;
                best_p = p;
              }
            }
          }
          y_(c, oc) = best;
          argmax_(c, oc) = best_p;
        }
      }
    }
  }
  return y_;
}

const Eigen::MatrixXd& MaxPool2::backward(const Eigen::MatrixXd& dy) {
  const Eigen::Index b = dy.cols() / kOutPixels;
  dx_.setZero(dy.rows(), in_cols_);
  for (Eigen::Index bb = 0; bb < b; ++bb) {
    for (int op = 0; op < kOutPixels; ++op) {
      const Eigen::Index oc = bb * kOutPixels + op;
      for (Eigen::Index c = 0; c < dy.rows(); ++c) {
        dx_(c, bb * kDdmPixels + argmax_(c, oc)) += dy(c, oc);
      }
    }
  }
  return dx_;
}

// ---------------------------------------------------------- ResidualBlock

ResidualBlock::ResidualBlock(int channels, double slope, Rng& rng)
    : conv1(channels, channels, rng),
      conv2(channels, channels, rng),
      act_mid(slope),
      slope_(slope) {}

const Eigen::MatrixXd& ResidualBlock::forward(const Eigen::MatrixXd& x) {
  const auto& h = act_mid.forward(conv1.forward(x));
  y_ = x + conv2.forward(h);
  y_ = y_.unaryExpr([s = slope_](double v) { return leaky_relu(v, s); });
  return y_;
}

const Eigen::MatrixXd& ResidualBlock::backward(const Eigen::MatrixXd& dy) {
  const Eigen::MatrixXd dsum = dy.cwiseProduct(y_.unaryExpr(
      [s = slope_](double v) { return v > 0.0 ? 1.0 : s; }));
  const auto& d2 = conv2.backward(dsum);
  const auto& dm = act_mid.backward(d2);
  dx_ = conv1.backward(dm) + dsum;  // identity skip adds through
  return dx_;
}

// ---------------------------------------------------------- NetworkConfig

void NetworkConfig::validate() const {
  if (!use_ddm_branch && ancillary_inputs == 0) {
    throw std::invalid_argument("network needs at least one input branch");
  }
  if (ancillary_inputs < 0) {
    throw std::invalid_argument("ancillary input count must be >= 0");
  }
  if (channels[0] < 1 || channels[1] < 1 || head_dense[0] < 1 ||
      head_dense[1] < 1) {
    throw std::invalid_argument("layer widths must be positive");
  }
  if (ancillary_inputs > 0 && ancillary_dense < 1) {
    throw std::invalid_argument("ancillary dense width must be positive");
  }
  if (!(leaky_slope > 0.0) || leaky_slope >= 1.0) {
    throw std::invalid_argument("leaky slope must be in (0, 1)");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("dropout must be in [0, 1)");
  }
}

std::uint64_t NetworkConfig::config_hash() const {
  std::string s = "ddm=" + std::to_string(use_ddm_branch ? 1 : 0) +
                  ";anc=" + std::to_string(ancillary_inputs) +
                  ";ch=" + std::to_string(channels[0]) + "," +
                  std::to_string(channels[1]) +
                  ";ad=" + std::to_string(ancillary_dense) +
                  ";hd=" + std::to_string(head_dense[0]) + "," +
                  std::to_string(head_dense[1]) +
                  ";slope=" + fmt_double(leaky_slope) +
                  ";drop=" + fmt_double(dropout) +
                  ";ob=" + fmt_double(output_bias_init);
  return fnv1a(s);
}

// ---------------------------------------------------------------- Network

Network::Network(const NetworkConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.init_seed);
  if (cfg_.use_ddm_branch) {
    convs_.push_back(std::make_unique<Conv2D>(1, cfg_.channels[0], rng));
    conv_acts_.push_back(std::make_unique<LeakyRelu>(cfg_.leaky_slope));
    blocks_.push_back(std::make_unique<ResidualBlock>(cfg_.channels[0],
                                                      cfg_.leaky_slope, rng));
    convs_.push_back(
        std::make_unique<Conv2D>(cfg_.channels[0], cfg_.channels[1], rng));
    conv_acts_.push_back(std::make_unique<LeakyRelu>(cfg_.leaky_slope));
    blocks_.push_back(std::make_unique<ResidualBlock>(cfg_.channels[1],
                                                      cfg_.leaky_slope, rng));
  }
  if (cfg_.ancillary_inputs > 0) {
    anc_dense_ = std::make_unique<Dense>(cfg_.ancillary_inputs,
                                         cfg_.ancillary_dense, rng);
    anc_act_ = std::make_unique<LeakyRelu>(cfg_.leaky_slope);
  }
  int head_in = 0;
  if (cfg_.use_ddm_branch) head_in += cfg_.channels[1] * MaxPool2::kOutPixels;
  if (cfg_.ancillary_inputs > 0) head_in += cfg_.ancillary_dense;
  head_.push_back(std::make_unique<Dense>(head_in, cfg_.head_dense[0], rng));
  head_acts_.push_back(std::make_unique<LeakyRelu>(cfg_.leaky_slope));
  head_drops_.push_back(std::make_unique<Dropout>(cfg_.dropout));
  head_.push_back(
      std::make_unique<Dense>(cfg_.head_dense[0], cfg_.head_dense[1], rng));
  head_acts_.push_back(std::make_unique<LeakyRelu>(cfg_.leaky_slope));
  head_drops_.push_back(std::make_unique<Dropout>(cfg_.dropout));
  out_ = std::make_unique<Dense>(cfg_.head_dense[1], 1, rng,
                                 std::sqrt(1.0 / cfg_.head_dense[1]),
                                 cfg_.output_bias_init);
}

Eigen::VectorXd Network::forward(const Eigen::MatrixXd& ddm,
                                 const Eigen::MatrixXd& anc, bool training,
                                 Rng* rng) {
  Eigen::Index b = -1;
  if (cfg_.use_ddm_branch) {
    if (ddm.rows() != kDdmPixels) {
      throw std::invalid_argument("ddm input must have 187 rows");
    }
    b = ddm.cols();
  }
  if (cfg_.ancillary_inputs > 0) {
    if (anc.rows() != cfg_.ancillary_inputs) {
      throw std::invalid_argument(
          "ancillary input has " + std::to_string(anc.rows()) +
          " features, want " + std::to_string(cfg_.ancillary_inputs));
    }
    if (b >= 0 && anc.cols() != b) {
      throw std::invalid_argument("ddm and ancillary batch sizes differ");
    }
    b = anc.cols();
  }
  if (b <= 0) throw std::invalid_argument("empty batch");
  last_batch_ = b;

  const Eigen::MatrixXd* top = nullptr;
  if (cfg_.use_ddm_branch) {
    // (187, B) column-major re-viewed as (1, B*187): same element order.
    const Eigen::Map<const Eigen::MatrixXd> img(ddm.data(), 1,
                                                b * kDdmPixels);
    const auto& a0 = conv_acts_[0]->forward(convs_[0]->forward(img));
    const auto& r0 = blocks_[0]->forward(a0);
    const auto& a1 = conv_acts_[1]->forward(convs_[1]->forward(r0));
    const auto& r1 = blocks_[1]->forward(a1);
    const auto& pooled = pool_.forward(r1);
    const Eigen::Index ch = pooled.rows();
    flat_.resize(ch * MaxPool2::kOutPixels, b);
    for (Eigen::Index bb = 0; bb < b; ++bb) {
      for (int p = 0; p < MaxPool2::kOutPixels; ++p) {
        for (Eigen::Index c = 0; c < ch; ++c) {
          flat_(p * ch + c, bb) = pooled(c, bb * MaxPool2::kOutPixels + p);
        }
      }
    }
    top = &flat_;
  }
  const Eigen::MatrixXd* anc_top = nullptr;
  if (cfg_.ancillary_inputs > 0) {
    anc_top = &anc_act_->forward(anc_dense_->forward(anc));
  }
  if (top != nullptr && anc_top != nullptr) {
    concat_.resize(top->rows() + anc_top->rows(), b);
    concat_.topRows(top->rows()) = *top;
    concat_.bottomRows(anc_top->rows()) = *anc_top;
    top = &concat_;
  } else if (anc_top != nullptr) {
    top = anc_top;
  }

  const Eigen::MatrixXd* h = top;
  for (std::size_t i = 0; i < head_.size(); ++i) {
    h = &head_drops_[i]->forward(
        head_acts_[i]->forward(head_[i]->forward(*h)), training, rng);
  }
  out_x_ = out_->forward(*h);
  pred_.resize(b);
  for (Eigen::Index i = 0; i < b; ++i) pred_(i) = softplus(out_x_(0, i));
  return pred_;
}

void Network::backward(const Eigen::VectorXd& dpred) {
  if (dpred.size() != last_batch_) {
    throw std::invalid_argument("gradient batch size mismatch");
  }
  Eigen::MatrixXd dout(1, last_batch_);
  for (Eigen::Index i = 0; i < last_batch_; ++i) {
    dout(0, i) = dpred(i) * sigmoid(out_x_(0, i));
  }
  const Eigen::MatrixXd* d = &out_->backward(dout);
  for (std::size_t i = head_.size(); i-- > 0;) {
    d = &head_[i]->backward(
        head_acts_[i]->backward(head_drops_[i]->backward(*d)));
  }

  Eigen::Index flat_rows = 0;
  if (cfg_.use_ddm_branch) {
    flat_rows = cfg_.channels[1] * MaxPool2::kOutPixels;
  }
  if (cfg_.ancillary_inputs > 0) {
    const Eigen::MatrixXd danc_top = d->bottomRows(cfg_.ancillary_dense);
    anc_dense_->backward(anc_act_->backward(danc_top));
  }
  if (cfg_.use_ddm_branch) {
    dflat_ = d->topRows(flat_rows);
    const Eigen::Index ch = cfg_.channels[1];
    Eigen::MatrixXd dpool(ch, last_batch_ * MaxPool2::kOutPixels);
    for (Eigen::Index bb = 0; bb < last_batch_; ++bb) {
      for (int p = 0; p < MaxPool2::kOutPixels; ++p) {
        for (Eigen::Index c = 0; c < ch; ++c) {
          dpool(c, bb * MaxPool2::kOutPixels + p) = dflat_(p * ch + c, bb);
        }
      }
    }
    const auto& d1 = pool_.backward(dpool);
    const auto& d2 = blocks_[1]->backward(d1);
    const auto& d3 = convs_[1]->backward(conv_acts_[1]->backward(d2));
    const auto& d4 = blocks_[0]->backward(d3);
    convs_[0]->backward(conv_acts_[0]->backward(d4));
  }
}

void Network::zero_grads() {
  for (auto& p : params()) p.grad->setZero();
}

std::vector<Network::ParamRef> Network::params() {
  std::vector<ParamRef> out;
  auto addc = [&](const std::string& n, Conv2D& c) {
    out.push_back({n + ".w", &c.weight, &c.dweight});
    out.push_back({n + ".b", &c.bias, &c.dbias});
  };
  auto addd = [&](const std::string& n, Dense& d) {
    out.push_back({n + ".w", &d.weight, &d.dweight});
    out.push_back({n + ".b", &d.bias, &d.dbias});
  };
  if (cfg_.use_ddm_branch) {
    addc("stem", *convs_[0]);
    addc("block1.conv1", blocks_[0]->conv1);
    addc("block1.conv2", blocks_[0]->conv2);
    addc("transition", *convs_[1]);
    addc("block2.conv1", blocks_[1]->conv1);
    addc("block2.conv2", blocks_[1]->conv2);
  }
  if (cfg_.ancillary_inputs > 0) addd("anc", *anc_dense_);
  addd("head1", *head_[0]);
  addd("head2", *head_[1]);
  addd("out", *out_);
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (auto& p : const_cast<Network*>(this)->params()) {
    n += static_cast<std::size_t>(p.value->size());
  }
  return n;
}

ModelWeights Network::export_weights() const {
  ModelWeights w;
  w.config = cfg_;
  for (auto& p : const_cast<Network*>(this)->params()) {
    w.tensors.push_back({p.name, *p.value});
  }
  return w;
}

void Network::import_weights(const ModelWeights& w) {
  if (w.config.config_hash() != cfg_.config_hash()) {
    throw std::runtime_error("weight architecture does not match network");
  }
  auto ps = params();
  if (ps.size() != w.tensors.size()) {
    throw std::runtime_error("weight tensor count mismatch: have " +
                             std::to_string(w.tensors.size()) + ", want " +
                             std::to_string(ps.size()));
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const NamedTensor& t = w.tensors[i];
    if (t.name != ps[i].name) {
      throw std::runtime_error("unexpected weight tensor '" + t.name +
                               "', want '" + ps[i].name + "'");
    }
    if (t.value.rows() != ps[i].value->rows() ||
        t.value.cols() != ps[i].value->cols()) {
      throw std::runtime_error(
          "shape mismatch for tensor '" + t.name + "': " +
          std::to_string(t.value.rows()) + "x" +
          std::to_string(t.value.cols()) + ", want " +
          std::to_string(ps[i].value->rows()) + "x" +
          std::to_string(ps[i].value->cols()));
    }
    *ps[i].value = t.value;
  }
}

Network Network::from_weights(const ModelWeights& w) {
  Network n(w.config);
  n.import_weights(w);
  return n;
}

Eigen::VectorXd Network::predict(const cond::Dataset& data, int batch_size) {
  if (batch_size < 1) {
    throw std::invalid_argument("batch size must be positive");
  }
  const Eigen::Index n = data.size();
  Eigen::VectorXd out(n);
  for (Eigen::Index start = 0; start < n; start += batch_size) {
    const Eigen::Index len = std::min<Eigen::Index>(batch_size, n - start);
    const Eigen::MatrixXd ddm =
        cfg_.use_ddm_branch ? data.ddm.middleCols(start, len)
                            : Eigen::MatrixXd();
    Eigen::MatrixXd anc;
    if (cfg_.ancillary_inputs > 0) {
      anc = data.ancillary.middleCols(start, len);
    }
    out.segment(start, len) = forward(ddm, anc, false, nullptr);
  }
  return out;
}

// ------------------------------------------------------------ ModelWeights

void ModelWeights::save(const std::filesystem::path& path) const {
  io::ArrayFile f;
  f.set_attr("kind", "model_weights");
  f.set_attr("cfg_use_ddm", std::int64_t{config.use_ddm_branch ? 1 : 0});
  f.set_attr("cfg_ancillary_inputs", std::int64_t{config.ancillary_inputs});
  f.set_attr("cfg_channels0", std::int64_t{config.channels[0]});
  f.set_attr("cfg_channels1", std::int64_t{config.channels[1]});
  f.set_attr("cfg_ancillary_dense", std::int64_t{config.ancillary_dense});
  f.set_attr("cfg_head0", std::int64_t{config.head_dense[0]});
  f.set_attr("cfg_head1", std::int64_t{config.head_dense[1]});
  f.set_attr("cfg_leaky_slope", config.leaky_slope);
  f.set_attr("cfg_dropout", config.dropout);
  f.set_attr("cfg_output_bias_init", config.output_bias_init);
  f.set_attr("cfg_init_seed",
             static_cast<std::int64_t>(config.init_seed));
  for (const auto& [k, v] : meta) f.set_attr("meta_" + k, v);
  for (const auto& t : tensors) {
    auto& v = f.add("param_" + t.name, io::DType::kF64,
                    {static_cast<std::uint64_t>(t.value.rows()),
                     static_cast<std::uint64_t>(t.value.cols())});
    std::memcpy(v.raw.data(), t.value.data(),
                sizeof(double) * static_cast<std::size_t>(t.value.size()));
  }
  f.write(path);
}

ModelWeights ModelWeights::load(const std::filesystem::path& path) {
  const io::ArrayFile f = io::ArrayFile::read(path);
  if (!f.has_attr("kind") || f.attr_str("kind") != "model_weights") {
    throw std::runtime_error("not a model weights file: " + path.string());
  }
  ModelWeights w;
  w.config.use_ddm_branch = f.attr_i64("cfg_use_ddm") != 0;
  w.config.ancillary_inputs = int(f.attr_i64("cfg_ancillary_inputs"));
  w.config.channels[0] = int(f.attr_i64("cfg_channels0"));
  w.config.channels[1] = int(f.attr_i64("cfg_channels1"));
  w.config.ancillary_dense = int(f.attr_i64("cfg_ancillary_dense"));
  w.config.head_dense[0] = int(f.attr_i64("cfg_head0"));
  w.config.head_dense[1] = int(f.attr_i64("cfg_head1"));
  w.config.leaky_slope = f.attr_f64("cfg_leaky_slope");
  w.config.dropout = f.attr_f64("cfg_dropout");
  w.config.output_bias_init = f.attr_f64("cfg_output_bias_init");
  w.config.init_seed =
      static_cast<std::uint64_t>(f.attr_i64("cfg_init_seed"));
  for (const auto& [k, v] : f.attrs()) {
    if (k.rfind("meta_", 0) == 0) {
      w.meta[k.substr(5)] = std::get<std::string>(v);
    }
  }
  for (const auto& var : f.vars()) {
    if (var.name.rfind("param_", 0) != 0) continue;
    NamedTensor t;
    t.name = var.name.substr(6);
    t.value.resize(static_cast<Eigen::Index>(var.shape.at(0)),
                   static_cast<Eigen::Index>(var.shape.at(1)));
    std::memcpy(t.value.data(), var.f64(),
                sizeof(double) * static_cast<std::size_t>(t.value.size()));
    w.tensors.push_back(std::move(t));
  }
  return w;
}

std::uint64_t ModelWeights::content_hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& t : tensors) {
    h = fnv1a(t.name, h);
    h = fnv1a(t.value.data(),
              sizeof(double) * static_cast<std::size_t>(t.value.size()), h);
  }
  return h;
}

}  // namespace gnssr::nn
