#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "reposer/rng.hpp"

namespace reposer {

/// Fully connected network with ELU hidden activations and a linear output.
/// Samples are columns: forward maps (in x batch) to (out x batch). All
/// parameters live in one flat buffer; layer l's weight is a row-major
/// (out x in) view followed by its bias.
// Eigen picks vectorized reduction paths by buffer address; fixing the
// alignment of every buffer it reads keeps results bit-identical across runs.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

template <typename Scalar>
class Mlp {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using WeightMap = Eigen::Map<RowMat>;
  using ConstWeightMap = Eigen::Map<const RowMat>;
  using BiasMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;
  using ConstBiasMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>;

  struct Cache {
    std::vector<Mat> pre;   // pre-activation of each layer
    std::vector<Mat> post;  // post[0] is the input, post[l + 1] the output of layer l
  };

  Mlp() = default;
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw std::invalid_argument("Mlp: layer sizes must be > 0");
      offsets_.push_back(n);
      n += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    params_.assign(n, Scalar(0));
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  std::size_t num_params() const { return params_.size(); }
  std::span<Scalar> params() { return params_; }
  std::span<const Scalar> params() const { return params_; }

  WeightMap weight(int l) { return WeightMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]); }
  ConstWeightMap weight(int l) const {
    return ConstWeightMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
  }
  BiasMap bias(int l) { return BiasMap(params_.data() + bias_offset(l), sizes_[l + 1]); }
  ConstBiasMap bias(int l) const { return ConstBiasMap(params_.data() + bias_offset(l), sizes_[l + 1]); }
  std::size_t weight_offset(int l) const { return offsets_[l]; }
  std::size_t bias_offset(int l) const { return offsets_[l] + static_cast<std::size_t>(sizes_[l + 1]) * sizes_[l]; }

  /// Orthogonal init scaled by `hidden_gain`, final layer by `output_gain`,
  /// zero biases.
  void init_orthogonal(std::uint64_t seed, double hidden_gain, double output_gain) {
    for (int l = 0; l < num_layers(); ++l) {
      const int rows = sizes_[l + 1], cols = sizes_[l];
      const int big = std::max(rows, cols), small = std::min(rows, cols);
      CounterRng rng(seed, static_cast<std::uint64_t>(l), 0, Stream::Init);
      Eigen::MatrixXd g(big, small);
      for (int j = 0; j < small; ++j)
        for (int i = 0; i < big; ++i) g(i, j) = rng.normal();
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
      Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
      // Sign correction makes the result uniformly distributed.
      const Eigen::MatrixXd r = qr.matrixQR().topRows(small).template triangularView<Eigen::Upper>();
      for (int j = 0; j < small; ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
      const double gain = l + 1 == num_layers() ? output_gain : hidden_gain;
      const Eigen::MatrixXd w = rows >= cols ? Eigen::MatrixXd(q) : Eigen::MatrixXd(q.transpose());
      weight(l) = (gain * w).cast<Scalar>();
      bias(l).setZero();
    }
  }

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    if (x.rows() != input_dim())
      throw std::invalid_argument("Mlp::forward: expected input dim " + std::to_string(input_dim()) + ", got " +
                                  std::to_string(x.rows()));
    if (cache) {
      cache->pre.resize(num_layers());
      cache->post.resize(num_layers() + 1);
      cache->post[0] = x;
    }
    Mat h = x;
    for (int l = 0; l < num_layers(); ++l) {
      Mat z = weight(l) * h;
      z.colwise() += bias(l);
      if (l + 1 < num_layers()) {
        h = z.unaryExpr([](Scalar v) { return v > Scalar(0) ? v : std::expm1(v); });
      } else {
        h = z;
      }
      if (cache) {
        cache->pre[l] = std::move(z);
        cache->post[l + 1] = h;
      }
    }
    return h;
  }

  /// Accumulates dL/dparams into `grad` given dL/doutput. Optionally returns
  /// dL/dinput.
  void backward(const Cache& cache, const Mat& d_out, std::span<Scalar> grad, Mat* d_input = nullptr) const {
    if (grad.size() != params_.size()) throw std::invalid_argument("Mlp::backward: gradient buffer size mismatch");
    Mat delta = d_out;
    for (int l = num_layers() - 1; l >= 0; --l) {
      if (l + 1 < num_layers()) {
        // ELU'(z) = 1 for z > 0, else exp(z) = elu(z) + 1.
        const Mat& z = cache.pre[l];
        const Mat& a = cache.post[l + 1];
        delta = delta.cwiseProduct(
            z.binaryExpr(a, [](Scalar zz, Scalar aa) { return zz > Scalar(0) ? Scalar(1) : aa + Scalar(1); }));
      }
      WeightMap gw(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
      BiasMap gb(grad.data() + bias_offset(l), sizes_[l + 1]);
      gw.noalias() += delta * cache.post[l].transpose();
      gb.noalias() += delta.rowwise().sum();
      if (l > 0 || d_input) {
        Mat next = weight(l).transpose() * delta;
        if (l == 0) {
          *d_input = std::move(next);
        } else {
          delta = std::move(next);
        }
      }
    }
  }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> out(sizes_);
    for (std::size_t i = 0; i < params_.size(); ++i) out.params()[i] = static_cast<Other>(params_[i]);
    return out;
  }

 private:
  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  AlignedVector<Scalar> params_;
};

/// Adam with bias correction over a flat parameter vector.
struct AdamState {
  std::vector<float> m, v;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0f), v(n, 0.0f) {}

  void apply(std::span<float> params, std::span<const float> grad, double lr);
};

/// Running mean/variance over observation features (parallel-merge form).
struct RunningMeanStd {
  std::vector<double> mean, var;
  double count = 0.0;
  double clip = 5.0;
  double epsilon = 1e-8;

  RunningMeanStd() = default;
  explicit RunningMeanStd(int dim) : mean(static_cast<std::size_t>(dim), 0.0), var(static_cast<std::size_t>(dim), 1.0) {}

  int dim() const { return static_cast<int>(mean.size()); }
  /// rows: n samples x dim, row-major.
  void update(std::span<const float> rows);
  /// Folds in statistics gathered separately over disjoint samples.
  void merge(const RunningMeanStd& other);
  /// In-place normalization, clipped to [-clip, clip].
  void normalize(std::span<float> rows) const;
};

double global_norm(std::span<const float> g);

}  // namespace reposer
