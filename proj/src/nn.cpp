#include "reposer/nn.hpp"

#include <algorithm>

namespace reposer {

void AdamState::apply(std::span<float> params, std::span<const float> grad, double lr) {
  if (params.size() != grad.size() || params.size() != m.size())
    throw std::invalid_argument("AdamState::apply: size mismatch");
  step += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    const double mi = beta1 * m[i] + (1.0 - beta1) * g;
    const double vi = beta2 * v[i] + (1.0 - beta2) * g * g;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    params[i] = static_cast<float>(params[i] - lr * (mi / c1) / (std::sqrt(vi / c2) + eps));
  }
}

void RunningMeanStd::update(std::span<const float> rows) {
  const std::size_t d = mean.size();
  if (d == 0 || rows.size() % d != 0) throw std::invalid_argument("RunningMeanStd::update: bad shape");
  const std::size_t n = rows.size() / d;
  if (n == 0) return;
  std::vector<double> bm(d, 0.0), bv(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < d; ++k) bm[k] += rows[r * d + k];
  for (double& v : bm) v /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t k = 0; k < d; ++k) {
      const double e = rows[r * d + k] - bm[k];
      bv[k] += e * e;
    }
  for (double& v : bv) v /= static_cast<double>(n);
  const double bc = static_cast<double>(n);
  const double total = count + bc;
  for (std::size_t k = 0; k < d; ++k) {
    const double delta = bm[k] - mean[k];
    const double m2 = var[k] * count + bv[k] * bc + delta * delta * count * bc / total;
    mean[k] += delta * bc / total;
    var[k] = m2 / total;
  }
  count = total;
}

void RunningMeanStd::merge(const RunningMeanStd& other) {
  if (other.mean.size() != mean.size()) throw std::invalid_argument("RunningMeanStd::merge: dimension mismatch");
  if (other.count <= 0.0) return;
  const double total = count + other.count;
  for (std::size_t k = 0; k < mean.size(); ++k) {
    const double delta = other.mean[k] - mean[k];
    const double m2 = var[k] * count + other.var[k] * other.count + delta * delta * count * other.count / total;
    mean[k] += delta * other.count / total;
    var[k] = m2 / total;
  }
  count = total;
}

void RunningMeanStd::normalize(std::span<float> rows) const {
  const std::size_t d = mean.size();
  if (d == 0 || rows.size() % d != 0) throw std::invalid_argument("RunningMeanStd::normalize: bad shape");
  std::vector<double> inv(d);
  for (std::size_t k = 0; k < d; ++k) inv[k] = 1.0 / std::sqrt(var[k] + epsilon);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t k = i % d;
    rows[i] = static_cast<float>(std::clamp((rows[i] - mean[k]) * inv[k], -clip, clip));
  }
}

double global_norm(std::span<const float> g) {
  double s = 0.0;
  for (float v : g) s += static_cast<double>(v) * v;
  return std::sqrt(s);
}

}  // namespace reposer
