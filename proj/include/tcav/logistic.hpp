#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "tcav/error.hpp"
#include "tcav/graph.hpp"
#include "tcav/tensor.hpp"

namespace tcav::stats {

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
};

// L2-regularized logistic regression (regularization on the weights only,
// per-sample-averaged loss), fit by damped Newton iterations until the full
// gradient norm drops below `tol`.
inline LogisticModel fit_logistic(const num::Tensor& x, const std::vector<int>& labels,
                                  double l2 = 1e-3, int max_iter = 5000, double tol = 1e-8) {
  require(x.rank() == 2, "fit_logistic: features must be rank-2");
  const auto n = static_cast<Eigen::Index>(x.rows());
  const auto d = static_cast<Eigen::Index>(x.cols());
  require(static_cast<std::size_t>(n) == labels.size(), "fit_logistic: labels size mismatch");
  require(n >= 2, "fit_logistic: need at least 2 samples");

  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const Mat> features(x.data(), n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[static_cast<std::size_t>(i)] != 0 ? 1.0 : 0.0;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);  // weights then bias
  const double inv_n = 1.0 / static_cast<double>(n);

  auto eval = [&](const Eigen::VectorXd& th, Eigen::VectorXd* grad, Mat* hess) {
    Eigen::VectorXd z = features * th.head(d);
    z.array() += th[d];
    double loss = 0.0;
    Eigen::VectorXd p(n), s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double zi = z[i];
      loss += std::max(zi, 0.0) - zi * y[i] + std::log1p(std::exp(-std::abs(zi)));
      p[i] = num::stable_sigmoid(zi);
      s[i] = p[i] * (1.0 - p[i]);
    }
    loss = loss * inv_n + 0.5 * l2 * th.head(d).squaredNorm();
    if (grad) {
      Eigen::VectorXd r = (p - y) * inv_n;
      grad->head(d) = features.transpose() * r + l2 * th.head(d);
      (*grad)[d] = r.sum();
    }
    if (hess) {
      Mat xs = features.array().colwise() * s.array();
      hess->topLeftCorner(d, d) = (features.transpose() * xs) * inv_n;
      hess->topLeftCorner(d, d).diagonal().array() += l2;
      Eigen::VectorXd sx = (features.transpose() * s) * inv_n;
      hess->block(0, d, d, 1) = sx;
      hess->block(d, 0, 1, d) = sx.transpose();
      (*hess)(d, d) = s.sum() * inv_n;
      hess->diagonal().array() += 1e-12;  // keeps the solve stable when saturated
    }
    return loss;
  };

  LogisticModel out;
  Eigen::VectorXd grad(d + 1);
  Mat hess(d + 1, d + 1);
  double loss = eval(theta, &grad, &hess);
  for (out.iterations = 0; out.iterations < max_iter; ++out.iterations) {
    out.grad_norm = grad.norm();
    if (out.grad_norm < tol) {
      out.converged = true;
      break;
    }
    Eigen::VectorXd step = hess.ldlt().solve(grad);
    double scale = 1.0;
    Eigen::VectorXd trial;
    double trial_loss = 0.0;
    for (int halvings = 0; halvings < 60; ++halvings) {
      trial = theta - scale * step;
      trial_loss = eval(trial, nullptr, nullptr);
      if (trial_loss <= loss) break;
      scale *= 0.5;
    }
    theta = trial;
    loss = eval(theta, &grad, &hess);
  }
  if (!out.converged) out.grad_norm = grad.norm();

  out.weights.assign(theta.data(), theta.data() + d);
  out.bias = theta[d];
  return out;
}

inline double logistic_score(const LogisticModel& m, const double* x) {
  double z = m.bias;
  for (std::size_t j = 0; j < m.weights.size(); ++j) z += m.weights[j] * x[j];
  return num::stable_sigmoid(z);
}

}  // namespace tcav::stats
