#ifndef SANET_OBJECTIVE_HPP_
#define SANET_OBJECTIVE_HPP_

#include <vector>

#include "sanet/tape.hpp"
#include "sanet/tensor.hpp"

namespace sanet {

struct LossConfig {
  double lambda = 10.0;          // squared-percentage-error weight
  double gamma = 0.0;            // bias-mitigation weight
  double filter_threshold = 0.1; // applied to raw observed demand
};

struct NormalizedAttribute {
  Tensor z_tilde;  // population-standardized per-cell attribute
  double mean = 0.0;
  double std = 0.0;
};

// Population z-score. Throws on constant z.
NormalizedAttribute normalize_attribute(const Tensor& z);

// Batch losses over aligned raw targets y and raw (denormalized, unclamped)
// predictions yhat. accuracy = sum (y-yhat)^2 + lambda * sum_filtered
// ((y-yhat)/y)^2; fairness = |sum_filtered z_tilde * (y-yhat)/y|; total =
// accuracy + gamma * fairness. Sums run over the whole batch.
double accuracy_loss(const std::vector<Tensor>& y,
                     const std::vector<Tensor>& yhat, const LossConfig& cfg);
double fairness_inner_sum(const std::vector<Tensor>& y,
                          const std::vector<Tensor>& yhat,
                          const Tensor& z_tilde, const LossConfig& cfg);
double fairness_loss(const std::vector<Tensor>& y,
                     const std::vector<Tensor>& yhat, const Tensor& z_tilde,
                     const LossConfig& cfg);
double total_loss(const std::vector<Tensor>& y,
                  const std::vector<Tensor>& yhat, const Tensor& z_tilde,
                  const LossConfig& cfg);

// Tape counterparts; yhat[i] is the prediction node for raw target y[i].
// Values are bitwise equal to the plain functions above.
Var accuracy_loss_op(const std::vector<Var>& yhat,
                     const std::vector<Tensor>& y, const LossConfig& cfg);
Var fairness_inner_op(const std::vector<Var>& yhat,
                      const std::vector<Tensor>& y, const Tensor& z_tilde,
                      const LossConfig& cfg);
// gamma == 0 skips the fairness subgraph entirely.
Var total_loss_op(const std::vector<Var>& yhat, const std::vector<Tensor>& y,
                  const Tensor& z_tilde, const LossConfig& cfg);

}  // namespace sanet

#endif  // SANET_OBJECTIVE_HPP_
