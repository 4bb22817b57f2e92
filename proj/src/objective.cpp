#include "sanet/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace sanet {

NormalizedAttribute normalize_attribute(const Tensor& z) {
  detail::require(z.size() >= 2, "normalize_attribute: need at least 2 cells");
  const std::size_t n = z.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += z[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) var += (z[i] - mean) * (z[i] - mean);
  var /= static_cast<double>(n);
  if (var == 0.0)
    throw std::invalid_argument("normalize_attribute: constant attribute");
  const double sd = std::sqrt(var);
  NormalizedAttribute out;
  out.mean = mean;
  out.std = sd;
  Tensor zt = Tensor::zeros(z.shape());
  for (std::size_t i = 0; i < n; ++i) zt[i] = (z[i] - mean) / sd;
  out.z_tilde = std::move(zt);
  return out;
}

namespace {

void validate_batch(const std::vector<Tensor>& y,
                    const std::vector<Tensor>& yhat) {
  detail::require(!y.empty() && y.size() == yhat.size(),
                  "loss: batch size mismatch");
  for (std::size_t i = 0; i < y.size(); ++i)
    detail::require(y[i].shape() == yhat[i].shape(),
                    "loss: target/prediction shape mismatch");
}

// 1/y where y passes the filter, else 0. Percentage errors are formed as
// (y - yhat) * recip so the plain and tape paths round identically.
Tensor filter_recip(const Tensor& y, double threshold) {
  Tensor r = Tensor::zeros(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i)
    r[i] = y[i] > threshold ? 1.0 / y[i] : 0.0;
  return r;
}

Tensor filter_recip_weighted(const Tensor& y, const Tensor& z_tilde,
                             double threshold) {
  Tensor r = Tensor::zeros(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i)
    r[i] = y[i] > threshold ? z_tilde[i] / y[i] : 0.0;
  return r;
}

}  // namespace

double accuracy_loss(const std::vector<Tensor>& y,
                     const std::vector<Tensor>& yhat, const LossConfig& cfg) {
  validate_batch(y, yhat);
  double sq_total = 0.0, pe_total = 0.0;
  for (std::size_t w = 0; w < y.size(); ++w) {
    const Tensor recip = filter_recip(y[w], cfg.filter_threshold);
    double sq = 0.0, pe = 0.0;
    for (std::size_t i = 0; i < y[w].size(); ++i) {
      const double diff = y[w][i] - yhat[w][i];
      sq += diff * diff;
      const double e = diff * recip[i];
      pe += e * e;
    }
    sq_total += sq;
    pe_total += pe;
  }
  return sq_total + cfg.lambda * pe_total;
}

double fairness_inner_sum(const std::vector<Tensor>& y,
                          const std::vector<Tensor>& yhat,
                          const Tensor& z_tilde, const LossConfig& cfg) {
  validate_batch(y, yhat);
  double inner = 0.0;
  for (std::size_t w = 0; w < y.size(); ++w) {
    detail::require(z_tilde.size() == y[w].size(),
                    "loss: attribute/grid size mismatch");
    const Tensor zr = filter_recip_weighted(y[w], z_tilde, cfg.filter_threshold);
    double s = 0.0;
    for (std::size_t i = 0; i < y[w].size(); ++i)
      s += (y[w][i] - yhat[w][i]) * zr[i];
    inner += s;
  }
  return inner;
}

double fairness_loss(const std::vector<Tensor>& y,
                     const std::vector<Tensor>& yhat, const Tensor& z_tilde,
                     const LossConfig& cfg) {
  return std::fabs(fairness_inner_sum(y, yhat, z_tilde, cfg));
}

double total_loss(const std::vector<Tensor>& y,
                  const std::vector<Tensor>& yhat, const Tensor& z_tilde,
                  const LossConfig& cfg) {
  double acc = accuracy_loss(y, yhat, cfg);
  if (cfg.gamma == 0.0) return acc;
  return acc + cfg.gamma * fairness_loss(y, yhat, z_tilde, cfg);
}

Var accuracy_loss_op(const std::vector<Var>& yhat,
                     const std::vector<Tensor>& y, const LossConfig& cfg) {
  detail::require(!y.empty() && y.size() == yhat.size(),
                  "loss: batch size mismatch");
  Tape& t = *yhat[0].tape;
  Var sq_chain, pe_chain;
  for (std::size_t w = 0; w < y.size(); ++w) {
    Var target = t.leaf(y[w]);
    Var recip = t.leaf(filter_recip(y[w], cfg.filter_threshold));
    Var diff = sub(target, yhat[w]);
    Var sq = sum(square(diff));
    Var pe = sum(square(mul(diff, recip)));
    sq_chain = w == 0 ? sq : add(sq_chain, sq);
    pe_chain = w == 0 ? pe : add(pe_chain, pe);
  }
  return add(sq_chain, scale(pe_chain, cfg.lambda));
}

Var fairness_inner_op(const std::vector<Var>& yhat,
                      const std::vector<Tensor>& y, const Tensor& z_tilde,
                      const LossConfig& cfg) {
  detail::require(!y.empty() && y.size() == yhat.size(),
                  "loss: batch size mismatch");
  Tape& t = *yhat[0].tape;
  Var chain;
  for (std::size_t w = 0; w < y.size(); ++w) {
    detail::require(z_tilde.size() == y[w].size(),
                    "loss: attribute/grid size mismatch");
    Var target = t.leaf(y[w]);
    Var zr = t.leaf(filter_recip_weighted(y[w], z_tilde, cfg.filter_threshold));
    Var s = sum(mul(sub(target, yhat[w]), zr));
    chain = w == 0 ? s : add(chain, s);
  }
  return chain;
}

Var total_loss_op(const std::vector<Var>& yhat, const std::vector<Tensor>& y,
                  const Tensor& z_tilde, const LossConfig& cfg) {
  Var acc = accuracy_loss_op(yhat, y, cfg);
  if (cfg.gamma == 0.0) return acc;
  Var inner = fairness_inner_op(yhat, y, z_tilde, cfg);
  return add(acc, scale(abs_elem(inner), cfg.gamma));
}

}  // namespace sanet
