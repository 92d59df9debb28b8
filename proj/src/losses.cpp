#include "styletalk/losses.hpp"

#include <cmath>
#include <utility>

namespace styletalk {

ag::Var ssim(const ag::Var& a_in, const ag::Var& b_in, const SsimOptions& opts) {
  require(a_in.rows() == b_in.rows() && a_in.cols() == b_in.cols(), "ssim: shapes differ");
  require(a_in.rows() >= opts.window && a_in.cols() >= opts.window, "ssim: input smaller than the window");
  using namespace ag;
  const int win = opts.window;
  const Var a = opts.offset == 0.0 ? a_in : add_scalar(a_in, opts.offset);
  const Var b = opts.offset == 0.0 ? b_in : add_scalar(b_in, opts.offset);
  const Var mu_a = box_filter(a, win);
  const Var mu_b = box_filter(b, win);
  const Var mu_aa = mul(mu_a, mu_a);
  const Var mu_bb = mul(mu_b, mu_b);
  const Var mu_ab = mul(mu_a, mu_b);
  const Var var_a = sub(box_filter(mul(a, a), win), mu_aa);
  const Var var_b = sub(box_filter(mul(b, b), win), mu_bb);
  const Var cov = sub(box_filter(mul(a, b), win), mu_ab);
  const Var num = mul(add_scalar(scale(mu_ab, 2.0), opts.c1()), add_scalar(scale(cov, 2.0), opts.c2()));
  const Var den = mul(add_scalar(add(mu_aa, mu_bb), opts.c1()), add_scalar(add(var_a, var_b), opts.c2()));
  return mean(div(num, den));
}

ag::Var rec_loss(const ag::Var& gt, const ag::Var& pred, double mu, const SsimOptions& opts) {
  require(gt.rows() == pred.rows() && gt.cols() == pred.cols(), "rec_loss: sequence shapes differ");
  using namespace ag;
  const Var l1 = mean(abs(sub(gt, pred)));
  const Var dssim = add_scalar(scale(ssim(gt, pred, opts), -1.0), 1.0);
  return add(scale(l1, mu), scale(dssim, 1.0 - mu));
}

double rec_loss(const MotionSequence& gt, const MotionSequence& pred, double mu, const SsimOptions& opts) {
  require(gt.size() == pred.size(), "rec_loss: sequence lengths differ");
  ag::NoGradGuard guard;
  return rec_loss(ag::Var(gt.to_double()), ag::Var(pred.to_double()), mu, opts).item();
}

ag::Var triplet_loss(const ag::Var& anchor, const ag::Var& positive, const ag::Var& negative, double gamma) {
  require(anchor.rows() == positive.rows() && anchor.cols() == positive.cols() &&
              anchor.rows() == negative.rows() && anchor.cols() == negative.cols(),
          "triplet_loss: style code dimensions differ");
  using namespace ag;
  const Var d_pos = norm2(sub(anchor, positive));
  const Var d_neg = norm2(sub(anchor, negative));
  return relu(add_scalar(sub(d_pos, d_neg), gamma));
}

double triplet_loss(const StyleCode& anchor, const StyleCode& positive, const StyleCode& negative, double gamma) {
  require(anchor.dim() == positive.dim() && anchor.dim() == negative.dim(),
          "triplet_loss: style code dimensions differ");
  const double d_pos = (anchor.values - positive.values).norm();
  const double d_neg = (anchor.values - negative.values).norm();
  return std::max(d_pos - d_neg + gamma, 0.0);
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  const std::pair<const char*, double> parts[] = {
      {"rec", c.rec}, {"trip", c.trip}, {"sync", c.sync}, {"tem", c.tem}, {"style", c.style}};
  for (const auto& [name, v] : parts)
    if (!std::isfinite(v)) throw NumericError(name, "loss component is " + std::to_string(v));
  return w.rec * c.rec + w.trip * c.trip + w.sync * c.sync + w.tem * c.tem + w.style * c.style;
}

ag::Var total_loss(const LossVars& c, const LossWeights& w) {
  const std::pair<const char*, const ag::Var*> parts[] = {
      {"rec", &c.rec}, {"trip", &c.trip}, {"sync", &c.sync}, {"tem", &c.tem}, {"style", &c.style}};
  const double weights[] = {w.rec, w.trip, w.sync, w.tem, w.style};
  ag::Var total;
  for (int i = 0; i < 5; ++i) {
    const auto& [name, v] = parts[i];
    require(v->defined() && v->value().size() == 1, std::string("loss component ") + name + " must be a scalar");
    if (!std::isfinite(v->item())) throw NumericError(name, "loss component is " + std::to_string(v->item()));
    const ag::Var term = ag::scale(*v, weights[i]);
    total = total.defined() ? ag::add(total, term) : term;
  }
  return total;
}

}  // namespace styletalk
