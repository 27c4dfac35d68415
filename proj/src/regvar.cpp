#include "trimlab/regvar.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trimlab/errors.hpp"

namespace trimlab {

namespace {

// Adaptive Simpson on [a,b] to absolute tolerance eps.
template <typename F>
double simpson_step(const F& f, double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adapt(const F& f, double a, double b, double eps, double whole, double fa,
             double fm, double fb, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = simpson_step(f, a, m, fa, flm, fm);
  const double right = simpson_step(f, m, b, fm, frm, fb);
  if (depth <= 0 || std::fabs(left + right - whole) <= 15.0 * eps) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adapt(f, a, m, eps * 0.5, left, fa, flm, fm, depth - 1) +
         adapt(f, m, b, eps * 0.5, right, fm, frm, fb, depth - 1);
}

template <typename F>
double integrate(const F& f, double a, double b, double eps) {
  if (!(b > a)) return 0.0;
  const double fa = f(a), fm = f(0.5 * (a + b)), fb = f(b);
  const double whole = simpson_step(f, a, b, fa, fm, fb);
  return adapt(f, a, b, eps, whole, fa, fm, fb, 48);
}

}  // namespace

SlowlyVarying SlowlyVarying::constant(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) throw config_error("slowly varying constant must be finite and > 0");
  return SlowlyVarying(Family::kConstant, c, 0.0);
}

SlowlyVarying SlowlyVarying::log_power(double beta) {
  if (!std::isfinite(beta)) throw config_error("log power exponent must be finite");
  if (beta == 0.0) return constant(1.0);
  return SlowlyVarying(Family::kLogPower, 1.0, beta);
}

SlowlyVarying SlowlyVarying::pow(double e) const {
  if (!std::isfinite(e)) throw config_error("power exponent must be finite");
  if (family_ == Family::kConstant) return constant(std::pow(c_, e));
  return log_power(beta_ * e);
}

double SlowlyVarying::eval_log(double lx) const {
  if (family_ == Family::kConstant) return c_;
  return std::pow(std::max(lx, 1.0), beta_);
}

double SlowlyVarying::operator()(double x) const {
  if (!(x > 0.0)) throw config_error("slowly varying factor needs x > 0");
  return eval_log(std::log(x));
}

std::string SlowlyVarying::to_string() const {
  char buf[64];
  if (family_ == Family::kConstant)
    std::snprintf(buf, sizeof buf, "const:%.17g", c_);
  else
    std::snprintf(buf, sizeof buf, "logpow:%.17g", beta_);
  return buf;
}

ConjugateResult debruijn_conjugate_iterative(const SlowlyVarying& L, double log_x,
                                             int max_iter, double tol) {
  if (!(tol > 0.0)) throw config_error("conjugate tolerance must be > 0");
  if (max_iter < 1) throw config_error("max_iter must be >= 1");
  double t = 1.0;
  int it = 0;
  bool converged = false;
  double step = std::numeric_limits<double>::infinity();
  while (it < max_iter) {
    const double tn = 1.0 / L.eval_log(log_x + std::log(t));
    ++it;
    step = std::fabs(tn - t);
    if (step <= tol * std::fabs(t)) {
      t = tn;
      converged = true;
      break;
    }
    t = tn;
  }
  if (!converged) {
    throw nonconvergence_error("de Bruijn conjugate fixed point did not converge", t, step);
  }

  // Residual of the defining property at x: |L(x) * conj(x*L(x)) - 1|.
  const double Lx = L.eval_log(log_x);
  double residual = std::numeric_limits<double>::infinity();
  double u = 1.0;
  const double ly = log_x + std::log(Lx);
  for (int k = 0; k < max_iter; ++k) {
    const double un = 1.0 / L.eval_log(ly + std::log(u));
    const double d = std::fabs(un - u);
    u = un;
    if (d <= tol * std::fabs(u)) {
      residual = std::fabs(Lx * u - 1.0);
      break;
    }
  }
  return {t, residual, it};
}

ConjugateResult debruijn_conjugate_log(const SlowlyVarying& L, double log_x,
                                       int max_iter, double tol) {
  if (L.is_constant()) return {1.0 / L.constant_value(), 0.0, 0};
  return debruijn_conjugate_iterative(L, log_x, max_iter, tol);
}

ConjugateResult debruijn_conjugate(const SlowlyVarying& L, double x, int max_iter, double tol) {
  constexpr double kXMin = 10.0;
  if (!(x >= kXMin)) throw config_error("conjugate argument must be >= 10");
  return debruijn_conjugate_log(L, std::log(x), max_iter, tol);
}

double RegVaryingTail::unclamped_log_tail(double lx) const {
  return std::log(L_.eval_log(lx)) - alpha_ * lx;
}

RegVaryingTail::RegVaryingTail(double alpha, SlowlyVarying L, double support_left)
    : alpha_(alpha), L_(L), support_(support_left) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("tail exponent must lie in (0,1)");
  if (!(support_left > 0.0) || !std::isfinite(support_left))
    throw config_error("support_left must be finite and > 0");
  // Reject tails whose unclamped value exceeds 1 on the support. The candidate
  // maxima are the left edge and, for log_power(beta>0), the hump at e^(beta/alpha).
  const double ls = std::log(support_);
  double worst = unclamped_log_tail(ls);
  if (!L_.is_constant() && L_.beta() > 0.0) {
    const double lh = L_.beta() / alpha_;
    if (lh > std::max(ls, 1.0)) worst = std::max(worst, unclamped_log_tail(lh));
  }
  if (worst > 1e-9) throw config_error("tail exceeds 1 on its support; shift support_left right");

  // Flatten the fold: the raw log tail falls until ln(x) = 1, rises to the hump
  // at beta/alpha, then falls for good. Its running minimum is the value at the
  // rise's start, held until the decay recrosses it.
  if (!L_.is_constant() && L_.beta() > 0.0) {
    const double peak = L_.beta() / alpha_;
    const double start = std::max(ls, 1.0);
    if (peak > start) {
      plo_ = start;
      hmin_ = unclamped_log_tail(start);
      double hi = peak + 1.0;
      while (unclamped_log_tail(hi) > hmin_) hi = peak + 2.0 * (hi - peak);
      double lo = peak;
      for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (unclamped_log_tail(mid) > hmin_ ? lo : hi) = mid;
      }
      phi_ = hi;
      has_plateau_ = true;
    }
  }
}

double RegVaryingTail::tail(double x) const {
  if (!std::isfinite(x)) {
    if (std::isnan(x)) throw config_error("tail argument is NaN");
    return x > 0 ? 0.0 : 1.0;
  }
  if (x < support_) return 1.0;
  const double lx = std::log(x);
  if (has_plateau_ && lx > plo_ && lx < phi_) return std::min(1.0, std::exp(hmin_));
  return std::min(1.0, std::exp(unclamped_log_tail(lx)));
}

double RegVaryingTail::quantile(double u) const {
  if (!(u >= 0.0 && u < 1.0)) throw config_error("quantile level must lie in [0,1)");
  const double target = 1.0 - u;
  if (tail(support_) <= target) return support_;

  if (L_.is_constant()) {
    // c*x^-alpha = target  =>  x = (c/target)^(1/alpha)
    return std::exp((std::log(L_.constant_value()) - std::log(target)) / alpha_);
  }

  const double lt = std::log(target);
  const double ls = std::log(support_);
  auto log_tail = [this](double lx) { return std::min(0.0, unclamped_log_tail(lx)); };

  // Bisect a decreasing segment [llo, lhi] with log_tail(llo) > lt >= log_tail(lhi).
  auto bisect = [&](double llo, double lhi) {
    for (int i = 0; i < 300 && (lhi - llo) > 1e-14 * std::max(1.0, std::fabs(lhi)); ++i) {
      const double mid = 0.5 * (llo + lhi);
      (log_tail(mid) > lt ? llo : lhi) = mid;
    }
    return std::exp(lhi);
  };

  const double beta = L_.beta();
  // Segment [support, e]: pure x^-alpha, decreasing.
  if (ls < 1.0 && log_tail(1.0) <= lt) return bisect(ls, 1.0);
  // For beta > 0 the tail rises on [e, e^(beta/alpha)]; no crossing can start there.
  double lstart = std::max(ls, beta > 0.0 ? std::max(1.0, beta / alpha_) : 1.0);
  // Final decreasing segment [lstart, inf): grow the bracket, then bisect.
  double lhi = lstart + 1.0;
  while (log_tail(lhi) > lt) lhi = lstart + 2.0 * (lhi - lstart);
  return bisect(lstart, lhi);
}

double RegVaryingTail::truncated_first_moment_exact(double f) const {
  if (!(f >= support_)) throw config_error("truncation level must be >= support_left");
  // E[X 1{X<=f}] = integral_0^f (tail(t) - tail(f)) dt = s + integral_s^f tail - f*tail(f).
  double integral = 0.0;
  if (L_.is_constant()) {
    const double c = L_.constant_value();
    integral = c * (std::pow(f, 1.0 - alpha_) - std::pow(support_, 1.0 - alpha_)) / (1.0 - alpha_);
  } else {
    const double e_edge = std::exp(1.0);
    const double a = support_, b = f;
    const double b1 = std::min(b, e_edge);
    if (b1 > a) {  // L == 1 below e
      integral += (std::pow(b1, 1.0 - alpha_) - std::pow(a, 1.0 - alpha_)) / (1.0 - alpha_);
    }
    const double beta = L_.beta(), alpha = alpha_;
    auto g = [beta, alpha](double lam) {  // t = e^lam:  (ln t)^beta t^(1-alpha) dlam
      return std::pow(lam, beta) * std::exp((1.0 - alpha) * lam);
    };
    if (has_plateau_) {
      // flat stretch carries the constant tail exp(hmin); the raw integrand
      // resumes once the decay recrosses the plateau level
      const double x_lo = std::exp(plo_), x_hi = std::exp(phi_);
      if (f > x_lo) integral += std::exp(hmin_) * (std::min(f, x_hi) - x_lo);
      if (f > x_hi) integral += integrate(g, phi_, std::log(f), 1e-10);
    } else {
      const double a2 = std::max(a, e_edge);
      if (f > a2) integral += integrate(g, std::log(a2), std::log(f), 1e-10);
    }
  }
  return support_ + integral - f * tail(f);
}

double RegVaryingTail::truncated_first_moment_asymptotic(double f) const {
  if (!(f >= support_)) throw config_error("truncation level must be >= support_left");
  return alpha_ / (1.0 - alpha_) * L_(f) * std::pow(f, 1.0 - alpha_);
}

}  // namespace trimlab
