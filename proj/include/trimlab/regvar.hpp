#pragma once
#include <string>

namespace trimlab {

/**
 * Slowly varying factor in reduced normal form.
 *
 * Two families close under powers, so arbitrary power-of-family compositions
 * reduce at construction:
 *   constant(c)   : L(x) = c, c > 0
 *   log_power(b)  : L(x) = max(ln x, 1)^b   (clamp keeps L positive below e)
 */
class SlowlyVarying {
 public:
  static SlowlyVarying constant(double c);
  static SlowlyVarying log_power(double beta);

  // L^e, reduced in closed form: const(c)^e = const(c^e), logpow(b)^e = logpow(b*e).
  SlowlyVarying pow(double e) const;

  double operator()(double x) const;  // x > 0
  double eval_log(double lx) const;   // L(exp(lx)); safe for astronomically large x

  bool is_constant() const { return family_ == Family::kConstant; }
  double constant_value() const { return c_; }
  double beta() const { return beta_; }
  std::string to_string() const;

 private:
  enum class Family { kConstant, kLogPower };
  SlowlyVarying(Family f, double c, double beta) : family_(f), c_(c), beta_(beta) {}
  Family family_;
  double c_ = 1.0;
  double beta_ = 0.0;
};

struct ConjugateResult {
  double value = 0;
  double residual = 0;  // |L(x) * conj(x*L(x)) - 1|, the defining property's defect
  int iterations = 0;
};

/**
 * de Bruijn conjugate L# at x via the fixed point t = 1/L(x*t), t0 = 1,
 * stopping at |t_{k+1}-t_k| <= tol*t_k. Constant families short-circuit to the
 * exact 1/c. The conjugate is only unique up to asymptotic equivalence; this
 * fixed-point solution is the one exposed, and the residual quantifies how
 * well it satisfies L(x)*L#(x*L(x)) -> 1 at the given x.
 *
 * Throws nonconvergence_error (carrying the last iterate) past max_iter.
 */
ConjugateResult debruijn_conjugate(const SlowlyVarying& L, double x,
                                   int max_iter = 200, double tol = 1e-12);

// Same, with the argument given as ln(x); no lower bound on x enforced.
ConjugateResult debruijn_conjugate_log(const SlowlyVarying& L, double log_x,
                                       int max_iter = 200, double tol = 1e-12);

// Fixed-point iteration with no analytic shortcut; validates the fast paths.
ConjugateResult debruijn_conjugate_iterative(const SlowlyVarying& L, double log_x,
                                             int max_iter = 200, double tol = 1e-12);

/**
 * Right tail P(X > x) = min(1, L(x) * x^-alpha) on [support_left, inf),
 * alpha in (0,1). Construction rejects parameters whose unclamped tail
 * exceeds 1 anywhere on the support, so the clamp only ever acts at the
 * support's left edge. Mass below support_left is an atom at support_left.
 *
 * log_power factors with beta > 0 make the raw formula rise over one fold
 * before settling into decay; a non-monotone function is not a tail, so the
 * fold is flattened to its running minimum. The distribution puts no mass
 * under the flattened stretch and the tail equals L(x) * x^-alpha exactly
 * beyond it, which is the regime every asymptotic in this library lives in.
 */
class RegVaryingTail {
 public:
  RegVaryingTail(double alpha, SlowlyVarying L, double support_left = 1.0);

  double tail(double x) const;  // 1 for x < support_left
  double cdf(double x) const { return 1.0 - tail(x); }

  // Generalized inverse F^-(u) = inf{x : F(x) >= u}, u in [0,1).
  // Exact for constant L; monotone-segment bisection (rel tol ~1e-13) otherwise,
  // so both Galois inequalities hold up to rounding even when L*x^-alpha is
  // locally non-monotone.
  double quantile(double u) const;

  // E[X 1{X <= f}], f >= support_left. Closed form for constant L, adaptive
  // quadrature (abs tol 1e-10) otherwise.
  double truncated_first_moment_exact(double f) const;
  // alpha/(1-alpha) * L(f) * f^(1-alpha).
  double truncated_first_moment_asymptotic(double f) const;

  double alpha() const { return alpha_; }
  const SlowlyVarying& L() const { return L_; }
  double support_left() const { return support_; }

 private:
  double unclamped_log_tail(double lx) const;  // ln(L(x) x^-alpha) at lx = ln x
  double alpha_;
  SlowlyVarying L_;
  double support_;
  // fold flattened to its running minimum: log tail is hmin_ on [plo_, phi_]
  bool has_plateau_ = false;
  double plo_ = 0.0, phi_ = 0.0, hmin_ = 0.0;
};

}  // namespace trimlab
