#include "diffsmooth/closure.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diffsmooth/error.hpp"

namespace diffsmooth {

Laurent::Laurent(std::initializer_list<double> ascending) {
  int e = 0;
  for (double v : ascending) set(e++, v);
}

Laurent Laurent::monomial(double coef, int exponent) {
  Laurent p;
  p.set(exponent, coef);
  return p;
}

void Laurent::set(int e, double v) {
  if (e < kMinExp || e > kMaxExp) {
    if (v == 0.0) return;
    throw Error(ErrorKind::ClosureUnsupported, "exponent " + std::to_string(e) + " out of range");
  }
  c_[e - kMinExp] = v;
  if (empty()) {
    lo_ = hi_ = e;
  } else {
    lo_ = std::min(lo_, e);
    hi_ = std::max(hi_, e);
  }
}

int Laurent::degree() const noexcept {
  for (int e = hi_; e >= lo_; --e) {
    if (c_[e - kMinExp] != 0.0) return e;
  }
  return kMinExp - 1;
}

double Laurent::operator()(double x) const noexcept {
  if (empty()) return 0.0;
  double acc = 0.0;
  for (int e = hi_; e >= lo_; --e) acc = acc * x + c_[e - kMinExp];
  return lo_ == 0 ? acc : acc * std::pow(x, lo_);
}

Laurent Laurent::derivative() const {
  Laurent d;
  for (int e = lo_; e <= hi_; ++e) {
    if (e != 0) d.set(e - 1, e * c_[e - kMinExp]);
  }
  return d;
}

Laurent Laurent::shifted(int by) const {
  Laurent s;
  if (empty()) return s;
  if (lo_ + by < kMinExp || hi_ + by > kMaxExp) {
    for (int e = lo_; e <= hi_; ++e) s.set(e + by, c_[e - kMinExp]);
    return s;
  }
  for (int e = lo_; e <= hi_; ++e) s.c_[e + by - kMinExp] = c_[e - kMinExp];
  s.lo_ = lo_ + by;
  s.hi_ = hi_ + by;
  return s;
}

Laurent& Laurent::operator+=(const Laurent& o) {
  if (o.empty()) return *this;
  if (empty()) return *this = o;
  for (int e = o.lo_; e <= o.hi_; ++e) c_[e - kMinExp] += o.c_[e - kMinExp];
  lo_ = std::min(lo_, o.lo_);
  hi_ = std::max(hi_, o.hi_);
  return *this;
}

Laurent& Laurent::operator-=(const Laurent& o) {
  if (o.empty()) return *this;
  if (empty()) {
    *this = o;
    return *this *= -1.0;
  }
  for (int e = o.lo_; e <= o.hi_; ++e) c_[e - kMinExp] -= o.c_[e - kMinExp];
  lo_ = std::min(lo_, o.lo_);
  hi_ = std::max(hi_, o.hi_);
  return *this;
}

Laurent& Laurent::operator*=(double s) {
  for (int e = lo_; e <= hi_; ++e) c_[e - kMinExp] *= s;
  return *this;
}

Laurent operator*(const Laurent& a, const Laurent& b) {
  Laurent r;
  constexpr int k0 = Laurent::kMinExp;
  int alo = a.lo_, ahi = a.hi_, blo = b.lo_, bhi = b.hi_;
  while (alo <= ahi && a.c_[alo - k0] == 0.0) ++alo;
  while (ahi >= alo && a.c_[ahi - k0] == 0.0) --ahi;
  while (blo <= bhi && b.c_[blo - k0] == 0.0) ++blo;
  while (bhi >= blo && b.c_[bhi - k0] == 0.0) --bhi;
  if (alo > ahi || blo > bhi) return r;
  if (alo + blo < k0 || ahi + bhi > Laurent::kMaxExp) {
    throw Error(ErrorKind::ClosureUnsupported, "polynomial product exponent out of range");
  }
  for (int i = alo; i <= ahi; ++i) {
    const double ai = a.c_[i - k0];
    for (int j = blo; j <= bhi; ++j) r.c_[i + j - k0] += ai * b.c_[j - k0];
  }
  r.lo_ = alo + blo;
  r.hi_ = ahi + bhi;
  return r;
}

GaussianMoments::GaussianMoments(double mean, double variance, InverseMomentRule rule)
    : m_(mean), S_(variance), inverse_ok_(std::abs(mean) >= 1e-8) {
  auto at = [](int n) { return n - kMinOrder; };
  value_[at(0)] = 1.0;
  value_[at(1)] = m_;
  for (int n = 2; n <= kMaxOrder; ++n) {
    value_[at(n)] = m_ * value_[at(n - 1)] + (n - 1) * S_ * value_[at(n - 2)];
  }
  // d/dm E[x^n] = n E[x^{n-1}],  d/dS E[x^n] = n(n-1)/2 E[x^{n-2}]
  for (int n = 1; n <= kMaxOrder; ++n) {
    dm_[at(n)] = n * value_[at(n - 1)];
    if (n >= 2) dS_[at(n)] = 0.5 * n * (n - 1) * value_[at(n - 2)];
  }
  if (inverse_ok_) {
    const double m = m_;
    const double S = S_;
    const double m2 = m * m;
    if (rule == InverseMomentRule::FirstOrder) {
      const double q = m2 + S;
      value_[at(-1)] = 1.0 / m;
      dm_[at(-1)] = -1.0 / m2;
      dS_[at(-1)] = 0.0;
      value_[at(-2)] = 1.0 / q;
      dm_[at(-2)] = -2.0 * m / (q * q);
      dS_[at(-2)] = -1.0 / (q * q);
    } else {
      const double m3 = m2 * m;
      const double m4 = m2 * m2;
      value_[at(-1)] = 1.0 / m + S / m3;
      dm_[at(-1)] = -1.0 / m2 - 3.0 * S / m4;
      dS_[at(-1)] = 1.0 / m3;
      value_[at(-2)] = 1.0 / m2 + 3.0 * S / m4;
      dm_[at(-2)] = -2.0 / m3 - 12.0 * S / (m4 * m);
      dS_[at(-2)] = 3.0 / m4;
    }
  }
}

void GaussianMoments::require(const Laurent& p) const {
  if (p.empty()) return;
  if (p.lowest() < kMinOrder) {
    for (int e = p.lowest(); e < kMinOrder; ++e) {
      if (p.coef(e) != 0.0) {
        throw Error(ErrorKind::ClosureUnsupported,
                    "inverse moment of order " + std::to_string(-e) + " requested");
      }
    }
  }
  if (!inverse_ok_) {
    for (int e = p.lowest(); e < 0; ++e) {
      if (p.coef(e) != 0.0) {
        throw Error(ErrorKind::NearSingularMean,
                    "mean " + std::to_string(m_) + " too close to 0 for inverse moments");
      }
    }
  }
}

double GaussianMoments::moment(int n) const {
  if (n < kMinOrder || n > kMaxOrder) {
    throw Error(ErrorKind::UnsupportedOrder, "moment order " + std::to_string(n));
  }
  if (n < 0 && !inverse_ok_) throw Error(ErrorKind::NearSingularMean, "mean too close to 0");
  return value_[n - kMinOrder];
}

double GaussianMoments::expect(const Laurent& p) const {
  require(p);
  double acc = 0.0;
  for (int e = std::max(p.lowest(), kMinOrder); e <= p.highest(); ++e) {
    acc += p.coef(e) * value_[e - kMinOrder];
  }
  return acc;
}

double GaussianMoments::d_mean(const Laurent& p) const {
  require(p);
  double acc = 0.0;
  for (int e = std::max(p.lowest(), kMinOrder); e <= p.highest(); ++e) {
    acc += p.coef(e) * dm_[e - kMinOrder];
  }
  return acc;
}

double GaussianMoments::d_var(const Laurent& p) const {
  require(p);
  double acc = 0.0;
  for (int e = std::max(p.lowest(), kMinOrder); e <= p.highest(); ++e) {
    acc += p.coef(e) * dS_[e - kMinOrder];
  }
  return acc;
}

}  // namespace diffsmooth
