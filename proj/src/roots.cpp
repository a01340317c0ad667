#include "kdetect/roots.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace kdetect::num {

RootResult brent(const std::function<double(double)>& f, const RootBracket& bracket, int max_iter) {
  if (!(bracket.lo < bracket.hi)) throw RootError("find_root: bracket requires lo < hi");
  if (!(bracket.tol > 0.0)) throw RootError("find_root: tol must be positive");
  double a = bracket.lo;
  double b = bracket.hi;
  double fa = f(a);
  double fb = f(b);
  if (std::isnan(fa) || std::isnan(fb)) throw RootError("find_root: function is NaN at bracket end");
  if (fa == 0.0) return {a, 0.0, 0};
  if (fb == 0.0) return {b, 0.0, 0};
  if ((fa > 0.0) == (fb > 0.0)) {
    throw RootError("find_root: no sign change on [" + std::to_string(a) + ", " + std::to_string(b) +
                    "], f(lo)=" + std::to_string(fa) + ", f(hi)=" + std::to_string(fb));
  }
  double c = a;
  double fc = fa;
  double d = b - a;
  double e = d;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (int it = 1; it <= max_iter; ++it) {
    if ((fb > 0.0) == (fc > 0.0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol1 = 2.0 * eps * std::fabs(b) + 0.5 * bracket.tol;
    const double xm = 0.5 * (c - b);
    if (std::fabs(xm) <= tol1 || fb == 0.0) return {b, fb, it};
    if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
      const double s = fb / fa;
      double p;
      double q;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        const double qq = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
        q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q;
      p = std::fabs(p);
      const double min1 = 3.0 * xm * q - std::fabs(tol1 * q);
      const double min2 = std::fabs(e * q);
      if (2.0 * p < std::min(min1, min2)) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::fabs(d) > tol1 ? d : (xm > 0.0 ? tol1 : -tol1);
    fb = f(b);
    if (std::isnan(fb)) throw RootError("find_root: function returned NaN at " + std::to_string(b));
  }
  throw RootError("find_root: iteration limit reached, last residual " + std::to_string(fb));
}

}  // namespace kdetect::num
