#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace kdetect::num {

struct QuadratureSpec {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int max_subdivisions = 200;
  double truncation_tail_mass = 1e-14;

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || !(truncation_tail_mass > 0.0))
      throw std::invalid_argument("QuadratureSpec: tolerances must be strictly positive");
    if (max_subdivisions < 16)
      throw std::invalid_argument("QuadratureSpec: max_subdivisions must be >= 16");
  }
};

struct QuadResult {
  double value = 0.0;
  double abs_error = 0.0;
  int intervals = 0;
  bool converged = false;
};

class AccuracyError : public std::runtime_error {
 public:
  AccuracyError(const std::string& what, double achieved)
      : std::runtime_error(what + " (achieved error estimate " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  double achieved_error() const noexcept { return achieved_; }

 private:
  double achieved_;
};

namespace detail {

// 15-point Kronrod nodes with embedded 7-point Gauss rule (QUADPACK qk15).
inline constexpr std::array<double, 8> xgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> wgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> wg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double resg = fc * wg[3];
  double resk = fc * wgk[7];
  double resabs = std::fabs(resk);
  std::array<double, 7> f1{}, f2{};
  for (int j = 0; j < 7; ++j) {
    const double dx = h * xgk[j];
    f1[j] = f(c - dx);
    f2[j] = f(c + dx);
    const double s = f1[j] + f2[j];
    resk += wgk[j] * s;
    resabs += wgk[j] * (std::fabs(f1[j]) + std::fabs(f2[j]));
    if (j % 2 == 1) resg += wg[j / 2] * s;
  }
  const double mean = 0.5 * resk;
  double resasc = wgk[7] * std::fabs(fc - mean);
  for (int j = 0; j < 7; ++j) resasc += wgk[j] * (std::fabs(f1[j] - mean) + std::fabs(f2[j] - mean));
  const double ah = std::fabs(h);
  resasc *= ah;
  double err = std::fabs((resk - resg) * h);
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  const double round_floor = 50.0 * std::numeric_limits<double>::epsilon() * resabs * ah;
  if (round_floor > std::numeric_limits<double>::min()) err = std::max(err, round_floor);
  return {a, b, resk * h, err};
}

// Globally adaptive bisection over a list of finite intervals.
template <class F>
QuadResult adapt(F& f, std::span<const double> cuts, const QuadratureSpec& spec) {
  std::priority_queue<Panel> heap;
  double total = 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] == cuts[i]) continue;
    Panel p = gk15(f, cuts[i], cuts[i + 1]);
    total += p.value;
    err += p.error;
    heap.push(p);
  }
  int n = static_cast<int>(heap.size());
  while (err > std::max(spec.abs_tol, spec.rel_tol * std::fabs(total))) {
    if (n >= spec.max_subdivisions || heap.empty()) {
      return {total, err, n, false};
    }
    const Panel worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > std::min(worst.a, worst.b) && mid < std::max(worst.a, worst.b))) {
      return {total, err, n, false};
    }
    heap.pop();
    const Panel left = gk15(f, worst.a, mid);
    const Panel right = gk15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++n;
  }
  // re-sum to shed accumulated cancellation in the running totals
  double sum = 0.0;
  double esum = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    esum += heap.top().error;
    heap.pop();
  }
  return {sum, esum, n, true};
}

}  // namespace detail

// Integrate f over [a, b]; either end may be infinite. Breakpoints (finite, inside (a, b))
// seed the initial partition. Does not throw on non-convergence: inspect `converged`.
template <class F>
QuadResult integrate(F&& f, double a, double b, const QuadratureSpec& spec = {},
                     std::span<const double> breakpoints = {}) {
  spec.validate();
  if (std::isnan(a) || std::isnan(b)) throw std::invalid_argument("integrate: NaN limit");
  if (a == b) return {0.0, 0.0, 0, true};
  if (a > b) {
    QuadResult r = integrate(f, b, a, spec, breakpoints);
    r.value = -r.value;
    return r;
  }
  std::vector<double> pts;
  pts.push_back(a);
  for (double p : breakpoints)
    if (p > a && p < b) pts.push_back(p);
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());

  const bool lo_inf = std::isinf(a);
  const bool hi_inf = std::isinf(b);
  if (!lo_inf && !hi_inf) return detail::adapt(f, pts, spec);

  // Finite interior pieces are integrated directly; infinite tails through x = c +- (1-t)/t.
  const double first = pts.size() > 2 ? pts[1] : (lo_inf && hi_inf ? 0.0 : (lo_inf ? b : a));
  const double last = pts.size() > 2 ? pts[pts.size() - 2] : first;
  std::vector<double> inner;
  if (pts.size() > 2) inner.assign(pts.begin() + 1, pts.end() - 1);
  if (!lo_inf) inner.insert(inner.begin(), a);
  if (!hi_inf) inner.push_back(b);

  QuadResult out{0.0, 0.0, 0, true};
  auto accumulate = [&](const QuadResult& r) {
    out.value += r.value;
    out.abs_error += r.abs_error;
    out.intervals += r.intervals;
    out.converged = out.converged && r.converged;
  };
  QuadratureSpec part = spec;
  part.abs_tol = spec.abs_tol / 3.0;
  if (inner.size() >= 2) accumulate(detail::adapt(f, inner, part));
  const std::array<double, 2> unit = {0.0, 1.0};
  if (hi_inf) {
    auto g = [&](double t) {
      const double x = last + (1.0 - t) / t;
      return f(x) / (t * t);
    };
    accumulate(detail::adapt(g, unit, part));
  }
  if (lo_inf) {
    auto g = [&](double t) {
      const double x = first - (1.0 - t) / t;
      return f(x) / (t * t);
    };
    accumulate(detail::adapt(g, unit, part));
  }
  return out;
}

// Same as integrate() but throws AccuracyError instead of returning a non-converged result.
template <class F>
double integrate_1d(F&& f, double a, double b, const QuadratureSpec& spec = {},
                    std::span<const double> breakpoints = {}) {
  const QuadResult r = integrate(f, a, b, spec, breakpoints);
  if (!r.converged || !std::isfinite(r.value))
    throw AccuracyError("integrate_1d: tolerance not met", r.abs_error);
  return r.value;
}

// Integral over [a, inf) of an oscillating integrand, summed panel by panel with panels aligned
// to the supplied half period. `envelope(x)` bounds |f| beyond x; summation stops once the
// envelope falls below truncation_tail_mass times its value at a.
template <class F, class E>
QuadResult integrate_oscillatory(F&& f, double a, double half_period, E&& envelope,
                                 const QuadratureSpec& spec = {}, int max_panels = 1 << 20) {
  spec.validate();
  if (!(half_period > 0.0)) throw std::invalid_argument("integrate_oscillatory: half_period must be > 0");
  const double peak = std::fabs(envelope(a));
  QuadResult out{0.0, 0.0, 0, true};
  QuadratureSpec panel = spec;
  for (int j = 0; j < max_panels; ++j) {
    const double lo = a + j * half_period;
    const double hi = lo + half_period;
    const std::array<double, 2> cut = {lo, hi};
    const QuadResult r = detail::adapt(f, cut, panel);
    out.value += r.value;
    out.abs_error += r.abs_error;
    out.intervals += r.intervals;
    out.converged = out.converged && r.converged;
    if (std::fabs(envelope(hi)) <= spec.truncation_tail_mass * peak) return out;
  }
  out.converged = false;
  return out;
}

}  // namespace kdetect::num
