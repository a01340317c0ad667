#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace kdetect::num {

struct RootBracket {
  double lo = 0.0;
  double hi = 1.0;
  double tol = 1e-12;
};

class RootError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RootResult {
  double root = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

// Brent's method. Requires a sign change over the bracket; throws RootError otherwise.
RootResult brent(const std::function<double(double)>& f, const RootBracket& bracket,
                 int max_iter = 200);

inline double find_root(const std::function<double(double)>& f, const RootBracket& bracket) {
  return brent(f, bracket).root;
}

}  // namespace kdetect::num
