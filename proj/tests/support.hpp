// serkit/tests/support.hpp
//
// Shared test utilities: the O(N^2) DFT oracle, a central-difference
// gradient checker, and a scratch-directory guard. Oracles here are kept
// independent of the library code they check.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SERKIT_TESTS_SUPPORT_HPP
#define SERKIT_TESTS_SUPPORT_HPP

#include "serkit/nn.hpp"
#include "serkit/rng.hpp"
#include "serkit/types.hpp"

#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace serkit::testing {

// Direct evaluation of the DFT definition; deliberately naive.
inline std::vector<std::complex<double>> naiveDft(
    const Eigen::Ref<const Vector>& x, int fft_size) {
  std::vector<std::complex<double>> out(static_cast<std::size_t>(fft_size));
  for (int k = 0; k < fft_size; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int n = 0; n < x.size() && n < fft_size; ++n) {
      const double angle = -2.0 * M_PI * k * n / fft_size;
      acc += x(n) * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[static_cast<std::size_t>(k)] = acc;
  }
  return out;
}

inline Matrix randomMatrix(Rng& rng, Index rows, Index cols,
                           double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = scale * rng.uniform(-1.0, 1.0);
    }
  }
  return m;
}

// Central finite differences over every parameter coordinate.
// loss() must be a deterministic pure function of the params. Coordinates
// where both gradients are below the floor count as agreeing: down there
// the difference quotient is pure roundoff.
inline double maxRelativeGradError(ParamSet& params, const ParamSet& analytic,
                                   const std::function<double()>& loss,
                                   double h = 1e-5) {
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& p = params[k].value;
    const Matrix& g = analytic[k].value;
    for (Index i = 0; i < p.rows(); ++i) {
      for (Index j = 0; j < p.cols(); ++j) {
        const double saved = p(i, j);
        p(i, j) = saved + h;
        const double up = loss();
        p(i, j) = saved - h;
        const double down = loss();
        p(i, j) = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double denom =
            std::max({std::abs(numeric), std::abs(g(i, j)), 1e-6});
        worst = std::max(worst, std::abs(numeric - g(i, j)) / denom);
      }
    }
  }
  return worst;
}

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("serkit-" + tag + "-" + std::to_string(++counter) + "-" +
             std::to_string(
                 std::hash<std::string>{}(tag) % 100000));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& child = {}) const {
    return child.empty() ? path_.string() : (path_ / child).string();
  }

 private:
  std::filesystem::path path_;
};

}  // namespace serkit::testing

#endif  // SERKIT_TESTS_SUPPORT_HPP
