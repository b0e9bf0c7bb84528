#pragma once

#include <Eigen/Core>
#include <complex>
#include <memory>

namespace fedtwin {

// Real <-> half-complex FFT of a fixed size, backed by FFTW. One instance per
// transform size; instances are cheap enough to keep per thread. Plan
// creation is serialized internally (FFTW planning is not thread-safe), and
// executing distinct instances concurrently is safe.
//
// forward() is unnormalized; inverse() applies the 1/n factor, so
// inverse(forward(u)) == u up to rounding.
class RealFft {
 public:
  explicit RealFft(int n);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const;
  int spectrum_size() const;  // n/2 + 1

  Eigen::VectorXcd forward(const Eigen::VectorXd& field) const;
  Eigen::VectorXd inverse(const Eigen::VectorXcd& spectrum) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fedtwin
