#include "fedtwin/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>

namespace fedtwin {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct RealFft::Impl {
  int n = 0;
  double* real_buf = nullptr;
  fftw_complex* cplx_buf = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;

  explicit Impl(int size) : n(size) {
    real_buf = fftw_alloc_real(static_cast<std::size_t>(n));
    cplx_buf = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard lock(planner_mutex());
    fwd = fftw_plan_dft_r2c_1d(n, real_buf, cplx_buf, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(n, cplx_buf, real_buf, FFTW_ESTIMATE);
  }

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
    fftw_free(real_buf);
    fftw_free(cplx_buf);
  }
};

RealFft::RealFft(int n) {
  if (n < 2) throw std::invalid_argument("RealFft: size must be >= 2");
  impl_ = std::make_unique<Impl>(n);
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

int RealFft::size() const { return impl_->n; }
int RealFft::spectrum_size() const { return impl_->n / 2 + 1; }

Eigen::VectorXcd RealFft::forward(const Eigen::VectorXd& field) const {
  if (field.size() != impl_->n) {
    throw std::invalid_argument("RealFft::forward: field length mismatch");
  }
  for (int i = 0; i < impl_->n; ++i) impl_->real_buf[i] = field[i];
  fftw_execute(impl_->fwd);
  Eigen::VectorXcd out(spectrum_size());
  for (int i = 0; i < spectrum_size(); ++i) {
    out[i] = std::complex<double>(impl_->cplx_buf[i][0], impl_->cplx_buf[i][1]);
  }
  return out;
}

Eigen::VectorXd RealFft::inverse(const Eigen::VectorXcd& spectrum) const {
  if (spectrum.size() != spectrum_size()) {
    throw std::invalid_argument("RealFft::inverse: spectrum length mismatch");
  }
  for (int i = 0; i < spectrum_size(); ++i) {
    impl_->cplx_buf[i][0] = spectrum[i].real();
    impl_->cplx_buf[i][1] = spectrum[i].imag();
  }
  fftw_execute(impl_->inv);
  Eigen::VectorXd out(impl_->n);
  const double scale = 1.0 / impl_->n;
  for (int i = 0; i < impl_->n; ++i) out[i] = impl_->real_buf[i] * scale;
  return out;
}

}  // namespace fedtwin
