#include "ioest/kernels.hpp"

#include <cmath>

namespace ioest::kernels {
namespace {

CMatrix spectrum_at(const Matrix& samples, const Vector& window, int hop, double omega) {
  const Eigen::Index channels = samples.rows();
  const Eigen::Index T = samples.cols();
  const Eigen::Index L = window.size();
  const Eigen::Index segments = (T - L) / hop + 1;

  // e^{-j w t} for t in [0, L) shared by every segment.
  CVector phase(L);
  for (Eigen::Index t = 0; t < L; ++t) {
    phase(t) = std::polar(1.0, -omega * static_cast<double>(t)) * window(t);
  }

  CMatrix acc = CMatrix::Zero(channels, channels);
  for (Eigen::Index s = 0; s < segments; ++s) {
    const Eigen::Index start = s * hop;
    CVector X = samples.middleCols(start, L).cast<Complex>() * phase;
    acc.noalias() += X * X.adjoint();
  }
  const double norm = static_cast<double>(segments) * window.squaredNorm();
  return acc / norm;
}

void check(const Matrix& samples, const Vector& window, int hop) {
  if (window.size() < 1 || hop < 1 || samples.cols() < window.size()) {
    throw Error(ErrorCode::TooFewSamples, "record shorter than one periodogram segment");
  }
}

}  // namespace

std::vector<CMatrix> welch_cross_spectra_serial(const Matrix& samples, const Vector& window,
                                                int hop, const std::vector<double>& omegas) {
  check(samples, window, hop);
  return map_serial<CMatrix>(omegas.size(), [&](std::size_t k) {
    return spectrum_at(samples, window, hop, omegas[k]);
  });
}

std::vector<CMatrix> welch_cross_spectra(const Matrix& samples, const Vector& window, int hop,
                                         const std::vector<double>& omegas) {
  check(samples, window, hop);
  return map<CMatrix>(omegas.size(), [&](std::size_t k) {
    return spectrum_at(samples, window, hop, omegas[k]);
  });
}

}  // namespace ioest::kernels
