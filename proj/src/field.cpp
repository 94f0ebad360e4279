#include "teg/field.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace teg {

Grid project_field(std::span<const FieldSample> samples, const GprParams& params,
                   const LatticeDomain& domain) {
  if (params.lengthscale <= 0.0) throw std::invalid_argument("gpr lengthscale must be > 0");
  const int n = static_cast<int>(samples.size());
  if (n > kMaxGprSamples) throw std::invalid_argument("gpr sample count exceeds cap");

  Grid out = Grid::Constant(domain.height, domain.width, params.prior_mean);
  if (n == 0) return out;

  for (const auto& s : samples) {
    if (s.cx < 0 || s.cx >= domain.width || s.cy < 0 || s.cy >= domain.height)
      throw std::invalid_argument("gpr sample outside domain");
  }

  const double inv2l2 = 1.0 / (2.0 * params.lengthscale * params.lengthscale);

  // duplicate sample cells need observation noise to stay invertible
  if (params.noise_variance <= 0.0) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (samples[i].cx == samples[j].cx && samples[i].cy == samples[j].cy)
          throw std::invalid_argument("duplicate gpr samples with zero noise");
  }

  Eigen::MatrixXd K(n, n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    y(i) = samples[i].value - params.prior_mean;
    for (int j = 0; j < n; ++j) {
      const double d2 =
          domain.cell_dist2(samples[i].cx, samples[i].cy, samples[j].cx, samples[j].cy);
      K(i, j) = params.signal_variance * std::exp(-d2 * inv2l2);
    }
    K(i, i) += params.noise_variance;
  }

  Eigen::LDLT<Eigen::MatrixXd> ldlt(K);
  if (ldlt.info() != Eigen::Success)
    throw std::invalid_argument("singular gpr kernel matrix");
  const Eigen::VectorXd alpha = ldlt.solve(y);
  if (!alpha.allFinite()) throw std::invalid_argument("singular gpr kernel matrix");

  for (int cy = 0; cy < domain.height; ++cy) {
    for (int cx = 0; cx < domain.width; ++cx) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d2 = domain.cell_dist2(cx, cy, samples[i].cx, samples[i].cy);
        acc += alpha(i) * params.signal_variance * std::exp(-d2 * inv2l2);
      }
      out(cy, cx) = params.prior_mean + acc;
    }
  }
  return out;
}

DualGrid dualize(const Grid& phi_now, const Grid& phi_prev, int d_epoch) {
  if (d_epoch < 1) throw std::invalid_argument("dualize requires d_epoch >= 1");
  if (phi_now.rows() != phi_prev.rows() || phi_now.cols() != phi_prev.cols())
    throw std::invalid_argument("dualize grid shapes differ");
  return {phi_now, (phi_now - phi_prev) / static_cast<double>(d_epoch)};
}

void write_field_tsv(std::ostream& os, const FieldState& f) {
  os << "cell_x\tcell_y\ts_phys\th_auction\tphi_real\tphi_dual\tb_z\n";
  for (int cy = 0; cy < f.domain.height; ++cy) {
    for (int cx = 0; cx < f.domain.width; ++cx) {
      os << cx << '\t' << cy << '\t' << f.s_phys(cy, cx) << '\t' << f.h_auction(cy, cx)
         << '\t' << f.phi.real(cy, cx) << '\t' << f.phi.dual(cy, cx) << '\t'
         << f.b_z(cy, cx) << '\n';
    }
  }
}

}  // namespace teg
