#include "pb/model.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "pb/errors.hpp"

namespace pb {

namespace {

constexpr double kPsdTol = -1e-10;

void check_correlation(double r, const char* name) {
  if (!(r >= -1.0 && r <= 1.0)) {
    throw InputError(std::string(name) + " must lie in [-1,1], got " + std::to_string(r));
  }
}

// Variance of Y among participants, 1 - xi * rho^2. Degenerate selection
// (non-positive) is a numeric error.
double selected_var_y(double rho, const SelectionContext& sel) {
  const double v = 1.0 - sel.xi * rho * rho;
  if (!(v > 0.0)) {
    throw NumericError("degenerate selection: 1 - xi*rho^2 <= 0 (rho = " +
                       std::to_string(rho) + ", xi = " + std::to_string(sel.xi) + ")");
  }
  return v;
}

double selected_gx_norm(double h2_x, const SelectionContext& sel) {
  const double v = 1.0 - sel.xi * h2_x;
  if (!(v > 0.0)) {
    throw NumericError("degenerate selection: 1 - xi*h2_x <= 0 (h2_x = " +
                       std::to_string(h2_x) + ", xi = " + std::to_string(sel.xi) + ")");
  }
  return v;
}

}  // namespace

ParticipationParams make_participation_params(double h2_x) {
  if (!(h2_x > 0.0 && h2_x < 1.0)) {
    throw InputError("participation h2_x must lie in (0,1), got " + std::to_string(h2_x));
  }
  return ParticipationParams{h2_x};
}

PhenotypeParams make_phenotype_params(double h2_y, double rho_g, double rho_e) {
  if (!(h2_y >= 0.0 && h2_y <= 1.0)) {
    throw InputError("h2_y must lie in [0,1], got " + std::to_string(h2_y));
  }
  check_correlation(rho_g, "rho_g");
  check_correlation(rho_e, "rho_e");
  return PhenotypeParams{h2_y, rho_g, rho_e};
}

bool pair_params_valid(const PairParams& pair) noexcept {
  Eigen::Matrix3d g, e;
  g << 1.0, pair.y1.rho_g, pair.y2.rho_g,
       pair.y1.rho_g, 1.0, pair.varphi_g,
       pair.y2.rho_g, pair.varphi_g, 1.0;
  e << 1.0, pair.y1.rho_e, pair.y2.rho_e,
       pair.y1.rho_e, 1.0, pair.varphi_e,
       pair.y2.rho_e, pair.varphi_e, 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> sg(g, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> se(e, Eigen::EigenvaluesOnly);
  return sg.eigenvalues().minCoeff() >= kPsdTol && se.eigenvalues().minCoeff() >= kPsdTol;
}

PairParams make_pair_params(const PhenotypeParams& y1, const PhenotypeParams& y2,
                            double varphi_g, double varphi_e) {
  check_correlation(varphi_g, "varphi_g");
  check_correlation(varphi_e, "varphi_e");
  PairParams pair{y1, y2, varphi_g, varphi_e};
  if (!pair_params_valid(pair)) {
    throw InputError("pair parameters imply a non-PSD correlation structure");
  }
  return pair;
}

double genetic_cov(const ParticipationParams& part, const PhenotypeParams& y) {
  return y.rho_g * std::sqrt(part.h2_x * y.h2_y);
}

double nongenetic_cov(const ParticipationParams& part, const PhenotypeParams& y) {
  return y.rho_e * std::sqrt((1.0 - part.h2_x) * (1.0 - y.h2_y));
}

double phenotypic_cor(const ParticipationParams& part, const PhenotypeParams& y) {
  return genetic_cov(part, y) + nongenetic_cov(part, y);
}

double pair_genetic_cov(const PairParams& pair) {
  return pair.varphi_g * std::sqrt(pair.y1.h2_y * pair.y2.h2_y);
}

double apparent_h2(const ParticipationParams& part, const PhenotypeParams& y,
                   const SelectionContext& sel) {
  const double xi = sel.xi;
  const double rg = genetic_cov(part, y);
  const double re = nongenetic_cov(part, y);
  const double rho = rg + re;
  const double dx = selected_gx_norm(part.h2_x, sel);
  const double dy = selected_var_y(rho, sel);
  const double num = y.h2_y - xi * rg * (rg + 2.0 * re) + xi * xi * part.h2_x * re * re / dx;
  return num / dy;
}

double apparent_pair_gcor(const ParticipationParams& part, const PairParams& pair,
                          const SelectionContext& sel) {
  if (!pair_params_valid(pair)) {
    throw InputError("apparent_pair_gcor: non-PSD pair parameters");
  }
  const double xi = sel.xi;
  const double rg1 = genetic_cov(part, pair.y1);
  const double rg2 = genetic_cov(part, pair.y2);
  const double re1 = nongenetic_cov(part, pair.y1);
  const double re2 = nongenetic_cov(part, pair.y2);
  const double rho1 = rg1 + re1;
  const double rho2 = rg2 + re2;
  const double dx = selected_gx_norm(part.h2_x, sel);
  const double d1 = selected_var_y(rho1, sel);
  const double d2 = selected_var_y(rho2, sel);
  const double h2pb1 = apparent_h2(part, pair.y1, sel);
  const double h2pb2 = apparent_h2(part, pair.y2, sel);
  if (!(h2pb1 > 0.0 && h2pb2 > 0.0)) {
    throw NumericError("apparent_pair_gcor: apparent heritability is zero");
  }
  const double num = pair_genetic_cov(pair) -
                     xi * (re1 * rg2 + re2 * rg1 + rg1 * rg2) +
                     xi * xi * part.h2_x * re1 * re2 / dx;
  return num / (std::sqrt(d1 * d2) * std::sqrt(h2pb1 * h2pb2));
}

double apparent_participation_gcor(const ParticipationParams& part, const PhenotypeParams& y,
                                   const SelectionContext& sel) {
  const double xi = sel.xi;
  const double rg = genetic_cov(part, y);
  const double rho = rg + nongenetic_cov(part, y);
  const double dx = selected_gx_norm(part.h2_x, sel);
  const double dy = selected_var_y(rho, sel);
  const double h2pb = apparent_h2(part, y, sel);
  if (!(h2pb > 0.0)) {
    throw NumericError("apparent_participation_gcor: apparent heritability is zero");
  }
  return (rg - xi * part.h2_x * rho) /
         (std::sqrt(dy * dx) * std::sqrt(part.h2_x * h2pb));
}

double mean_shift(const ParticipationParams& part, const PhenotypeParams& y,
                  const SelectionContext& sel) {
  if (sel.no_selection()) return 0.0;
  const double rho = phenotypic_cor(part, y);
  return rho * sel.mills / std::sqrt(selected_var_y(rho, sel));
}

ReparamCoeffs reparam(const ParticipationParams& part, const PhenotypeParams& y,
                      const SelectionContext& sel) {
  // make_participation_params guarantees 0 < h2_x < 1; re-check so raw structs
  // cannot divide by zero here.
  if (!(part.h2_x > 0.0 && part.h2_x < 1.0)) {
    throw InputError("reparam: h2_x must lie strictly in (0,1)");
  }
  ReparamCoeffs rc;
  rc.a = y.rho_g * std::sqrt(y.h2_y / part.h2_x);
  rc.b = y.rho_e * std::sqrt((1.0 - y.h2_y) / (1.0 - part.h2_x));
  rc.var_gw = (1.0 - y.rho_g * y.rho_g) * y.h2_y;
  rc.var_ew = (1.0 - y.rho_e * y.rho_e) * (1.0 - y.h2_y);
  const double dx = selected_gx_norm(part.h2_x, sel);
  rc.a_prime = rc.a - sel.xi * rc.b * (1.0 - part.h2_x) / dx;
  return rc;
}

}  // namespace pb
