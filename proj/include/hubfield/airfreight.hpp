#pragma once

// Input modelling for the airfreight case: Breguet fuel fractions and the
// derived routing-cost exponent, and a log-linear demand regression spread
// from metropolitan-area centroids onto a grid.

#include <cmath>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hubfield/density_io.hpp"
#include "hubfield/errors.hpp"
#include "hubfield/fit.hpp"
#include "hubfield/grid.hpp"

namespace hubfield {

struct AircraftParams {
  double E = 17.0;      ///< aerodynamic efficiency L/D
  double k_c = 0.0;     ///< specific fuel consumption, per unit range
  double eta_p = 0.85;  ///< propeller efficiency

  void validate() const {
    if (!(E > 0.0)) throw std::invalid_argument("aircraft E must be > 0");
    if (!(k_c > 0.0)) throw std::invalid_argument("aircraft k_c must be > 0");
    if (!(eta_p > 0.0 && eta_p <= 1.0)) throw std::invalid_argument("aircraft eta_p must be in (0,1]");
  }

  /// k_c / (eta_p E): the fuel fraction is 1 - exp(-rate * range).
  double rate() const { return k_c / (eta_p * E); }
};

/// ln(AF) = C0 + C1 PC + C2 TSE + C3 TSL + C4 MD + C5 HT. C2 is carried but
/// never applied: the traffic shadow term would make the input iterative.
struct DemandCoefficients {
  double C0 = 0, C1 = 0, C2 = 0, C3 = 0, C4 = 0, C5 = 0;
};

struct CentroidRecord {
  Point position{0.0, 0.0};
  double PC = 0;   ///< per-capita personal income, $1000
  double TSL = 0;  ///< transport/shipping/logistics employment share, %
  double MD = 0;   ///< medical diagnostic establishments
  double HT = 0;   ///< mean high-tech wage, $1000
  double TSE = 0;  ///< traffic shadow effect (ignored)
};

inline double breguet_fuel_fraction(double range, const AircraftParams& a) {
  a.validate();
  if (!(range >= 0.0)) throw std::invalid_argument("range must be >= 0");
  return -std::expm1(-range * a.rate());
}

struct CurvePoint {
  double R = 0;
  double cost = 0;
};

/// Fuel cost per unit payload per unit distance: scale * W_fuel(R) / R.
inline std::vector<CurvePoint> cost_per_ton_km_curve(std::span<const double> ranges,
                                                     const AircraftParams& a, double fuel_price_scale) {
  a.validate();
  if (!(fuel_price_scale > 0.0)) throw std::invalid_argument("fuel price scale must be > 0");
  std::vector<CurvePoint> out;
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (!(ranges[i] > 0.0)) throw std::invalid_argument("ranges must be positive");
    if (i > 0 && !(ranges[i] > ranges[i - 1])) throw std::invalid_argument("ranges must increase");
    out.push_back({ranges[i], fuel_price_scale * breguet_fuel_fraction(ranges[i], a) / ranges[i]});
  }
  return out;
}

enum class CurveKind {
  per_km,  ///< cost per ton per km; integrated to a cost per ton first
  total    ///< cost per ton already integrated over the range
};

/// Cumulative integral of a per-km curve from R = 0, trapezoid on the given
/// points. The first panel [0, R_0] uses the value at 0 extrapolated linearly
/// from the first two points.
inline std::vector<double> integrate_per_km(std::span<const CurvePoint> curve) {
  if (curve.size() < 2) throw std::invalid_argument("curve needs at least 2 points");
  const auto& c0 = curve[0];
  const auto& c1 = curve[1];
  const double at_zero = c0.cost - (c1.cost - c0.cost) / (c1.R - c0.R) * c0.R;
  std::vector<double> total(curve.size());
  total[0] = 0.5 * (at_zero + c0.cost) * c0.R;
  for (std::size_t i = 1; i < curve.size(); ++i)
    total[i] = total[i - 1] + 0.5 * (curve[i].cost + curve[i - 1].cost) * (curve[i].R - curve[i - 1].R);
  return total;
}

/// Exponent q of a power-law fit total(R) ~ R^q (least squares in log-log).
inline double fit_cost_exponent(std::span<const CurvePoint> curve, CurveKind kind = CurveKind::per_km) {
  if (curve.size() < 3) throw std::invalid_argument("fit_cost_exponent needs >= 3 points");
  for (const auto& c : curve)
    if (!(c.R > 0.0) || !(c.cost > 0.0))
      throw std::invalid_argument("fit_cost_exponent: ranges and costs must be positive");
  std::vector<double> totals;
  if (kind == CurveKind::per_km) {
    totals = integrate_per_km(curve);
  } else {
    for (const auto& c : curve) totals.push_back(c.cost);
  }
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    lx.push_back(std::log(curve[i].R));
    ly.push_back(std::log(totals[i]));
  }
  return least_squares_slope(lx, ly);
}

inline double demand_at(const CentroidRecord& r, const DemandCoefficients& c) {
  return std::exp(c.C0 + c.C1 * r.PC + c.C3 * r.TSL + c.C4 * r.MD + c.C5 * r.HT);
}

/// Spreads each record's demand AF_i over the active cells with a Gaussian
/// bump of the given bandwidth, calibrated so the record contributes exactly
/// AF_i of mass. Records outside the active region are skipped.
inline DensityField demand_field(std::span<const CentroidRecord> records, const DemandCoefficients& c,
                                 const Grid& grid, double bandwidth) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be > 0");
  const auto& cells = grid.active_cells();
  std::vector<Point> centers;
  for (std::size_t k : cells) centers.push_back(grid.center(k));
  std::vector<double> v(grid.size(), 0.0);
  std::vector<double> w(cells.size());
  const double inv2b2 = 1.0 / (2.0 * bandwidth * bandwidth);
  std::size_t used = 0;
  for (const auto& rec : records) {
    if (!grid.contains(rec.position) || !grid.active(grid.locate(rec.position))) continue;
    ++used;
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < cells.size(); ++a) {
      const double d = distance(centers[a], rec.position);
      w[a] = d * d;
      dmin = std::min(dmin, w[a]);
    }
    // Shift by the nearest squared distance so the closest cell has weight 1.
    double sum = 0.0;
    for (double& x : w) {
      x = std::exp(-(x - dmin) * inv2b2);
      sum += x;
    }
    const double scale = demand_at(rec, c) / (sum * grid.cell_measure());
    for (std::size_t a = 0; a < cells.size(); ++a) v[cells[a]] += w[a] * scale;
  }
  if (used == 0) throw DomainError("no centroid records inside the active domain");
  return DensityField(grid, std::move(v));
}

// File formats ----------------------------------------------------------------

/// Centroid CSV rows `x,y,PC,TSL,MD,HT[,TSE]`; a non-numeric first line is
/// taken as a header.
inline std::vector<CentroidRecord> read_centroids_csv(const std::string& path) {
  auto in = detail::open_input(path);
  std::vector<CentroidRecord> out;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cols = detail::split(t, ',');
    std::vector<double> v;
    bool numeric = true;
    for (const auto& col : cols) {
      double x = 0;
      if (!detail::parse_double(col, x)) {
        numeric = false;
        break;
      }
      v.push_back(x);
    }
    const std::string where = path + ":" + std::to_string(lineno);
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw ParseError(where + ": non-numeric field");
    }
    first = false;
    if (v.size() != 6 && v.size() != 7) throw ParseError(where + ": expected x,y,PC,TSL,MD,HT[,TSE]");
    CentroidRecord r;
    r.position = {v[0], v[1]};
    r.PC = v[2];
    r.TSL = v[3];
    r.MD = v[4];
    r.HT = v[5];
    if (v.size() == 7) r.TSE = v[6];
    for (double x : v)
      if (!std::isfinite(x)) throw ParseError(where + ": non-finite value");
    if (r.TSL < 0 || r.TSL > 100) throw ParseError(where + ": TSL must be a share in [0,100]");
    if (r.MD < 0 || r.MD != std::floor(r.MD)) throw ParseError(where + ": MD must be a nonnegative integer");
    out.push_back(r);
  }
  if (out.empty()) throw ParseError(path + ": no centroid records");
  return out;
}

inline DemandCoefficients read_coefficients_json(const std::string& path) {
  const auto j = detail::read_json_file(path);
  DemandCoefficients c;
  double* slots[] = {&c.C0, &c.C1, &c.C2, &c.C3, &c.C4, &c.C5};
  for (int i = 0; i < 6; ++i) {
    const std::string key = "C" + std::to_string(i);
    if (!j.contains(key) || !j[key].is_number()) throw ParseError(path + ": missing numeric " + key);
    *slots[i] = j[key].get<double>();
  }
  return c;
}

inline AircraftParams read_aircraft_json(const std::string& path) {
  const auto j = detail::read_json_file(path);
  AircraftParams a;
  for (const char* key : {"E", "k_c", "eta_p"})
    if (!j.contains(key) || !j[key].is_number()) throw ParseError(path + ": missing numeric " + key);
  a.E = j["E"].get<double>();
  a.k_c = j["k_c"].get<double>();
  a.eta_p = j["eta_p"].get<double>();
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(path + ": " + e.what());
  }
  return a;
}

}  // namespace hubfield
