#pragma once

// Density CSV, peak-model JSON and polygon-mask JSON.
//
// Density CSV layout:
//   # dim=<1|2> bounds=<a1,b1[,a2,b2]> n=<n1[,n2]> [masked=1]
//   i[,j],value
// Values are written with 17 significant digits so a write/read cycle is
// bit-exact. Masked grids list only active cells; unlisted cells are inactive.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hubfield/errors.hpp"
#include "hubfield/grid.hpp"

namespace hubfield {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

inline bool parse_size(const std::string& s, std::size_t& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  return in;
}

inline nlohmann::json read_json_file(const std::string& path) {
  auto in = open_input(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": invalid JSON: " + e.what());
  }
}

inline Point json_point(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || j.size() > 2)
    throw ParseError(where + ": expected a coordinate array of length 1 or 2");
  Point p{0.0, 0.0};
  for (std::size_t a = 0; a < j.size(); ++a) {
    if (!j[a].is_number()) throw ParseError(where + ": coordinate is not a number");
    p[a] = j[a].get<double>();
  }
  return p;
}

}  // namespace detail

/// Header line describing the grid, without the trailing newline.
inline std::string density_header(const Grid& g) {
  using detail::format_double;
  std::string h = "# dim=" + std::to_string(g.dim()) + " bounds=" +
                  format_double(g.lo(0)) + "," + format_double(g.hi(0));
  if (g.dim() == 2) h += "," + format_double(g.lo(1)) + "," + format_double(g.hi(1));
  h += " n=" + std::to_string(g.n(0));
  if (g.dim() == 2) h += "," + std::to_string(g.n(1));
  if (g.has_mask()) h += " masked=1";
  return h;
}

inline void write_density_csv(const DensityField& f, std::ostream& out) {
  const Grid& g = f.grid();
  out << density_header(g) << '\n';
  for (std::size_t k : g.active_cells()) {
    auto [i, j] = g.ij(k);
    out << i;
    if (g.dim() == 2) out << ',' << j;
    out << ',' << detail::format_double(f[k]) << '\n';
  }
}

inline void write_density_csv(const DensityField& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot open for writing");
  write_density_csv(f, out);
}

inline DensityField read_density_csv(std::istream& in, const std::string& name = "<stream>") {
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError(name + ":" + std::to_string(lineno) + ": " + msg);
  };

  // Header.
  do {
    if (!std::getline(in, line)) throw ParseError(name + ": empty file");
    ++lineno;
  } while (detail::trim(line).empty());
  std::string head = detail::trim(line);
  if (head.empty() || head[0] != '#') throw fail("missing '# dim=... bounds=... n=...' header");
  int dim = 0;
  std::vector<double> bounds;
  std::vector<std::size_t> counts;
  bool masked = false;
  {
    std::istringstream hs(head.substr(1));
    std::string tok;
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw fail("malformed header token '" + tok + "'");
      const std::string key = tok.substr(0, eq);
      const auto parts = detail::split(std::string_view(tok).substr(eq + 1), ',');
      if (key == "dim") {
        std::size_t d = 0;
        if (parts.size() != 1 || !detail::parse_size(parts[0], d) || (d != 1 && d != 2))
          throw fail("dim must be 1 or 2");
        dim = static_cast<int>(d);
      } else if (key == "bounds") {
        for (const auto& p : parts) {
          double v = 0;
          if (!detail::parse_double(p, v)) throw fail("bad bound '" + p + "'");
          bounds.push_back(v);
        }
      } else if (key == "n") {
        for (const auto& p : parts) {
          std::size_t v = 0;
          if (!detail::parse_size(p, v)) throw fail("bad cell count '" + p + "'");
          counts.push_back(v);
        }
      } else if (key == "masked") {
        masked = parts.size() == 1 && parts[0] == "1";
      } else {
        throw fail("unknown header key '" + key + "'");
      }
    }
  }
  if (dim == 0) throw fail("header lacks dim");
  if (bounds.size() != static_cast<std::size_t>(2 * dim) ||
      counts.size() != static_cast<std::size_t>(dim))
    throw fail("header bounds/n do not match dim");

  Grid grid;
  try {
    grid = dim == 1 ? Grid::line(bounds[0], bounds[1], counts[0])
                    : Grid::rect(bounds[0], bounds[1], counts[0], bounds[2], bounds[3],
                                 counts[1]);
  } catch (const std::invalid_argument& e) {
    throw fail(std::string("invalid grid: ") + e.what());
  }

  std::vector<double> values(grid.size(), 0.0);
  std::vector<std::uint8_t> seen(grid.size(), 0);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cols = detail::split(t, ',');
    if (cols.size() != static_cast<std::size_t>(dim + 1))
      throw fail("expected " + std::to_string(dim + 1) + " columns, got " +
                 std::to_string(cols.size()));
    std::size_t i = 0, j = 0;
    if (!detail::parse_size(cols[0], i) || i >= grid.n(0)) throw fail("bad index '" + cols[0] + "'");
    if (dim == 2 && (!detail::parse_size(cols[1], j) || j >= grid.n(1)))
      throw fail("bad index '" + cols[1] + "'");
    double v = 0;
    if (!detail::parse_double(cols.back(), v) || !std::isfinite(v))
      throw fail("bad value '" + cols.back() + "'");
    if (v < 0) throw fail("negative density value");
    const std::size_t k = grid.index(i, j);
    if (seen[k]) throw fail("duplicate cell");
    seen[k] = 1;
    values[k] = v;
    ++rows;
  }
  if (rows == 0) throw ParseError(name + ": empty field");
  if (masked) {
    try {
      grid = grid.with_mask(seen);
    } catch (const std::invalid_argument& e) {
      throw ParseError(name + ": " + e.what());
    }
  } else if (rows != grid.size()) {
    throw ParseError(name + ": grid mismatch: " + std::to_string(rows) + " rows for " +
                     std::to_string(grid.size()) + " cells");
  }
  return DensityField(std::move(grid), std::move(values));
}

inline DensityField read_density_csv(const std::string& path) {
  auto in = detail::open_input(path);
  return read_density_csv(in, path);
}

/// Peak model: {"peaks":[{"A":..,"B":..,"X":[..]}]}
inline std::vector<GaussianPeak> read_peaks_json(const std::string& path) {
  const auto j = detail::read_json_file(path);
  if (!j.is_object() || !j.contains("peaks") || !j["peaks"].is_array())
    throw ParseError(path + ": expected {\"peaks\": [...]}");
  std::vector<GaussianPeak> peaks;
  std::size_t idx = 0;
  for (const auto& pk : j["peaks"]) {
    const std::string where = path + ": peaks[" + std::to_string(idx++) + "]";
    if (!pk.is_object() || !pk.contains("A") || !pk.contains("B") || !pk.contains("X") ||
        !pk["A"].is_number() || !pk["B"].is_number())
      throw ParseError(where + ": needs numeric A, B and coordinate array X");
    GaussianPeak g;
    g.A = pk["A"].get<double>();
    g.B = pk["B"].get<double>();
    g.X = detail::json_point(pk["X"], where);
    if (!(g.A >= 0) || !(g.B > 0)) throw ParseError(where + ": requires A >= 0 and B > 0");
    peaks.push_back(g);
  }
  return peaks;
}

/// Polygon mask: {"polygon":[[x,y],...]}
inline std::vector<Point> read_polygon_json(const std::string& path) {
  const auto j = detail::read_json_file(path);
  if (!j.is_object() || !j.contains("polygon") || !j["polygon"].is_array())
    throw ParseError(path + ": expected {\"polygon\": [[x,y],...]}");
  std::vector<Point> poly;
  std::size_t idx = 0;
  for (const auto& v : j["polygon"]) {
    const std::string where = path + ": polygon[" + std::to_string(idx++) + "]";
    if (!v.is_array() || v.size() != 2) throw ParseError(where + ": vertex must be [x,y]");
    poly.push_back(detail::json_point(v, where));
  }
  if (poly.size() < 3) throw ParseError(path + ": polygon needs at least 3 vertices");
  return poly;
}

}  // namespace hubfield
