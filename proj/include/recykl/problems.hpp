#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "recykl/dense.hpp"
#include "recykl/errors.hpp"
#include "recykl/rng.hpp"
#include "recykl/sparse.hpp"

namespace recykl {

struct LinearSystem {
  SparseSpdMatrix a;
  Vector b;
  Vector xguess;  // empty means zero
  double tol = 1e-6;
};

struct SystemSequence {
  std::size_t n = 0;
  std::vector<LinearSystem> systems;
  std::optional<DenseMatrix> output_matrix;  // C, q x n
  std::string name;
};

// Right-hand side f(x, y, t): a steady part, a standing oscillation and a
// Gaussian bump that travels around the domain centre.
struct LoadProfile {
  double steady = 1.0;
  double oscillation = 0.5;
  double bump = 2.0;
  double bump_width = 0.1;
};

struct DiffusionParams {
  std::size_t nx = 50;
  std::size_t ny = 50;
  std::size_t systems = 20;  // p
  double drift = 0.05;       // delta
  LoadProfile load;
  std::uint64_t seed = 1;
  double tol = 1e-6;
};

namespace detail {

struct Field {
  double amp[4], kx[4], ky[4], px[4], py[4];
  double c0, c1, c2;
};

inline Field make_field(std::uint64_t seed) {
  Xorshift64Star rng(seed);
  Field f{};
  for (int m = 0; m < 4; ++m) {
    f.amp[m] = rng.uniform(-0.5, 0.5);
    f.kx[m] = 1.0 + std::floor(3.0 * rng.uniform());
    f.ky[m] = 1.0 + std::floor(3.0 * rng.uniform());
    f.px[m] = rng.uniform(0.0, std::numbers::pi);
    f.py[m] = rng.uniform(0.0, std::numbers::pi);
  }
  f.c0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  f.c1 = rng.uniform();
  f.c2 = rng.uniform();
  return f;
}

// kappa_0(x, y) = exp(sum_m a_m sin(pi k_m x + phi_m) sin(pi l_m y + psi_m))
inline double base_coefficient(const Field& f, double x, double y) {
  double s = 0.0;
  for (int m = 0; m < 4; ++m)
    s += f.amp[m] * std::sin(std::numbers::pi * f.kx[m] * x + f.px[m]) *
         std::sin(std::numbers::pi * f.ky[m] * y + f.py[m]);
  return std::exp(s);
}

inline double phase(const Field& f, double x, double y) {
  return f.c0 + 2.0 * std::numbers::pi * (f.c1 * x + f.c2 * y);
}

inline double load(const LoadProfile& l, double x, double y, double t) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double cx = 0.5 + 0.25 * std::cos(two_pi * t), cy = 0.5 + 0.25 * std::sin(two_pi * t);
  const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
  return l.steady + l.oscillation * std::sin(two_pi * t) * std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y) +
         l.bump * std::exp(-r2 / (2.0 * l.bump_width * l.bump_width));
}

}  // namespace detail

// Five-point finite differences for -div(kappa_j grad u) = f on the unit
// square with homogeneous Dirichlet data, scaled by h^2, with
// kappa_j = kappa_0 (1 + delta sin(2 pi j / p + phase)). Face coefficients are
// arithmetic means of the nodal values; the matrices are irreducibly
// diagonally dominant and therefore SPD.
inline SystemSequence gen_diffusion_sequence(const DiffusionParams& prm) {
  if (prm.nx == 0 || prm.ny == 0 || prm.systems == 0) throw InvalidConfig("gen_diffusion_sequence: empty grid or sequence");
  if (!(std::abs(prm.drift) < 1.0)) throw InvalidConfig("gen_diffusion_sequence: |drift| must be below 1");
  const detail::Field field = detail::make_field(prm.seed);
  const std::size_t nx = prm.nx, ny = prm.ny, n = nx * ny;
  const double hx = 1.0 / static_cast<double>(nx + 1), hy = 1.0 / static_cast<double>(ny + 1);
  Vector k0(n), ph(n);
  for (std::size_t j = 0; j < ny; ++j)
    for (std::size_t i = 0; i < nx; ++i) {
      const double x = static_cast<double>(i + 1) * hx, y = static_cast<double>(j + 1) * hy;
      k0[j * nx + i] = detail::base_coefficient(field, x, y);
      ph[j * nx + i] = detail::phase(field, x, y);
    }
  SystemSequence seq;
  seq.n = n;
  seq.name = "diffusion";
  const double p = static_cast<double>(prm.systems);
  for (std::size_t s = 1; s <= prm.systems; ++s) {
    Vector kap(n);
    for (std::size_t i = 0; i < n; ++i)
      kap[i] = k0[i] * (1.0 + prm.drift * std::sin(2.0 * std::numbers::pi * static_cast<double>(s) / p + ph[i]));
    std::vector<Triplet> t;
    t.reserve(5 * n);
    const double rx = hy / hx, ry = hx / hy;
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i) {
        const std::size_t me = j * nx + i;
        double diag = 0.0;
        auto face = [&](bool inside, std::size_t other, double ratio) {
          const double c = ratio * (inside ? 0.5 * (kap[me] + kap[other]) : kap[me]);
          diag += c;
          if (inside) t.push_back({me, other, -c});
        };
        face(i > 0, me - 1, rx);
        face(i + 1 < nx, me + 1, rx);
        face(j > 0, me - nx, ry);
        face(j + 1 < ny, me + nx, ry);
        t.push_back({me, me, diag});
      }
    LinearSystem sys;
    sys.a = SparseSpdMatrix::from_triplets(n, std::move(t));
    sys.b.resize(n);
    const double time = static_cast<double>(s) / p;
    for (std::size_t j = 0; j < ny; ++j)
      for (std::size_t i = 0; i < nx; ++i)
        sys.b[j * nx + i] = detail::load(prm.load, static_cast<double>(i + 1) * hx, static_cast<double>(j + 1) * hy, time);
    sys.tol = prm.tol;
    seq.systems.push_back(std::move(sys));
  }
  return seq;
}

// q x n matrix with entries uniform in [0, 1).
inline DenseMatrix gen_output_matrix(std::size_t q, std::size_t n, std::uint64_t seed) {
  Xorshift64Star rng(seed);
  DenseMatrix c(q, n);
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = rng.uniform();
  return c;
}

// ---------------------------------------------------------------------------
// Matrix Market

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

struct MmReader {
  std::string file;
  std::ifstream in;
  std::size_t line_no = 0;
  std::vector<std::string> header;

  explicit MmReader(const std::string& path) : file(path), in(path) {
    if (!in) throw ParseError(path, 0, "cannot open file");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(file, 1, "empty file");
    line_no = 1;
    std::istringstream hs(lower(line));
    std::string tok;
    while (hs >> tok) header.push_back(tok);
    if (header.size() != 5 || header[0] != "%%matrixmarket" || header[1] != "matrix")
      throw ParseError(file, 1, "malformed Matrix Market header");
    if (header[2] != "coordinate" && header[2] != "array")
      throw ParseError(file, 1, "unsupported format '" + header[2] + "'");
    if (header[3] != "real" && header[3] != "integer" && header[3] != "double")
      throw ParseError(file, 1, "unsupported field '" + header[3] + "'");
    if (header[4] != "general" && header[4] != "symmetric")
      throw ParseError(file, 1, "unsupported symmetry '" + header[4] + "'");
  }

  bool coordinate() const { return header[2] == "coordinate"; }
  bool symmetric() const { return header[4] == "symmetric"; }

  // Next non-comment, non-blank line split into tokens.
  bool next(std::vector<std::string>& toks) {
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '%') continue;
      std::istringstream ss(line);
      toks.clear();
      std::string t;
      while (ss >> t) toks.push_back(t);
      if (!toks.empty()) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(file, line_no, what); }

  template <class T>
  T number(const std::string& s) const {
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) fail("cannot parse number '" + s + "'");
    return v;
  }
};

}  // namespace detail

inline void write_matrix_market(const std::string& path, const SparseSpdMatrix& a) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  std::size_t lower = 0;
  for (std::size_t i = 0; i < a.n(); ++i)
    for (std::size_t k = a.row_offsets()[i]; k < a.row_offsets()[i + 1]; ++k)
      if (a.col_indices()[k] <= i) ++lower;
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << a.n() << ' ' << a.n() << ' ' << lower << '\n';
  // Column-major order over the lower triangle, as the format recommends.
  std::vector<std::vector<std::pair<std::size_t, double>>> by_col(a.n());
  for (std::size_t i = 0; i < a.n(); ++i)
    for (std::size_t k = a.row_offsets()[i]; k < a.row_offsets()[i + 1]; ++k)
      if (a.col_indices()[k] <= i) by_col[a.col_indices()[k]].push_back({i, a.values()[k]});
  for (std::size_t j = 0; j < a.n(); ++j)
    for (const auto& [i, v] : by_col[j]) out << i + 1 << ' ' << j + 1 << ' ' << detail::format_double(v) << '\n';
}

inline void write_matrix_market(const std::string& path, const DenseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "%%MatrixMarket matrix array real general\n";
  out << m.rows() << ' ' << m.cols() << '\n';
  for (double v : m.data()) out << detail::format_double(v) << '\n';
}

inline void write_matrix_market(const std::string& path, const Vector& v) {
  DenseMatrix m(v.size(), 1);
  std::copy(v.begin(), v.end(), m.data().begin());
  write_matrix_market(path, m);
}

inline DenseMatrix read_dense_matrix_market(const std::string& path) {
  detail::MmReader r(path);
  std::vector<std::string> t;
  if (!r.next(t)) r.fail("missing size line");
  if (r.coordinate()) {
    if (t.size() != 3) r.fail("size line must hold rows, columns and entry count");
    const auto rows = r.number<std::size_t>(t[0]), cols = r.number<std::size_t>(t[1]);
    const auto nnz = r.number<std::size_t>(t[2]);
    DenseMatrix m(rows, cols);
    for (std::size_t k = 0; k < nnz; ++k) {
      if (!r.next(t)) r.fail("file ends after " + std::to_string(k) + " of " + std::to_string(nnz) + " entries");
      if (t.size() != 3) r.fail("entry must hold row, column and value");
      const auto i = r.number<std::size_t>(t[0]), j = r.number<std::size_t>(t[1]);
      if (i < 1 || j < 1 || i > rows || j > cols) r.fail("entry index out of range");
      const double v = r.number<double>(t[2]);
      m(i - 1, j - 1) = v;
      if (r.symmetric()) m(j - 1, i - 1) = v;
    }
    return m;
  }
  if (t.size() != 2) r.fail("size line must hold rows and columns");
  const auto rows = r.number<std::size_t>(t[0]), cols = r.number<std::size_t>(t[1]);
  DenseMatrix m(rows, cols);
  if (r.symmetric()) {
    for (std::size_t j = 0; j < cols; ++j)
      for (std::size_t i = j; i < rows; ++i) {
        if (!r.next(t) || t.size() != 1) r.fail("expected one value per line");
        m(i, j) = m(j, i) = r.number<double>(t[0]);
      }
  } else {
    for (std::size_t k = 0; k < rows * cols; ++k) {
      if (!r.next(t)) r.fail("file ends after " + std::to_string(k) + " of " + std::to_string(rows * cols) + " values");
      if (t.size() != 1) r.fail("expected one value per line");
      m.data()[k] = r.number<double>(t[0]);
    }
  }
  if (r.next(t)) r.fail("trailing data after the last value");
  return m;
}

inline Vector read_vector_matrix_market(const std::string& path) {
  DenseMatrix m = read_dense_matrix_market(path);
  if (m.cols() != 1) throw DimensionMismatch(path + ": expected a single column, found " + std::to_string(m.cols()));
  return m.data();
}

inline SparseSpdMatrix read_sparse_matrix_market(const std::string& path) {
  detail::MmReader r(path);
  if (!r.coordinate()) {
    const DenseMatrix d = read_dense_matrix_market(path);
    if (d.rows() != d.cols()) throw DimensionMismatch(path + ": matrix is not square");
    return SparseSpdMatrix::from_dense(d);
  }
  std::vector<std::string> t;
  if (!r.next(t)) r.fail("missing size line");
  if (t.size() != 3) r.fail("size line must hold rows, columns and entry count");
  const auto rows = r.number<std::size_t>(t[0]), cols = r.number<std::size_t>(t[1]);
  const auto nnz = r.number<std::size_t>(t[2]);
  if (rows != cols) throw DimensionMismatch(path + ": matrix is " + std::to_string(rows) + "x" + std::to_string(cols));
  std::vector<Triplet> trip;
  trip.reserve(r.symmetric() ? 2 * nnz : nnz);
  for (std::size_t k = 0; k < nnz; ++k) {
    if (!r.next(t)) r.fail("file ends after " + std::to_string(k) + " of " + std::to_string(nnz) + " entries");
    if (t.size() != 3) r.fail("entry must hold row, column and value");
    const auto i = r.number<std::size_t>(t[0]), j = r.number<std::size_t>(t[1]);
    if (i < 1 || j < 1 || i > rows || j > cols) r.fail("entry index out of range");
    const double v = r.number<double>(t[2]);
    trip.push_back({i - 1, j - 1, v});
    if (r.symmetric() && i != j) trip.push_back({j - 1, i - 1, v});
  }
  if (r.next(t)) r.fail("more entries than announced");
  try {
    return SparseSpdMatrix::from_triplets(rows, std::move(trip));
  } catch (const NotSymmetric& e) {
    throw NotSymmetric(path + ": " + e.what());
  } catch (const NotPositiveDefinite& e) {
    throw NotPositiveDefinite(e.pivot(), path + ": non-positive diagonal");
  }
}

// ---------------------------------------------------------------------------
// Manifest: {"n": .., "systems": [{"matrix", "rhs", "tol"}], "output_matrix": ..}
// Paths are relative to the manifest's directory.

inline void write_sequence(const SystemSequence& seq, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json m;
  m["n"] = seq.n;
  if (!seq.name.empty()) m["name"] = seq.name;
  m["systems"] = nlohmann::json::array();
  for (std::size_t j = 0; j < seq.systems.size(); ++j) {
    char idx[16];
    std::snprintf(idx, sizeof idx, "%03zu", j + 1);
    const std::string an = std::string("A_") + idx + ".mtx", bn = std::string("b_") + idx + ".mtx";
    write_matrix_market((fs::path(dir) / an).string(), seq.systems[j].a);
    write_matrix_market((fs::path(dir) / bn).string(), seq.systems[j].b);
    nlohmann::json e{{"matrix", an}, {"rhs", bn}, {"tol", seq.systems[j].tol}};
    if (!seq.systems[j].xguess.empty()) {
      const std::string gn = std::string("x0_") + idx + ".mtx";
      write_matrix_market((fs::path(dir) / gn).string(), seq.systems[j].xguess);
      e["guess"] = gn;
    }
    m["systems"].push_back(e);
  }
  if (seq.output_matrix) {
    write_matrix_market((fs::path(dir) / "C.mtx").string(), *seq.output_matrix);
    m["output_matrix"] = "C.mtx";
  }
  std::ofstream((fs::path(dir) / "manifest.json").string()) << m.dump(2) << '\n';
}

inline SystemSequence load_sequence(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  std::ifstream in(manifest_path);
  if (!in) throw ParseError(manifest_path, 0, "cannot open manifest");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(manifest_path, 0, std::string("invalid JSON: ") + e.what());
  }
  const fs::path base = fs::path(manifest_path).parent_path();
  if (!m.contains("n") || !m.contains("systems") || !m["systems"].is_array())
    throw ParseError(manifest_path, 0, "manifest needs 'n' and a 'systems' array");
  SystemSequence seq;
  seq.n = m["n"].get<std::size_t>();
  seq.name = m.value("name", std::string());
  for (const auto& e : m["systems"]) {
    if (!e.contains("matrix") || !e.contains("rhs")) throw ParseError(manifest_path, 0, "system entry needs 'matrix' and 'rhs'");
    LinearSystem s;
    const std::string ap = (base / e["matrix"].get<std::string>()).string();
    const std::string bp = (base / e["rhs"].get<std::string>()).string();
    s.a = read_sparse_matrix_market(ap);
    if (s.a.n() != seq.n) throw DimensionMismatch(ap + ": dimension " + std::to_string(s.a.n()) + " but manifest says " + std::to_string(seq.n));
    s.b = read_vector_matrix_market(bp);
    if (s.b.size() != seq.n) throw DimensionMismatch(bp + ": length " + std::to_string(s.b.size()) + " but manifest says " + std::to_string(seq.n));
    if (e.contains("guess")) {
      const std::string gp = (base / e["guess"].get<std::string>()).string();
      s.xguess = read_vector_matrix_market(gp);
      if (s.xguess.size() != seq.n) throw DimensionMismatch(gp + ": wrong length");
    }
    s.tol = e.value("tol", 1e-6);
    seq.systems.push_back(std::move(s));
  }
  if (m.contains("output_matrix") && !m["output_matrix"].is_null()) {
    const std::string cp = (base / m["output_matrix"].get<std::string>()).string();
    DenseMatrix c = read_dense_matrix_market(cp);
    if (c.cols() != seq.n) throw DimensionMismatch(cp + ": output matrix has " + std::to_string(c.cols()) + " columns, expected " + std::to_string(seq.n));
    seq.output_matrix = std::move(c);
  }
  return seq;
}

}  // namespace recykl
