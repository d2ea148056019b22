#pragma once

#include <charconv>
#include <span>
#include <string>
#include <string_view>

#include "recykl/dense.hpp"
#include "recykl/errors.hpp"
#include "recykl/instrumentation.hpp"
#include "recykl/sparse.hpp"

namespace recykl {

enum class PreconditionerKind { identity, jacobi, ssor };

struct PreconditionerSpec {
  PreconditionerKind kind = PreconditionerKind::identity;
  double omega = 1.0;

  // "identity", "jacobi" or "ssor:<omega>" ("ssor" alone means omega = 1).
  static PreconditionerSpec parse(std::string_view text) {
    if (text == "identity" || text == "none") return {PreconditionerKind::identity, 1.0};
    if (text == "jacobi") return {PreconditionerKind::jacobi, 1.0};
    if (text == "ssor") return {PreconditionerKind::ssor, 1.0};
    if (text.starts_with("ssor:")) {
      const std::string_view num = text.substr(5);
      double w = 0.0;
      const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), w);
      if (ec != std::errc() || ptr != num.data() + num.size())
        throw InvalidConfig("preconditioner: cannot parse omega in '" + std::string(text) + "'");
      if (!(w > 0.0 && w < 2.0)) throw InvalidConfig("preconditioner: SSOR omega must lie in (0, 2)");
      return {PreconditionerKind::ssor, w};
    }
    throw InvalidConfig("preconditioner: unknown kind '" + std::string(text) + "'");
  }

  std::string to_string() const {
    switch (kind) {
      case PreconditionerKind::identity: return "identity";
      case PreconditionerKind::jacobi: return "jacobi";
      case PreconditionerKind::ssor: {
        char buf[64];
        const auto r = std::to_chars(buf, buf + sizeof buf, omega);
        return "ssor:" + std::string(buf, r.ptr);
      }
    }
    return "identity";
  }
};

// Applies z = M^{-1} r. SSOR uses M = (D/w + L) D^{-1} (D/w + L)^T, which is
// the standard SSOR operator without the w/(2-w) factor; PCG iterates do not
// depend on that scalar.
class Preconditioner {
 public:
  Preconditioner() = default;

  static Preconditioner build(const PreconditionerSpec& spec, const SparseSpdMatrix& a) {
    Preconditioner p;
    p.spec_ = spec;
    p.a_ = &a;
    p.diag_ = a.diagonal();
    for (std::size_t i = 0; i < p.diag_.size(); ++i)
      if (!(p.diag_[i] > 0.0))
        throw NotPositiveDefinite(i, "Preconditioner: zero or negative diagonal entry");
    if (spec.kind == PreconditionerKind::ssor && !(spec.omega > 0.0 && spec.omega < 2.0))
      throw InvalidConfig("Preconditioner: SSOR omega must lie in (0, 2)");
    return p;
  }

  const PreconditionerSpec& spec() const { return spec_; }

  Vector apply(std::span<const double> r, Counters* sink = nullptr) const {
    Vector z(r.size());
    switch (spec_.kind) {
      case PreconditionerKind::identity:
        std::copy(r.begin(), r.end(), z.begin());
        break;
      case PreconditionerKind::jacobi:
        require(r.size() == diag_.size(), "Preconditioner: length mismatch");
        for (std::size_t i = 0; i < r.size(); ++i) z[i] = r[i] / diag_[i];
        break;
      case PreconditionerKind::ssor:
        require(r.size() == diag_.size(), "Preconditioner: length mismatch");
        apply_ssor(r, z);
        break;
    }
    count_precond(sink);
    return z;
  }

 private:
  void apply_ssor(std::span<const double> r, std::span<double> z) const {
    const auto& off = a_->row_offsets();
    const auto& cols = a_->col_indices();
    const auto& vals = a_->values();
    const double w = spec_.omega;
    const std::size_t n = diag_.size();
    // (D/w + L) y = r
    for (std::size_t i = 0; i < n; ++i) {
      double s = r[i];
      for (std::size_t k = off[i]; k < off[i + 1] && cols[k] < i; ++k) s -= vals[k] * z[cols[k]];
      z[i] = s * w / diag_[i];
    }
    for (std::size_t i = 0; i < n; ++i) z[i] *= diag_[i];
    // (D/w + L)^T x = y, the strict upper part of row i is L^T's row i.
    for (std::size_t i = n; i-- > 0;) {
      double s = z[i];
      for (std::size_t k = off[i + 1]; k-- > off[i] && cols[k] > i;) s -= vals[k] * z[cols[k]];
      z[i] = s * w / diag_[i];
    }
  }

  PreconditionerSpec spec_;
  const SparseSpdMatrix* a_ = nullptr;
  Vector diag_;
};

}  // namespace recykl
