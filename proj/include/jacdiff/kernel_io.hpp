#pragma once

// JSON form of a kernel:
//   {n, alpha, beta, q, kind, terms: [{coef, alpha_ij, beta_j}], moments: [...]}

#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "jacdiff/kernel.hpp"

namespace jacdiff {

inline nlohmann::json kernel_to_json(const Kernel& k) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : k.terms()) {
    terms.push_back({{"coef", t.coef}, {"alpha_ij", t.alpha}, {"beta_j", t.beta}});
  }
  const auto& p = k.params();
  return {{"n", p.n},         {"alpha", p.alpha}, {"beta", p.beta},
          {"q", p.q},         {"kind", to_string(k.kind())},
          {"terms", terms},   {"moments", k.moment_certificate()}};
}

namespace detail {

inline bool same_terms(const std::vector<KernelTerm>& a, const std::vector<KernelTerm>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].shift_alpha != b[i].shift_alpha || a[i].shift_beta != b[i].shift_beta) return false;
    if (std::abs(a[i].coef - b[i].coef) > 1e-12 * std::max(1.0, std::abs(b[i].coef))) return false;
  }
  return true;
}

}  // namespace detail

/// Rebuilds a kernel from its JSON form. The stored moments are ignored; the
/// certificate is recomputed, so a corrupted document fails with
/// CertificateError rather than yielding a wrong kernel. Terms that match a
/// standard family return that family's kernel.
inline Kernel kernel_from_json(const nlohmann::json& doc) {
  EstimatorParams p;
  KernelKind kind = KernelKind::kAffine;
  std::vector<KernelTerm> terms;
  try {
    p.n = doc.at("n").get<int>();
    p.alpha = doc.at("alpha").get<double>();
    p.beta = doc.at("beta").get<double>();
    p.q = doc.at("q").get<int>();
    const auto kind_name = doc.at("kind").get<std::string>();
    if (kind_name == "minimal") {
      kind = KernelKind::kMinimal;
    } else if (kind_name != "affine") {
      throw FormatError("kernel JSON: unknown kind '" + kind_name + "'");
    }
    validate(p);
    for (const auto& t : doc.at("terms")) {
      const double a = t.at("alpha_ij").get<double>();
      const double b = t.at("beta_j").get<double>();
      const int shift_a = static_cast<int>(std::lround(a - p.alpha));
      const int shift_b = static_cast<int>(std::lround(b - p.beta));
      if (shift_a < 0 || shift_b < 0 || std::abs(a - p.alpha - shift_a) > 1e-9 ||
          std::abs(b - p.beta - shift_b) > 1e-9) {
        throw FormatError("kernel JSON: term parameters must be integer shifts of (alpha, beta)");
      }
      terms.push_back(detail::make_term(p, t.at("coef").get<double>(), shift_a, shift_b));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("kernel JSON: ") + e.what());
  }
  if (kind == KernelKind::kMinimal) {
    if (p.q == 0) {
      auto ref = make_rho(p.n, p.alpha, p.beta);
      if (detail::same_terms(terms, ref.terms())) return ref;
    }
  } else {
    auto ref = make_affine_q(p);
    if (detail::same_terms(terms, ref.terms())) return ref;
    if (p.has_parity()) {
      auto ultra = make_ultraspherical_q(p.n, p.alpha, p.q);
      if (detail::same_terms(terms, ultra.terms())) return ultra;
    }
  }
  return assemble_kernel(p, kind, std::move(terms));
}

}  // namespace jacdiff
