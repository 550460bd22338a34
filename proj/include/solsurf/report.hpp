#pragma once

// JSON reports with a fixed layout: insertion-ordered keys, floats as %.12e,
// two-space indent. Identical inputs give identical bytes.

#include <json.hpp>

#include "solsurf/geometry.hpp"

namespace solsurf {

using Json = nlohmann::ordered_json;

inline constexpr int kReportSchema = 1;

namespace detail {

inline void write_json(const Json& j, std::string& out, int indent) {
  auto pad = [&](int n) { out.append(static_cast<std::size_t>(n) * 2, ' '); };
  char buf[64];
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      std::size_t k = 0;
      for (auto it = j.begin(); it != j.end(); ++it, ++k) {
        pad(indent + 1);
        out += Json(it.key()).dump();
        out += ": ";
        write_json(it.value(), out, indent + 1);
        out += k + 1 < j.size() ? ",\n" : "\n";
      }
      pad(indent);
      out += "}";
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Short numeric arrays stay on one line.
      bool flat = j.size() <= 4 && std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
      if (flat) {
        out += "[";
        for (std::size_t k = 0; k < j.size(); ++k) {
          if (k) out += ", ";
          write_json(j[k], out, indent);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (std::size_t k = 0; k < j.size(); ++k) {
        pad(indent + 1);
        write_json(j[k], out, indent + 1);
        out += k + 1 < j.size() ? ",\n" : "\n";
      }
      pad(indent);
      out += "]";
      return;
    }
    case Json::value_t::number_float: {
      double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      std::snprintf(buf, sizeof buf, "%.12e", v);
      out += buf;
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

inline std::string dump_report(const Json& j) {
  std::string out;
  detail::write_json(j, out, 0);
  out += "\n";
  return out;
}

inline Json complex_json(cplx z) { return Json::array({z.real(), z.imag()}); }

inline Json matrix_json(const NumericMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json params_json(const ParamValues& p) {
  Json j = Json::object();
  for (const auto& [k, v] : p) j[k] = v;
  return j;
}

inline Json grid_json(const GridSpec& g) {
  return Json{{"x1", {g.x1_lo, g.x1_hi}}, {"n1", g.n1}, {"x2", {g.x2_lo, g.x2_hi}}, {"n2", g.n2},
              {"base", {g.base_i, g.base_j}}};
}

inline Json residual_json(const ResidualReport& r, const GridSpec& g) {
  Json j{{"max_abs", r.max_abs},
         {"mean_abs", r.mean_abs},
         {"argmax", {{"i", r.argmax_i}, {"j", r.argmax_j}, {"x1", g.x1(r.argmax_i)}, {"x2", g.x2(r.argmax_j)}}},
         {"boundary_max_abs", r.boundary_max_abs},
         {"nodes", r.nodes}};
  if (!r.params.empty()) j["params"] = params_json(r.params);
  if (!r.terms.empty()) {
    Json t = Json::object();
    for (const auto& [k, v] : r.terms) t[k] = v;
    j["terms"] = t;
  }
  return j;
}

inline Json halving_json(const HalvingDiagnostic& h) {
  return Json{{"coarse_diff", h.coarse_diff},
              {"fine_diff", h.fine_diff},
              {"ratio", h.ratio},
              {"roundoff_limited", h.roundoff_limited},
              {"converged", h.converged}};
}

/// {lambda, base, nodes: [{i, j, x1, x2, f}]}, f row-major as [re, im] pairs.
inline Json immersion_json(const ImmersionGrid& F) {
  const auto& s = F.spec;
  Json nodes = Json::array();
  for (int i = 0; i < s.n1; ++i)
    for (int j = 0; j < s.n2; ++j) {
      Json f = Json::array();
      NumericMatrix m = F.f(i, j);
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) f.push_back(complex_json(m(r, c)));
      nodes.push_back(Json{{"i", i}, {"j", j}, {"x1", s.x1(i)}, {"x2", s.x2(j)}, {"f", std::move(f)}});
    }
  return Json{{"schema", kReportSchema},
              {"lambda", complex_json(F.lam)},
              {"base", {{"i", s.base_i}, {"j", s.base_j}}},
              {"offset", matrix_json(F.offset)},
              {"nodes", std::move(nodes)}};
}

inline Json curvature_summary_json(const CurvatureSummary& s) {
  return Json{{"count", s.count},   {"K_mean", s.K_mean}, {"K_std", s.K_std},
              {"K_min", s.K_min},   {"K_max", s.K_max},   {"K_relative_spread", s.K_relative_spread()},
              {"H_mean", s.H_mean}, {"H_std", s.H_std}};
}

inline Json curvature_json(const CurvatureReport& r) {
  Json nodes = Json::array();
  for (int i = 0; i < r.spec.n1; ++i)
    for (int j = 0; j < r.spec.n2; ++j) {
      const auto& n = r.at(i, j);
      if (!n.valid) continue;
      nodes.push_back(Json{{"i", i},       {"j", j},       {"g11", n.g11}, {"g12", n.g12}, {"g22", n.g22},
                           {"b11", n.b11}, {"b12", n.b12}, {"b22", n.b22}, {"K", n.K},     {"H", n.H}});
    }
  Json degenerate = Json::array();
  for (auto [i, j] : r.degenerate_nodes) degenerate.push_back({i, j});
  return Json{{"schema", kReportSchema},
              {"summary", curvature_summary_json(r.summary)},
              {"degenerate", std::move(degenerate)},
              {"folded", r.folded},
              {"nodes", std::move(nodes)}};
}

}  // namespace solsurf
