#pragma once

// Surfaces in E3 from immersion grids: fundamental forms, Gaussian and mean
// curvature by finite differences, and OBJ/CSV export.

#include <cstdio>
#include <functional>
#include <sstream>

#include "solsurf/immersion.hpp"
#include "solsurf/io.hpp"

namespace solsurf {

using Vec3 = Eigen::Vector3d;

struct SurfaceMesh {
  GridSpec spec;
  std::vector<Vec3> points;   // row-major in i: index i * n2 + j
  std::vector<char> valid;
  double max_defect = 0.0;    // largest off-algebra defect seen

  SurfaceMesh() = default;
  explicit SurfaceMesh(const GridSpec& s)
      : spec(s),
        points(static_cast<std::size_t>(s.n1) * static_cast<std::size_t>(s.n2), Vec3::Zero()),
        valid(points.size(), 1) {}

  [[nodiscard]] std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(spec.n2) + static_cast<std::size_t>(j);
  }
  Vec3& at(int i, int j) { return points[index(i, j)]; }
  [[nodiscard]] const Vec3& at(int i, int j) const { return points[index(i, j)]; }
  [[nodiscard]] bool ok(int i, int j) const { return valid[index(i, j)] != 0; }
  [[nodiscard]] std::size_t valid_count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 1));
  }
};

/// Sample a parametrized surface on a grid (analytic oracles, synthetic input).
inline SurfaceMesh sample_mesh(const GridSpec& spec, const std::function<Vec3(double, double)>& X) {
  spec.validate();
  SurfaceMesh m(spec);
  for (int i = 0; i < spec.n1; ++i)
    for (int j = 0; j < spec.n2; ++j) m.at(i, j) = X(spec.x1(i), spec.x2(j));
  return m;
}

/// E3 coordinates of each f(i, j) in the orthonormal su(2) basis; nodes whose
/// matrix lies off the algebra by more than tol are masked.
inline SurfaceMesh to_mesh(const MatrixGrid& f, double tol = 1e-4) {
  if (f.dim() != 2) throw DimensionError("E3 projection needs 2x2 matrices");
  SurfaceMesh m(f.spec());
  for (int i = 0; i < f.spec().n1; ++i)
    for (int j = 0; j < f.spec().n2; ++j) {
      auto p = project_e3(f(i, j));
      m.max_defect = std::max(m.max_defect, p.defect);
      bool good = p.defect <= tol && std::isfinite(p.x[0]) && std::isfinite(p.x[1]) && std::isfinite(p.x[2]);
      m.valid[m.index(i, j)] = good ? 1 : 0;
      m.at(i, j) = good ? Vec3(p.x[0], p.x[1], p.x[2]) : Vec3::Zero();
    }
  return m;
}

inline SurfaceMesh to_mesh(const ImmersionGrid& F, double tol = 1e-4) { return to_mesh(F.f, tol); }

struct CurvatureNode {
  double g11 = 0.0, g12 = 0.0, g22 = 0.0;
  double b11 = 0.0, b12 = 0.0, b22 = 0.0;
  double K = 0.0, H = 0.0;
  bool valid = false;
};

struct CurvatureSummary {
  std::size_t count = 0;
  double K_mean = 0.0, K_std = 0.0, K_min = 0.0, K_max = 0.0;
  double H_mean = 0.0, H_std = 0.0;
  /// std(K) / |mean(K)|, infinite when the mean vanishes
  [[nodiscard]] double K_relative_spread() const {
    return K_mean != 0.0 ? K_std / std::abs(K_mean) : std::numeric_limits<double>::infinity();
  }
};

struct CurvatureReport {
  GridSpec spec;
  std::vector<CurvatureNode> nodes;
  std::size_t degenerate = 0;               // interior nodes with det g < 1e-12
  std::vector<std::pair<int, int>> degenerate_nodes;
  std::size_t folded = 0;                   // nodes whose stencil straddles an orientation flip
  CurvatureSummary summary;

  [[nodiscard]] const CurvatureNode& at(int i, int j) const {
    return nodes[static_cast<std::size_t>(i) * static_cast<std::size_t>(spec.n2) + static_cast<std::size_t>(j)];
  }
};

inline CurvatureSummary summarize(const CurvatureReport& r, const std::function<bool(int, int)>& keep = {}) {
  CurvatureSummary s;
  double sk = 0.0, sk2 = 0.0, sh = 0.0, sh2 = 0.0;
  for (int i = 0; i < r.spec.n1; ++i)
    for (int j = 0; j < r.spec.n2; ++j) {
      const auto& n = r.at(i, j);
      if (!n.valid || (keep && !keep(i, j))) continue;
      if (s.count == 0) s.K_min = s.K_max = n.K;
      s.K_min = std::min(s.K_min, n.K);
      s.K_max = std::max(s.K_max, n.K);
      ++s.count;
      sk += n.K;
      sk2 += n.K * n.K;
      sh += n.H;
      sh2 += n.H * n.H;
    }
  if (s.count == 0) return s;
  double c = static_cast<double>(s.count);
  s.K_mean = sk / c;
  s.H_mean = sh / c;
  s.K_std = std::sqrt(std::max(0.0, sk2 / c - s.K_mean * s.K_mean));
  s.H_std = std::sqrt(std::max(0.0, sh2 / c - s.H_mean * s.H_mean));
  return s;
}

/// Fundamental forms by central differences on interior nodes whose 3x3
/// neighbourhood is valid. Normal n = t1 x t2 / |t1 x t2|.
///
/// Where t1 x t2 reverses orientation between neighbouring nodes the surface
/// has a fold or cuspidal edge and the normal is undefined; nodes whose
/// stencil touches either side of such a pair are masked and counted.
inline CurvatureReport curvature(const SurfaceMesh& mesh) {
  const auto& s = mesh.spec;
  if (s.n1 < 7 || s.n2 < 7) throw Error("curvature needs at least 5x5 interior nodes");
  CurvatureReport r;
  r.spec = s;
  r.nodes.resize(mesh.points.size());
  const double h1 = s.h1(), h2 = s.h2();
  auto stencil_ok = [&](int i, int j) {
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj)
        if (!mesh.ok(i + di, j + dj)) return false;
    return true;
  };
  std::vector<Vec3> cross(mesh.points.size(), Vec3::Zero());
  std::vector<char> has(mesh.points.size(), 0);
  for (int i = 1; i + 1 < s.n1; ++i)
    for (int j = 1; j + 1 < s.n2; ++j) {
      if (!stencil_ok(i, j)) continue;
      Vec3 t1 = mesh.at(i + 1, j) - mesh.at(i - 1, j);
      Vec3 t2 = mesh.at(i, j + 1) - mesh.at(i, j - 1);
      cross[mesh.index(i, j)] = t1.cross(t2);
      has[mesh.index(i, j)] = 1;
    }
  std::vector<char> edge(mesh.points.size(), 0);
  for (int i = 1; i + 1 < s.n1; ++i)
    for (int j = 1; j + 1 < s.n2; ++j) {
      std::size_t a = mesh.index(i, j);
      if (!has[a]) continue;
      // Step 2 catches a flip whose middle node has a near-zero normal.
      for (auto [di, dj] : {std::pair{1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 0}, {0, 2}, {2, 2}, {2, -2}}) {
        int k = i + di, l = j + dj;
        if (k + 1 >= s.n1 || l < 1 || l + 1 >= s.n2) continue;
        std::size_t b = mesh.index(k, l);
        if (has[b] && cross[a].dot(cross[b]) < 0.0) edge[a] = edge[b] = 1;
      }
    }
  for (int i = 1; i + 1 < s.n1; ++i)
    for (int j = 1; j + 1 < s.n2; ++j) {
      if (!has[mesh.index(i, j)]) continue;
      bool fold = false;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj) fold = fold || edge[mesh.index(i + di, j + dj)];
      if (fold) {
        ++r.folded;
        continue;
      }
      const Vec3& c = mesh.at(i, j);
      Vec3 t1 = (mesh.at(i + 1, j) - mesh.at(i - 1, j)) / (2.0 * h1);
      Vec3 t2 = (mesh.at(i, j + 1) - mesh.at(i, j - 1)) / (2.0 * h2);
      Vec3 x11 = (mesh.at(i + 1, j) - 2.0 * c + mesh.at(i - 1, j)) / (h1 * h1);
      Vec3 x22 = (mesh.at(i, j + 1) - 2.0 * c + mesh.at(i, j - 1)) / (h2 * h2);
      Vec3 x12 = (mesh.at(i + 1, j + 1) - mesh.at(i + 1, j - 1) - mesh.at(i - 1, j + 1) + mesh.at(i - 1, j - 1)) /
                 (4.0 * h1 * h2);
      CurvatureNode& n = r.nodes[mesh.index(i, j)];
      n.g11 = t1.dot(t1);
      n.g12 = t1.dot(t2);
      n.g22 = t2.dot(t2);
      double detg = n.g11 * n.g22 - n.g12 * n.g12;
      if (!(detg >= 1e-12)) {
        ++r.degenerate;
        r.degenerate_nodes.emplace_back(i, j);
        continue;
      }
      Vec3 nrm = t1.cross(t2).normalized();
      n.b11 = x11.dot(nrm);
      n.b12 = x12.dot(nrm);
      n.b22 = x22.dot(nrm);
      n.K = (n.b11 * n.b22 - n.b12 * n.b12) / detg;
      n.H = (n.g22 * n.b11 - 2.0 * n.g12 * n.b12 + n.g11 * n.b22) / (2.0 * detg);
      n.valid = std::isfinite(n.K) && std::isfinite(n.H);
    }
  r.summary = summarize(r);
  return r;
}

enum class MeshFormat { Obj, Csv };

inline std::string mesh_to_string(const SurfaceMesh& mesh, MeshFormat fmt) {
  const auto& s = mesh.spec;
  std::string out;
  char buf[160];
  if (fmt == MeshFormat::Csv) {
    out += "i,j,x1,x2,X,Y,Z\n";
    for (int i = 0; i < s.n1; ++i)
      for (int j = 0; j < s.n2; ++j) {
        if (!mesh.ok(i, j)) continue;
        const Vec3 p = mesh.at(i, j) + Vec3::Zero();  // -0 prints as 0
        std::snprintf(buf, sizeof buf, "%d,%d,%.12e,%.12e,%.12e,%.12e,%.12e\n", i, j, s.x1(i), s.x2(j), p.x(), p.y(),
                      p.z());
        out += buf;
      }
    return out;
  }
  std::vector<long> vid(mesh.points.size(), 0);
  long next = 1;
  for (int i = 0; i < s.n1; ++i)
    for (int j = 0; j < s.n2; ++j) {
      if (!mesh.ok(i, j)) continue;
      vid[mesh.index(i, j)] = next++;
      const Vec3 p = mesh.at(i, j) + Vec3::Zero();
      std::snprintf(buf, sizeof buf, "v %.12e %.12e %.12e\n", p.x(), p.y(), p.z());
      out += buf;
    }
  for (int i = 0; i + 1 < s.n1; ++i)
    for (int j = 0; j + 1 < s.n2; ++j) {
      if (!mesh.ok(i, j) || !mesh.ok(i + 1, j) || !mesh.ok(i + 1, j + 1) || !mesh.ok(i, j + 1)) continue;
      std::snprintf(buf, sizeof buf, "f %ld %ld %ld %ld\n", vid[mesh.index(i, j)], vid[mesh.index(i + 1, j)],
                    vid[mesh.index(i + 1, j + 1)], vid[mesh.index(i, j + 1)]);
      out += buf;
    }
  return out;
}

inline void export_mesh(const SurfaceMesh& mesh, MeshFormat fmt, const std::filesystem::path& path) {
  write_file_atomic(path, mesh_to_string(mesh, fmt));
}

}  // namespace solsurf
