#include <gtest/gtest.h>

#include <random>

#include "solsurf/geometry.hpp"

using namespace solsurf;

namespace {

const ParamValues kA1{{"a", 1.0}, {"d", 0.0}};

Vec3 sphere(double u, double v) {
  const double r = 2.0;
  return {r * std::cos(u) * std::cos(v), r * std::cos(u) * std::sin(v), r * std::sin(u)};
}

Vec3 cylinder(double u, double v) { return {std::cos(u), std::sin(u), v}; }

GridSpec patch(double lo, double hi, double h) {
  GridSpec g = GridSpec::square(lo, hi, h);
  return g;
}

struct Extremes {
  double K_err = 0.0, H_err = 0.0;
};

Extremes errors(const CurvatureReport& r, double K, double absH) {
  Extremes e;
  for (const auto& n : r.nodes) {
    if (!n.valid) continue;
    e.K_err = std::max(e.K_err, std::abs(n.K - K));
    e.H_err = std::max(e.H_err, std::abs(std::abs(n.H) - absH));
  }
  return e;
}

MatrixGrid grid_of(const GridSpec& g, const std::function<NumericMatrix(double, double)>& f) {
  MatrixGrid m(g, 2);
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) m(i, j) = f(g.x1(i), g.x2(j));
  return m;
}

std::filesystem::path temp_dir() {
  auto d = std::filesystem::temp_directory_path() /
           ("solsurf_geom_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
  std::filesystem::create_directories(d);
  return d;
}

std::size_t count_prefix(const std::string& text, const std::string& prefix) {
  std::size_t n = 0;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (line.rfind(prefix, 0) == 0) ++n;
  return n;
}

}  // namespace

TEST(ToMesh, Examples) {
  GridSpec g = patch(-1.0, 1.0, 0.25);
  auto zero = to_mesh(grid_of(g, [](double, double) { return NumericMatrix::Zero(2, 2); }));
  for (const auto& p : zero.points) EXPECT_EQ(p, Vec3::Zero());
  EXPECT_EQ(zero.valid_count(), zero.points.size());

  auto plane = to_mesh(grid_of(g, [](double x, double y) { return from_e3({x, y, 0.0}); }));
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) {
      EXPECT_NEAR(plane.at(i, j).x(), g.x1(i), 1e-15);
      EXPECT_NEAR(plane.at(i, j).y(), g.x2(j), 1e-15);
      EXPECT_EQ(plane.at(i, j).z(), 0.0);
    }

  NumericMatrix C = from_e3({0.5, -2.0, 3.25});
  auto moved = to_mesh(grid_of(g, [&](double x, double y) { return NumericMatrix(from_e3({x, y, 0.0}) + C); }));
  for (std::size_t k = 0; k < moved.points.size(); ++k)
    EXPECT_LT((moved.points[k] - plane.points[k] - Vec3(0.5, -2.0, 3.25)).norm(), 1e-14);
}

TEST(ToMesh, OffAlgebraNodesAreMasked) {
  GridSpec g = patch(-1.0, 1.0, 0.5);
  auto f = grid_of(g, [](double x, double y) { return from_e3({x, y, 1.0}); });
  f(2, 3) += NumericMatrix::Identity(2, 2) * 1e-3;
  f(1, 1) += NumericMatrix::Identity(2, 2) * 1e-6;
  auto m = to_mesh(f);
  EXPECT_FALSE(m.ok(2, 3));
  EXPECT_TRUE(m.ok(1, 1));
  EXPECT_EQ(m.valid_count(), m.points.size() - 1);
}

TEST(Curvature, Plane) {
  auto m = sample_mesh(patch(-1.0, 1.0, 0.05), [](double u, double v) { return Vec3(u, 2.0 * v, 0.3 * u - v + 1.0); });
  auto r = curvature(m);
  auto e = errors(r, 0.0, 0.0);
  EXPECT_LT(e.K_err, 1e-8);
  EXPECT_LT(e.H_err, 1e-8);
  EXPECT_EQ(r.folded, 0U);
  EXPECT_EQ(r.summary.count, static_cast<std::size_t>((m.spec.n1 - 2) * (m.spec.n2 - 2)));
}

TEST(Curvature, Sphere) {
  auto m = sample_mesh(patch(-0.5, 0.5, 0.01), sphere);
  auto r = curvature(m);
  auto e = errors(r, 0.25, 0.5);
  EXPECT_LT(e.K_err, 1e-3);
  EXPECT_LT(e.H_err, 1e-3);
  EXPECT_GT(r.summary.count, 0U);
}

TEST(Curvature, SphereErrorIsSecondOrder) {
  auto coarse = errors(curvature(sample_mesh(patch(-0.5, 0.5, 0.04), sphere)), 0.25, 0.5);
  auto fine = errors(curvature(sample_mesh(patch(-0.5, 0.5, 0.02), sphere)), 0.25, 0.5);
  double ratio = coarse.K_err / fine.K_err;
  EXPECT_GT(ratio, 3.5);
  EXPECT_LT(ratio, 4.5);
}

TEST(Curvature, Cylinder) {
  auto r = curvature(sample_mesh(patch(-1.0, 1.0, 0.01), cylinder));
  auto e = errors(r, 0.0, 0.5);
  EXPECT_LT(e.K_err, 1e-6);
  EXPECT_LT(e.H_err, 1e-3);
}

TEST(Curvature, OrientationFlipsTheSignOfH) {
  auto a = curvature(sample_mesh(patch(-0.5, 0.5, 0.05), sphere));
  auto b = curvature(sample_mesh(patch(-0.5, 0.5, 0.05), [](double u, double v) { return sphere(v, u); }));
  EXPECT_NEAR(a.summary.H_mean, -b.summary.H_mean, 1e-12);
  EXPECT_NEAR(a.summary.K_mean, b.summary.K_mean, 1e-12);
}

TEST(Curvature, RigidMotionInvariance) {
  auto m = sample_mesh(patch(-0.5, 0.5, 0.05), sphere);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  Vec3 t(n(rng), n(rng), n(rng));
  SurfaceMesh moved = m;
  for (auto& p : moved.points) p = q * p + t;
  auto a = curvature(m), b = curvature(moved);
  double worst = 0.0;
  for (std::size_t k = 0; k < a.nodes.size(); ++k) {
    ASSERT_EQ(a.nodes[k].valid, b.nodes[k].valid);
    if (!a.nodes[k].valid) continue;
    worst = std::max({worst, std::abs(a.nodes[k].K - b.nodes[k].K), std::abs(a.nodes[k].H - b.nodes[k].H)});
  }
  EXPECT_LT(worst, 1e-8);
}

TEST(Curvature, ConstantShiftOfFIsExact) {
  GridSpec g = patch(-2.0, 2.0, 0.1);
  auto F = immersion_symtafel(builtin("sine-gordon"), builtin("sine-gordon").family("kink"), kA1, 1.0, g,
                              Expr::integer(1));
  ImmersionGrid shifted = F;
  NumericMatrix C = from_e3({1.0, 2.0, -0.5});
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j) shifted.f(i, j) += C;
  auto a = curvature(to_mesh(F)), b = curvature(to_mesh(shifted));
  double worst = 0.0;
  for (std::size_t k = 0; k < a.nodes.size(); ++k)
    if (a.nodes[k].valid) worst = std::max(worst, std::abs(a.nodes[k].K - b.nodes[k].K));
  EXPECT_LT(worst, 1e-8);
}

TEST(Curvature, DegenerateMetricIsMasked) {
  auto m = sample_mesh(patch(-1.0, 1.0, 0.1), [](double u, double) { return Vec3(u, u * u, 0.0); });
  auto r = curvature(m);
  EXPECT_EQ(r.summary.count, 0U);
  EXPECT_EQ(r.degenerate, static_cast<std::size_t>((m.spec.n1 - 2) * (m.spec.n2 - 2)));
  EXPECT_THROW(curvature(sample_mesh(patch(0.0, 1.0, 0.25), sphere)), Error);
}

TEST(Curvature, FoldIsMasked) {
  // z = x^3 / 3 over (x, y) -> (x^2, y) folds along x = 0.
  auto m = sample_mesh(patch(-1.0, 1.0, 0.05), [](double u, double v) { return Vec3(u * u, v, u * u * u / 3.0); });
  auto r = curvature(m);
  EXPECT_GT(r.folded, 0U);
  for (int i = 0; i < m.spec.n1; ++i)
    for (int j = 0; j < m.spec.n2; ++j)
      if (r.at(i, j).valid) EXPECT_GT(std::abs(m.spec.x1(i)), 0.1);
}

TEST(Curvature, SymTafelKinkIsPseudospherical) {
  const auto& m = builtin("sine-gordon");
  double spread[2];
  int k = 0;
  for (double h : {0.05, 0.025}) {
    auto F = immersion_symtafel(m, m.family("kink"), kA1, 1.0, patch(-4.0, 4.0, h), Expr::integer(1));
    auto r = curvature(to_mesh(F));
    EXPECT_GT(r.folded, 0U);
    EXPECT_LT(r.summary.K_max, 0.0);
    EXPECT_NEAR(r.summary.K_mean, -1.0, 5e-3);
    spread[k++] = r.summary.K_relative_spread();
  }
  EXPECT_LT(spread[0], 1e-2);
  EXPECT_LT(spread[1], spread[0]);
}

TEST(Export, ObjAndCsv) {
  GridSpec g;
  g.x1_lo = g.x2_lo = 0.0;
  g.x1_hi = g.x2_hi = 1.0;
  g.n1 = g.n2 = 2;
  auto m = sample_mesh(g, [](double u, double v) { return Vec3(u, v, 0.0); });
  std::string obj = mesh_to_string(m, MeshFormat::Obj);
  EXPECT_EQ(count_prefix(obj, "v "), 4U);
  EXPECT_EQ(count_prefix(obj, "f "), 1U);
  EXPECT_NE(obj.find("f 1 3 4 2"), std::string::npos);

  auto big = sample_mesh(patch(0.0, 1.0, 0.25), [](double u, double v) { return Vec3(u, v, u * v); });
  big.valid[big.index(2, 2)] = 0;
  obj = mesh_to_string(big, MeshFormat::Obj);
  EXPECT_EQ(count_prefix(obj, "v "), 24U);
  EXPECT_EQ(count_prefix(obj, "f "), 16U - 4U);
  std::string csv = mesh_to_string(big, MeshFormat::Csv);
  EXPECT_EQ(count_prefix(csv, "i,j,"), 1U);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), big.valid_count() + 1);
}

TEST(Export, WritesAtomically) {
  auto dir = temp_dir();
  auto m = sample_mesh(patch(0.0, 1.0, 0.25), [](double u, double v) { return Vec3(u, v, 0.0); });
  auto path = dir / "mesh.obj";
  export_mesh(m, MeshFormat::Obj, path);
  EXPECT_EQ(read_file(path), mesh_to_string(m, MeshFormat::Obj));
  EXPECT_FALSE(std::filesystem::exists(dir / "mesh.obj.tmp"));
  EXPECT_THROW(export_mesh(m, MeshFormat::Csv, dir / "missing" / "x.csv"), IoError);
  std::filesystem::remove_all(dir);
}
