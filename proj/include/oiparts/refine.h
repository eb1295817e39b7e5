#pragma once

#include <array>
#include <string>
#include <vector>

#include "oiparts/tensor_io.h"
#include "oiparts/transfer.h"

namespace oiparts {

struct SolverConfig {
  double sigma_spatial = 8.0;
  double sigma_luma = 8.0;
  double sigma_chroma = 8.0;
  double lambda = 128.0;
  int cg_max_iters = 25;
  double cg_tol = 1e-5;
  int bistoch_iters = 10;
  int threads = 1;  // parallelism across planes in RefineScores

  void Validate() const;
};

// Sparse 5-D lattice over (x, y, Y, U, V). Every pixel is hard-assigned to
// one vertex; vertices are numbered in pixel scan order of first use.
class BilateralGrid {
 public:
  static constexpr int kDims = 5;
  using Coord = std::array<int, kDims>;

  // YUV uses the BT.601 full-range coefficients.
  static BilateralGrid Build(const ImageRGB& guide, const SolverConfig& config);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t num_pixels() const { return pixel_vertex_.size(); }
  std::size_t num_vertices() const { return coords_.size(); }
  const std::vector<Coord>& coords() const { return coords_; }
  const std::vector<int>& pixel_vertex() const { return pixel_vertex_; }
  const std::vector<double>& counts() const { return counts_; }
  // Index of the vertex one step along `dim` (step = -1 or +1), or -1.
  int neighbor(std::size_t vertex, int dim, int step) const;

  std::vector<double> Splat(const std::vector<double>& pixel_values) const;
  // One [1, 2, 1] pass along `dim`; missing neighbors contribute 0.
  std::vector<double> BlurAxis(const std::vector<double>& values,
                               int dim) const;
  // Symmetrized sequential blur: 0.5 * (B4 B3 B2 B1 B0 + B0 B1 B2 B3 B4).
  std::vector<double> Blur(const std::vector<double>& values) const;
  // Normalizer n with n * Blur(n) ~= counts after `iterations` updates.
  std::vector<double> Bistochastize(int iterations) const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<Coord> coords_;
  std::vector<int> pixel_vertex_;
  std::vector<double> counts_;
  std::vector<std::array<int, 2 * kDims>> neighbors_;
};

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = true;
};

// Minimizes over the pixel plane x
//   (lambda / 2) sum_ij What_ij (x_i - x_j)^2 + sum_i conf_i (x_i - t_i)^2
// with What_ij = n_u n_v Bbar_uv / (m_u m_v) for the vertices u, v of pixels
// i, j (m: vertex pixel counts, n: bistochastic normalizer, Bbar: Blur).
// Pixels sharing a vertex interact only through vertex sums, so the exact
// minimizer follows from a symmetric positive (semi)definite system over
// vertex sums z = S x, solved by Jacobi-preconditioned CG starting from the
// splatted target, then mapped back per pixel. Output is clamped to [0, 1].
Plane Solve(const BilateralGrid& grid, const Plane& target,
            const Plane& confidence, const SolverConfig& config,
            SolveReport* report = nullptr);

struct RefinedPrediction {
  ScoreField scores;
  LabelMap labels;
  std::vector<SolveReport> reports;  // one per part
  bool converged = true;
};

// Solves every plane with uniform confidence 1 against one grid built from
// `guide`, then takes the argmax.
RefinedPrediction RefineScores(const ScoreField& scores, const ImageRGB& guide,
                               const SolverConfig& config);

}  // namespace oiparts
