#include "oiparts/refine.h"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "oiparts/errors.h"
#include "oiparts/parallel.h"

namespace oiparts {
namespace {

struct CoordHash {
  std::size_t operator()(const BilateralGrid::Coord& c) const {
    std::size_t h = 1469598103934665603ull;
    for (int v : c) {
      h ^= static_cast<std::size_t>(static_cast<std::uint32_t>(v));
      h *= 1099511628211ull;
    }
    return h;
  }
};

double Dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void CheckFinite(const Plane& plane, const char* what) {
  for (std::size_t i = 0; i < plane.data.size(); ++i) {
    if (!std::isfinite(plane.data[i])) {
      throw ValidationError(std::string(what) +
                            " has a non-finite value at flat index " +
                            std::to_string(i));
    }
  }
}

}  // namespace

void SolverConfig::Validate() const {
  if (!(sigma_spatial > 0.0) || !(sigma_luma > 0.0) || !(sigma_chroma > 0.0)) {
    throw ValidationError("solver sigmas must be positive");
  }
  if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
  if (!(cg_tol > 0.0)) throw ValidationError("cg_tol must be positive");
  if (cg_max_iters < 0 || bistoch_iters < 0) {
    throw ValidationError("iteration counts must be >= 0");
  }
}

BilateralGrid BilateralGrid::Build(const ImageRGB& guide,
                                   const SolverConfig& config) {
  config.Validate();
  BilateralGrid grid;
  grid.height_ = guide.height;
  grid.width_ = guide.width;
  const std::size_t n = static_cast<std::size_t>(guide.height) * guide.width;
  grid.pixel_vertex_.resize(n);

  std::unordered_map<Coord, int, CoordHash> index;
  for (int y = 0; y < guide.height; ++y) {
    for (int x = 0; x < guide.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * guide.width + x;
      const double r = guide.pixel(p)[0];
      const double g = guide.pixel(p)[1];
      const double b = guide.pixel(p)[2];
      const double luma = 0.299 * r + 0.587 * g + 0.114 * b;
      const double u = -0.168736 * r - 0.331264 * g + 0.5 * b + 128.0;
      const double v = 0.5 * r - 0.418688 * g - 0.081312 * b + 128.0;
      const Coord coord = {
          static_cast<int>(std::floor(x / config.sigma_spatial)),
          static_cast<int>(std::floor(y / config.sigma_spatial)),
          static_cast<int>(std::floor(luma / config.sigma_luma)),
          static_cast<int>(std::floor(u / config.sigma_chroma)),
          static_cast<int>(std::floor(v / config.sigma_chroma))};
      auto [it, inserted] =
          index.try_emplace(coord, static_cast<int>(grid.coords_.size()));
      if (inserted) {
        grid.coords_.push_back(coord);
        grid.counts_.push_back(0.0);
      }
      grid.pixel_vertex_[p] = it->second;
      grid.counts_[it->second] += 1.0;
    }
  }

  grid.neighbors_.resize(grid.coords_.size());
  for (std::size_t vtx = 0; vtx < grid.coords_.size(); ++vtx) {
    for (int d = 0; d < kDims; ++d) {
      for (int s = 0; s < 2; ++s) {
        Coord c = grid.coords_[vtx];
        c[d] += s == 0 ? -1 : 1;
        const auto it = index.find(c);
        grid.neighbors_[vtx][2 * d + s] = it == index.end() ? -1 : it->second;
      }
    }
  }
  return grid;
}

int BilateralGrid::neighbor(std::size_t vertex, int dim, int step) const {
  return neighbors_[vertex][2 * dim + (step < 0 ? 0 : 1)];
}

std::vector<double> BilateralGrid::Splat(
    const std::vector<double>& pixel_values) const {
  std::vector<double> out(num_vertices(), 0.0);
  for (std::size_t p = 0; p < pixel_vertex_.size(); ++p) {
    out[pixel_vertex_[p]] += pixel_values[p];
  }
  return out;
}

std::vector<double> BilateralGrid::BlurAxis(const std::vector<double>& values,
                                            int dim) const {
  std::vector<double> out(values.size());
  for (std::size_t v = 0; v < values.size(); ++v) {
    double acc = 2.0 * values[v];
    const int lo = neighbors_[v][2 * dim];
    const int hi = neighbors_[v][2 * dim + 1];
    if (lo >= 0) acc += values[lo];
    if (hi >= 0) acc += values[hi];
    out[v] = acc;
  }
  return out;
}

std::vector<double> BilateralGrid::Blur(const std::vector<double>& values) const {
  std::vector<double> forward = values;
  for (int d = 0; d < kDims; ++d) forward = BlurAxis(forward, d);
  std::vector<double> backward = values;
  for (int d = kDims - 1; d >= 0; --d) backward = BlurAxis(backward, d);
  for (std::size_t v = 0; v < forward.size(); ++v) {
    forward[v] = 0.5 * (forward[v] + backward[v]);
  }
  return forward;
}

std::vector<double> BilateralGrid::Bistochastize(int iterations) const {
  std::vector<double> n(num_vertices(), 1.0);
  for (int it = 0; it < iterations; ++it) {
    const std::vector<double> blurred = Blur(n);
    for (std::size_t v = 0; v < n.size(); ++v) {
      n[v] = std::sqrt(n[v] * counts_[v] / blurred[v]);
    }
  }
  return n;
}

Plane Solve(const BilateralGrid& grid, const Plane& target,
            const Plane& confidence, const SolverConfig& config,
            SolveReport* report) {
  config.Validate();
  if (target.height != grid.height() || target.width != grid.width() ||
      confidence.height != grid.height() || confidence.width != grid.width()) {
    throw ShapeError("solver planes must match the guide size " +
                     std::to_string(grid.height()) + "x" +
                     std::to_string(grid.width()));
  }
  CheckFinite(target, "target");
  CheckFinite(confidence, "confidence");
  for (float c : confidence.data) {
    if (c < 0.0f) throw ValidationError("confidence must be non-negative");
  }

  SolveReport local;
  SolveReport& rep = report != nullptr ? *report : local;
  rep = SolveReport{};

  const std::size_t num_pixels = grid.num_pixels();
  const std::size_t num_vertices = grid.num_vertices();
  const double lambda = config.lambda;
  Plane out(target.height, target.width);

  if (lambda == 0.0) {
    // Pure data term: x = t wherever confidence > 0 (and undetermined, kept
    // at t, elsewhere).
    for (std::size_t p = 0; p < num_pixels; ++p) {
      out.data[p] = std::clamp(target.data[p], 0.0f, 1.0f);
    }
    return out;
  }

  const std::vector<double>& m = grid.counts();
  const std::vector<double> n = grid.Bistochastize(config.bistoch_iters);
  std::vector<double> scale(num_vertices);  // n / m
  for (std::size_t v = 0; v < num_vertices; ++v) scale[v] = n[v] / m[v];

  // K z = scale * Blur(scale * z); rho = K m are the pixel affinity row sums.
  auto apply_k = [&](const std::vector<double>& z) {
    std::vector<double> tmp(num_vertices);
    for (std::size_t v = 0; v < num_vertices; ++v) tmp[v] = scale[v] * z[v];
    tmp = grid.Blur(tmp);
    for (std::size_t v = 0; v < num_vertices; ++v) tmp[v] *= scale[v];
    return tmp;
  };
  const std::vector<double> rho = apply_k(m);

  const std::vector<int>& owner = grid.pixel_vertex();
  std::vector<double> alpha(num_vertices, 0.0);
  std::vector<double> beta(num_vertices, 0.0);
  for (std::size_t p = 0; p < num_pixels; ++p) {
    const int v = owner[p];
    const double denom = lambda * rho[v] + confidence.data[p];
    alpha[v] += 1.0 / denom;
    beta[v] += confidence.data[p] * target.data[p] / denom;
  }

  // (D_alpha^-1 - lambda K) z = D_alpha^-1 beta
  std::vector<double> b(num_vertices);
  std::vector<double> precond(num_vertices);
  // Diagonal of Blur is 2^5 (a vertex only returns to itself by staying).
  const double blur_diag = 32.0;
  for (std::size_t v = 0; v < num_vertices; ++v) {
    b[v] = beta[v] / alpha[v];
    const double diag =
        1.0 / alpha[v] - lambda * scale[v] * scale[v] * blur_diag;
    precond[v] = diag > 0.0 ? 1.0 / diag : 1.0;
  }
  auto apply_a = [&](const std::vector<double>& z) {
    std::vector<double> out_v = apply_k(z);
    for (std::size_t v = 0; v < num_vertices; ++v) {
      out_v[v] = z[v] / alpha[v] - lambda * out_v[v];
    }
    return out_v;
  };

  std::vector<double> z(num_vertices, 0.0);
  const double b_norm = std::sqrt(Dot(b, b));
  if (b_norm > 0.0) {
    std::vector<double> splat_target(num_pixels);
    for (std::size_t p = 0; p < num_pixels; ++p) {
      splat_target[p] = target.data[p];
    }
    z = grid.Splat(splat_target);

    std::vector<double> r = apply_a(z);
    for (std::size_t v = 0; v < num_vertices; ++v) r[v] = b[v] - r[v];
    rep.relative_residual = std::sqrt(Dot(r, r)) / b_norm;
    std::vector<double> s(num_vertices);
    for (std::size_t v = 0; v < num_vertices; ++v) s[v] = precond[v] * r[v];
    std::vector<double> d = s;
    double rs = Dot(r, s);
    while (rep.relative_residual >= config.cg_tol &&
           rep.iterations < config.cg_max_iters) {
      const std::vector<double> ad = apply_a(d);
      const double curvature = Dot(d, ad);
      if (!(curvature > 0.0)) break;
      const double step = rs / curvature;
      for (std::size_t v = 0; v < num_vertices; ++v) {
        z[v] += step * d[v];
        r[v] -= step * ad[v];
      }
      ++rep.iterations;
      rep.relative_residual = std::sqrt(Dot(r, r)) / b_norm;
      for (std::size_t v = 0; v < num_vertices; ++v) s[v] = precond[v] * r[v];
      const double rs_next = Dot(r, s);
      const double momentum = rs_next / rs;
      rs = rs_next;
      for (std::size_t v = 0; v < num_vertices; ++v) {
        d[v] = s[v] + momentum * d[v];
      }
    }
    rep.converged = rep.relative_residual < config.cg_tol;
  }

  const std::vector<double> h = apply_k(z);
  for (std::size_t p = 0; p < num_pixels; ++p) {
    const int v = owner[p];
    const double c = confidence.data[p];
    const double x =
        (c * target.data[p] + lambda * h[v]) / (lambda * rho[v] + c);
    out.data[p] = static_cast<float>(std::clamp(x, 0.0, 1.0));
  }
  return out;
}

RefinedPrediction RefineScores(const ScoreField& scores, const ImageRGB& guide,
                               const SolverConfig& config) {
  if (guide.height != scores.height || guide.width != scores.width) {
    throw ShapeError("guide image is " + std::to_string(guide.height) + "x" +
                     std::to_string(guide.width) + " but scores are " +
                     std::to_string(scores.height) + "x" +
                     std::to_string(scores.width));
  }
  const BilateralGrid grid = BilateralGrid::Build(guide, config);
  const Plane confidence(scores.height, scores.width, 1.0f);

  RefinedPrediction out;
  out.scores.height = scores.height;
  out.scores.width = scores.width;
  out.scores.part_names = scores.part_names;
  out.scores.planes.resize(scores.num_parts());
  out.reports.resize(scores.num_parts());
  ParallelFor(scores.planes.size(), config.threads, [&](std::size_t c) {
    out.scores.planes[c] = Solve(grid, scores.planes[c], confidence, config,
                                 &out.reports[c]);
  });
  for (const SolveReport& r : out.reports) out.converged &= r.converged;
  out.labels = ArgmaxLabels(out.scores);
  return out;
}

}  // namespace oiparts
