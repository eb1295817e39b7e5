#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "oiparts/refine.h"
#include "oiparts/selection.h"
#include "oiparts/synth.h"
#include "oiparts/tensor_io.h"

namespace oiparts::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

std::vector<std::uint8_t> ReadBytes(const std::filesystem::path& path);
void WriteBytes(const std::filesystem::path& path,
                const std::vector<std::uint8_t>& bytes);

// --- random inputs --------------------------------------------------------

ClassPixelSet RandomPixelSet(std::mt19937_64& rng, int dims, int n_in,
                             int n_out);
FeatureMap RandomFeatureMap(std::mt19937_64& rng, int height, int width,
                            int channels, FeatureSource source);
ImageRGB RandomImage(std::mt19937_64& rng, int height, int width);
Plane RandomPlane(std::mt19937_64& rng, int height, int width, float lo,
                  float hi);

// --- channel selection ------------------------------------------------------

// One ClassPixelSet per part, built from the L2-normalized sd features of a
// synthetic reference with the given sd channel and distractor counts.
std::vector<ClassPixelSet> SynthPixelSets(std::uint64_t seed, int channels,
                                          int distractors, int num_parts,
                                          int size);

// (1/K) sum_j PopVar_j(in) + (1/K) sum_j PopVar_j(out) on `subset`,
// two-pass in double.
double IntraClassObjective(const ClassPixelSet& px,
                           const std::vector<int>& subset);

// Minimizer of the intra-class objective over all C(D, k) subsets,
// lexicographically smallest on ties.
std::vector<int> BruteForceBestSubset(const ClassPixelSet& px, int k);

// Nearest-center re-clustering IoU, written independently of the library.
double OracleClusterIoU(const ClassPixelSet& px,
                        const std::vector<int>& subset);

struct OracleSweep {
  int k = 0;
  std::vector<int> channels;
  double iou = 0.0;
};

// For every k: exhaustive objective minimizer, then its IoU; the largest
// IoU wins, ties toward the smaller k.
OracleSweep BruteForceSweep(const ClassPixelSet& px,
                            const std::vector<int>& k_grid);

// --- bilateral solver -------------------------------------------------------

struct DenseFbsSystem {
  Eigen::MatrixXd affinity;  // pixel x pixel
  Eigen::MatrixXd laplacian;
};

// Assembles the pixel affinity from explicit splat, blur and normalizer
// matrices built from the guide alone.
DenseFbsSystem BuildDenseFbs(const ImageRGB& guide, const SolverConfig& cfg);

// Direct solve of (lambda L + C) x = C t, clamped to [0, 1].
Plane DenseFbsSolve(const ImageRGB& guide, const Plane& target,
                    const Plane& confidence, const SolverConfig& cfg);

// Objective value (lambda/2) sum_ij W_ij (x_i - x_j)^2 + sum_i c_i (x_i-t_i)^2.
double FbsObjective(const DenseFbsSystem& sys, double lambda, const Plane& x,
                    const Plane& target, const Plane& confidence);

// --- evaluation -------------------------------------------------------------

// Per-part IoU by direct set counting; negative for a zero union.
std::vector<double> OracleIou(const std::vector<int>& gt,
                              const std::vector<int>& pred, int num_parts);

}  // namespace oiparts::testing
