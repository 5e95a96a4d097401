#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "memshare/envs.hpp"
#include "memshare/training.hpp"

namespace memshare::comm {

using nn::Vec;

// T x M recording of one agent's write (or read) vectors over an episode.
struct TraceMatrix {
  int agent = 0;
  std::string kind;  // "write" | "read"
  int t = 0;
  int m = 0;
  std::vector<double> data;  // row-major
  env::Task task = env::Task::cn;
  std::uint64_t seed = 0;
  std::vector<int> phases;

  double at(int row, int col) const {
    return data[static_cast<size_t>(row) * m + col];
  }
};

struct RecordedTraces {
  std::vector<TraceMatrix> traces;  // write then read, per agent
  env::EpisodeTrace episode;
};

// Greedy instrumented rollout; requires an md-maddpg model.
RecordedTraces record_traces(train::Model& model, const env::EnvConfig& ecfg,
                             std::uint64_t seed);

struct PcaResult {
  int k = 0;
  bool degenerate = false;          // all columns constant
  std::vector<Vec> components;      // k orthonormal direction vectors (len M)
  std::vector<Vec> scores;          // k score series (len T)
  Vec ratios;                       // explained-variance ratios, descending
};

// Mean-centered linear PCA via cyclic Jacobi rotations on the sample
// covariance. Sign convention: each component's largest-magnitude entry is
// positive, which makes the result deterministic.
PcaResult pca(const TraceMatrix& trace, int k = 3);

// Per-component min-max scaling to [0,1]; a constant series maps to 0.5.
void standardize01(std::vector<Vec>& scores);

// Cyclic Jacobi eigendecomposition of a symmetric matrix; eigenvalues sorted
// descending, eigenvectors[i] matching eigenvalues[i].
void jacobi_eigen_sym(std::vector<Vec> a, Vec& eigenvalues,
                      std::vector<Vec>& eigenvectors);

struct HeatmapData {
  std::string title;
  std::vector<Vec> scores;  // k x T, standardized to [0,1]
  std::vector<int> phases;  // length T
};

// Standalone SVG: one row per component (blue -> white -> red), greyscale
// phase bar beneath, colormap documented in the document metadata.
std::string render_heatmap_svg(const HeatmapData& data);

void write_heatmap_csv(const HeatmapData& data, const std::string& path);
HeatmapData read_heatmap_csv(const std::string& path);

// Binary trace container: magic, version, T, M, then T*M little-endian
// 64-bit floats.
inline constexpr char kTraceMagic[8] = {'M', 'E', 'M', 'S', 'H', 'T', 'R', '1'};
inline constexpr std::uint32_t kTraceVersion = 1;

void save_trace(const TraceMatrix& trace, const std::filesystem::path& path);
TraceMatrix load_trace(const std::filesystem::path& path);

}  // namespace memshare::comm
