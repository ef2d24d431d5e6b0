#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "mvd/fsgnn.hpp"
#include "mvd/rng.hpp"

namespace mvd::resampler {

/// One interpolated minority node: embedding = h[source] + delta *
/// (h[neighbor] - h[source]), labeled vulnerable.
struct SyntheticNode {
  int source = -1;
  int neighbor = -1;
  double delta = 0.0;
  Eigen::VectorXd embedding;
};

/// Generates round(scale * #minority) synthetic nodes by interpolating each
/// minority node toward its nearest minority neighbor in embedding space.
/// A lone minority node is copied in place. Zero minority nodes yield an
/// empty result.
std::vector<SyntheticNode> smote_nodes(const Eigen::MatrixXd& h,
                                       const std::vector<int>& labels, double scale,
                                       Rng& rng);

/// Weighted-inner-product link predictor with acceptance threshold eta.
struct EdgeGenerator {
  Eigen::MatrixXd weight;  // d x d bilinear form
  double eta = 0.5;

  static EdgeGenerator init(int dim, std::uint64_t seed);
  void save(std::ostream& out) const;
  static EdgeGenerator load(std::istream& in);
};

/// sigma(a^T W b).
double edge_prob(const EdgeGenerator& gen, const Eigen::VectorXd& a,
                 const Eigen::VectorXd& b);

/// Links each synthetic node against two candidates: its source node and
/// the nearest real node to the synthetic embedding. Each candidate whose
/// probability exceeds eta gets a directed Control edge synthetic->target;
/// if neither passes, the node is attached to its source so the graph
/// stays connected. Synthetic nodes are indexed from n_real upward.
std::vector<fsgnn::RelEdge> generate_edges(const EdgeGenerator& gen,
                                           const std::vector<SyntheticNode>& synth,
                                           const Eigen::MatrixXd& h, int n_real);

/// smote_nodes + generate_edges packaged for the training loop.
fsgnn::Augmentation augment(const Eigen::MatrixXd& h, const std::vector<int>& labels,
                            double scale, const EdgeGenerator& gen, Rng& rng);

struct EdgeTrainGraph {
  Eigen::MatrixXd h;                        // node embeddings
  std::vector<std::pair<int, int>> edges;   // real (src, dst) pairs
};

/// Binary cross-entropy over real edges as positives and an equal number
/// of sampled non-edges as negatives; plain SGD. Returns per-epoch losses.
std::vector<double> train_edge_generator(EdgeGenerator& gen,
                                         const std::vector<EdgeTrainGraph>& graphs,
                                         int epochs, std::uint64_t seed,
                                         double lr = 0.05);

}  // namespace mvd::resampler
