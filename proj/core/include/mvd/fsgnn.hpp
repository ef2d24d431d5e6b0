#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mvd/ir.hpp"

namespace mvd::fsgnn {

// ---------------------------------------------------------------------------
// Relations
// ---------------------------------------------------------------------------

// Base dependence relations plus their inverse twins (edges are doubled so
// information also flows against edge direction) and a self relation that
// keeps a node's own state in the update.
enum class Relation : int {
  Control = 0,
  Data = 1,
  Call = 2,
  Return = 3,
  ControlInv = 4,
  DataInv = 5,
  CallInv = 6,
  ReturnInv = 7,
  SelfLoop = 8,
};

constexpr int kBaseRelations = 4;
constexpr int kRelations = 2 * kBaseRelations + 1;

Relation relation_of(EdgeKind kind);
Relation inverse_of(Relation r);
bool is_inverse(Relation r);
std::string to_string(Relation r);

// ---------------------------------------------------------------------------
// Composition operators
// ---------------------------------------------------------------------------

enum class Compose { Sub, Mult, Ccorr };

std::string to_string(Compose op);
std::optional<Compose> compose_from_string(const std::string& s);

/// phi(x, z): sub = x - z; mult = x ⊙ z; ccorr[k] = sum_i x[i] * z[(k+i) % d].
Eigen::VectorXd compose(const Eigen::VectorXd& x, const Eigen::VectorXd& z, Compose op);

/// Accumulates d phi/d x and d phi/d z contractions with `grad_out`.
void compose_backward(const Eigen::VectorXd& x, const Eigen::VectorXd& z, Compose op,
                      const Eigen::VectorXd& grad_out, Eigen::VectorXd& grad_x,
                      Eigen::VectorXd& grad_z);

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Relation vectors as learned combinations of a small shared basis:
/// vector_for(r) = sum_b coeff(r, b) * basis.row(b).
struct EdgeEmbedding {
  Eigen::MatrixXd basis;  // B x d
  Eigen::MatrixXd coeff;  // kRelations x B

  int bases() const { return static_cast<int>(basis.rows()); }
  int dim() const { return static_cast<int>(basis.cols()); }
  Eigen::VectorXd vector_for(int relation) const;
  Eigen::MatrixXd all_vectors() const;  // kRelations x d
};

struct LayerParams {
  Eigen::MatrixXd w_base;     // applied to original-direction edges
  Eigen::MatrixXd w_inverse;  // applied to inverse-direction edges
  Eigen::MatrixXd w_self;     // applied to the self relation
  Eigen::MatrixXd w_rel;      // projects relation vectors between layers
};

struct ModelParams {
  int dim = 100;
  Compose phi = Compose::Ccorr;
  bool mean_aggregate = false;  // default is the plain sum
  EdgeEmbedding edges;
  std::vector<LayerParams> layers;  // pre-resampling layers plus one more
  Eigen::MatrixXd classifier;       // dim x 2

  int num_layers() const { return static_cast<int>(layers.size()); }

  static ModelParams init(int dim, int num_layers, int bases, Compose phi,
                          std::uint64_t seed);

  void save(std::ostream& out) const;
  static ModelParams load(std::istream& in);
};

/// Gradient buffers shaped like ModelParams.
struct ModelGrads {
  Eigen::MatrixXd basis, coeff;
  std::vector<LayerParams> layers;
  Eigen::MatrixXd classifier;

  static ModelGrads zeros_like(const ModelParams& p);
  void add(const ModelGrads& other);
  double max_abs() const;
};

// ---------------------------------------------------------------------------
// Graphs as tensors
// ---------------------------------------------------------------------------

/// (src, dst, base relation) triple; deduplicated and sorted before use so
/// aggregation order never depends on construction order.
using RelEdge = std::array<int, 3>;

struct LearnGraph {
  int n = 0;
  Eigen::MatrixXd x;            // n x dim initial node features
  std::vector<RelEdge> edges;   // base relations only
  std::vector<int> labels;      // -1 unlabeled / 0 / 1, size n
};

/// Synthetic minority nodes appended by the resampler: each is an
/// interpolation between two real nodes' layer-L representations, plus
/// generated Control edges (src may index a synthetic node as n + i).
struct Augmentation {
  struct Synth {
    int source = -1;
    int neighbor = -1;
    double delta = 0.0;
  };
  std::vector<Synth> nodes;
  std::vector<RelEdge> edges;

  int count() const { return static_cast<int>(nodes.size()); }
};

// ---------------------------------------------------------------------------
// Forward / backward
// ---------------------------------------------------------------------------

struct LayerCache {
  Eigen::MatrixXd h_in;       // nodes x d entering the layer
  Eigen::MatrixXd z_in;       // kRelations x d entering the layer
  Eigen::MatrixXd activated;  // tanh(pre), before dropout
  Eigen::MatrixXd h_out;      // after dropout
  Eigen::MatrixXd dropout_mask;    // empty when the layer ran without dropout
  std::vector<RelEdge> edges; // canonical order used for aggregation
  std::vector<double> inv_degree;  // 1/deg when mean aggregation is on
};

struct Forward {
  int n_real = 0;
  int n_total = 0;
  std::vector<LayerCache> layers;
  Eigen::MatrixXd logits;  // n_total x 2
  Eigen::MatrixXd probs;   // n_total x 2
};

/// Optional per-layer dropout masks (entries are 0 or 1/keep_prob). The
/// last layer's mask must cover the augmented node count.
using DropoutMasks = std::vector<Eigen::MatrixXd>;

/// Runs all layers: the first num_layers-1 on the real graph, then the
/// augmentation step (if any), then the final layer on the augmented graph,
/// the linear classifier, and softmax. Throws on non-finite intermediates.
Forward forward(const LearnGraph& g, const ModelParams& params, const Augmentation& aug,
                const DropoutMasks* dropout = nullptr);

/// Inference entry point: no augmentation, no dropout; returns class
/// probabilities per node (rows sum to 1).
Eigen::MatrixXd model_forward(const LearnGraph& g, const ModelParams& params);

/// Cross-entropy over labeled nodes (label < 0 skipped), scaled by `scale`.
/// `labels` covers real plus synthetic nodes.
double cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& labels,
                     double scale);

/// Exact reverse-mode gradients of cross_entropy(forward(...)) with respect
/// to every model parameter; optionally also with respect to the inputs X.
void backward(const LearnGraph& g, const ModelParams& params, const Augmentation& aug,
              const Forward& f, const std::vector<int>& labels, double scale,
              ModelGrads& grads, Eigen::MatrixXd* grad_x = nullptr);

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamState {
  Eigen::MatrixXd m, v;
  long long step = 0;
};

/// Adam with bias correction; decoupled weight decay is applied to the
/// parameter before the update.
void adam_step(Eigen::MatrixXd& theta, const Eigen::MatrixXd& grad, AdamState& state,
               double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

/// Adam states for a whole model.
struct ModelAdam {
  AdamState basis, coeff, classifier;
  std::vector<std::array<AdamState, 4>> layers;

  static ModelAdam zeros_like(const ModelParams& p);
  void step(ModelParams& params, const ModelGrads& grads, double lr, double weight_decay);
};

}  // namespace mvd::fsgnn
