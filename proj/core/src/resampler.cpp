#include "mvd/resampler.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "binio.hpp"

namespace mvd::resampler {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

int nearest_row(const Eigen::MatrixXd& h, const Eigen::VectorXd& point,
                const std::vector<int>& candidates, int exclude) {
  int best = -1;
  double best_d = 0;
  for (int c : candidates) {
    if (c == exclude) continue;
    double dist = (h.row(c).transpose() - point).squaredNorm();
    if (best < 0 || dist < best_d) {
      best = c;
      best_d = dist;
    }
  }
  return best;
}

}  // namespace

std::vector<SyntheticNode> smote_nodes(const Eigen::MatrixXd& h,
                                       const std::vector<int>& labels, double scale,
                                       Rng& rng) {
  if (scale < 0) throw std::runtime_error("oversampling scale must be >= 0");
  std::vector<int> minority;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) minority.push_back(static_cast<int>(i));
  }
  std::vector<SyntheticNode> out;
  if (minority.empty()) return out;

  int count = static_cast<int>(std::llround(scale * static_cast<double>(minority.size())));
  for (int k = 0; k < count; ++k) {
    SyntheticNode s;
    s.source = minority[static_cast<size_t>(k) % minority.size()];
    int nb = nearest_row(h, h.row(s.source).transpose(), minority, s.source);
    s.neighbor = nb < 0 ? s.source : nb;  // lone minority node: copy in place
    s.delta = rng.uniform();
    s.embedding = h.row(s.source).transpose() +
                  s.delta * (h.row(s.neighbor).transpose() - h.row(s.source).transpose());
    out.push_back(std::move(s));
  }
  return out;
}

EdgeGenerator EdgeGenerator::init(int dim, std::uint64_t seed) {
  Rng rng(seed);
  EdgeGenerator g;
  double a = std::sqrt(6.0 / static_cast<double>(2 * dim));
  g.weight.resize(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) g.weight(r, c) = rng.uniform(-a, a);
  }
  return g;
}

double edge_prob(const EdgeGenerator& gen, const Eigen::VectorXd& a,
                 const Eigen::VectorXd& b) {
  if (a.size() != gen.weight.rows() || b.size() != gen.weight.cols()) {
    throw std::runtime_error("edge_prob: dimension mismatch");
  }
  return sigmoid(a.dot(gen.weight * b));
}

std::vector<fsgnn::RelEdge> generate_edges(const EdgeGenerator& gen,
                                           const std::vector<SyntheticNode>& synth,
                                           const Eigen::MatrixXd& h, int n_real) {
  std::vector<fsgnn::RelEdge> edges;
  std::vector<int> all(static_cast<size_t>(n_real));
  for (int i = 0; i < n_real; ++i) all[static_cast<size_t>(i)] = i;

  const int control = static_cast<int>(fsgnn::Relation::Control);
  for (size_t i = 0; i < synth.size(); ++i) {
    const SyntheticNode& s = synth[i];
    int self = n_real + static_cast<int>(i);

    std::vector<int> candidates{s.source};
    int nearest = nearest_row(h, s.embedding, all, s.source);
    if (nearest >= 0) candidates.push_back(nearest);

    bool linked = false;
    for (int target : candidates) {
      if (edge_prob(gen, s.embedding, h.row(target).transpose()) > gen.eta) {
        edges.push_back({self, target, control});
        linked = true;
      }
    }
    if (!linked) edges.push_back({self, s.source, control});  // keep it connected
  }
  return edges;
}

fsgnn::Augmentation augment(const Eigen::MatrixXd& h, const std::vector<int>& labels,
                            double scale, const EdgeGenerator& gen, Rng& rng) {
  fsgnn::Augmentation aug;
  std::vector<SyntheticNode> synth = smote_nodes(h, labels, scale, rng);
  aug.edges = generate_edges(gen, synth, h, static_cast<int>(h.rows()));
  for (auto& s : synth) {
    aug.nodes.push_back({s.source, s.neighbor, s.delta});
  }
  return aug;
}

std::vector<double> train_edge_generator(EdgeGenerator& gen,
                                         const std::vector<EdgeTrainGraph>& graphs,
                                         int epochs, std::uint64_t seed, double lr) {
  long long total_edges = 0;
  for (const auto& g : graphs) total_edges += static_cast<long long>(g.edges.size());
  if (total_edges == 0) throw std::runtime_error("edge generator: no edges in corpus");

  Rng rng(seed);
  std::vector<double> losses;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    double loss = 0;
    long long terms = 0;
    for (const auto& g : graphs) {
      std::set<std::pair<int, int>> edge_set(g.edges.begin(), g.edges.end());
      int n = static_cast<int>(g.h.rows());
      for (const auto& [a, b] : edge_set) {
        // positive pair
        {
          double p = edge_prob(gen, g.h.row(a).transpose(), g.h.row(b).transpose());
          loss += -std::log(std::max(p, 1e-12));
          double grad = p - 1.0;
          gen.weight -= lr * grad * (g.h.row(a).transpose() * g.h.row(b));
          ++terms;
        }
        // matched negative: a random non-edge, when one can be found
        if (n >= 2) {
          for (int attempt = 0; attempt < 16; ++attempt) {
            int x = rng.index(n);
            int y = rng.index(n);
            if (x == y || edge_set.count({x, y})) continue;
            double p = edge_prob(gen, g.h.row(x).transpose(), g.h.row(y).transpose());
            loss += -std::log(std::max(1.0 - p, 1e-12));
            gen.weight -= lr * p * (g.h.row(x).transpose() * g.h.row(y));
            ++terms;
            break;
          }
        }
      }
    }
    losses.push_back(terms ? loss / static_cast<double>(terms) : 0.0);
  }
  return losses;
}

void EdgeGenerator::save(std::ostream& out) const {
  using namespace binio;
  write_raw(out, "MVDE", 4);
  write_u32(out, 1);
  write_f64(out, eta);
  write_matrix(out, weight);
}

EdgeGenerator EdgeGenerator::load(std::istream& in) {
  using namespace binio;
  expect_magic(in, "MVDE");
  if (read_u32(in) != 1) throw std::runtime_error("unsupported edge generator version");
  EdgeGenerator g;
  g.eta = read_f64(in);
  g.weight = read_matrix(in);
  return g;
}

}  // namespace mvd::resampler
