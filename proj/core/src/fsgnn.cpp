#include "mvd/fsgnn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "binio.hpp"
#include "mvd/rng.hpp"

namespace mvd::fsgnn {

// ---------------------------------------------------------------------------
// Relations
// ---------------------------------------------------------------------------

Relation relation_of(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::Control: return Relation::Control;
    case EdgeKind::Data: return Relation::Data;
    case EdgeKind::Call: return Relation::Call;
    case EdgeKind::Return: return Relation::Return;
  }
  return Relation::Control;
}

Relation inverse_of(Relation r) {
  int i = static_cast<int>(r);
  if (i < kBaseRelations) return static_cast<Relation>(i + kBaseRelations);
  if (i < 2 * kBaseRelations) return static_cast<Relation>(i - kBaseRelations);
  return Relation::SelfLoop;
}

bool is_inverse(Relation r) {
  int i = static_cast<int>(r);
  return i >= kBaseRelations && i < 2 * kBaseRelations;
}

std::string to_string(Relation r) {
  switch (r) {
    case Relation::Control: return "Control";
    case Relation::Data: return "Data";
    case Relation::Call: return "Call";
    case Relation::Return: return "Return";
    case Relation::ControlInv: return "Control^-1";
    case Relation::DataInv: return "Data^-1";
    case Relation::CallInv: return "Call^-1";
    case Relation::ReturnInv: return "Return^-1";
    case Relation::SelfLoop: return "Self";
  }
  return "Self";
}

std::string to_string(Compose op) {
  switch (op) {
    case Compose::Sub: return "sub";
    case Compose::Mult: return "mult";
    case Compose::Ccorr: return "ccorr";
  }
  return "ccorr";
}

std::optional<Compose> compose_from_string(const std::string& s) {
  if (s == "sub") return Compose::Sub;
  if (s == "mult") return Compose::Mult;
  if (s == "ccorr") return Compose::Ccorr;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Composition
// ---------------------------------------------------------------------------

Eigen::VectorXd compose(const Eigen::VectorXd& x, const Eigen::VectorXd& z, Compose op) {
  if (x.size() != z.size()) throw std::runtime_error("compose: dimension mismatch");
  const Eigen::Index d = x.size();
  switch (op) {
    case Compose::Sub: return x - z;
    case Compose::Mult: return x.cwiseProduct(z);
    case Compose::Ccorr: {
      Eigen::VectorXd out(d);
      for (Eigen::Index k = 0; k < d; ++k) {
        double acc = 0;
        for (Eigen::Index i = 0; i < d; ++i) acc += x(i) * z((k + i) % d);
        out(k) = acc;
      }
      return out;
    }
  }
  return x;
}

void compose_backward(const Eigen::VectorXd& x, const Eigen::VectorXd& z, Compose op,
                      const Eigen::VectorXd& grad_out, Eigen::VectorXd& grad_x,
                      Eigen::VectorXd& grad_z) {
  const Eigen::Index d = x.size();
  switch (op) {
    case Compose::Sub:
      grad_x += grad_out;
      grad_z -= grad_out;
      return;
    case Compose::Mult:
      grad_x += grad_out.cwiseProduct(z);
      grad_z += grad_out.cwiseProduct(x);
      return;
    case Compose::Ccorr:
      // out[k] = sum_i x[i] z[(k+i)%d]
      for (Eigen::Index k = 0; k < d; ++k) {
        double g = grad_out(k);
        if (g == 0) continue;
        for (Eigen::Index i = 0; i < d; ++i) {
          grad_x(i) += g * z((k + i) % d);
          grad_z((k + i) % d) += g * x(i);
        }
      }
      return;
  }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

Eigen::VectorXd EdgeEmbedding::vector_for(int relation) const {
  return (coeff.row(relation) * basis).transpose();
}

Eigen::MatrixXd EdgeEmbedding::all_vectors() const { return coeff * basis; }

namespace {

Eigen::MatrixXd glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-a, a);
  }
  return m;
}

}  // namespace

ModelParams ModelParams::init(int dim, int num_layers, int bases, Compose phi,
                              std::uint64_t seed) {
  Rng rng(seed);
  ModelParams p;
  p.dim = dim;
  p.phi = phi;
  p.edges.basis = glorot(bases, dim, rng);
  p.edges.coeff = glorot(kRelations, bases, rng);
  for (int l = 0; l < num_layers; ++l) {
    LayerParams lp;
    lp.w_base = glorot(dim, dim, rng);
    lp.w_inverse = glorot(dim, dim, rng);
    lp.w_self = glorot(dim, dim, rng);
    lp.w_rel = glorot(dim, dim, rng);
    p.layers.push_back(std::move(lp));
  }
  p.classifier = glorot(dim, 2, rng);
  return p;
}

ModelGrads ModelGrads::zeros_like(const ModelParams& p) {
  ModelGrads g;
  g.basis = Eigen::MatrixXd::Zero(p.edges.basis.rows(), p.edges.basis.cols());
  g.coeff = Eigen::MatrixXd::Zero(p.edges.coeff.rows(), p.edges.coeff.cols());
  for (const auto& lp : p.layers) {
    LayerParams z;
    z.w_base = Eigen::MatrixXd::Zero(lp.w_base.rows(), lp.w_base.cols());
    z.w_inverse = Eigen::MatrixXd::Zero(lp.w_inverse.rows(), lp.w_inverse.cols());
    z.w_self = Eigen::MatrixXd::Zero(lp.w_self.rows(), lp.w_self.cols());
    z.w_rel = Eigen::MatrixXd::Zero(lp.w_rel.rows(), lp.w_rel.cols());
    g.layers.push_back(std::move(z));
  }
  g.classifier = Eigen::MatrixXd::Zero(p.classifier.rows(), p.classifier.cols());
  return g;
}

void ModelGrads::add(const ModelGrads& other) {
  basis += other.basis;
  coeff += other.coeff;
  for (size_t l = 0; l < layers.size(); ++l) {
    layers[l].w_base += other.layers[l].w_base;
    layers[l].w_inverse += other.layers[l].w_inverse;
    layers[l].w_self += other.layers[l].w_self;
    layers[l].w_rel += other.layers[l].w_rel;
  }
  classifier += other.classifier;
}

double ModelGrads::max_abs() const {
  double m = basis.cwiseAbs().maxCoeff();
  m = std::max(m, coeff.cwiseAbs().maxCoeff());
  for (const auto& l : layers) {
    m = std::max(m, l.w_base.cwiseAbs().maxCoeff());
    m = std::max(m, l.w_inverse.cwiseAbs().maxCoeff());
    m = std::max(m, l.w_self.cwiseAbs().maxCoeff());
    m = std::max(m, l.w_rel.cwiseAbs().maxCoeff());
  }
  m = std::max(m, classifier.cwiseAbs().maxCoeff());
  return m;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

namespace {

std::vector<RelEdge> canonical_edges(std::vector<RelEdge> edges) {
  std::sort(edges.begin(), edges.end(), [](const RelEdge& a, const RelEdge& b) {
    return std::tie(a[1], a[2], a[0]) < std::tie(b[1], b[2], b[0]);
  });
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw std::runtime_error(std::string("numerical blow-up in ") + what);
  }
}

// One message-passing layer over `n` nodes. Every base edge (s, d, r)
// contributes to d through w_base with relation r, and to s through
// w_inverse with relation r^-1; every node receives its self term.
LayerCache layer_forward(int n, const std::vector<RelEdge>& edges,
                         const Eigen::MatrixXd& h, const Eigen::MatrixXd& z,
                         const LayerParams& lp, Compose phi, bool mean_aggregate,
                         const Eigen::MatrixXd* dropout_mask) {
  LayerCache cache;
  cache.h_in = h;
  cache.z_in = z;
  cache.edges = canonical_edges(edges);

  const Eigen::Index d_out = lp.w_base.cols();
  Eigen::MatrixXd pre = Eigen::MatrixXd::Zero(n, d_out);
  std::vector<int> degree(static_cast<size_t>(n), 1);  // self term

  for (const auto& e : cache.edges) {
    int s = e[0], dst = e[1], r = e[2];
    Eigen::VectorXd msg = compose(h.row(s).transpose(), z.row(r).transpose(), phi);
    pre.row(dst) += msg.transpose() * lp.w_base;
    Eigen::VectorXd inv = compose(h.row(dst).transpose(),
                                  z.row(r + kBaseRelations).transpose(), phi);
    pre.row(s) += inv.transpose() * lp.w_inverse;
    degree[static_cast<size_t>(dst)]++;
    degree[static_cast<size_t>(s)]++;
  }
  const int self_rel = static_cast<int>(Relation::SelfLoop);
  for (int v = 0; v < n; ++v) {
    Eigen::VectorXd own = compose(h.row(v).transpose(), z.row(self_rel).transpose(), phi);
    pre.row(v) += own.transpose() * lp.w_self;
  }

  if (mean_aggregate) {
    cache.inv_degree.resize(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v) {
      cache.inv_degree[static_cast<size_t>(v)] = 1.0 / degree[static_cast<size_t>(v)];
      pre.row(v) *= cache.inv_degree[static_cast<size_t>(v)];
    }
  }

  check_finite(pre, "layer pre-activation");
  cache.activated = pre.array().tanh().matrix();
  if (dropout_mask) {
    cache.dropout_mask = *dropout_mask;
    cache.h_out = cache.activated.cwiseProduct(*dropout_mask);
  } else {
    cache.h_out = cache.activated;
  }
  check_finite(cache.h_out, "layer output");
  return cache;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd probs(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double mx = logits.row(r).maxCoeff();
    Eigen::ArrayXd e = (logits.row(r).array() - mx).exp();
    probs.row(r) = (e / e.sum()).matrix();
  }
  return probs;
}

}  // namespace

Forward forward(const LearnGraph& g, const ModelParams& params, const Augmentation& aug,
                const DropoutMasks* dropout) {
  if (params.layers.empty()) throw std::runtime_error("model has no layers");
  if (dropout && static_cast<int>(dropout->size()) != params.num_layers()) {
    throw std::runtime_error("dropout mask count does not match layer count");
  }

  Forward f;
  f.n_real = g.n;
  f.n_total = g.n + aug.count();

  const int pre_layers = params.num_layers() - 1;
  Eigen::MatrixXd h = g.x;
  Eigen::MatrixXd z = params.edges.all_vectors();

  for (int l = 0; l < pre_layers; ++l) {
    const Eigen::MatrixXd* mask = dropout ? &(*dropout)[static_cast<size_t>(l)] : nullptr;
    LayerCache cache = layer_forward(g.n, g.edges, h, z, params.layers[static_cast<size_t>(l)],
                                     params.phi, params.mean_aggregate, mask);
    h = cache.h_out;
    z = cache.z_in * params.layers[static_cast<size_t>(l)].w_rel;
    check_finite(z, "relation update");
    f.layers.push_back(std::move(cache));
  }

  // Interpolated synthetic nodes join the graph for the final layer.
  Eigen::MatrixXd h_aug(f.n_total, h.cols());
  h_aug.topRows(g.n) = h;
  for (int i = 0; i < aug.count(); ++i) {
    const auto& s = aug.nodes[static_cast<size_t>(i)];
    h_aug.row(g.n + i) =
        h.row(s.source) + s.delta * (h.row(s.neighbor) - h.row(s.source));
  }
  std::vector<RelEdge> final_edges = g.edges;
  final_edges.insert(final_edges.end(), aug.edges.begin(), aug.edges.end());

  const Eigen::MatrixXd* mask =
      dropout ? &(*dropout)[static_cast<size_t>(pre_layers)] : nullptr;
  LayerCache last = layer_forward(f.n_total, final_edges, h_aug, z,
                                  params.layers[static_cast<size_t>(pre_layers)], params.phi,
                                  params.mean_aggregate, mask);
  f.logits = last.h_out * params.classifier;
  check_finite(f.logits, "classifier");
  f.probs = softmax_rows(f.logits);
  f.layers.push_back(std::move(last));
  return f;
}

Eigen::MatrixXd model_forward(const LearnGraph& g, const ModelParams& params) {
  return forward(g, params, Augmentation{}, nullptr).probs;
}

double cross_entropy(const Eigen::MatrixXd& probs, const std::vector<int>& labels,
                     double scale) {
  double loss = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    int t = labels[i];
    if (t < 0) continue;
    double p = probs(static_cast<Eigen::Index>(i), t);
    loss -= std::log(std::max(p, 1e-12));
  }
  return scale * loss;
}

void backward(const LearnGraph& g, const ModelParams& params, const Augmentation& aug,
              const Forward& f, const std::vector<int>& labels, double scale,
              ModelGrads& grads, Eigen::MatrixXd* grad_x) {
  const int pre_layers = params.num_layers() - 1;
  const Eigen::Index d = params.dim;

  // Softmax + cross-entropy.
  Eigen::MatrixXd grad_logits = Eigen::MatrixXd::Zero(f.n_total, 2);
  for (size_t i = 0; i < labels.size(); ++i) {
    int t = labels[i];
    if (t < 0) continue;
    Eigen::Index r = static_cast<Eigen::Index>(i);
    grad_logits.row(r) = f.probs.row(r) * scale;
    grad_logits(r, t) -= scale;
  }

  const LayerCache& last = f.layers.back();
  grads.classifier += last.h_out.transpose() * grad_logits;
  Eigen::MatrixXd grad_h_out = grad_logits * params.classifier.transpose();

  // Peel layers from the back; relation-vector gradients chain through the
  // per-layer w_rel projections.
  Eigen::MatrixXd grad_z_next = Eigen::MatrixXd::Zero(kRelations, d);

  auto layer_backward = [&](int layer_index, int n, const LayerCache& cache,
                            const Eigen::MatrixXd& grad_out) {
    const LayerParams& lp = params.layers[static_cast<size_t>(layer_index)];
    LayerParams& lg = grads.layers[static_cast<size_t>(layer_index)];

    Eigen::MatrixXd grad_act = cache.dropout_mask.size()
                                   ? grad_out.cwiseProduct(cache.dropout_mask)
                                   : grad_out;
    Eigen::MatrixXd grad_pre =
        grad_act.cwiseProduct((1.0 - cache.activated.array().square()).matrix());
    if (params.mean_aggregate) {
      for (int v = 0; v < n; ++v) {
        grad_pre.row(v) *= cache.inv_degree[static_cast<size_t>(v)];
      }
    }

    Eigen::MatrixXd grad_h = Eigen::MatrixXd::Zero(n, d);
    Eigen::MatrixXd grad_z = Eigen::MatrixXd::Zero(kRelations, d);
    const int self_rel = static_cast<int>(Relation::SelfLoop);

    for (const auto& e : cache.edges) {
      int s = e[0], dst = e[1], r = e[2];
      // base direction
      {
        Eigen::VectorXd msg = compose(cache.h_in.row(s).transpose(),
                                      cache.z_in.row(r).transpose(), params.phi);
        lg.w_base += msg * grad_pre.row(dst);
        Eigen::VectorXd grad_msg = lp.w_base * grad_pre.row(dst).transpose();
        Eigen::VectorXd gx = Eigen::VectorXd::Zero(d), gz = Eigen::VectorXd::Zero(d);
        compose_backward(cache.h_in.row(s).transpose(), cache.z_in.row(r).transpose(),
                         params.phi, grad_msg, gx, gz);
        grad_h.row(s) += gx.transpose();
        grad_z.row(r) += gz.transpose();
      }
      // inverse direction
      {
        int ri = r + kBaseRelations;
        Eigen::VectorXd inv = compose(cache.h_in.row(dst).transpose(),
                                      cache.z_in.row(ri).transpose(), params.phi);
        lg.w_inverse += inv * grad_pre.row(s);
        Eigen::VectorXd grad_msg = lp.w_inverse * grad_pre.row(s).transpose();
        Eigen::VectorXd gx = Eigen::VectorXd::Zero(d), gz = Eigen::VectorXd::Zero(d);
        compose_backward(cache.h_in.row(dst).transpose(), cache.z_in.row(ri).transpose(),
                         params.phi, grad_msg, gx, gz);
        grad_h.row(dst) += gx.transpose();
        grad_z.row(ri) += gz.transpose();
      }
    }
    for (int v = 0; v < n; ++v) {
      Eigen::VectorXd own = compose(cache.h_in.row(v).transpose(),
                                    cache.z_in.row(self_rel).transpose(), params.phi);
      lg.w_self += own * grad_pre.row(v);
      Eigen::VectorXd grad_msg = lp.w_self * grad_pre.row(v).transpose();
      Eigen::VectorXd gx = Eigen::VectorXd::Zero(d), gz = Eigen::VectorXd::Zero(d);
      compose_backward(cache.h_in.row(v).transpose(), cache.z_in.row(self_rel).transpose(),
                       params.phi, grad_msg, gx, gz);
      grad_h.row(v) += gx.transpose();
      grad_z.row(self_rel) += gz.transpose();
    }
    return std::make_pair(std::move(grad_h), std::move(grad_z));
  };

  // Final layer (over the augmented graph).
  auto [grad_h_aug, grad_z_last] = layer_backward(pre_layers, f.n_total, last, grad_h_out);
  grad_z_next = grad_z_last;

  // Fold synthetic-node gradients back into their interpolation sources.
  Eigen::MatrixXd grad_h = grad_h_aug.topRows(g.n);
  for (int i = 0; i < aug.count(); ++i) {
    const auto& s = aug.nodes[static_cast<size_t>(i)];
    Eigen::RowVectorXd gs = grad_h_aug.row(g.n + i);
    grad_h.row(s.source) += (1.0 - s.delta) * gs;
    grad_h.row(s.neighbor) += s.delta * gs;
  }

  for (int l = pre_layers - 1; l >= 0; --l) {
    const LayerCache& cache = f.layers[static_cast<size_t>(l)];
    // Relation chain: z_{l+1} = z_l * w_rel_l.
    grads.layers[static_cast<size_t>(l)].w_rel +=
        cache.z_in.transpose() * grad_z_next;
    Eigen::MatrixXd grad_z_in =
        grad_z_next * params.layers[static_cast<size_t>(l)].w_rel.transpose();

    auto [gh, gz] = layer_backward(l, g.n, cache, grad_h);
    grad_h = std::move(gh);
    grad_z_next = grad_z_in + gz;
  }

  // Layer-0 relation vectors come from the basis decomposition.
  grads.coeff += grad_z_next * params.edges.basis.transpose();
  grads.basis += params.edges.coeff.transpose() * grad_z_next;

  if (grad_x) *grad_x = grad_h;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void adam_step(Eigen::MatrixXd& theta, const Eigen::MatrixXd& grad, AdamState& state,
               double lr, double weight_decay, double beta1, double beta2, double eps) {
  if (state.m.size() == 0) {
    state.m = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
    state.v = Eigen::MatrixXd::Zero(theta.rows(), theta.cols());
  }
  if (weight_decay != 0.0) theta -= lr * weight_decay * theta;
  state.step += 1;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v + (1.0 - beta2) * grad.cwiseProduct(grad);
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  Eigen::MatrixXd mhat = state.m / bc1;
  Eigen::MatrixXd vhat = state.v / bc2;
  theta -= lr * mhat.cwiseQuotient(
                    vhat.cwiseSqrt() +
                    Eigen::MatrixXd::Constant(theta.rows(), theta.cols(), eps));
}

ModelAdam ModelAdam::zeros_like(const ModelParams& p) {
  ModelAdam a;
  a.layers.resize(p.layers.size());
  return a;
}

void ModelAdam::step(ModelParams& params, const ModelGrads& grads, double lr,
                     double weight_decay) {
  adam_step(params.edges.basis, grads.basis, basis, lr, weight_decay);
  adam_step(params.edges.coeff, grads.coeff, coeff, lr, weight_decay);
  for (size_t l = 0; l < params.layers.size(); ++l) {
    adam_step(params.layers[l].w_base, grads.layers[l].w_base, layers[l][0], lr, weight_decay);
    adam_step(params.layers[l].w_inverse, grads.layers[l].w_inverse, layers[l][1], lr,
              weight_decay);
    adam_step(params.layers[l].w_self, grads.layers[l].w_self, layers[l][2], lr, weight_decay);
    adam_step(params.layers[l].w_rel, grads.layers[l].w_rel, layers[l][3], lr, weight_decay);
  }
  adam_step(params.classifier, grads.classifier, classifier, lr, weight_decay);
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

void ModelParams::save(std::ostream& out) const {
  using namespace binio;
  write_raw(out, "MVDG", 4);
  write_u32(out, 1);  // version
  write_u32(out, static_cast<std::uint32_t>(dim));
  write_u32(out, static_cast<std::uint32_t>(layers.size()));
  write_u32(out, static_cast<std::uint32_t>(edges.bases()));
  write_string(out, fsgnn::to_string(phi));
  write_string(out, "tanh");
  write_u32(out, mean_aggregate ? 1 : 0);
  write_u32(out, kRelations);
  for (int r = 0; r < kRelations; ++r) {
    write_string(out, fsgnn::to_string(static_cast<Relation>(r)));
  }
  write_matrix(out, edges.basis);
  write_matrix(out, edges.coeff);
  for (const auto& lp : layers) {
    write_matrix(out, lp.w_base);
    write_matrix(out, lp.w_inverse);
    write_matrix(out, lp.w_self);
    write_matrix(out, lp.w_rel);
  }
  write_matrix(out, classifier);
}

ModelParams ModelParams::load(std::istream& in) {
  using namespace binio;
  expect_magic(in, "MVDG");
  if (read_u32(in) != 1) throw std::runtime_error("unsupported model version");
  ModelParams p;
  p.dim = static_cast<int>(read_u32(in));
  std::uint32_t n_layers = read_u32(in);
  read_u32(in);  // bases, implied by the coeff matrix
  std::string phi_name = read_string(in);
  auto phi = compose_from_string(phi_name);
  if (!phi) throw std::runtime_error("unknown composition operator: " + phi_name);
  p.phi = *phi;
  std::string act = read_string(in);
  if (act != "tanh") throw std::runtime_error("unknown activation: " + act);
  p.mean_aggregate = read_u32(in) != 0;
  std::uint32_t n_rel = read_u32(in);
  if (n_rel != kRelations) throw std::runtime_error("relation table mismatch");
  for (std::uint32_t r = 0; r < n_rel; ++r) {
    if (read_string(in) != fsgnn::to_string(static_cast<Relation>(r))) {
      throw std::runtime_error("relation table mismatch");
    }
  }
  p.edges.basis = read_matrix(in);
  p.edges.coeff = read_matrix(in);
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    LayerParams lp;
    lp.w_base = read_matrix(in);
    lp.w_inverse = read_matrix(in);
    lp.w_self = read_matrix(in);
    lp.w_rel = read_matrix(in);
    p.layers.push_back(std::move(lp));
  }
  p.classifier = read_matrix(in);
  return p;
}

}  // namespace mvd::fsgnn
