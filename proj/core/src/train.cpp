#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "binio.hpp"
#include "mvd/pipeline.hpp"
#include "mvd/rng.hpp"

namespace mvd::pipeline {
namespace {

int count_labeled(const std::vector<int>& labels) {
  int c = 0;
  for (int l : labels) c += (l >= 0);
  return c;
}

int count_minority(const std::vector<int>& labels) {
  int c = 0;
  for (int l : labels) c += (l == 1);
  return c;
}

Eigen::MatrixXd make_dropout_mask(int rows, int cols, double dropout, Rng& rng) {
  Eigen::MatrixXd mask(rows, cols);
  const double keep = 1.0 - dropout;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      mask(r, c) = rng.uniform() < dropout ? 0.0 : 1.0 / keep;
    }
  }
  return mask;
}

}  // namespace

double loss(const std::vector<Eigen::MatrixXd>& probabilities,
            const std::vector<std::vector<int>>& labels, LossNorm norm) {
  if (probabilities.size() != labels.size()) {
    throw std::runtime_error("loss: probabilities/labels size mismatch");
  }
  double total = 0;
  long long global_labeled = 0;
  for (size_t g = 0; g < probabilities.size(); ++g) {
    double graph_sum = 0;
    int labeled = 0;
    for (size_t i = 0; i < labels[g].size(); ++i) {
      int t = labels[g][i];
      if (t < 0) continue;
      ++labeled;
      graph_sum -= std::log(std::max(probabilities[g](static_cast<Eigen::Index>(i), t), 1e-12));
    }
    global_labeled += labeled;
    if (norm == LossNorm::Graph) {
      if (labeled > 0) total += graph_sum / static_cast<double>(labeled);
    } else {
      total += graph_sum;
    }
  }
  if (norm == LossNorm::Global) {
    total = global_labeled ? total / static_cast<double>(global_labeled) : 0.0;
  }
  return total;
}

TrainResult train(const Dataset& data, const TrainConfig& config, std::ostream* log) {
  config.validate();
  if (data.entries.empty()) throw std::runtime_error("training dataset is empty");

  // Split by source file so held-out graphs come from unseen programs.
  std::vector<std::string> files;
  {
    std::set<std::string> distinct;
    for (const auto& e : data.entries) distinct.insert(e.graph.file);
    files.assign(distinct.begin(), distinct.end());
  }
  Rng split_rng(hash_combine(config.seed, 0x5eed5eedULL));
  for (size_t i = files.size(); i > 1; --i) {
    std::swap(files[i - 1], files[static_cast<size_t>(split_rng.index(static_cast<int>(i)))]);
  }
  size_t n_train = files.size();
  if (config.split < 1.0) {
    n_train = static_cast<size_t>(std::llround(config.split * static_cast<double>(files.size())));
    n_train = std::max<size_t>(1, std::min(n_train, files.size()));
  }
  TrainResult result;
  result.train_files.assign(files.begin(), files.begin() + static_cast<long>(n_train));
  result.holdout_files.assign(files.begin() + static_cast<long>(n_train), files.end());
  std::sort(result.train_files.begin(), result.train_files.end());
  std::sort(result.holdout_files.begin(), result.holdout_files.end());
  std::set<std::string> train_set(result.train_files.begin(), result.train_files.end());

  std::vector<const DatasetEntry*> train_entries;
  for (const auto& e : data.entries) {
    if (train_set.count(e.graph.file)) train_entries.push_back(&e);
  }
  if (train_entries.empty()) throw std::runtime_error("training split selected no graphs");

  long long vulnerable = 0;
  for (const auto* e : train_entries) {
    for (const auto& n : e->graph.nodes) vulnerable += (n.label == Label::Vulnerable);
  }
  if (vulnerable == 0) {
    throw std::runtime_error("nothing to learn: no vulnerable nodes in the training split");
  }

  // Statement embeddings.
  embedder::Doc2VecConfig d2v;
  d2v.dim = config.node_dim;
  d2v.seed = hash_combine(config.seed, 0xd0c2d0c2ULL);
  std::vector<std::vector<std::string>> corpus;
  for (const auto* e : train_entries) {
    for (const auto& toks : e->node_tokens) corpus.push_back(toks);
  }
  TrainedModel model{config, embedder::train_doc2vec(corpus, d2v),
                     fsgnn::ModelParams(), resampler::EdgeGenerator()};

  std::map<std::string, Eigen::VectorXd> cache;
  std::vector<fsgnn::LearnGraph> graphs;
  graphs.reserve(train_entries.size());
  for (const auto* e : train_entries) {
    graphs.push_back(to_learn_graph(*e, model.doc2vec, &cache));
  }

  // Edge generator, pre-trained on the initial embeddings and real edges.
  model.edge_gen = resampler::EdgeGenerator::init(config.node_dim,
                                                  hash_combine(config.seed, 0xed6eULL));
  model.edge_gen.eta = config.eta;
  {
    std::vector<resampler::EdgeTrainGraph> etg;
    for (const auto& g : graphs) {
      resampler::EdgeTrainGraph t;
      t.h = g.x;
      for (const auto& e : g.edges) t.edges.emplace_back(e[0], e[1]);
      etg.push_back(std::move(t));
    }
    long long total_edges = 0;
    for (const auto& t : etg) total_edges += static_cast<long long>(t.edges.size());
    if (total_edges > 0) {
      resampler::train_edge_generator(model.edge_gen, etg, 30,
                                      hash_combine(config.seed, 0xe49eULL));
    }
  }

  model.gnn = fsgnn::ModelParams::init(config.node_dim, config.layers + 1, config.bases,
                                       config.phi, hash_combine(config.seed, 0x649eULL));
  model.gnn.mean_aggregate = config.mean_agg;
  fsgnn::ModelAdam opt = fsgnn::ModelAdam::zeros_like(model.gnn);

  const int total_layers = config.layers + 1;
  std::vector<size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), 0);

  // Early stop bookkeeping over the smoothed epoch loss.
  const int smooth_window = 10;
  const double min_improvement = 1e-5;
  const int patience = 10;
  std::vector<double> smoothed;
  double best_smoothed = std::numeric_limits<double>::infinity();
  int stall = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng(hash_combine(hash_combine(config.seed, 0x0bdeULL),
                                 static_cast<std::uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<size_t>(shuffle_rng.index(static_cast<int>(i)))]);
    }

    double epoch_loss = 0;
    for (size_t batch_start = 0; batch_start < order.size();
         batch_start += static_cast<size_t>(config.batch_size)) {
      size_t batch_end =
          std::min(order.size(), batch_start + static_cast<size_t>(config.batch_size));

      // The global normalizer counts labeled real plus synthetic nodes in
      // the batch; synthetic counts follow from the labels alone.
      double global_scale = 1.0;
      if (config.loss_norm == LossNorm::Global) {
        long long labeled = 0;
        for (size_t bi = batch_start; bi < batch_end; ++bi) {
          const auto& g = graphs[order[bi]];
          labeled += count_labeled(g.labels);
          if (config.oversample_scale > 0) {
            labeled += static_cast<long long>(
                std::llround(config.oversample_scale * count_minority(g.labels)));
          }
        }
        global_scale = labeled ? 1.0 / static_cast<double>(labeled) : 1.0;
      }

      fsgnn::ModelGrads grads = fsgnn::ModelGrads::zeros_like(model.gnn);
      for (size_t bi = batch_start; bi < batch_end; ++bi) {
        const fsgnn::LearnGraph& g = graphs[order[bi]];
        Rng graph_rng(hash_combine(hash_combine(config.seed, static_cast<std::uint64_t>(epoch)),
                                   0x9000ULL + order[bi]));

        // Pre layers run on the real graph; the resampler works on the
        // layer-L representations, so the augmentation plan is built from a
        // dropout-free preview of those layers.
        fsgnn::Augmentation aug;
        if (config.oversample_scale > 0 && count_minority(g.labels) > 0) {
          fsgnn::ModelParams preview = model.gnn;
          preview.layers.resize(static_cast<size_t>(config.layers));
          fsgnn::Forward pre = fsgnn::forward(g, preview, fsgnn::Augmentation{}, nullptr);
          const Eigen::MatrixXd& h = pre.layers.back().h_out;
          aug = resampler::augment(h, g.labels, config.oversample_scale, model.edge_gen,
                                   graph_rng);
        }

        fsgnn::DropoutMasks masks;
        if (config.dropout > 0) {
          for (int l = 0; l < total_layers; ++l) {
            int rows = (l == total_layers - 1) ? g.n + aug.count() : g.n;
            masks.push_back(make_dropout_mask(rows, config.node_dim, config.dropout, graph_rng));
          }
        }

        std::vector<int> labels = g.labels;
        for (int s = 0; s < aug.count(); ++s) labels.push_back(1);

        double scale = 1.0;
        if (config.loss_norm == LossNorm::Graph) {
          int labeled = count_labeled(labels);
          scale = labeled ? 1.0 / static_cast<double>(labeled) : 1.0;
        } else {
          scale = global_scale;
        }

        fsgnn::Forward f =
            fsgnn::forward(g, model.gnn, aug, masks.empty() ? nullptr : &masks);
        epoch_loss += fsgnn::cross_entropy(f.probs, labels, scale);
        fsgnn::backward(g, model.gnn, aug, f, labels, scale, grads, nullptr);
      }
      opt.step(model.gnn, grads, config.lr, config.weight_decay);
    }

    result.epoch_losses.push_back(epoch_loss);
    if (log) {
      (*log) << "epoch " << epoch << " loss " << epoch_loss << '\n';
    }

    // Smoothed early stopping.
    size_t have = result.epoch_losses.size();
    size_t from = have > static_cast<size_t>(smooth_window) ? have - smooth_window : 0;
    double mean = 0;
    for (size_t i = from; i < have; ++i) mean += result.epoch_losses[i];
    mean /= static_cast<double>(have - from);
    smoothed.push_back(mean);
    if (mean < best_smoothed - min_improvement) {
      best_smoothed = mean;
      stall = 0;
    } else if (++stall >= patience) {
      if (log) (*log) << "converged after " << (epoch + 1) << " epochs\n";
      break;
    }
  }

  result.model = std::move(model);
  return result;
}

std::vector<StatementScore> DetectReport::findings(double threshold) const {
  std::vector<StatementScore> out;
  for (const auto& s : statements) {
    if (s.probability > threshold) out.push_back(s);
  }
  return out;
}

void TrainedModel::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  using namespace binio;
  write_raw(out, "MVDB", 4);
  write_u32(out, 1);
  write_string(out, config.to_document());
  doc2vec.save(out);
  gnn.save(out);
  edge_gen.save(out);
}

TrainedModel TrainedModel::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model: " + path);
  using namespace binio;
  expect_magic(in, "MVDB");
  if (read_u32(in) != 1) throw std::runtime_error("unsupported model bundle version");
  TrainedModel m;
  m.config = TrainConfig::parse(read_string(in));
  m.doc2vec = embedder::Doc2VecModel::load(in);
  m.gnn = fsgnn::ModelParams::load(in);
  m.edge_gen = resampler::EdgeGenerator::load(in);
  return m;
}

}  // namespace mvd::pipeline
