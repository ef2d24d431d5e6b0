#include "mvd/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "binio.hpp"
#include "mvd/frontend.hpp"
#include "mvd/rng.hpp"

namespace mvd::embedder {
namespace {

double sigmoid(double x) {
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> build_neg_table(const Vocab& vocab) {
  std::vector<double> cdf(static_cast<size_t>(vocab.size()), 0.0);
  double total = 0;
  for (int i = 0; i < vocab.size(); ++i) {
    total += std::pow(static_cast<double>(std::max(vocab.counts[static_cast<size_t>(i)], 1LL)),
                      0.75);
    cdf[static_cast<size_t>(i)] = total;
  }
  for (auto& v : cdf) v /= total;
  return cdf;
}

int sample_from_cdf(const std::vector<double>& cdf, double u) {
  auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) return static_cast<int>(cdf.size()) - 1;
  return static_cast<int>(it - cdf.begin());
}

// A single SGD pass over one document: predicts each position from the mean
// of the document vector and the in-window word vectors. `train_words` also
// updates the word matrices; inference freezes them.
double document_pass(const Doc2VecModel& m, const std::vector<int>& words,
                     Eigen::VectorXd& doc, Eigen::MatrixXd* w_in, Eigen::MatrixXd* w_out,
                     double lr, Rng& rng) {
  const int d = m.config.dim;
  const int window = m.config.window;
  const int neg = m.config.negative;
  double loss = 0;

  for (int t = 0; t < static_cast<int>(words.size()); ++t) {
    int target = words[static_cast<size_t>(t)];
    std::vector<int> context;
    for (int off = -window; off <= window; ++off) {
      int j = t + off;
      if (off == 0 || j < 0 || j >= static_cast<int>(words.size())) continue;
      context.push_back(words[static_cast<size_t>(j)]);
    }
    const double denom = 1.0 + static_cast<double>(context.size());
    const Eigen::MatrixXd& in_mat = w_in ? *w_in : m.w_in;
    Eigen::VectorXd hidden = doc;
    for (int c : context) hidden += in_mat.row(c).transpose();
    hidden /= denom;

    Eigen::VectorXd grad_hidden = Eigen::VectorXd::Zero(d);
    for (int k = 0; k <= neg; ++k) {
      int word;
      double label;
      if (k == 0) {
        word = target;
        label = 1.0;
      } else {
        word = sample_from_cdf(m.neg_table, rng.uniform());
        if (word == target) continue;
        label = 0.0;
      }
      const Eigen::MatrixXd& out_mat = w_out ? *w_out : m.w_out;
      double score = out_mat.row(word).dot(hidden);
      double p = sigmoid(score);
      loss += label > 0.5 ? -std::log(std::max(p, 1e-12))
                          : -std::log(std::max(1.0 - p, 1e-12));
      double g = p - label;
      grad_hidden += g * out_mat.row(word).transpose();
      if (w_out) w_out->row(word) -= lr * g * hidden.transpose();
    }

    Eigen::VectorXd grad_input = grad_hidden / denom;
    doc -= lr * grad_input;
    if (w_in) {
      for (int c : context) w_in->row(c) -= lr * grad_input.transpose();
    }
  }
  return loss;
}

}  // namespace

std::vector<std::string> statement_tokens(const std::string& text) {
  if (text.empty()) return {"<empty>"};
  frontend::LexResult lex = frontend::tokenize(text);
  std::vector<std::string> out;
  out.reserve(lex.tokens.size());
  for (const auto& t : lex.tokens) out.push_back(t.text);
  if (out.empty()) return {"<empty>"};
  return out;
}

std::vector<std::string> statement_tokens(const StatementIR& stmt) {
  return statement_tokens(stmt.text);
}

std::vector<std::string> normalize_identifiers(const std::vector<std::string>& tokens) {
  std::map<std::string, std::string> names;
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& tok : tokens) {
    bool ident = !tok.empty() && (std::isalpha(static_cast<unsigned char>(tok[0])) || tok[0] == '_');
    if (!ident) {
      out.push_back(tok);
      continue;
    }
    // keywords and well-known callees keep their surface form
    frontend::LexResult lr = frontend::tokenize(tok);
    if (!lr.tokens.empty() && lr.tokens[0].kind == frontend::TokenKind::Keyword) {
      out.push_back(tok);
      continue;
    }
    auto it = names.find(tok);
    if (it == names.end()) {
      it = names.emplace(tok, "id" + std::to_string(names.size())).first;
    }
    out.push_back(it->second);
  }
  return out;
}

Doc2VecModel train_doc2vec(const std::vector<std::vector<std::string>>& corpus,
                           const Doc2VecConfig& config) {
  if (corpus.empty()) throw std::runtime_error("no training documents");

  Doc2VecModel m;
  m.config = config;

  // Vocabulary in first-seen order; OOV sits at index 0.
  m.vocab.words.push_back("<oov>");
  m.vocab.counts.push_back(0);
  std::map<std::string, long long> counts;
  std::vector<std::string> order;
  for (const auto& doc : corpus) {
    for (const auto& tok : doc) {
      if (counts.find(tok) == counts.end()) order.push_back(tok);
      counts[tok]++;
    }
  }
  for (const auto& tok : order) {
    if (counts[tok] < config.min_count) continue;
    m.vocab.index[tok] = m.vocab.size();
    m.vocab.words.push_back(tok);
    m.vocab.counts.push_back(counts[tok]);
  }

  const int v = m.vocab.size();
  const int d = config.dim;
  Rng rng(config.seed);
  m.w_in.resize(v, d);
  for (int r = 0; r < v; ++r) {
    for (int c = 0; c < d; ++c) m.w_in(r, c) = rng.uniform(-0.5, 0.5) / d;
  }
  m.w_out = Eigen::MatrixXd::Zero(v, d);
  m.neg_table = build_neg_table(m.vocab);

  std::vector<std::vector<int>> docs;
  docs.reserve(corpus.size());
  for (const auto& doc : corpus) {
    std::vector<int> ids;
    ids.reserve(doc.size());
    for (const auto& tok : doc) ids.push_back(m.vocab.lookup(tok));
    docs.push_back(std::move(ids));
  }

  Eigen::MatrixXd doc_vecs(docs.size(), d);
  for (Eigen::Index r = 0; r < doc_vecs.rows(); ++r) {
    for (int c = 0; c < d; ++c) doc_vecs(r, c) = rng.uniform(-0.5, 0.5) / d;
  }

  const long long total_steps = static_cast<long long>(config.epochs) *
                                static_cast<long long>(docs.size());
  long long done = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0;
    long long tokens = 0;
    for (size_t i = 0; i < docs.size(); ++i) {
      double lr = config.lr *
                  std::max(1.0 - static_cast<double>(done) / static_cast<double>(total_steps),
                           1e-4);
      Eigen::VectorXd dv = doc_vecs.row(static_cast<Eigen::Index>(i)).transpose();
      epoch_loss += document_pass(m, docs[i], dv, &m.w_in, &m.w_out, lr, rng);
      doc_vecs.row(static_cast<Eigen::Index>(i)) = dv.transpose();
      tokens += static_cast<long long>(docs[i].size());
      ++done;
    }
    m.epoch_losses.push_back(tokens ? epoch_loss / static_cast<double>(tokens) : 0.0);
  }
  return m;
}

Eigen::VectorXd infer_vector(const Doc2VecModel& model,
                             const std::vector<std::string>& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  std::string joined;
  for (const auto& tok : tokens) {
    ids.push_back(model.vocab.lookup(tok));
    joined += tok;
    joined += '\x1f';
  }

  // Inference is a pure function of (model, tokens): the document vector
  // seed is derived from the token content.
  Rng rng(hash_combine(model.config.seed, fnv1a(joined)));
  const int d = model.config.dim;
  Eigen::VectorXd doc(d);
  for (int c = 0; c < d; ++c) doc(c) = rng.uniform(-0.5, 0.5) / d;

  for (int step = 0; step < model.config.infer_steps; ++step) {
    double lr = model.config.lr *
                std::max(1.0 - static_cast<double>(step) /
                                   static_cast<double>(model.config.infer_steps),
                         1e-4);
    document_pass(model, ids, doc, nullptr, nullptr, lr, rng);
  }
  if (model.config.unit_norm) {
    double n = doc.norm();
    if (n > 0) doc /= n;
  }
  return doc;
}

double pvdm_loss(const Eigen::VectorXd& doc, const Eigen::MatrixXd& w_in,
                 const Eigen::MatrixXd& w_out, const PvdmExample& ex) {
  Eigen::VectorXd hidden = doc;
  for (int c : ex.context) hidden += w_in.row(c).transpose();
  hidden /= 1.0 + static_cast<double>(ex.context.size());

  double loss = -std::log(std::max(sigmoid(w_out.row(ex.target).dot(hidden)), 1e-300));
  for (int n : ex.negatives) {
    loss += -std::log(std::max(sigmoid(-w_out.row(n).dot(hidden)), 1e-300));
  }
  return loss;
}

void pvdm_gradients(const Eigen::VectorXd& doc, const Eigen::MatrixXd& w_in,
                    const Eigen::MatrixXd& w_out, const PvdmExample& ex,
                    Eigen::VectorXd& grad_doc, Eigen::MatrixXd& grad_w_in,
                    Eigen::MatrixXd& grad_w_out) {
  const double denom = 1.0 + static_cast<double>(ex.context.size());
  Eigen::VectorXd hidden = doc;
  for (int c : ex.context) hidden += w_in.row(c).transpose();
  hidden /= denom;

  Eigen::VectorXd grad_hidden = Eigen::VectorXd::Zero(doc.size());
  {
    double g = sigmoid(w_out.row(ex.target).dot(hidden)) - 1.0;
    grad_hidden += g * w_out.row(ex.target).transpose();
    grad_w_out.row(ex.target) += g * hidden.transpose();
  }
  for (int n : ex.negatives) {
    double g = sigmoid(w_out.row(n).dot(hidden));
    grad_hidden += g * w_out.row(n).transpose();
    grad_w_out.row(n) += g * hidden.transpose();
  }

  grad_doc += grad_hidden / denom;
  for (int c : ex.context) grad_w_in.row(c) += grad_hidden.transpose() / denom;
}

void Doc2VecModel::save(std::ostream& out) const {
  using namespace binio;
  write_raw(out, "MVD2", 4);
  write_u32(out, 1);  // version
  write_u32(out, static_cast<std::uint32_t>(config.dim));
  write_u32(out, static_cast<std::uint32_t>(config.window));
  write_u32(out, static_cast<std::uint32_t>(config.negative));
  write_u32(out, static_cast<std::uint32_t>(config.epochs));
  write_f64(out, config.lr);
  write_u32(out, static_cast<std::uint32_t>(config.infer_steps));
  write_u32(out, config.unit_norm ? 1 : 0);
  write_u32(out, config.normalize_identifiers ? 1 : 0);
  write_u32(out, static_cast<std::uint32_t>(config.min_count));
  write_u64(out, config.seed);
  write_u32(out, static_cast<std::uint32_t>(vocab.size()));
  for (int i = 0; i < vocab.size(); ++i) {
    write_string(out, vocab.words[static_cast<size_t>(i)]);
    write_i64(out, vocab.counts[static_cast<size_t>(i)]);
  }
  write_matrix(out, w_in);
  write_matrix(out, w_out);
}

Doc2VecModel Doc2VecModel::load(std::istream& in) {
  using namespace binio;
  expect_magic(in, "MVD2");
  std::uint32_t version = read_u32(in);
  if (version != 1) throw std::runtime_error("unsupported doc2vec model version");
  Doc2VecModel m;
  m.config.dim = static_cast<int>(read_u32(in));
  m.config.window = static_cast<int>(read_u32(in));
  m.config.negative = static_cast<int>(read_u32(in));
  m.config.epochs = static_cast<int>(read_u32(in));
  m.config.lr = read_f64(in);
  m.config.infer_steps = static_cast<int>(read_u32(in));
  m.config.unit_norm = read_u32(in) != 0;
  m.config.normalize_identifiers = read_u32(in) != 0;
  m.config.min_count = static_cast<int>(read_u32(in));
  m.config.seed = read_u64(in);
  std::uint32_t v = read_u32(in);
  for (std::uint32_t i = 0; i < v; ++i) {
    std::string word = read_string(in);
    long long count = read_i64(in);
    if (i > 0) m.vocab.index[word] = static_cast<int>(i);
    m.vocab.words.push_back(word);
    m.vocab.counts.push_back(count);
  }
  m.w_in = read_matrix(in);
  m.w_out = read_matrix(in);
  m.neg_table = build_neg_table(m.vocab);
  return m;
}

void Doc2VecModel::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  save(out);
}

Doc2VecModel Doc2VecModel::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model: " + path);
  return load(in);
}

}  // namespace mvd::embedder
