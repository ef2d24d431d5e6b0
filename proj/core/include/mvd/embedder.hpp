#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mvd/ir.hpp"

namespace mvd::embedder {

/// Token vocabulary. Index 0 is reserved for out-of-vocabulary tokens.
struct Vocab {
  std::vector<std::string> words;   // index -> token; words[0] == "<oov>"
  std::map<std::string, int> index;
  std::vector<long long> counts;

  int size() const { return static_cast<int>(words.size()); }
  int lookup(const std::string& w) const {
    auto it = index.find(w);
    return it == index.end() ? 0 : it->second;
  }
};

struct Doc2VecConfig {
  int dim = 100;
  int window = 4;
  int negative = 5;
  int epochs = 20;
  double lr = 0.025;
  int infer_steps = 50;
  bool unit_norm = false;
  bool normalize_identifiers = false;
  int min_count = 1;
  std::uint64_t seed = 1;
};

/// PV-DM paragraph vectors with negative sampling. The document vector and
/// the mean of the context word vectors predict the center word.
struct Doc2VecModel {
  Doc2VecConfig config;
  Vocab vocab;
  Eigen::MatrixXd w_in;   // |V| x d, context word vectors
  Eigen::MatrixXd w_out;  // |V| x d, output vectors
  std::vector<double> neg_table;  // unigram^0.75 cumulative distribution
  std::vector<double> epoch_losses;  // training diagnostics, not serialized

  void save(std::ostream& out) const;
  static Doc2VecModel load(std::istream& in);
  void save_file(const std::string& path) const;
  static Doc2VecModel load_file(const std::string& path);
};

/// Lexical tokens of a statement's text; empty statements become a
/// single "<empty>" placeholder token.
std::vector<std::string> statement_tokens(const StatementIR& stmt);
std::vector<std::string> statement_tokens(const std::string& text);

/// Per-statement identifier normalization (id0, id1, ... by first use).
std::vector<std::string> normalize_identifiers(const std::vector<std::string>& tokens);

Doc2VecModel train_doc2vec(const std::vector<std::vector<std::string>>& corpus,
                           const Doc2VecConfig& config);

Eigen::VectorXd infer_vector(const Doc2VecModel& model,
                             const std::vector<std::string>& tokens);

// One PV-DM training example with fixed negatives, exposed so tests can
// check the analytic gradient against finite differences of pvdm_loss.
struct PvdmExample {
  std::vector<int> context;  // word indices contributing to the hidden mean
  int target = 0;
  std::vector<int> negatives;
};

double pvdm_loss(const Eigen::VectorXd& doc, const Eigen::MatrixXd& w_in,
                 const Eigen::MatrixXd& w_out, const PvdmExample& ex);

/// Accumulates exact gradients of pvdm_loss into the given buffers.
void pvdm_gradients(const Eigen::VectorXd& doc, const Eigen::MatrixXd& w_in,
                    const Eigen::MatrixXd& w_out, const PvdmExample& ex,
                    Eigen::VectorXd& grad_doc, Eigen::MatrixXd& grad_w_in,
                    Eigen::MatrixXd& grad_w_out);

}  // namespace mvd::embedder
