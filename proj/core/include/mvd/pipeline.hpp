#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mvd/depgraph.hpp"
#include "mvd/embedder.hpp"
#include "mvd/frontend.hpp"
#include "mvd/fsgnn.hpp"
#include "mvd/resampler.hpp"
#include "mvd/slicer.hpp"

namespace mvd::pipeline {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class LossNorm { Graph, Global };

/// Every training hyperparameter in one place; the file format is a strict
/// key=value document (unknown keys are errors, `#` starts a comment).
struct TrainConfig {
  int node_dim = 100;
  int batch_size = 32;
  double dropout = 0.1;
  double lr = 0.001;
  double weight_decay = 0.5;
  double oversample_scale = 1.0;
  int epochs = 200;
  std::uint64_t seed = 1;
  fsgnn::Compose phi = fsgnn::Compose::Ccorr;
  int bases = 4;
  int layers = 2;  // message-passing layers before resampling; one more runs after
  double eta = 0.5;
  double split = 0.8;
  std::string api_list;  // path; empty selects the built-in list
  LossNorm loss_norm = LossNorm::Graph;
  bool mean_agg = false;
  bool interproc_forward = true;

  static TrainConfig from_file(const std::string& path);
  static TrainConfig parse(const std::string& text);
  std::string to_document() const;
  void validate() const;
};

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct Metrics {
  long long tp = 0, fp = 0, tn = 0, fn = 0;
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
};

/// Confusion counts and the four derived scores. Precision (and F1)
/// defaults to 0 when no positives are predicted.
Metrics evaluate(const std::vector<int>& predictions, const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct DatasetEntry {
  slicer::SliceGraph graph;
  std::vector<std::vector<std::string>> node_tokens;  // parallel to graph.nodes
};

struct Dataset {
  std::vector<DatasetEntry> entries;
};

DatasetEntry make_entry(const slicer::SliceGraph& graph);

/// JSON-lines serialization, one slice graph per line:
///   {"origin":id, "nodes":[{"id","line","file","text","label","tokens"}],
///    "edges":[{"src","dst","kind","var"?}]}
/// Unknown fields are rejected on load. Labels: 1 vulnerable,
/// 0 non-vulnerable, -1 unlabeled.
void write_jsonl(const Dataset& data, std::ostream& out);
void write_jsonl_file(const Dataset& data, const std::string& path);
Dataset read_jsonl(std::istream& in);
Dataset read_jsonl_file(const std::string& path);

// ---------------------------------------------------------------------------
// Per-file analysis
// ---------------------------------------------------------------------------

struct AnalyzeOptions {
  slicer::PoiConfig poi = slicer::PoiConfig::defaults();
  slicer::SliceOptions slice;
  depgraph::IpdgOptions ipdg;
  frontend::LabelMode label_mode = frontend::LabelMode::Detection;
};

struct AnalyzedFile {
  frontend::LoweredProgram program;
  depgraph::Ipdg ipdg;
  std::vector<slicer::SliceGraph> slices;
  std::vector<std::string> warnings;
};

AnalyzedFile analyze_source(const std::string& source, const std::string& filename,
                            const AnalyzeOptions& opts);
AnalyzedFile analyze_path(const std::string& path, const AnalyzeOptions& opts);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct TrainedModel {
  TrainConfig config;
  embedder::Doc2VecModel doc2vec;
  fsgnn::ModelParams gnn;
  resampler::EdgeGenerator edge_gen;

  void save_file(const std::string& path) const;
  static TrainedModel load_file(const std::string& path);
};

struct TrainResult {
  TrainedModel model;
  std::vector<double> epoch_losses;
  std::vector<std::string> train_files;
  std::vector<std::string> holdout_files;
};

/// Eq.-style cross-entropy over a set of graphs: per-graph probability
/// rows and labels (-1 entries are skipped). Graph mode normalizes each
/// graph by its labeled-node count; Global divides the plain sum by the
/// total labeled count.
double loss(const std::vector<Eigen::MatrixXd>& probabilities,
            const std::vector<std::vector<int>>& labels, LossNorm norm);

/// Batch-wise training of the FS-GNN (plus Doc2Vec and the edge generator)
/// over the dataset. Splits by file according to config.split; the holdout
/// portion is returned untouched for evaluation.
TrainResult train(const Dataset& data, const TrainConfig& config,
                  std::ostream* log = nullptr);

// ---------------------------------------------------------------------------
// Detection and evaluation
// ---------------------------------------------------------------------------

struct StatementScore {
  std::string file;
  NodeId node = -1;
  int line = 0;
  std::string function;
  std::string text;
  double probability = 0;  // max class-1 probability over covering slices
  NodeId slice_origin = -1;
  int origin_line = 0;
  Label label = Label::Unlabeled;
};

struct DetectReport {
  std::vector<StatementScore> statements;  // every sliced statement, sorted
  std::vector<std::pair<std::string, std::string>> file_errors;

  std::vector<StatementScore> findings(double threshold = 0.5) const;
};

/// Runs the full detection phase (no resampling) over source files.
/// Unparsable files are reported in file_errors; the rest proceed.
DetectReport detect(const TrainedModel& model, const std::vector<std::string>& files,
                    const AnalyzeOptions& opts);

/// Scores the statements of prepared slice graphs (used by eval and by the
/// acceptance harness).
DetectReport score_dataset(const TrainedModel& model, const Dataset& data);

struct EvalResult {
  Metrics statement;            // statement-level, over labeled statements
  int vulnerable_functions = 0;
  int detected_functions = 0;   // a true vulnerable statement was flagged
  double function_recall = 0;
};

EvalResult evaluate_dataset(const TrainedModel& model, const Dataset& data,
                            double threshold = 0.5);

/// Converts a dataset entry to the tensor form consumed by the GNN,
/// inferring node vectors with the given Doc2Vec model. `cache` memoizes
/// inference by token sequence.
fsgnn::LearnGraph to_learn_graph(const DatasetEntry& entry,
                                 const embedder::Doc2VecModel& doc2vec,
                                 std::map<std::string, Eigen::VectorXd>* cache = nullptr);

}  // namespace mvd::pipeline
