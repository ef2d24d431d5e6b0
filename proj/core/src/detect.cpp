#include <algorithm>
#include <map>

#include "mvd/pipeline.hpp"

namespace mvd::pipeline {
namespace {

// Statement-level aggregation: a statement's score is the maximum class-1
// probability over every slice that contains it.
void score_entries(const TrainedModel& model, const std::vector<DatasetEntry>& entries,
                   std::map<std::pair<std::string, NodeId>, StatementScore>& scores,
                   std::map<std::string, Eigen::VectorXd>& cache) {
  for (const auto& entry : entries) {
    fsgnn::LearnGraph g = to_learn_graph(entry, model.doc2vec, &cache);
    Eigen::MatrixXd probs = fsgnn::model_forward(g, model.gnn);

    NodeId origin = entry.graph.origin;
    int origin_line = 0;
    if (const StatementIR* o = entry.graph.node(origin)) origin_line = o->line;

    for (size_t i = 0; i < entry.graph.nodes.size(); ++i) {
      const StatementIR& s = entry.graph.nodes[i];
      double p = probs(static_cast<Eigen::Index>(i), 1);
      auto key = std::make_pair(s.file, s.id);
      auto it = scores.find(key);
      if (it == scores.end() || p > it->second.probability) {
        StatementScore sc;
        sc.file = s.file;
        sc.node = s.id;
        sc.line = s.line;
        sc.function = s.function;
        sc.text = s.text;
        sc.probability = p;
        sc.slice_origin = origin;
        sc.origin_line = origin_line;
        sc.label = s.label;
        if (it == scores.end()) scores.emplace(key, std::move(sc));
        else it->second = std::move(sc);
      }
    }
  }
}

DetectReport finish_report(std::map<std::pair<std::string, NodeId>, StatementScore> scores,
                           std::vector<std::pair<std::string, std::string>> errors) {
  DetectReport report;
  report.file_errors = std::move(errors);
  report.statements.reserve(scores.size());
  for (auto& [key, sc] : scores) report.statements.push_back(std::move(sc));
  std::sort(report.statements.begin(), report.statements.end(),
            [](const StatementScore& a, const StatementScore& b) {
              return std::tie(a.file, a.line, a.node) < std::tie(b.file, b.line, b.node);
            });
  return report;
}

}  // namespace

DetectReport detect(const TrainedModel& model, const std::vector<std::string>& files,
                    const AnalyzeOptions& opts) {
  std::map<std::pair<std::string, NodeId>, StatementScore> scores;
  std::map<std::string, Eigen::VectorXd> cache;
  std::vector<std::pair<std::string, std::string>> errors;

  for (const auto& path : files) {
    try {
      AnalyzedFile analyzed = analyze_path(path, opts);
      std::vector<DatasetEntry> entries;
      entries.reserve(analyzed.slices.size());
      for (const auto& s : analyzed.slices) entries.push_back(make_entry(s));
      score_entries(model, entries, scores, cache);
    } catch (const std::exception& e) {
      errors.emplace_back(path, e.what());
    }
  }
  return finish_report(std::move(scores), std::move(errors));
}

DetectReport score_dataset(const TrainedModel& model, const Dataset& data) {
  std::map<std::pair<std::string, NodeId>, StatementScore> scores;
  std::map<std::string, Eigen::VectorXd> cache;
  score_entries(model, data.entries, scores, cache);
  return finish_report(std::move(scores), {});
}

EvalResult evaluate_dataset(const TrainedModel& model, const Dataset& data,
                            double threshold) {
  DetectReport report = score_dataset(model, data);

  std::vector<int> predictions, labels;
  // A function counts as detected when one of its truly vulnerable
  // statements is flagged.
  std::map<std::pair<std::string, std::string>, std::pair<bool, bool>> functions;

  for (const auto& s : report.statements) {
    if (s.label == Label::Unlabeled) continue;
    bool truth = s.label == Label::Vulnerable;
    bool flagged = s.probability > threshold;
    predictions.push_back(flagged ? 1 : 0);
    labels.push_back(truth ? 1 : 0);
    if (truth) {
      auto& fn = functions[{s.file, s.function}];
      fn.first = true;
      fn.second = fn.second || flagged;
    }
  }
  if (predictions.empty()) {
    throw std::runtime_error("evaluate: dataset has no labeled statements");
  }

  EvalResult r;
  r.statement = evaluate(predictions, labels);
  for (const auto& [key, v] : functions) {
    if (!v.first) continue;
    r.vulnerable_functions++;
    if (v.second) r.detected_functions++;
  }
  r.function_recall = r.vulnerable_functions
                          ? static_cast<double>(r.detected_functions) /
                                static_cast<double>(r.vulnerable_functions)
                          : 0.0;
  return r;
}

}  // namespace mvd::pipeline
