#include <fstream>
#include <sstream>

#include "mvd/pipeline.hpp"

namespace mvd::pipeline {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad integer for " + key + ": '" + value + "'");
  }
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad number for " + key + ": '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::runtime_error("config: bad boolean for " + key + ": '" + value + "'");
}

}  // namespace

TrainConfig TrainConfig::parse(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));

    if (key == "node_dim") cfg.node_dim = static_cast<int>(parse_int(key, value));
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "dropout") cfg.dropout = parse_real(key, value);
    else if (key == "lr") cfg.lr = parse_real(key, value);
    else if (key == "weight_decay") cfg.weight_decay = parse_real(key, value);
    else if (key == "oversample_scale") cfg.oversample_scale = parse_real(key, value);
    else if (key == "epochs") cfg.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "phi") {
      auto op = fsgnn::compose_from_string(value);
      if (!op) throw std::runtime_error("config: unknown phi '" + value + "'");
      cfg.phi = *op;
    } else if (key == "bases") cfg.bases = static_cast<int>(parse_int(key, value));
    else if (key == "layers") cfg.layers = static_cast<int>(parse_int(key, value));
    else if (key == "eta") cfg.eta = parse_real(key, value);
    else if (key == "split") cfg.split = parse_real(key, value);
    else if (key == "api_list") cfg.api_list = value;
    else if (key == "loss_norm") {
      if (value == "graph") cfg.loss_norm = LossNorm::Graph;
      else if (value == "global") cfg.loss_norm = LossNorm::Global;
      else throw std::runtime_error("config: loss_norm must be graph or global");
    } else if (key == "mean_agg") cfg.mean_agg = parse_bool(key, value);
    else if (key == "interproc_forward") cfg.interproc_forward = parse_bool(key, value);
    else throw std::runtime_error("config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

std::string TrainConfig::to_document() const {
  std::ostringstream os;
  os << "node_dim = " << node_dim << '\n';
  os << "batch_size = " << batch_size << '\n';
  os << "dropout = " << dropout << '\n';
  os << "lr = " << lr << '\n';
  os << "weight_decay = " << weight_decay << '\n';
  os << "oversample_scale = " << oversample_scale << '\n';
  os << "epochs = " << epochs << '\n';
  os << "seed = " << seed << '\n';
  os << "phi = " << fsgnn::to_string(phi) << '\n';
  os << "bases = " << bases << '\n';
  os << "layers = " << layers << '\n';
  os << "eta = " << eta << '\n';
  os << "split = " << split << '\n';
  if (!api_list.empty()) os << "api_list = " << api_list << '\n';
  os << "loss_norm = " << (loss_norm == LossNorm::Graph ? "graph" : "global") << '\n';
  os << "mean_agg = " << (mean_agg ? "true" : "false") << '\n';
  os << "interproc_forward = " << (interproc_forward ? "true" : "false") << '\n';
  return os.str();
}

void TrainConfig::validate() const {
  if (node_dim <= 0) throw std::runtime_error("config: node_dim must be positive");
  if (batch_size <= 0) throw std::runtime_error("config: batch_size must be positive");
  if (dropout < 0 || dropout >= 1) throw std::runtime_error("config: dropout must be in [0,1)");
  if (lr <= 0) throw std::runtime_error("config: lr must be positive");
  if (weight_decay < 0) throw std::runtime_error("config: weight_decay must be >= 0");
  if (oversample_scale < 0) throw std::runtime_error("config: oversample_scale must be >= 0");
  if (epochs <= 0) throw std::runtime_error("config: epochs must be positive");
  if (bases <= 0 || bases > fsgnn::kRelations) {
    throw std::runtime_error("config: bases must be in [1, " +
                             std::to_string(fsgnn::kRelations) + "]");
  }
  if (layers <= 0) throw std::runtime_error("config: layers must be positive");
  if (eta <= 0 || eta >= 1) throw std::runtime_error("config: eta must be in (0,1)");
  if (split <= 0 || split > 1) throw std::runtime_error("config: split must be in (0,1]");
}

Metrics evaluate(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw std::runtime_error("evaluate: prediction/label vectors must align and be non-empty");
  }
  Metrics m;
  for (size_t i = 0; i < predictions.size(); ++i) {
    bool pred = predictions[i] != 0;
    bool truth = labels[i] != 0;
    if (pred && truth) m.tp++;
    else if (pred && !truth) m.fp++;
    else if (!pred && !truth) m.tn++;
    else m.fn++;
  }
  double total = static_cast<double>(m.tp + m.fp + m.tn + m.fn);
  m.accuracy = static_cast<double>(m.tp + m.tn) / total;
  m.precision = (m.tp + m.fp) ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
  m.recall = (m.tp + m.fn) ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
  m.f1 = (m.precision + m.recall > 0)
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

}  // namespace mvd::pipeline
