// mvd: statement-level memory-vulnerability detector.
//
//   mvd analyze <files> [--labeled] [--emit-dot] [--out graphs.jsonl]
//   mvd gen-corpus --out DIR --n N --seed S
//   mvd train --data graphs.jsonl [--config cfg.toml] --out model.bin
//   mvd detect --model model.bin --files <files> [--json]
//   mvd eval --model model.bin --data graphs.jsonl
//
// Exit codes: 0 clean / no findings, 1 findings reported, 2 usage or input
// error.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "mvd/corpus.hpp"
#include "mvd/depgraph.hpp"
#include "mvd/pipeline.hpp"

namespace {

using namespace mvd;

pipeline::AnalyzeOptions make_options(const std::string& api_list, bool labeled,
                                      bool no_pointer_poi, bool no_interproc_forward) {
  pipeline::AnalyzeOptions opts;
  if (!api_list.empty()) {
    opts.poi = slicer::PoiConfig::from_file(api_list, !no_pointer_poi);
  } else {
    opts.poi = slicer::PoiConfig::defaults();
    opts.poi.enable_pointer_poi = !no_pointer_poi;
  }
  opts.slice.interproc_forward = !no_interproc_forward;
  opts.label_mode = labeled ? frontend::LabelMode::Training : frontend::LabelMode::Detection;
  return opts;
}

int cmd_analyze(const std::vector<std::string>& files, const std::string& out_path,
                bool emit_dot, const pipeline::AnalyzeOptions& opts) {
  pipeline::Dataset data;
  bool any_error = false;
  for (const auto& path : files) {
    try {
      pipeline::AnalyzedFile analyzed = pipeline::analyze_path(path, opts);
      for (const auto& w : analyzed.warnings) std::cerr << path << ": warning: " << w << '\n';
      for (const auto& slice : analyzed.slices) {
        data.entries.push_back(pipeline::make_entry(slice));
      }
      if (emit_dot) {
        std::ofstream ipdg_dot(path + ".ipdg.dot");
        ipdg_dot << depgraph::to_dot(analyzed.ipdg);
        for (const auto& fn : analyzed.program.functions) {
          std::ofstream cfg_dot(path + "." + fn.name + ".cfg.dot");
          cfg_dot << depgraph::to_dot(depgraph::build_cfg(fn), fn);
        }
      }
    } catch (const std::exception& e) {
      std::cerr << path << ": error: " << e.what() << '\n';
      any_error = true;
    }
  }
  if (!out_path.empty()) {
    pipeline::write_jsonl_file(data, out_path);
    std::cerr << "wrote " << data.entries.size() << " slice graphs to " << out_path << '\n';
  } else {
    pipeline::write_jsonl(data, std::cout);
  }
  return any_error ? 2 : 0;
}

int cmd_train(const std::string& data_path, const std::string& config_path,
              const std::string& out_path, const std::string& holdout_out) {
  pipeline::TrainConfig config;
  if (!config_path.empty()) config = pipeline::TrainConfig::from_file(config_path);
  pipeline::Dataset data = pipeline::read_jsonl_file(data_path);
  pipeline::TrainResult result = pipeline::train(data, config, &std::cerr);
  result.model.save_file(out_path);
  std::cerr << "model written to " << out_path << " (" << result.epoch_losses.size()
            << " epochs, final loss "
            << (result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back()) << ")\n";
  if (!holdout_out.empty()) {
    std::ofstream out(holdout_out);
    for (const auto& f : result.holdout_files) out << f << '\n';
    std::cerr << result.holdout_files.size() << " holdout files listed in " << holdout_out
              << '\n';
  }
  return 0;
}

int cmd_detect(const std::string& model_path, const std::vector<std::string>& files,
               bool as_json, const pipeline::AnalyzeOptions& opts) {
  pipeline::TrainedModel model = pipeline::TrainedModel::load_file(model_path);
  pipeline::DetectReport report = pipeline::detect(model, files, opts);
  for (const auto& [file, error] : report.file_errors) {
    std::cerr << file << ": error: " << error << '\n';
  }
  auto findings = report.findings();
  if (as_json) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : findings) {
      nlohmann::json obj;
      obj["file"] = f.file;
      obj["line"] = f.line;
      obj["function"] = f.function;
      obj["text"] = f.text;
      obj["probability"] = f.probability;
      obj["slice_origin_line"] = f.origin_line;
      arr.push_back(std::move(obj));
    }
    std::cout << arr.dump(2) << '\n';
  } else {
    for (const auto& f : findings) {
      std::cout << f.file << ':' << f.line << ": [p=" << f.probability << "] " << f.text
                << "  (slice from line " << f.origin_line << ")\n";
    }
    std::cerr << findings.size() << " finding(s) in " << report.statements.size()
              << " scored statement(s)\n";
  }
  if (!report.file_errors.empty() && report.statements.empty()) return 2;
  return findings.empty() ? 0 : 1;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& files_from) {
  pipeline::TrainedModel model = pipeline::TrainedModel::load_file(model_path);
  pipeline::Dataset data = pipeline::read_jsonl_file(data_path);
  if (!files_from.empty()) {
    std::ifstream in(files_from);
    if (!in) throw std::runtime_error("cannot open file list: " + files_from);
    std::set<std::string> keep;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) keep.insert(line);
    }
    pipeline::Dataset filtered;
    for (auto& e : data.entries) {
      if (keep.count(e.graph.file)) filtered.entries.push_back(std::move(e));
    }
    data = std::move(filtered);
  }
  pipeline::EvalResult r = pipeline::evaluate_dataset(model, data);
  std::cout << "statements: TP=" << r.statement.tp << " FP=" << r.statement.fp
            << " TN=" << r.statement.tn << " FN=" << r.statement.fn << '\n';
  std::cout << "accuracy=" << r.statement.accuracy << " precision=" << r.statement.precision
            << " recall=" << r.statement.recall << " f1=" << r.statement.f1 << '\n';
  std::cout << "functions: " << r.detected_functions << '/' << r.vulnerable_functions
            << " vulnerable functions detected (recall=" << r.function_recall << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"statement-level memory-vulnerability detection"};
  app.require_subcommand(1);

  std::string api_list;
  bool no_pointer_poi = false;
  bool no_interproc_forward = false;
  app.add_option("--api-list", api_list, "sensitive API list file (one name per line)");
  app.add_flag("--no-pointer-poi", no_pointer_poi, "only API calls become slice origins");
  app.add_flag("--no-interproc-forward", no_interproc_forward,
               "forward slicing stays within the origin's function");

  auto* analyze = app.add_subcommand("analyze", "slice source files into graph samples");
  std::vector<std::string> analyze_files;
  std::string analyze_out;
  bool emit_dot = false, labeled = false;
  analyze->add_option("files", analyze_files, "C-subset source files")->required();
  analyze->add_option("--out", analyze_out, "output JSONL path (default: stdout)");
  analyze->add_flag("--emit-dot", emit_dot, "write CFG and dependence-graph DOT files");
  analyze->add_flag("--labeled", labeled,
                    "training mode: unmarked statements become non-vulnerable");

  auto* gen = app.add_subcommand("gen-corpus", "generate the synthetic labeled corpus");
  std::string gen_out;
  int gen_n = 20;
  std::uint64_t gen_seed = 1;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--n", gen_n, "cases per vulnerability family");
  gen->add_option("--seed", gen_seed, "corpus seed");

  auto* train = app.add_subcommand("train", "train detection models on sliced graphs");
  std::string train_data, train_config, train_out, holdout_out;
  train->add_option("--data", train_data, "graphs.jsonl from analyze --labeled")->required();
  train->add_option("--config", train_config, "key=value training configuration");
  train->add_option("--out", train_out, "model bundle output path")->required();
  train->add_option("--holdout-out", holdout_out, "write held-out file names here");

  auto* detect = app.add_subcommand("detect", "detect vulnerable statements in sources");
  std::string detect_model;
  std::vector<std::string> detect_files;
  bool detect_json = false;
  detect->add_option("--model", detect_model, "trained model bundle")->required();
  detect->add_option("--files", detect_files, "source files to scan")->required();
  detect->add_flag("--json", detect_json, "machine-readable findings");

  auto* eval = app.add_subcommand("eval", "score labeled graphs with a trained model");
  std::string eval_model, eval_data, eval_files_from;
  eval->add_option("--model", eval_model, "trained model bundle")->required();
  eval->add_option("--data", eval_data, "labeled graphs.jsonl")->required();
  eval->add_option("--files-from", eval_files_from, "restrict to files listed here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    pipeline::AnalyzeOptions opts =
        make_options(api_list, labeled, no_pointer_poi, no_interproc_forward);
    if (*analyze) return cmd_analyze(analyze_files, analyze_out, emit_dot, opts);
    if (*gen) {
      auto manifest = corpus::gen_corpus(gen_out, gen_n, gen_seed);
      std::cerr << "wrote " << manifest.size() << " files to " << gen_out << '\n';
      return 0;
    }
    if (*train) return cmd_train(train_data, train_config, train_out, holdout_out);
    if (*detect) return cmd_detect(detect_model, detect_files, detect_json, opts);
    if (*eval) return cmd_eval(eval_model, eval_data, eval_files_from);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
