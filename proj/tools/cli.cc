#include "segtrm/cli.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "segtrm/corpus.h"
#include "segtrm/pipeline.h"
#include "segtrm/run_config.h"

namespace segtrm {
namespace {

namespace fs = std::filesystem;

constexpr char kSweepHeader[] = "value,rouge1,rouge2,rougeL";

std::map<std::string, std::string> ParseOverrides(const std::vector<std::string>& sets) {
  std::map<std::string, std::string> out;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("--set expects key=value, got '" + s + "'");
    }
    out[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return out;
}

std::vector<double> ParseRatios(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      out.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw ConfigError("--split: not a number: '" + part + "'");
    }
  }
  if (out.size() != 3) throw ConfigError("--split expects three comma-separated ratios");
  return out;
}

void RequireFile(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw std::runtime_error(what + " not found: " + path.string());
}

struct BuildCorpusArgs {
  std::string input, output, style = "weibo", tokenize, split = "0.8,0.1,0.1";
  std::optional<std::size_t> min_chars;
  std::uint64_t seed = 0;
};

int BuildCorpus(const BuildCorpusArgs& a, std::ostream& out, std::ostream& err) {
  HashtagStyle style;
  try {
    style = ParseHashtagStyle(a.style);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--style: ") + e.what());
  }
  TokenMode mode = style == HashtagStyle::kWeibo ? TokenMode::kChar : TokenMode::kWord;
  if (!a.tokenize.empty()) {
    try {
      mode = ParseTokenMode(a.tokenize);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("--tokenize: ") + e.what());
    }
  }
  const std::vector<double> ratios = ParseRatios(a.split);
  const std::size_t min_chars = a.min_chars.value_or(DefaultMinBodyChars(style));
  RequireFile(a.input, "input");

  IngestReport ingest = IngestRawPosts(a.input, style);
  const std::size_t raw = ingest.records.size() + ingest.diagnostics.size();
  std::vector<PostRecord> kept = FilterRecords(ingest.records, min_chars);
  if (kept.empty()) {
    throw std::runtime_error("no usable posts in " + a.input + " (" + std::to_string(raw) +
                             " read)");
  }
  CorpusSplit split = SplitCorpus(kept, ratios[0], ratios[1], ratios[2], a.seed);

  const fs::path dir = a.output;
  fs::create_directories(dir);
  WriteRecords(dir / "train.jsonl", split.train);
  WriteRecords(dir / "dev.jsonl", split.dev);
  WriteRecords(dir / "test.jsonl", split.test);
  nlohmann::ordered_json stats;
  stats["all"] = nlohmann::json::parse(StatsToJson(ComputeCorpusStats(kept, mode)));
  for (const auto& [name, part] : {std::pair{"train", &split.train}, std::pair{"dev", &split.dev},
                                   std::pair{"test", &split.test}}) {
    if (!part->empty()) stats[name] = nlohmann::json::parse(StatsToJson(ComputeCorpusStats(*part, mode)));
  }
  std::ofstream(dir / "stats.json") << stats.dump(2) << "\n";
  const std::string table = StatsToTable(ComputeCorpusStats(kept, mode));
  std::ofstream(dir / "stats.txt") << table;
  {
    std::ofstream diag(dir / "diagnostics.txt");
    for (const auto& d : ingest.diagnostics) diag << d << "\n";
  }
  for (const auto& d : ingest.diagnostics) err << "skipped " << d << "\n";
  out << "read " << raw << " posts, kept " << kept.size() << " (train " << split.train.size()
      << ", dev " << split.dev.size() << ", test " << split.test.size() << ")\n"
      << table;
  return kExitOk;
}

struct TrainArgs {
  std::string config, data, out;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool resume = false;
  std::size_t stop_after = 0;
};

RunConfig ConfigFrom(const std::string& file, std::vector<std::string> sets,
                     std::optional<std::uint64_t> seed) {
  auto overrides = ParseOverrides(sets);
  if (seed) overrides["train.seed"] = std::to_string(*seed);
  return LoadRunConfig(file, overrides);
}

int Train(const TrainArgs& a, std::ostream& out) {
  const RunConfig cfg = ConfigFrom(a.config, a.sets, a.seed);
  TrainRunOptions opts;
  opts.data_dir = a.data;
  opts.out_dir = a.out;
  opts.resume = a.resume;
  opts.stop_after = a.stop_after;
  opts.log = &out;
  const TrainRunResult result = TrainRun(cfg, opts);
  out << "finished at step " << result.step << ", last loss " << result.last_loss << "\n";
  for (const auto& b : result.best) {
    out << "best step " << b.step << " dev_rouge1 " << b.dev_rouge1 << " " << b.path.string()
        << "\n";
  }
  return kExitOk;
}

struct GenerateArgs {
  std::string checkpoint, input, output;
  std::optional<std::size_t> beam, topk, max_len;
  std::string length_norm;
  std::size_t threads = 1;
};

int Generate(const GenerateArgs& a, std::ostream& out) {
  if (a.threads == 0) throw ConfigError("--threads must be at least 1");
  RequireFile(a.checkpoint, "checkpoint");
  RequireFile(a.input, "input");
  LoadedModel loaded = LoadModel(a.checkpoint);
  RunConfig& cfg = loaded.config;
  if (a.beam) cfg.Set("eval.beam", std::to_string(*a.beam));
  if (a.topk) cfg.Set("eval.topk", std::to_string(*a.topk));
  if (!a.length_norm.empty()) cfg.Set("eval.length_norm", a.length_norm);
  if (a.max_len) cfg.beam.max_len = *a.max_len;
  cfg.Validate();

  const auto records = ReadRecords(a.input);
  const auto predictions = GenerateAll(*loaded.model, loaded.vocab, cfg, records, a.threads);
  std::ofstream file;
  if (!a.output.empty()) {
    file.open(a.output, std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write " + a.output);
  }
  std::ostream& sink = a.output.empty() ? out : file;
  for (const auto& p : predictions) sink << PredictionToJson(p) << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string pred, gold, json_out, tokenize = "word", ks = "1,5";
};

std::vector<std::size_t> ParseSizes(const std::string& text, const std::string& flag) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(part, &used);
      if (used != part.size() || v <= 0) throw std::invalid_argument(part);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError(flag + ": expected positive integers, got '" + part + "'");
    }
  }
  if (out.empty()) throw ConfigError(flag + ": empty list");
  return out;
}

int EvaluateCmd(const EvaluateArgs& a, std::ostream& out) {
  TokenMode mode;
  try {
    mode = ParseTokenMode(a.tokenize);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("--tokenize: ") + e.what());
  }
  const auto ks = ParseSizes(a.ks, "--k");
  RequireFile(a.pred, "predictions");
  RequireFile(a.gold, "gold file");
  const EvalReport report = EvaluatePredictions(ReadPredictions(a.pred), ReadRecords(a.gold), mode, ks);
  if (!a.json_out.empty()) std::ofstream(a.json_out, std::ios::trunc) << ReportToJson(report) << "\n";
  out << ReportToTable(report);
  return kExitOk;
}

struct SweepArgs {
  std::string param, values, config, data, out, split = "dev";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

std::set<std::string> CompletedSweepValues(const fs::path& csv) {
  std::set<std::string> done;
  std::ifstream in(csv);
  std::string line;
  if (!std::getline(in, line)) return done;
  if (line != kSweepHeader) throw std::runtime_error(csv.string() + " has an unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    // Only rows with all four fields count; a torn final line is redone.
    if (std::count(line.begin(), line.end(), ',') == 3) done.insert(line.substr(0, line.find(',')));
  }
  return done;
}

int Sweep(const SweepArgs& a, std::ostream& out) {
  if (a.param != "ssm.k" && a.param != "seg.len") {
    throw ConfigError("--param must be ssm.k or seg.len, got '" + a.param + "'");
  }
  std::vector<std::string> values;
  for (std::size_t v : ParseSizes(a.values, "--values")) values.push_back(std::to_string(v));
  const RunConfig base = ConfigFrom(a.config, a.sets, a.seed);
  for (const auto& v : values) {
    RunConfig probe = base;
    probe.Set(a.param, v);
    probe.Validate();
  }
  const fs::path eval_path = fs::path(a.data) / (a.split + ".jsonl");
  RequireFile(fs::path(a.data) / "train.jsonl", "training data");
  RequireFile(eval_path, "evaluation split");

  const fs::path dir = a.out;
  fs::create_directories(dir);
  const fs::path csv = dir / "sweep.csv";
  std::set<std::string> done = CompletedSweepValues(csv);
  {
    // Rewrite without a possibly torn last line.
    std::vector<std::string> rows;
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (std::count(line.begin(), line.end(), ',') == 3) rows.push_back(line);
    }
    in.close();
    std::ofstream rewrite(csv, std::ios::trunc);
    rewrite << kSweepHeader << "\n";
    for (const auto& r : rows) rewrite << r << "\n";
  }
  const auto eval_records = ReadRecords(eval_path);
  for (const auto& v : values) {
    if (done.count(v)) {
      out << a.param << "=" << v << " already done\n";
      continue;
    }
    RunConfig cfg = base;
    cfg.Set(a.param, v);
    TrainRunOptions opts;
    opts.data_dir = a.data;
    opts.out_dir = dir / (a.param + "=" + v);
    opts.resume = fs::exists(opts.out_dir / "ckpt_last.bin");
    TrainRun(cfg, opts);
    LoadedModel loaded = LoadModel(opts.out_dir / "ckpt_last.bin");
    const auto preds = GenerateAll(*loaded.model, loaded.vocab, cfg, eval_records, 1);
    RougeScores mean;
    for (std::size_t i = 0; i < eval_records.size(); ++i) {
      const RougeScores r = SequenceRouge(preds[i].hashtags, eval_records[i].hashtags, cfg.token_mode);
      mean.rouge1 += r.rouge1 / eval_records.size();
      mean.rouge2 += r.rouge2 / eval_records.size();
      mean.rougeL += r.rougeL / eval_records.size();
    }
    std::ofstream row(csv, std::ios::app);
    row << v << std::fixed << std::setprecision(4) << "," << mean.rouge1 << "," << mean.rouge2
        << "," << mean.rougeL << "\n";
    out << a.param << "=" << v << " rouge1 " << mean.rouge1 << "\n";
  }
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Segment-selection hashtag generation"};
  app.require_subcommand(1);

  BuildCorpusArgs bc;
  auto* build = app.add_subcommand("build-corpus", "Extract, filter and split raw posts");
  build->add_option("--input", bc.input, "Raw posts, one JSON object per line")->required();
  build->add_option("--output", bc.output, "Output directory")->required();
  build->add_option("--style", bc.style, "weibo or twitter");
  build->add_option("--min-chars", bc.min_chars, "Minimum body length in code points");
  build->add_option("--tokenize", bc.tokenize, "word or char, for statistics");
  build->add_option("--split", bc.split, "train,dev,test ratios");
  build->add_option("--seed", bc.seed);

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", tr.config, "key = value config file");
  train->add_option("--data", tr.data, "Directory with train.jsonl and dev.jsonl")->required();
  train->add_option("--out", tr.out, "Output directory")->required();
  train->add_option("--set", tr.sets, "Override a config key: key=value");
  train->add_option("--seed", tr.seed);
  train->add_flag("--resume", tr.resume, "Continue from <out>/ckpt_last.bin");
  train->add_option("--stop-after", tr.stop_after, "Stop after this many steps");

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Generate hashtags");
  generate->add_option("--checkpoint", gen.checkpoint)->required();
  generate->add_option("--input", gen.input, "Posts, one JSON object per line")->required();
  generate->add_option("--output", gen.output, "Output file (default stdout)");
  generate->add_option("--beam", gen.beam);
  generate->add_option("--topk", gen.topk);
  generate->add_option("--max-len", gen.max_len);
  generate->add_option("--length-norm", gen.length_norm, "mean or off");
  generate->add_option("--threads", gen.threads);

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against gold hashtags");
  evaluate->add_option("--pred", ev.pred)->required();
  evaluate->add_option("--gold", ev.gold)->required();
  evaluate->add_option("--json", ev.json_out, "Write the report as JSON");
  evaluate->add_option("--tokenize", ev.tokenize, "word or char");
  evaluate->add_option("--k", ev.ks, "Comma-separated F1@k cutoffs");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Train and score one model per value");
  sweep->add_option("--param", sw.param, "ssm.k or seg.len")->required();
  sweep->add_option("--values", sw.values, "Comma-separated values")->required();
  sweep->add_option("--config", sw.config);
  sweep->add_option("--data", sw.data)->required();
  sweep->add_option("--out", sw.out)->required();
  sweep->add_option("--split", sw.split, "Split scored per value (default dev)");
  sweep->add_option("--set", sw.sets);
  sweep->add_option("--seed", sw.seed);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (build->parsed()) return BuildCorpus(bc, out, err);
    if (train->parsed()) return Train(tr, out);
    if (generate->parsed()) return Generate(gen, out);
    if (evaluate->parsed()) return EvaluateCmd(ev, out);
    if (sweep->parsed()) return Sweep(sw, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace segtrm
