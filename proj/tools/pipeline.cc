#include "segtrm/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "segtrm/checkpoint.h"

namespace segtrm {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr char kVocabKey[] = "vocab";

void Log(const TrainRunOptions& opts, const std::string& line) {
  if (opts.log) *opts.log << line << "\n";
}

// Keeps metrics lines up to and including `step`.
void TruncateMetrics(const fs::path& path, std::size_t step) {
  std::ifstream in(path);
  if (!in) return;
  std::vector<std::string> kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (json::parse(line).at("step").get<std::size_t>() <= step) kept.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : kept) out << l << "\n";
}

std::vector<BestCheckpoint> ReadBest(const fs::path& path) {
  std::vector<BestCheckpoint> best;
  std::ifstream in(path);
  if (!in) return best;
  for (const auto& e : json::parse(in)) {
    best.push_back({e.at("step").get<std::size_t>(), e.at("dev_rouge1").get<double>(),
                    e.at("path").get<std::string>()});
  }
  return best;
}

void WriteBest(const fs::path& path, const std::vector<BestCheckpoint>& best) {
  json j = json::array();
  for (const auto& b : best) {
    j.push_back({{"step", b.step}, {"dev_rouge1", b.dev_rouge1}, {"path", b.path.string()}});
  }
  std::ofstream(path, std::ios::trunc) << j.dump(2) << "\n";
}

RougeScores GreedyDevRouge(const SegTrmModel<float>& model, const Vocabulary& vocab,
                           const RunConfig& cfg, const std::vector<PostRecord>& dev) {
  RunConfig greedy = cfg;
  greedy.beam.beam_size = 1;
  greedy.topk = 1;
  RougeScores total;
  const auto preds = GenerateAll(model, vocab, greedy, dev, 1);
  for (std::size_t i = 0; i < dev.size(); ++i) {
    const RougeScores r = SequenceRouge(preds[i].hashtags, dev[i].hashtags, cfg.token_mode);
    total.rouge1 += r.rouge1 / dev.size();
    total.rouge2 += r.rouge2 / dev.size();
    total.rougeL += r.rougeL / dev.size();
  }
  return total;
}

}  // namespace

Vocabulary BuildVocabulary(const std::vector<PostRecord>& records, const RunConfig& cfg) {
  std::vector<std::string> texts;
  for (const auto& r : records) {
    texts.push_back(r.body);
    for (const auto& tag : r.hashtags) texts.push_back(tag);
  }
  return Vocabulary::Build(texts, cfg.min_freq, cfg.token_mode);
}

std::vector<TrainExample> MakeExamples(const std::vector<PostRecord>& records,
                                       const Vocabulary& vocab, const RunConfig& cfg) {
  std::vector<TrainExample> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    TrainExample ex;
    ex.input = SegmentEncode(Tokenize(r.body, cfg.token_mode), vocab, cfg.Segmentation());
    ex.target = EncodeTarget(r.hashtags, vocab, cfg.token_mode, cfg.model.decoder.max_target_len);
    out.push_back(std::move(ex));
  }
  return out;
}

std::map<std::string, std::string> CheckpointMetadata(const RunConfig& cfg,
                                                      const Vocabulary& vocab) {
  auto meta = cfg.ToMap();
  meta[kVocabKey] = vocab.Serialize();
  return meta;
}

LoadedModel LoadModel(const fs::path& checkpoint) {
  Checkpoint<float> ckpt = LoadCheckpoint<float>(checkpoint);
  auto meta = ckpt.header.metadata;
  auto vocab_it = meta.find(kVocabKey);
  if (vocab_it == meta.end()) {
    throw std::runtime_error("checkpoint " + checkpoint.string() + " has no vocabulary");
  }
  LoadedModel loaded;
  loaded.vocab = Vocabulary::Deserialize(vocab_it->second);
  meta.erase(vocab_it);
  loaded.config = RunConfigFromMap(meta);
  loaded.step = ckpt.header.step;
  loaded.model = std::make_unique<SegTrmModel<float>>(
      loaded.config.BuildModelConfig(loaded.vocab.size()), std::move(ckpt.params));
  return loaded;
}

TrainRunResult TrainRun(const RunConfig& cfg, const TrainRunOptions& opts) {
  cfg.Validate();
  const fs::path train_path = opts.data_dir / "train.jsonl";
  const fs::path dev_path = opts.data_dir / "dev.jsonl";
  const fs::path last_path = opts.out_dir / "ckpt_last.bin";
  const fs::path metrics_path = opts.out_dir / "metrics.jsonl";
  const fs::path best_path = opts.out_dir / "best.json";
  if (!fs::exists(train_path)) throw std::runtime_error("missing " + train_path.string());
  if (opts.resume && !fs::exists(last_path)) {
    throw std::runtime_error("--resume: no checkpoint at " + last_path.string());
  }

  const std::vector<PostRecord> train_records = ReadRecords(train_path);
  if (train_records.empty()) throw std::runtime_error(train_path.string() + " is empty");
  const std::vector<PostRecord> dev_records =
      fs::exists(dev_path) ? ReadRecords(dev_path) : std::vector<PostRecord>{};

  std::optional<Checkpoint<float>> resumed;
  Vocabulary vocab;
  if (opts.resume) {
    resumed = LoadCheckpoint<float>(last_path);
    auto meta = resumed->header.metadata;
    vocab = Vocabulary::Deserialize(meta.at(kVocabKey));
    meta.erase(kVocabKey);
    const auto current = cfg.ToMap();
    for (const auto& [key, value] : current) {
      auto it = meta.find(key);
      if (it == meta.end() || it->second != value) {
        throw ConfigError("--resume: " + key + " differs from the checkpoint (" +
                          (it == meta.end() ? std::string("absent") : it->second) + " vs " +
                          value + ")");
      }
    }
  } else {
    vocab = BuildVocabulary(train_records, cfg);
  }

  fs::create_directories(opts.out_dir);
  vocab.Save(opts.out_dir / "vocab.tsv");
  const auto examples = MakeExamples(train_records, vocab, cfg);
  const auto meta = CheckpointMetadata(cfg, vocab);

  SegTrmModel<float> model(cfg.BuildModelConfig(vocab.size()), cfg.train.seed);
  Trainer<float> trainer(model, cfg.train, examples);
  std::vector<BestCheckpoint> best;
  if (resumed) {
    RestoreCheckpoint(last_path, model.params());
    trainer.set_step(resumed->header.step);
    TruncateMetrics(metrics_path, resumed->header.step);
    best = ReadBest(best_path);
    Log(opts, "resumed at step " + std::to_string(resumed->header.step));
  } else {
    std::ofstream(metrics_path, std::ios::trunc);
    for (const auto& entry : fs::directory_iterator(opts.out_dir)) {
      if (entry.path().filename().string().rfind("ckpt_", 0) == 0) fs::remove(entry.path());
    }
    fs::remove(best_path);
  }

  const std::size_t total = cfg.train.total_steps;
  const std::size_t stop = opts.stop_after == 0 ? total : std::min(total, opts.stop_after);
  TrainRunResult result;
  std::ofstream metrics(metrics_path, std::ios::app);
  while (trainer.step() < stop) {
    const std::size_t step = trainer.step();
    const double lr = LearningRate(step, cfg.train);
    const double loss = trainer.Step();
    result.last_loss = loss;
    json line = {{"step", trainer.step()}, {"loss", loss}, {"lr", lr}};
    const bool eval_point = trainer.step() % cfg.eval_every == 0 || trainer.step() == total;
    if (eval_point && !dev_records.empty()) {
      const RougeScores dev = GreedyDevRouge(model, vocab, cfg, dev_records);
      line["dev_loss"] = DatasetLoss(model, MakeExamples(dev_records, vocab, cfg));
      line["dev_rouge1"] = dev.rouge1;
      line["dev_rouge2"] = dev.rouge2;
      line["dev_rougeL"] = dev.rougeL;
      const bool qualifies = best.size() < cfg.keep_best || dev.rouge1 > best.back().dev_rouge1;
      if (qualifies) {
        const fs::path path =
            opts.out_dir / ("ckpt_step" + std::to_string(trainer.step()) + ".bin");
        SaveCheckpoint(path, model.params(), trainer.step(), meta);
        best.push_back({trainer.step(), dev.rouge1, path});
        std::stable_sort(best.begin(), best.end(), [](const auto& a, const auto& b) {
          return a.dev_rouge1 > b.dev_rouge1;
        });
        while (best.size() > cfg.keep_best) {
          fs::remove(best.back().path);
          best.pop_back();
        }
        WriteBest(best_path, best);
      }
    }
    metrics << line.dump() << "\n";
    metrics.flush();
    if (eval_point) {
      SaveCheckpoint(last_path, model.params(), trainer.step(), meta);
      std::ostringstream msg;
      msg << "step " << trainer.step() << " loss " << loss;
      if (line.contains("dev_rouge1")) msg << " dev_rouge1 " << line["dev_rouge1"].get<double>();
      Log(opts, msg.str());
    }
  }
  if (trainer.step() % cfg.eval_every != 0 && trainer.step() != total) {
    SaveCheckpoint(last_path, model.params(), trainer.step(), meta);
  }
  result.step = trainer.step();
  result.best = best;
  return result;
}

std::vector<Prediction> GenerateAll(const SegTrmModel<float>& model, const Vocabulary& vocab,
                                    const RunConfig& cfg, const std::vector<PostRecord>& records,
                                    std::size_t threads) {
  std::vector<Prediction> out(records.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      try {
        const PostRecord& r = records[i];
        const SegmentedInput in =
            SegmentEncode(Tokenize(r.body, cfg.token_mode), vocab, cfg.Segmentation());
        GeneratedHashtags gen =
            GenerateHashtags(model, in, vocab, cfg.token_mode, cfg.beam, cfg.topk);
        Prediction& p = out[i];
        p.post_id = r.source_id;
        p.hashtags = std::move(gen.best);
        p.topk_set = std::move(gen.topk_set);
        for (const Hypothesis& h : gen.beams) {
          p.scores.push_back(h.score);
          p.beams.push_back(DecodeOutput(h.ids, vocab, cfg.token_mode));
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = records.size();
      }
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, records.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::string PredictionToJson(const Prediction& p) {
  json j = {{"post_id", p.post_id},
            {"hashtags", p.hashtags},
            {"topk_set", p.topk_set},
            {"scores", p.scores},
            {"beams", p.beams}};
  return j.dump();
}

std::vector<Prediction> ReadPredictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions " + path.string());
  std::vector<Prediction> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Prediction p;
      p.post_id = j.at("post_id").get<std::string>();
      p.hashtags = j.at("hashtags").get<std::vector<std::string>>();
      p.topk_set = j.value("topk_set", std::vector<std::string>{});
      p.scores = j.value("scores", std::vector<double>{});
      p.beams = j.value("beams", std::vector<std::vector<std::string>>{});
      if (p.beams.empty()) p.beams.push_back(p.hashtags);
      out.push_back(std::move(p));
    } catch (const json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

EvalReport EvaluatePredictions(const std::vector<Prediction>& predictions,
                               const std::vector<PostRecord>& gold, TokenMode mode,
                               const std::vector<std::size_t>& ks) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.post_id, &p).second) {
      throw std::runtime_error("duplicate prediction for post " + p.post_id);
    }
  }
  std::vector<EvalInstance> instances;
  for (const PostRecord& g : gold) {
    auto it = by_id.find(g.source_id);
    if (it == by_id.end()) throw std::runtime_error("no prediction for post " + g.source_id);
    EvalInstance inst;
    inst.predicted = it->second->hashtags;
    for (std::size_t k : ks) inst.topk_sets[k] = TopKHashtagSet(it->second->beams, k);
    inst.gold = g.hashtags;
    inst.source_tokens = Tokenize(g.body, mode);
    instances.push_back(std::move(inst));
  }
  return Evaluate(instances, mode);
}

}  // namespace segtrm
