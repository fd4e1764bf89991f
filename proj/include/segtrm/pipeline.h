#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "segtrm/corpus.h"
#include "segtrm/eval.h"
#include "segtrm/infer.h"
#include "segtrm/model.h"
#include "segtrm/run_config.h"
#include "segtrm/train.h"

namespace segtrm {

// Vocabulary over the bodies and hashtags of `records`.
Vocabulary BuildVocabulary(const std::vector<PostRecord>& records, const RunConfig& cfg);

std::vector<TrainExample> MakeExamples(const std::vector<PostRecord>& records,
                                       const Vocabulary& vocab, const RunConfig& cfg);

// Checkpoint metadata: every config key plus the serialized vocabulary.
std::map<std::string, std::string> CheckpointMetadata(const RunConfig& cfg, const Vocabulary& vocab);

struct LoadedModel {
  RunConfig config;
  Vocabulary vocab;
  std::unique_ptr<SegTrmModel<float>> model;
  std::uint64_t step = 0;
};

LoadedModel LoadModel(const std::filesystem::path& checkpoint);

struct TrainRunOptions {
  std::filesystem::path data_dir;  // train.jsonl, optional dev.jsonl
  std::filesystem::path out_dir;
  bool resume = false;
  // Stop once this many steps are done, as if interrupted; 0 = run to the end.
  std::size_t stop_after = 0;
  std::ostream* log = nullptr;
};

struct BestCheckpoint {
  std::size_t step = 0;
  double dev_rouge1 = 0.0;
  std::filesystem::path path;
};

struct TrainRunResult {
  std::size_t step = 0;
  double last_loss = 0.0;
  std::vector<BestCheckpoint> best;  // best first
};

// Trains with periodic dev evaluation. Writes vocab.tsv, metrics.jsonl,
// ckpt_last.bin and the best `keep_best` checkpoints by dev ROUGE-1.
TrainRunResult TrainRun(const RunConfig& cfg, const TrainRunOptions& opts);

struct Prediction {
  std::string post_id;
  std::vector<std::string> hashtags;
  std::vector<std::string> topk_set;
  std::vector<double> scores;
  std::vector<std::vector<std::string>> beams;  // decoded, ranked
};

// Runs GenerateHashtags on every record; results keep input order.
std::vector<Prediction> GenerateAll(const SegTrmModel<float>& model, const Vocabulary& vocab,
                                    const RunConfig& cfg, const std::vector<PostRecord>& records,
                                    std::size_t threads);

std::string PredictionToJson(const Prediction& p);
std::vector<Prediction> ReadPredictions(const std::filesystem::path& path);

// Pairs predictions with gold records by id. F1@k uses the union over the
// first k decoded beams of each prediction.
EvalReport EvaluatePredictions(const std::vector<Prediction>& predictions,
                               const std::vector<PostRecord>& gold, TokenMode mode,
                               const std::vector<std::size_t>& ks);

}  // namespace segtrm
