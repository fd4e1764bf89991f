#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "segtrm/infer.h"
#include "segtrm/model_config.h"
#include "segtrm/tokenize.h"
#include "segtrm/train.h"

namespace segtrm {

// A bad key or value; the message names the key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Every setting of a run, addressed by flat "section.name" keys.
struct RunConfig {
  TokenMode token_mode = TokenMode::kWord;
  std::size_t min_freq = 1;
  std::size_t max_source_len = 512;
  ModelConfig model;  // see BuildModelConfig
  TrainConfig train;
  std::size_t eval_every = 100;
  std::size_t keep_best = 3;
  BeamOptions beam;
  std::size_t topk = 10;

  RunConfig();

  // `model` with the vocabulary size and the position table sized for
  // max_source_len content tokens plus markers.
  ModelConfig BuildModelConfig(std::size_t vocab_size) const;
  SegmentOptions Segmentation() const;

  // Throws ConfigError for unknown keys and unparsable values.
  void Set(const std::string& key, const std::string& value);
  // Cross-field checks, e.g. hidden divisible by heads.
  void Validate() const;
  std::map<std::string, std::string> ToMap() const;
  static std::vector<std::string> Keys();
};

// "key = value" lines; '#' starts a comment; blank lines are ignored.
std::map<std::string, std::string> ParseKeyValueText(const std::string& text);

// Defaults, then the file (if non-empty), then `overrides`; validated.
RunConfig LoadRunConfig(const std::filesystem::path& file,
                        const std::map<std::string, std::string>& overrides);

RunConfig RunConfigFromMap(const std::map<std::string, std::string>& values);

}  // namespace segtrm
