#include "segtrm/run_config.h"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace segtrm {
namespace {

std::string Trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::size_t ParseSize(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

double ParseDouble(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  double out = 0;
  in >> out;
  if (!in || !in.eof()) throw ConfigError(key + ": expected a number, got '" + value + "'");
  return out;
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::string FormatDouble(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Get>
Field SizeField(const std::string& key, Get get) {
  return {[key, get](RunConfig& c, const std::string& v) { get(c) = ParseSize(key, v); },
          [get](const RunConfig& c) {
            return std::to_string(get(const_cast<RunConfig&>(c)));
          }};
}

template <typename Get>
Field DoubleField(const std::string& key, Get get) {
  return {[key, get](RunConfig& c, const std::string& v) { get(c) = ParseDouble(key, v); },
          [get](const RunConfig& c) { return FormatDouble(get(const_cast<RunConfig&>(c))); }};
}

template <typename Parse, typename Name, typename Get>
Field EnumField(const std::string& key, Parse parse, Name name, Get get) {
  return {[key, parse, get](RunConfig& c, const std::string& v) {
            try {
              get(c) = parse(v);
            } catch (const std::invalid_argument& e) {
              throw ConfigError(key + ": " + e.what());
            }
          },
          [name, get](const RunConfig& c) {
            return std::string(name(get(const_cast<RunConfig&>(c))));
          }};
}

const std::map<std::string, Field>& Fields() {
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
    f["tokenize.mode"] = EnumField("tokenize.mode", ParseTokenMode, TokenModeName,
                                   [](RunConfig& c) -> TokenMode& { return c.token_mode; });
    f["tokenize.min_freq"] =
        SizeField("tokenize.min_freq", [](RunConfig& c) -> std::size_t& { return c.min_freq; });
    f["tokenize.max_source_len"] = SizeField(
        "tokenize.max_source_len", [](RunConfig& c) -> std::size_t& { return c.max_source_len; });
    f["tokenize.max_target_len"] =
        SizeField("tokenize.max_target_len",
                  [](RunConfig& c) -> std::size_t& { return c.model.decoder.max_target_len; });
    f["seg.len"] = SizeField(
        "seg.len", [](RunConfig& c) -> std::size_t& { return c.model.encoder.segment_len; });
    f["seg.k_embeddings"] =
        SizeField("seg.k_embeddings",
                  [](RunConfig& c) -> std::size_t& { return c.model.encoder.interval_slots; });
    f["model.hidden"] =
        SizeField("model.hidden", [](RunConfig& c) -> std::size_t& { return c.model.encoder.hidden; });
    f["model.heads"] =
        SizeField("model.heads", [](RunConfig& c) -> std::size_t& { return c.model.encoder.heads; });
    f["model.ffn"] =
        SizeField("model.ffn", [](RunConfig& c) -> std::size_t& { return c.model.encoder.ffn_dims; });
    f["model.enc_layers"] = SizeField(
        "model.enc_layers", [](RunConfig& c) -> std::size_t& { return c.model.encoder.layers; });
    f["model.dec_layers"] = SizeField(
        "model.dec_layers", [](RunConfig& c) -> std::size_t& { return c.model.decoder.layers; });
    f["model.dropout"] = DoubleField(
        "model.dropout", [](RunConfig& c) -> double& { return c.model.encoder.dropout; });
    f["ssm.mode"] = EnumField("ssm.mode", ParseSsmMode, SsmModeName,
                              [](RunConfig& c) -> SsmMode& { return c.model.ssm.mode; });
    f["ssm.metric"] = EnumField("ssm.metric", ParseMetric, MetricName,
                                [](RunConfig& c) -> SimilarityMetric& { return c.model.ssm.metric; });
    f["ssm.k"] = SizeField("ssm.k", [](RunConfig& c) -> std::size_t& { return c.model.ssm.k; });
    f["ssm.invert_scores"] = {
        [](RunConfig& c, const std::string& v) {
          c.model.ssm.invert_scores = ParseBool("ssm.invert_scores", v);
        },
        [](const RunConfig& c) { return std::string(c.model.ssm.invert_scores ? "true" : "false"); }};
    f["train.lr"] = DoubleField("train.lr", [](RunConfig& c) -> double& { return c.train.lr_max; });
    f["train.beta1"] = DoubleField("train.beta1", [](RunConfig& c) -> double& { return c.train.beta1; });
    f["train.beta2"] = DoubleField("train.beta2", [](RunConfig& c) -> double& { return c.train.beta2; });
    f["train.eps"] = DoubleField("train.eps", [](RunConfig& c) -> double& { return c.train.eps; });
    f["train.warmup_ratio"] = DoubleField(
        "train.warmup_ratio", [](RunConfig& c) -> double& { return c.train.warmup_ratio; });
    f["train.warmup_proportion"] = DoubleField(
        "train.warmup_proportion", [](RunConfig& c) -> double& { return c.train.warmup_proportion; });
    f["train.clip_min"] =
        DoubleField("train.clip_min", [](RunConfig& c) -> double& { return c.train.clip_min; });
    f["train.clip_max"] =
        DoubleField("train.clip_max", [](RunConfig& c) -> double& { return c.train.clip_max; });
    f["train.weight_decay"] = DoubleField(
        "train.weight_decay", [](RunConfig& c) -> double& { return c.train.weight_decay; });
    f["train.batch_size"] = SizeField(
        "train.batch_size", [](RunConfig& c) -> std::size_t& { return c.train.batch_size; });
    f["train.steps"] =
        SizeField("train.steps", [](RunConfig& c) -> std::size_t& { return c.train.total_steps; });
    f["train.seed"] = {
        [](RunConfig& c, const std::string& v) { c.train.seed = ParseSize("train.seed", v); },
        [](const RunConfig& c) { return std::to_string(c.train.seed); }};
    f["train.eval_every"] =
        SizeField("train.eval_every", [](RunConfig& c) -> std::size_t& { return c.eval_every; });
    f["train.keep_best"] =
        SizeField("train.keep_best", [](RunConfig& c) -> std::size_t& { return c.keep_best; });
    f["eval.beam"] =
        SizeField("eval.beam", [](RunConfig& c) -> std::size_t& { return c.beam.beam_size; });
    f["eval.topk"] = SizeField("eval.topk", [](RunConfig& c) -> std::size_t& { return c.topk; });
    f["eval.length_norm"] =
        EnumField("eval.length_norm", ParseLengthNorm, LengthNormName,
                  [](RunConfig& c) -> LengthNorm& { return c.beam.length_norm; });
    return f;
  }();
  return fields;
}

}  // namespace

RunConfig::RunConfig() { beam.max_len = model.decoder.max_target_len; }

ModelConfig RunConfig::BuildModelConfig(std::size_t vocab_size) const {
  ModelConfig m = model;
  m.vocab_size = vocab_size;
  const std::size_t len = m.encoder.segment_len;
  m.encoder.max_positions = 1 + max_source_len + (max_source_len + len - 1) / len;
  return m;
}

SegmentOptions RunConfig::Segmentation() const {
  SegmentOptions opts;
  opts.segment_len = model.encoder.segment_len;
  opts.max_content_len = max_source_len;
  opts.interval_slots = model.encoder.interval_slots;
  return opts;
}

void RunConfig::Set(const std::string& key, const std::string& value) {
  auto it = Fields().find(key);
  if (it == Fields().end()) throw ConfigError("unknown config key: " + key);
  it->second.set(*this, value);
  // Settings shared by encoder and decoder live in one key.
  model.decoder.hidden = model.encoder.hidden;
  model.decoder.heads = model.encoder.heads;
  model.decoder.ffn_dims = model.encoder.ffn_dims;
  model.decoder.dropout = model.encoder.dropout;
  beam.max_len = model.decoder.max_target_len;
}

void RunConfig::Validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(model.encoder.hidden > 0, "model.hidden must be positive");
  require(model.encoder.heads > 0 && model.encoder.hidden % model.encoder.heads == 0,
          "model.heads must divide model.hidden");
  require(model.encoder.ffn_dims > 0, "model.ffn must be positive");
  require(model.encoder.layers > 0, "model.enc_layers must be positive");
  require(model.decoder.layers > 0, "model.dec_layers must be positive");
  require(model.encoder.dropout >= 0 && model.encoder.dropout < 1, "model.dropout must be in [0, 1)");
  require(model.encoder.segment_len > 0, "seg.len must be positive");
  require(model.encoder.interval_slots > 0, "seg.k_embeddings must be positive");
  require(model.ssm.k > 0, "ssm.k must be positive");
  require(min_freq > 0, "tokenize.min_freq must be positive");
  require(max_source_len > 0, "tokenize.max_source_len must be positive");
  require(model.decoder.max_target_len > 1, "tokenize.max_target_len must be at least 2");
  require(beam.beam_size > 0, "eval.beam must be positive");
  require(topk > 0 && topk <= beam.beam_size, "eval.topk must be in [1, eval.beam]");
  require(eval_every > 0, "train.eval_every must be positive");
  require(keep_best > 0, "train.keep_best must be positive");
  try {
    train.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::map<std::string, std::string> RunConfig::ToMap() const {
  std::map<std::string, std::string> out;
  for (const auto& [key, field] : Fields()) out[key] = field.get(*this);
  return out;
}

std::vector<std::string> RunConfig::Keys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : Fields()) keys.push_back(key);
  return keys;
}

std::map<std::string, std::string> ParseKeyValueText(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = Trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(number) + ": empty key");
    out[key] = Trim(line.substr(eq + 1));
  }
  return out;
}

RunConfig RunConfigFromMap(const std::map<std::string, std::string>& values) {
  RunConfig cfg;
  for (const auto& [key, value] : values) cfg.Set(key, value);
  return cfg;
}

RunConfig LoadRunConfig(const std::filesystem::path& file,
                        const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> values;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    values = ParseKeyValueText(buf.str());
  }
  for (const auto& [key, value] : overrides) values[key] = value;
  RunConfig cfg = RunConfigFromMap(values);
  cfg.Validate();
  return cfg;
}

}  // namespace segtrm
