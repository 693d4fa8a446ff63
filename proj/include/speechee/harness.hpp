#ifndef SPEECHEE_HARNESS_HPP_
#define SPEECHEE_HARNESS_HPP_

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "speechee/constrain.hpp"
#include "speechee/contrastive.hpp"
#include "speechee/corpus.hpp"
#include "speechee/decoder.hpp"
#include "speechee/encoder.hpp"
#include "speechee/metrics.hpp"
#include "speechee/shrink.hpp"
#include "speechee/vocab.hpp"

namespace speechee {

// Flat "key = value" config file with typed lookups. CLI flags override.
class Config {
 public:
  Config() = default;
  static Config from_file(const std::string& path);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  int get_int(const std::string& key, int def) const;
  double get_double(const std::string& key, double def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::string get_string(const std::string& key, const std::string& def) const;
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

enum class Modality { kSpeech, kText };

struct ModelConfig {
  Modality modality = Modality::kSpeech;
  EncoderConfig encoder;       // speech path
  int text_layers = 2;         // text path
  ShrinkConfig shrink;
  DecoderConfig decoder;
  double cl_tau = 0.1;
  double cl_weight = 1.0;
  double ed_weight = 1.0;
  double ed_threshold = 0.5;
  bool use_cl = true;
  bool use_shrink = true;
  bool use_ed = true;
  int max_decode_len = 48;
};

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 5e-5;
  int batch_size = 16;
  double weight_decay = 0.01;
  std::uint64_t seed = 0;
  bool verbose = false;
};

ModelConfig model_config_from(const Config& cfg);
TrainConfig train_config_from(const Config& cfg);

// Small transformer over word embeddings for the pipeline's textual path.
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(nn::ParamStore& ps, const std::string& prefix, const Vocab& vocab,
              int model_dim, int layers, int heads, int ffn_mult);
  nn::Var operator()(const std::vector<int>& token_ids) const;

 private:
  nn::Var embed_;
  std::vector<nn::EncoderLayer> layers_;
  nn::LayerNormParams final_ln_;
};

// A full extraction model: encoder (speech or text), optional Shrinking
// Unit, structure decoder, optional Entity Dictionary retrieval.
class Model {
 public:
  Model(const EventSchema& schema, const Vocab& vocab, const EntityDictionary& dict,
        const ModelConfig& cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  const EventSchema& schema() const { return schema_; }
  const Vocab& vocab() const { return vocab_; }
  const EntityDictionary& dict() const { return dict_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Encoder states for one example (speech uses a precomputed mel).
  nn::Var encode_states(const CorpusExample& ex, const nn::Matrix* mel) const;
  // Memory the decoder cross-attends to (after the Shrinking Unit).
  nn::Var memory_from_states(const nn::Var& states) const;

  struct ExampleLoss {
    nn::Var gen;                  // token cross entropy (mean per token)
    std::optional<nn::Var> ed;    // retrieval NLL (mean per step)
    nn::Var pooled;               // 1 x d unit embedding (CL input)
    int steps = 0;
  };
  ExampleLoss example_loss(const CorpusExample& ex, const nn::Matrix* mel,
                           const nn::Var& dict_encoding) const;

  // Dictionary encoding for the current parameters (graph-tracked).
  nn::Var encode_dictionary() const;

  RecordSet predict(const CorpusExample& ex, const nn::Matrix* mel,
                    bool unconstrained = false) const;

  nn::Matrix mel_of(const CorpusExample& ex) const;  // speech modality only

  Eigen::RowVectorXd pooled_embedding(const CorpusExample& ex,
                                      const nn::Matrix* mel) const;

 private:
  std::vector<int> target_ids(const CorpusExample& ex,
                              std::vector<std::string>* target_tokens) const;

  EventSchema schema_;
  Vocab vocab_;
  EntityDictionary dict_;
  ModelConfig cfg_;
  nn::ParamStore params_;
  SpeechEncoder speech_encoder_;
  TextEncoder text_encoder_;
  ShrinkingUnit shrink_;
  StructureDecoder decoder_;
  DictionaryEncoder dict_encoder_;
  RetrievalHead retrieval_;
};

struct EpochLog {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_gen = 0.0;
  std::optional<double> loss_ed;
  std::optional<double> loss_cl;
  std::optional<double> dev_avg;
};

struct Checkpoint {
  std::unique_ptr<Model> model;
  TrainConfig train_cfg;
  std::vector<EpochLog> log;
  int best_epoch = -1;

  void save(const std::string& dir) const;
  static Checkpoint load(const std::string& dir);
};

// Trains on the train split, selects the best dev-average checkpoint.
// Throws on NaN loss naming epoch and step.
Checkpoint train(const std::vector<CorpusExample>& corpus, const EventSchema& schema,
                 const Lexicon& lexicon, const EntityDictionary* dict_override,
                 const ModelConfig& mcfg, const TrainConfig& tcfg);

struct EvalOptions {
  bool unconstrained = false;
  // reuse precomputed mel features keyed by clip id (trainer's dev loop)
  const std::map<std::string, nn::Matrix>* mel_cache = nullptr;
};

struct EvalResult {
  MetricReport report;
  std::vector<LabeledRecordSet> predictions;
};

EvalResult evaluate(const Model& model, const std::vector<const CorpusExample*>& split,
                    const EvalOptions& opts = {});

// Homophone groups as a substitution table for the simulated ASR.
std::map<std::string, std::vector<std::string>> homophone_confusions(const Lexicon& lex);

// Each word independently replaced by a random confusable with the given
// probability; deterministic per seed.
std::vector<std::string> asr_corrupt(
    const std::vector<std::string>& transcript,
    const std::map<std::string, std::vector<std::string>>& confusions, double error_rate,
    std::uint64_t seed);

// Two-step baseline: simulated ASR then the text model, scored like evaluate.
EvalResult pipeline_run(const Model& text_model,
                        const std::vector<const CorpusExample*>& split,
                        const std::map<std::string, std::vector<std::string>>& confusions,
                        double asr_error_rate, std::uint64_t seed);

// Mean silhouette coefficient over rows of X under the labels; singleton
// classes are excluded with a warning.
double silhouette(const nn::Matrix& x, const std::vector<std::string>& labels);

// Silhouette of pooled clip embeddings under event-type labels. Clips whose
// gold sets contain several distinct types are skipped.
double separation_metric(const Model& model,
                         const std::vector<const CorpusExample*>& clips);

// Per-epoch loss/metric curves as standalone SVG files.
void write_loss_plot(const std::vector<EpochLog>& log, const std::string& path);

}  // namespace speechee

#endif  // SPEECHEE_HARNESS_HPP_
