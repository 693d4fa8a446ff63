#include "speechee/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "speechee/error.hpp"
#include "speechee/rng.hpp"

namespace speechee {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// config

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  Config cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw Error(path + ": line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw Error(path + ": line " + std::to_string(lineno) + ": empty key");
    cfg.values_[key] = value;
  }
  return cfg;
}

int Config::get_int(const std::string& key, int def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    return std::stoi(it->second);
  } catch (...) {
    throw Error("config: '" + key + "' is not an integer: " + it->second);
  }
}

double Config::get_double(const std::string& key, double def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  try {
    return std::stod(it->second);
  } catch (...) {
    throw Error("config: '" + key + "' is not a number: " + it->second);
  }
}

bool Config::get_bool(const std::string& key, bool def) const {
  auto it = values_.find(key);
  if (it == values_.end()) return def;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("config: '" + key + "' is not a boolean: " + v);
}

std::string Config::get_string(const std::string& key, const std::string& def) const {
  auto it = values_.find(key);
  return it == values_.end() ? def : it->second;
}

ModelConfig model_config_from(const Config& cfg) {
  ModelConfig m;
  m.encoder.mel_channels = cfg.get_int("encoder.mel_channels", 20);
  m.encoder.window_ms = cfg.get_double("encoder.window_ms", 25.0);
  m.encoder.hop_ms = cfg.get_double("encoder.hop_ms", 10.0);
  m.encoder.model_dim = cfg.get_int("encoder.dim", 48);
  m.encoder.layers = cfg.get_int("encoder.layers", 2);
  m.encoder.heads = cfg.get_int("encoder.heads", 4);
  m.encoder.ffn_mult = cfg.get_int("encoder.ffn_mult", 3);
  m.encoder.stem_kernel = cfg.get_int("encoder.stem_kernel", 3);
  m.text_layers = cfg.get_int("text.layers", 2);
  m.shrink.layers = cfg.get_int("shrink.layers", 2);
  m.shrink.stride = cfg.get_int("shrink.stride", 2);
  m.shrink.kernel = cfg.get_int("shrink.kernel", 3);
  m.shrink.dim = m.encoder.model_dim;
  m.decoder.model_dim = m.encoder.model_dim;
  m.decoder.layers = cfg.get_int("decoder.layers", 2);
  m.decoder.heads = cfg.get_int("decoder.heads", 4);
  m.decoder.ffn_mult = cfg.get_int("decoder.ffn_mult", 3);
  m.decoder.att_dim = cfg.get_int("ed.att_dim", 32);
  m.decoder.ed_embed_dim = cfg.get_int("ed.embed_dim", 32);
  m.cl_tau = cfg.get_double("cl.tau", 0.1);
  m.cl_weight = cfg.get_double("cl.weight", 1.0);
  m.ed_weight = cfg.get_double("ed.weight", 1.0);
  m.ed_threshold = cfg.get_double("ed.theta", 0.5);
  m.use_cl = cfg.get_bool("cl.enabled", true);
  m.use_shrink = cfg.get_bool("shrink.enabled", true);
  m.use_ed = cfg.get_bool("ed.enabled", true);
  m.max_decode_len = cfg.get_int("decode.max_len", 48);
  return m;
}

TrainConfig train_config_from(const Config& cfg) {
  TrainConfig t;
  t.epochs = cfg.get_int("train.epochs", 30);
  t.learning_rate = cfg.get_double("train.lr", 5e-5);
  t.batch_size = cfg.get_int("train.batch", 16);
  t.weight_decay = cfg.get_double("train.weight_decay", 0.01);
  t.seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", 0));
  t.verbose = cfg.get_bool("train.verbose", false);
  if (t.epochs < 1 || t.batch_size < 1 || t.learning_rate <= 0.0)
    throw Error("train config: epochs, batch and learning rate must be positive");
  return t;
}

// ---------------------------------------------------------------------------
// text encoder

TextEncoder::TextEncoder(nn::ParamStore& ps, const std::string& prefix,
                         const Vocab& vocab, int model_dim, int layers, int heads,
                         int ffn_mult) {
  embed_ = ps.create_normal(prefix + ".embed", vocab.size(), model_dim, 0.1);
  for (int i = 0; i < layers; ++i) {
    layers_.emplace_back(ps, prefix + ".layer" + std::to_string(i), model_dim, heads,
                         static_cast<Eigen::Index>(ffn_mult) * model_dim);
  }
  final_ln_ = nn::LayerNormParams(ps, prefix + ".final_ln", model_dim);
}

nn::Var TextEncoder::operator()(const std::vector<int>& token_ids) const {
  if (token_ids.empty()) throw Error("text encoder: empty input");
  nn::Var x = nn::gather_rows(embed_, token_ids);
  x = nn::add_const(x, nn::sinusoidal_positions(x.rows(), x.cols()));
  for (const auto& layer : layers_) x = layer(x);
  return final_ln_(x);
}

// ---------------------------------------------------------------------------
// model

Model::Model(const EventSchema& schema, const Vocab& vocab, const EntityDictionary& dict,
             const ModelConfig& cfg, std::uint64_t init_seed)
    : schema_(schema), vocab_(vocab), dict_(dict), cfg_(cfg), params_(init_seed) {
  if (cfg.modality == Modality::kSpeech) {
    if (cfg.decoder.model_dim != cfg.encoder.model_dim)
      throw Error("model: encoder and decoder dims must match");
    speech_encoder_ = SpeechEncoder(params_, "enc", cfg.encoder);
    if (cfg.use_shrink && cfg.shrink.layers > 0) {
      ShrinkConfig sc = cfg.shrink;
      sc.dim = cfg.encoder.model_dim;
      shrink_ = ShrinkingUnit(params_, "shrink", sc);
    }
  } else {
    text_encoder_ = TextEncoder(params_, "tenc", vocab_, cfg.decoder.model_dim,
                                cfg.text_layers, cfg.decoder.heads, cfg.decoder.ffn_mult);
  }
  decoder_ = StructureDecoder(params_, "dec", vocab_, cfg.decoder);
  if (cfg.use_ed) {
    dict_encoder_ = DictionaryEncoder(params_, "ed", vocab_, cfg.decoder);
    retrieval_ = RetrievalHead(params_, "ret", cfg.decoder);
  }
}

nn::Matrix Model::mel_of(const CorpusExample& ex) const {
  return extract_features(ex.clip, cfg_.encoder).frames;
}

nn::Var Model::encode_states(const CorpusExample& ex, const nn::Matrix* mel) const {
  if (cfg_.modality == Modality::kSpeech) {
    MelSpectrogram m;
    if (mel != nullptr) {
      m.frames = *mel;
    } else {
      m.frames = mel_of(ex);
    }
    m.frame_rate = 1000.0 / cfg_.encoder.hop_ms;
    return speech_encoder_.encode_mel(m);
  }
  return text_encoder_(vocab_.encode(ex.transcript));
}

nn::Var Model::memory_from_states(const nn::Var& states) const {
  if (cfg_.modality == Modality::kSpeech && cfg_.use_shrink && cfg_.shrink.layers > 0) {
    return shrink_(states);
  }
  return states;
}

std::vector<int> Model::target_ids(const CorpusExample& ex,
                                   std::vector<std::string>* target_tokens) const {
  std::vector<std::string> tokens = linearize(ex.gold, schema_);
  if (target_tokens != nullptr) *target_tokens = tokens;
  std::vector<int> ids = vocab_.encode(tokens);
  ids.push_back(Vocab::kEos);
  return ids;
}

nn::Var Model::encode_dictionary() const {
  if (!cfg_.use_ed) throw Error("model: entity dictionary disabled");
  return dict_encoder_(dict_);
}

Model::ExampleLoss Model::example_loss(const CorpusExample& ex, const nn::Matrix* mel,
                                       const nn::Var& dict_encoding) const {
  nn::Var states = encode_states(ex, mel);
  nn::Var pooled = pool(states);
  nn::Var memory = memory_from_states(states);

  std::vector<std::string> target_tokens;
  std::vector<int> targets = target_ids(ex, &target_tokens);
  std::vector<int> inputs;
  inputs.reserve(targets.size());
  inputs.push_back(Vocab::kBos);
  inputs.insert(inputs.end(), targets.begin(), targets.end() - 1);

  StructureDecoder::Forward fwd = decoder_(memory, inputs);
  ExampleLoss out;
  out.gen = nn::cross_entropy_rows(fwd.logits, targets);
  out.pooled = pooled;
  out.steps = static_cast<int>(targets.size());
  if (cfg_.use_ed) {
    std::vector<int> gold = derive_gold_entity_indices(target_tokens, dict_);
    gold.push_back(0);  // EOS step retrieves nothing
    RetrievalDistribution rd = retrieval_(fwd.states, dict_encoding);
    out.ed = nn::scale(retrieval_loss(rd.p, gold), 1.0 / out.steps);
  }
  return out;
}

RecordSet Model::predict(const CorpusExample& ex, const nn::Matrix* mel,
                         bool unconstrained) const {
  nn::GradGuard no_grad(false);
  nn::Var memory = memory_from_states(encode_states(ex, mel));
  nn::Var dict_enc;
  if (cfg_.use_ed) dict_enc = encode_dictionary();

  StepFn step = [&](const std::vector<int>& prefix) {
    StructureDecoder::Step st = decoder_.decode_step(memory, prefix);
    StepScores scores;
    scores.logits = st.logits;
    if (cfg_.use_ed) {
      nn::Var state = nn::Var::constant(st.state);
      scores.retrieval_p = retrieval_(state, dict_enc).p.value().row(0);
    }
    return scores;
  };

  std::vector<std::string> tokens;
  if (unconstrained) {
    tokens = unconstrained_generate(step, vocab_, cfg_.max_decode_len);
  } else {
    ConstraintVocab cvocab{&schema_, vocab_.words()};
    GenerateOptions opts;
    opts.max_len = cfg_.max_decode_len;
    opts.policy.threshold = cfg_.ed_threshold;
    opts.policy.retrieval_enabled = cfg_.use_ed;
    tokens = constrained_generate(step, vocab_, cvocab, dict_, opts);
  }
  return normalize(parse(tokens, schema_, ParseMode::kLenient).records);
}

Eigen::RowVectorXd Model::pooled_embedding(const CorpusExample& ex,
                                           const nn::Matrix* mel) const {
  nn::GradGuard no_grad(false);
  return pool(encode_states(ex, mel)).value().row(0);
}

// ---------------------------------------------------------------------------
// checkpoint

namespace {

nlohmann::json model_config_to_json(const ModelConfig& m) {
  nlohmann::json j;
  j["modality"] = m.modality == Modality::kSpeech ? "speech" : "text";
  j["encoder"] = {{"mel_channels", m.encoder.mel_channels},
                  {"window_ms", m.encoder.window_ms},
                  {"hop_ms", m.encoder.hop_ms},
                  {"dim", m.encoder.model_dim},
                  {"layers", m.encoder.layers},
                  {"heads", m.encoder.heads},
                  {"ffn_mult", m.encoder.ffn_mult},
                  {"stem_kernel", m.encoder.stem_kernel}};
  j["text_layers"] = m.text_layers;
  j["shrink"] = {{"layers", m.shrink.layers},
                 {"stride", m.shrink.stride},
                 {"kernel", m.shrink.kernel}};
  j["decoder"] = {{"layers", m.decoder.layers},
                  {"heads", m.decoder.heads},
                  {"ffn_mult", m.decoder.ffn_mult},
                  {"att_dim", m.decoder.att_dim},
                  {"ed_embed_dim", m.decoder.ed_embed_dim}};
  j["cl_tau"] = m.cl_tau;
  j["cl_weight"] = m.cl_weight;
  j["ed_weight"] = m.ed_weight;
  j["ed_threshold"] = m.ed_threshold;
  j["use_cl"] = m.use_cl;
  j["use_shrink"] = m.use_shrink;
  j["use_ed"] = m.use_ed;
  j["max_decode_len"] = m.max_decode_len;
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig m;
  m.modality = j.at("modality") == "speech" ? Modality::kSpeech : Modality::kText;
  const auto& e = j.at("encoder");
  m.encoder.mel_channels = e.at("mel_channels");
  m.encoder.window_ms = e.at("window_ms");
  m.encoder.hop_ms = e.at("hop_ms");
  m.encoder.model_dim = e.at("dim");
  m.encoder.layers = e.at("layers");
  m.encoder.heads = e.at("heads");
  m.encoder.ffn_mult = e.at("ffn_mult");
  m.encoder.stem_kernel = e.at("stem_kernel");
  m.text_layers = j.at("text_layers");
  m.shrink.layers = j.at("shrink").at("layers");
  m.shrink.stride = j.at("shrink").at("stride");
  m.shrink.kernel = j.at("shrink").at("kernel");
  m.shrink.dim = m.encoder.model_dim;
  const auto& d = j.at("decoder");
  m.decoder.model_dim = m.encoder.model_dim;
  m.decoder.layers = d.at("layers");
  m.decoder.heads = d.at("heads");
  m.decoder.ffn_mult = d.at("ffn_mult");
  m.decoder.att_dim = d.at("att_dim");
  m.decoder.ed_embed_dim = d.at("ed_embed_dim");
  m.cl_tau = j.at("cl_tau");
  m.cl_weight = j.at("cl_weight");
  m.ed_weight = j.at("ed_weight");
  m.ed_threshold = j.at("ed_threshold");
  m.use_cl = j.at("use_cl");
  m.use_shrink = j.at("use_shrink");
  m.use_ed = j.at("use_ed");
  m.max_decode_len = j.at("max_decode_len");
  return m;
}

}  // namespace

void Checkpoint::save(const std::string& dir) const {
  fs::create_directories(dir);
  nlohmann::json j;
  j["model"] = model_config_to_json(model->config());
  j["train"] = {{"epochs", train_cfg.epochs},
                {"lr", train_cfg.learning_rate},
                {"batch", train_cfg.batch_size},
                {"weight_decay", train_cfg.weight_decay},
                {"seed", train_cfg.seed}};
  j["schema"] = nlohmann::json::parse(model->schema().to_json_text());
  j["vocab"] = model->vocab().all_tokens();
  j["vocab_words"] = model->vocab().words();
  nlohmann::json dict = nlohmann::json::array();
  for (std::size_t i = 1; i < model->dict().size(); ++i) {
    dict.push_back(join_tokens(model->dict().entry(i)));
  }
  j["dict"] = dict;
  nlohmann::json log_json = nlohmann::json::array();
  for (const auto& e : log) {
    nlohmann::json le = {{"epoch", e.epoch},
                         {"loss_total", e.loss_total},
                         {"loss_gen", e.loss_gen}};
    if (e.loss_ed) le["loss_ed"] = *e.loss_ed;
    if (e.loss_cl) le["loss_cl"] = *e.loss_cl;
    if (e.dev_avg) le["dev_avg"] = *e.dev_avg;
    log_json.push_back(le);
  }
  j["log"] = log_json;
  j["best_epoch"] = best_epoch;
  std::ofstream meta(fs::path(dir) / "meta.json");
  if (!meta) throw Error("cannot write checkpoint meta in '" + dir + "'");
  meta << j.dump(2) << '\n';
  nn::save_params(model->params(), (fs::path(dir) / "params.bin").string());
}

Checkpoint Checkpoint::load(const std::string& dir) {
  std::ifstream meta(fs::path(dir) / "meta.json");
  if (!meta) throw Error("missing checkpoint meta in '" + dir + "'");
  nlohmann::json j;
  meta >> j;
  ModelConfig mcfg = model_config_from_json(j.at("model"));
  EventSchema schema = EventSchema::from_json_text(j.at("schema").dump());
  Vocab vocab = Vocab::from_tokens(j.at("vocab").get<std::vector<std::string>>(),
                                   j.at("vocab_words").get<std::vector<std::string>>());
  std::vector<std::vector<std::string>> entries;
  for (const auto& line : j.at("dict")) {
    entries.push_back(split_tokens(line.get<std::string>()));
  }
  EntityDictionary dict(std::move(entries));

  Checkpoint ckpt;
  ckpt.model = std::make_unique<Model>(schema, vocab, dict, mcfg, 0);
  nn::load_params(ckpt.model->params(), (fs::path(dir) / "params.bin").string());
  ckpt.train_cfg.epochs = j.at("train").at("epochs");
  ckpt.train_cfg.learning_rate = j.at("train").at("lr");
  ckpt.train_cfg.batch_size = j.at("train").at("batch");
  ckpt.train_cfg.weight_decay = j.at("train").at("weight_decay");
  ckpt.train_cfg.seed = j.at("train").at("seed");
  ckpt.best_epoch = j.at("best_epoch");
  for (const auto& le : j.at("log")) {
    EpochLog e;
    e.epoch = le.at("epoch");
    e.loss_total = le.at("loss_total");
    e.loss_gen = le.at("loss_gen");
    if (le.contains("loss_ed")) e.loss_ed = le.at("loss_ed").get<double>();
    if (le.contains("loss_cl")) e.loss_cl = le.at("loss_cl").get<double>();
    if (le.contains("dev_avg")) e.dev_avg = le.at("dev_avg").get<double>();
    ckpt.log.push_back(e);
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// training

Checkpoint train(const std::vector<CorpusExample>& corpus, const EventSchema& schema,
                 const Lexicon& lexicon, const EntityDictionary* dict_override,
                 const ModelConfig& mcfg, const TrainConfig& tcfg) {
  auto train_split = split_of(corpus, "train");
  auto dev_split = split_of(corpus, "dev");
  if (train_split.empty()) throw Error("train: empty train split");

  Vocab vocab(schema, lexicon.words());
  EntityDictionary dict;
  if (dict_override != nullptr) {
    dict = *dict_override;
  } else if (mcfg.use_ed) {
    std::vector<RecordSet> train_records;
    for (const auto* ex : train_split) train_records.push_back(ex->gold);
    dict = build_entity_dictionary(train_records);
  }

  Checkpoint ckpt;
  ckpt.model = std::make_unique<Model>(schema, vocab, dict, mcfg, tcfg.seed);
  ckpt.train_cfg = tcfg;
  Model& model = *ckpt.model;

  // the mel front end is frozen and deterministic: compute features once
  std::map<std::string, nn::Matrix> mel_cache;
  if (mcfg.modality == Modality::kSpeech) {
    for (const auto* ex : train_split) mel_cache[ex->clip.id] = model.mel_of(*ex);
    for (const auto* ex : dev_split) mel_cache[ex->clip.id] = model.mel_of(*ex);
  }
  auto mel_for = [&](const CorpusExample& ex) -> const nn::Matrix* {
    if (mcfg.modality != Modality::kSpeech) return nullptr;
    return &mel_cache.at(ex.clip.id);
  };

  nn::AdamW optimizer(tcfg.learning_rate, 0.9, 0.999, 1e-8, tcfg.weight_decay);
  std::map<std::string, nn::Matrix> best_params;
  double best_dev = -1.0;

  std::vector<std::size_t> order(train_split.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    auto rng = make_rng(tcfg.seed, "epoch:" + std::to_string(epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double sum_total = 0, sum_gen = 0, sum_ed = 0, sum_cl = 0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(tcfg.batch_size)) {
      std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(tcfg.batch_size));
      const int bsz = static_cast<int>(end - start);

      model.params().zero_grads();
      nn::Var dict_enc;
      if (mcfg.use_ed) dict_enc = model.encode_dictionary();

      std::vector<nn::Var> pooled;
      std::vector<std::set<std::string>> labels;
      nn::Var gen_sum, ed_sum;
      for (std::size_t i = start; i < end; ++i) {
        const CorpusExample& ex = *train_split[order[i]];
        Model::ExampleLoss loss = model.example_loss(ex, mel_for(ex), dict_enc);
        gen_sum = gen_sum.defined() ? nn::add(gen_sum, loss.gen) : loss.gen;
        if (loss.ed) {
          ed_sum = ed_sum.defined() ? nn::add(ed_sum, *loss.ed) : *loss.ed;
        }
        pooled.push_back(loss.pooled);
        std::set<std::string> types;
        for (const auto& rec : ex.gold.records) types.insert(rec.event_type);
        labels.push_back(std::move(types));
      }

      nn::Var total = nn::scale(gen_sum, 1.0 / bsz);
      double gen_value = total.value()(0, 0);
      double ed_value = 0, cl_value = 0;
      if (mcfg.use_ed && ed_sum.defined()) {
        nn::Var ed = nn::scale(ed_sum, 1.0 / bsz);
        ed_value = ed.value()(0, 0);
        total = nn::add(total, nn::scale(ed, mcfg.ed_weight));
      }
      if (mcfg.use_cl && bsz >= 2) {
        nn::Var cl =
            nn::scale(contrastive_loss(nn::concat_rows(pooled), labels, mcfg.cl_tau),
                      1.0 / bsz);
        cl_value = cl.value()(0, 0);
        total = nn::add(total, nn::scale(cl, mcfg.cl_weight));
      }

      double total_value = total.value()(0, 0);
      if (!std::isfinite(total_value)) {
        throw Error("training diverged (non-finite loss) at epoch " +
                    std::to_string(epoch) + " step " + std::to_string(batches + 1));
      }
      nn::backward(total);
      optimizer.step(model.params());

      sum_total += total_value;
      sum_gen += gen_value;
      sum_ed += ed_value;
      sum_cl += cl_value;
      ++batches;
    }

    EpochLog log_entry;
    log_entry.epoch = epoch;
    log_entry.loss_total = sum_total / batches;
    log_entry.loss_gen = sum_gen / batches;
    if (mcfg.use_ed) log_entry.loss_ed = sum_ed / batches;
    if (mcfg.use_cl) log_entry.loss_cl = sum_cl / batches;

    if (!dev_split.empty()) {
      EvalOptions opts;
      opts.mel_cache = &mel_cache;
      EvalResult dev = evaluate(model, dev_split, opts);
      log_entry.dev_avg = dev.report.avg();
      if (*log_entry.dev_avg > best_dev) {
        best_dev = *log_entry.dev_avg;
        ckpt.best_epoch = epoch;
        best_params.clear();
        for (const auto& [name, var] : model.params().all()) {
          best_params[name] = var.value();
        }
      }
    }
    ckpt.log.push_back(log_entry);
    if (tcfg.verbose) {
      std::ostringstream line;
      line << "epoch " << epoch << " loss " << log_entry.loss_total << " gen "
           << log_entry.loss_gen;
      if (log_entry.loss_ed) line << " ed " << *log_entry.loss_ed;
      if (log_entry.loss_cl) line << " cl " << *log_entry.loss_cl;
      if (log_entry.dev_avg) line << " dev_avg " << *log_entry.dev_avg;
      std::cout << line.str() << std::endl;
    }
  }

  if (!best_params.empty()) {
    for (const auto& [name, value] : best_params) {
      model.params().get(name).mutable_value() = value;
    }
  } else {
    ckpt.best_epoch = tcfg.epochs;
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// evaluation, pipeline, silhouette

EvalResult evaluate(const Model& model, const std::vector<const CorpusExample*>& split,
                    const EvalOptions& opts) {
  if (split.empty()) throw Error("evaluate: empty split");
  EvalResult out;
  std::map<std::string, RecordSet> preds, golds;
  for (const auto* ex : split) {
    const nn::Matrix* mel = nullptr;
    nn::Matrix local;
    if (model.config().modality == Modality::kSpeech) {
      if (opts.mel_cache != nullptr && opts.mel_cache->count(ex->clip.id)) {
        mel = &opts.mel_cache->at(ex->clip.id);
      } else {
        local = model.mel_of(*ex);
        mel = &local;
      }
    }
    RecordSet pred = model.predict(*ex, mel, opts.unconstrained);
    preds[ex->clip.id] = pred;
    golds[ex->clip.id] = ex->gold;
    out.predictions.push_back({ex->clip.id, pred});
  }
  out.report =
      score(preds, golds, static_cast<int>(model.schema().event_types().size()));
  return out;
}

std::map<std::string, std::vector<std::string>> homophone_confusions(const Lexicon& lex) {
  std::map<std::string, std::vector<std::string>> table;
  for (const auto& group : lex.homophone_groups()) {
    for (const auto& w : group) {
      for (const auto& other : group) {
        if (other != w) table[w].push_back(other);
      }
    }
  }
  return table;
}

std::vector<std::string> asr_corrupt(
    const std::vector<std::string>& transcript,
    const std::map<std::string, std::vector<std::string>>& confusions, double error_rate,
    std::uint64_t seed) {
  if (error_rate < 0.0 || error_rate > 1.0)
    throw Error("asr_corrupt: error_rate must be in [0, 1]");
  auto rng = make_rng(seed, "asr");
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<std::string> out;
  out.reserve(transcript.size());
  for (const auto& w : transcript) {
    auto it = confusions.find(w);
    if (it != confusions.end() && coin(rng) < error_rate) {
      std::uniform_int_distribution<std::size_t> pick(0, it->second.size() - 1);
      out.push_back(it->second[pick(rng)]);
    } else {
      out.push_back(w);
    }
  }
  return out;
}

EvalResult pipeline_run(const Model& text_model,
                        const std::vector<const CorpusExample*>& split,
                        const std::map<std::string, std::vector<std::string>>& confusions,
                        double asr_error_rate, std::uint64_t seed) {
  if (text_model.config().modality != Modality::kText)
    throw Error("pipeline_run: model is not a text model");
  if (split.empty()) throw Error("pipeline_run: empty split");
  EvalResult out;
  std::map<std::string, RecordSet> preds, golds;
  for (const auto* ex : split) {
    CorpusExample corrupted = *ex;
    corrupted.transcript = asr_corrupt(ex->transcript, confusions, asr_error_rate,
                                       splitmix64(seed ^ hash_string(ex->clip.id)));
    RecordSet pred = text_model.predict(corrupted, nullptr, false);
    preds[ex->clip.id] = pred;
    golds[ex->clip.id] = ex->gold;
    out.predictions.push_back({ex->clip.id, pred});
  }
  out.report =
      score(preds, golds, static_cast<int>(text_model.schema().event_types().size()));
  return out;
}

double silhouette(const nn::Matrix& x, const std::vector<std::string>& labels) {
  if (static_cast<Eigen::Index>(labels.size()) != x.rows())
    throw Error("silhouette: label count mismatch");
  std::map<std::string, std::vector<Eigen::Index>> clusters;
  for (Eigen::Index i = 0; i < x.rows(); ++i) clusters[labels[std::size_t(i)]].push_back(i);
  std::map<std::string, std::vector<Eigen::Index>> kept;
  for (const auto& [label, members] : clusters) {
    if (members.size() < 2) {
      std::cerr << "[speechee] warning: singleton class '" << label
                << "' excluded from silhouette\n";
    } else {
      kept[label] = members;
    }
  }
  if (kept.size() < 2)
    throw Error("silhouette: need at least two classes with two or more members");

  auto dist = [&](Eigen::Index a, Eigen::Index b) {
    return (x.row(a) - x.row(b)).norm();
  };
  double sum = 0.0;
  long count = 0;
  for (const auto& [label, members] : kept) {
    for (Eigen::Index i : members) {
      double a = 0.0;
      for (Eigen::Index j : members) {
        if (j != i) a += dist(i, j);
      }
      a /= static_cast<double>(members.size() - 1);
      double b = std::numeric_limits<double>::infinity();
      for (const auto& [other, omembers] : kept) {
        if (other == label) continue;
        double m = 0.0;
        for (Eigen::Index j : omembers) m += dist(i, j);
        b = std::min(b, m / static_cast<double>(omembers.size()));
      }
      double denom = std::max(a, b);
      sum += denom == 0.0 ? 0.0 : (b - a) / denom;
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

double separation_metric(const Model& model,
                         const std::vector<const CorpusExample*>& clips) {
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<std::string> labels;
  for (const auto* ex : clips) {
    std::set<std::string> types;
    for (const auto& rec : ex->gold.records) types.insert(rec.event_type);
    if (types.size() != 1) continue;  // silhouette needs a single type label
    nn::Matrix mel;
    const nn::Matrix* mel_ptr = nullptr;
    if (model.config().modality == Modality::kSpeech) {
      mel = model.mel_of(*ex);
      mel_ptr = &mel;
    }
    rows.push_back(model.pooled_embedding(*ex, mel_ptr));
    labels.push_back(*types.begin());
  }
  std::set<std::string> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2)
    throw Error("separation_metric: need clips from at least two event types");
  nn::Matrix x(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = rows[i];
  return silhouette(x, labels);
}

// ---------------------------------------------------------------------------
// plots

namespace {

std::string svg_polyline(const std::vector<double>& ys, double x0, double y0, double w,
                         double h, double ymin, double ymax, const std::string& color) {
  if (ys.empty()) return "";
  std::ostringstream pts;
  double span = ymax - ymin;
  if (span <= 0) span = 1.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    double px = x0 + w * (ys.size() == 1 ? 0.5
                                         : static_cast<double>(i) /
                                               static_cast<double>(ys.size() - 1));
    double py = y0 + h - h * (ys[i] - ymin) / span;
    pts << px << ',' << py << ' ';
  }
  return "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\" points=\"" +
         pts.str() + "\"/>\n";
}

}  // namespace

void write_loss_plot(const std::vector<EpochLog>& log, const std::string& path) {
  std::vector<double> loss, gen, dev;
  for (const auto& e : log) {
    loss.push_back(e.loss_total);
    gen.push_back(e.loss_gen);
    if (e.dev_avg) dev.push_back(*e.dev_avg);
  }
  double lmax = 1e-9;
  for (double v : loss) lmax = std::max(lmax, v);
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\">\n"
      << "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n"
      << "<text x=\"20\" y=\"24\" font-family=\"sans-serif\">training loss (dark: total,"
         " light: generation)</text>\n"
      << "<rect x=\"40\" y=\"40\" width=\"560\" height=\"170\" fill=\"none\""
         " stroke=\"#999\"/>\n"
      << svg_polyline(loss, 40, 40, 560, 170, 0.0, lmax, "#205080")
      << svg_polyline(gen, 40, 40, 560, 170, 0.0, lmax, "#88aacc")
      << "<text x=\"20\" y=\"254\" font-family=\"sans-serif\">dev average F1</text>\n"
      << "<rect x=\"40\" y=\"270\" width=\"560\" height=\"170\" fill=\"none\""
         " stroke=\"#999\"/>\n"
      << svg_polyline(dev, 40, 270, 560, 170, 0.0, 1.0, "#208050") << "</svg>\n";
}

}  // namespace speechee
