// Command line front end: corpus synthesis, dictionary building, training,
// evaluation, scoring, the pipeline baseline and training plots.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "speechee/error.hpp"
#include "speechee/harness.hpp"

namespace fs = std::filesystem;
using namespace speechee;

namespace {

std::uint64_t resolve_seed(const CLI::Option* seed_opt, std::uint64_t flag_value,
                           const Config& cfg) {
  if (seed_opt->count() > 0) return flag_value;
  if (cfg.has("train.seed")) return static_cast<std::uint64_t>(cfg.get_int("train.seed", 0));
  if (const char* env = std::getenv("SPEECHEE_SEED")) {
    return static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
  }
  return 0;
}

// leftover "--key value" args become config overrides
void apply_extras(Config& cfg, std::vector<std::string> extras) {
  std::reverse(extras.begin(), extras.end());  // CLI11 yields them reversed
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || i + 1 >= extras.size())
      throw Error("unrecognized argument '" + arg + "' (config overrides are --key value)");
    cfg.set(arg.substr(2), extras[i + 1]);
    ++i;
  }
}

CorpusSizes parse_sizes(const std::string& text) {
  CorpusSizes sizes;
  if (std::sscanf(text.c_str(), "%d,%d,%d", &sizes.train, &sizes.dev, &sizes.test) != 3)
    throw Error("--sizes expects train,dev,test (e.g. 800,100,100)");
  return sizes;
}

void apply_external_transcripts(std::vector<CorpusExample>& examples,
                                const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open transcripts '" + path + "'");
  std::map<std::string, std::vector<std::string>> by_id;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      by_id[j.at("id").get<std::string>()] =
          split_tokens(j.at("transcript").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  for (auto& ex : examples) {
    auto it = by_id.find(ex.clip.id);
    if (it != by_id.end()) ex.transcript = it->second;
  }
}

int run_synthesize(const std::string& out_dir, const std::string& schema_path,
                   const std::string& sizes_text, double homophone_rate,
                   double rare_test_rate, double two_event_rate,
                   const std::string& noise_kind, double snr_db, std::uint64_t seed) {
  EventSchema schema =
      schema_path.empty() ? default_schema() : EventSchema::from_json_file(schema_path);
  Lexicon lexicon = default_lexicon();
  TemplateBank bank = default_template_bank();
  BuildOptions opts;
  opts.sizes = parse_sizes(sizes_text);
  opts.homophone_rate = homophone_rate;
  opts.rare_test_rate = rare_test_rate;
  opts.two_event_rate = two_event_rate;
  opts.noise.kind = noise_kind_from_string(noise_kind);
  opts.noise.snr_db = snr_db;
  opts.seed = seed;
  auto corpus = build_corpus(schema, bank, lexicon, opts);
  save_corpus(corpus, schema, lexicon, out_dir);
  std::cout << "wrote " << corpus.size() << " clips to " << out_dir << "\n";
  return 0;
}

int run_dict_build(const std::string& corpus_path, const std::string& out_path,
                   const std::string& split) {
  std::ifstream in(corpus_path);
  if (!in) throw Error("cannot open '" + corpus_path + "'");
  std::vector<RecordSet> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (j.contains("split") && j.at("split").get<std::string>() != split) continue;
      records.push_back(record_set_from_json(j.at("records").dump()));
    } catch (const nlohmann::json::exception& e) {
      throw Error(corpus_path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  EntityDictionary dict = build_entity_dictionary(records);
  dict.save_text(out_path);
  std::cout << "wrote " << (dict.size() - 1) << " entries to " << out_path << "\n";
  return 0;
}

int run_train(const std::string& corpus_dir, const std::string& out_dir,
              const std::string& dict_path, Config cfg, bool text_modality,
              bool no_cl, bool no_su, bool no_ed, std::uint64_t seed, bool verbose,
              const std::string& transcripts_path) {
  LoadedCorpus corpus = load_corpus(corpus_dir);
  if (!transcripts_path.empty())
    apply_external_transcripts(corpus.examples, transcripts_path);
  ModelConfig mcfg = model_config_from(cfg);
  TrainConfig tcfg = train_config_from(cfg);
  tcfg.seed = seed;
  tcfg.verbose = verbose || tcfg.verbose;
  if (text_modality) mcfg.modality = Modality::kText;
  if (no_cl) mcfg.use_cl = false;
  if (no_su) mcfg.use_shrink = false;
  if (no_ed) mcfg.use_ed = false;

  EntityDictionary dict;
  const EntityDictionary* dict_ptr = nullptr;
  if (!dict_path.empty()) {
    dict = EntityDictionary::load_text(dict_path);
    dict_ptr = &dict;
  }
  Checkpoint ckpt = train(corpus.examples, corpus.schema, corpus.lexicon, dict_ptr,
                          mcfg, tcfg);
  ckpt.save(out_dir);
  std::cout << "checkpoint saved to " << out_dir << " (best epoch " << ckpt.best_epoch
            << ")\n";
  return 0;
}

int run_eval(const std::string& ckpt_dir, const std::string& corpus_dir,
             const std::string& split, const std::string& report_path,
             const std::string& pred_path, bool unconstrained) {
  Checkpoint ckpt = Checkpoint::load(ckpt_dir);
  LoadedCorpus corpus = load_corpus(corpus_dir);
  EvalOptions opts;
  opts.unconstrained = unconstrained;
  EvalResult result = evaluate(*ckpt.model, split_of(corpus.examples, split), opts);
  std::string json = report_to_json(result.report);
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    out << json << '\n';
  }
  if (!pred_path.empty()) save_jsonl(result.predictions, pred_path);
  std::cout << json << "\n";
  return 0;
}

int run_score(const std::string& gold_path, const std::string& pred_path,
              const std::string& out_path, const std::string& schema_path) {
  auto golds_list = load_jsonl(gold_path);
  auto preds_list = load_jsonl(pred_path);
  std::map<std::string, RecordSet> golds, preds;
  for (auto& l : golds_list) golds[l.id] = l.records;
  for (auto& l : preds_list) preds[l.id] = l.records;
  int types = 0;
  if (!schema_path.empty()) {
    types = static_cast<int>(EventSchema::from_json_file(schema_path).event_types().size());
  }
  MetricReport report = score(preds, golds, types);
  std::string json = report_to_json(report);
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << json << '\n';
  }
  std::cout << json << "\n";
  return 0;
}

int run_pipeline(const std::string& corpus_dir, const std::string& text_ckpt,
                 const std::string& split, double asr_rate, std::uint64_t seed,
                 const std::string& report_path, const std::string& transcripts_path) {
  if (text_ckpt.empty()) throw Error("pipeline: --text-ckpt is required");
  Checkpoint ckpt = Checkpoint::load(text_ckpt);
  LoadedCorpus corpus = load_corpus(corpus_dir);
  if (!transcripts_path.empty())
    apply_external_transcripts(corpus.examples, transcripts_path);
  auto confusions = homophone_confusions(corpus.lexicon);
  EvalResult result = pipeline_run(*ckpt.model, split_of(corpus.examples, split),
                                   confusions, asr_rate, seed);
  std::string json = report_to_json(result.report);
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    out << json << '\n';
  }
  std::cout << json << "\n";
  return 0;
}

int run_report_plot(const std::string& ckpt_dir, const std::string& out_path) {
  Checkpoint ckpt = Checkpoint::load(ckpt_dir);
  write_loss_plot(ckpt.log, out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speech event extraction workbench"};
  app.require_subcommand(1);

  // synthesize
  auto* syn = app.add_subcommand("synthesize", "generate a synthetic speech corpus");
  std::string syn_out, syn_schema, syn_sizes = "800,100,100", syn_noise = "white";
  double syn_homophone = 0.5, syn_rare = 0.3, syn_two_event = 0.1, syn_snr = 20.0;
  std::uint64_t syn_seed = 0;
  syn->add_option("--out", syn_out, "output directory")->required();
  syn->add_option("--schema", syn_schema, "schema JSON (default: built-in)");
  syn->add_option("--sizes", syn_sizes, "train,dev,test counts");
  syn->add_option("--homophone-rate", syn_homophone, "homophone slot fill rate");
  syn->add_option("--rare-test-rate", syn_rare, "rare entity rate in dev/test");
  syn->add_option("--two-event-rate", syn_two_event, "two-event clip rate");
  syn->add_option("--noise", syn_noise, "quiet|babble|tonal|white");
  syn->add_option("--snr", syn_snr, "signal-to-noise ratio (dB)");
  auto* syn_seed_opt = syn->add_option("--seed", syn_seed, "corpus seed");

  // dict-build
  auto* db = app.add_subcommand("dict-build", "build the entity dictionary");
  std::string db_corpus, db_out, db_split = "train";
  db->add_option("--corpus", db_corpus, "corpus JSONL file")->required();
  db->add_option("--out", db_out, "output dictionary file")->required();
  db->add_option("--split", db_split, "split to read");

  // train
  auto* tr = app.add_subcommand("train", "train an extraction model");
  tr->allow_extras();
  std::string tr_corpus, tr_out, tr_dict, tr_config, tr_transcripts;
  bool tr_text = false, tr_no_cl = false, tr_no_su = false, tr_no_ed = false;
  bool tr_unused_unconstrained = false, tr_verbose = false;
  std::uint64_t tr_seed = 0;
  tr->add_option("--corpus", tr_corpus, "corpus directory")->required();
  tr->add_option("--out", tr_out, "checkpoint directory")->required();
  tr->add_option("--dict", tr_dict, "entity dictionary file (default: built from train)");
  tr->add_option("--config", tr_config, "flat key = value config file");
  tr->add_option("--transcripts", tr_transcripts, "external transcripts JSONL");
  tr->add_flag("--text", tr_text, "train the pipeline's text model");
  tr->add_flag("--no-cl", tr_no_cl, "disable contrastive learning");
  tr->add_flag("--no-su,--no-shrink", tr_no_su, "disable the Shrinking Unit");
  tr->add_flag("--no-ed", tr_no_ed, "disable the Entity Dictionary");
  tr->add_flag("--verbose", tr_verbose, "per-epoch log lines");
  auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "training seed");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  std::string ev_ckpt, ev_corpus, ev_split = "test", ev_out, ev_pred;
  bool ev_unconstrained = false;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint directory")->required();
  ev->add_option("--corpus", ev_corpus, "corpus directory")->required();
  ev->add_option("--split", ev_split, "split name");
  ev->add_option("--out", ev_out, "report JSON path");
  ev->add_option("--pred-out", ev_pred, "predictions JSONL path");
  ev->add_flag("--unconstrained", ev_unconstrained, "greedy decoding without the grammar");

  // score
  auto* sc = app.add_subcommand("score", "score predictions against gold");
  std::string sc_gold, sc_pred, sc_out, sc_schema;
  sc->add_option("--gold", sc_gold, "gold JSONL")->required();
  sc->add_option("--pred", sc_pred, "prediction JSONL")->required();
  sc->add_option("--out", sc_out, "report JSON path");
  sc->add_option("--schema", sc_schema, "schema JSON (drives TC availability)");

  // pipeline
  auto* pl = app.add_subcommand("pipeline", "ASR + text extraction baseline");
  std::string pl_corpus, pl_ckpt, pl_split = "test", pl_out, pl_transcripts;
  double pl_rate = 0.2;
  std::uint64_t pl_seed = 0;
  pl->add_option("--corpus", pl_corpus, "corpus directory")->required();
  pl->add_option("--text-ckpt", pl_ckpt, "text model checkpoint");
  pl->add_option("--split", pl_split, "split name");
  pl->add_option("--asr-rate", pl_rate, "simulated ASR word error rate");
  pl->add_option("--out", pl_out, "report JSON path");
  pl->add_option("--transcripts", pl_transcripts, "external transcripts JSONL");
  auto* pl_seed_opt = pl->add_option("--seed", pl_seed, "corruption seed");

  // report-plot
  auto* rp = app.add_subcommand("report-plot", "training curves as an SVG image");
  std::string rp_ckpt, rp_out = "training.svg";
  rp->add_option("--ckpt", rp_ckpt, "checkpoint directory")->required();
  rp->add_option("--out", rp_out, "output SVG path");

  (void)tr_unused_unconstrained;
  CLI11_PARSE(app, argc, argv);

  try {
    if (syn->parsed()) {
      Config cfg;
      return run_synthesize(syn_out, syn_schema, syn_sizes, syn_homophone, syn_rare,
                            syn_two_event, syn_noise, syn_snr,
                            resolve_seed(syn_seed_opt, syn_seed, cfg));
    }
    if (db->parsed()) return run_dict_build(db_corpus, db_out, db_split);
    if (tr->parsed()) {
      Config cfg;
      if (!tr_config.empty()) cfg = Config::from_file(tr_config);
      apply_extras(cfg, tr->remaining());
      return run_train(tr_corpus, tr_out, tr_dict, cfg, tr_text, tr_no_cl, tr_no_su,
                       tr_no_ed, resolve_seed(tr_seed_opt, tr_seed, cfg), tr_verbose,
                       tr_transcripts);
    }
    if (ev->parsed())
      return run_eval(ev_ckpt, ev_corpus, ev_split, ev_out, ev_pred, ev_unconstrained);
    if (sc->parsed()) return run_score(sc_gold, sc_pred, sc_out, sc_schema);
    if (pl->parsed()) {
      Config cfg;
      return run_pipeline(pl_corpus, pl_ckpt, pl_split, pl_rate,
                          resolve_seed(pl_seed_opt, pl_seed, cfg), pl_out,
                          pl_transcripts);
    }
    if (rp->parsed()) return run_report_plot(rp_ckpt, rp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
