#include "speechee/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "speechee/error.hpp"

using namespace speechee;

namespace {

// independent edit-distance oracle: plain recursion with memo
double wer_oracle(const std::vector<std::string>& ref,
                  const std::vector<std::string>& hyp) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go =
      [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == ref.size()) return hyp.size() - j;
    if (j == hyp.size()) return ref.size() - i;
    auto key = std::make_pair(i, j);
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    std::size_t best = go(i + 1, j + 1) + (ref[i] == hyp[j] ? 0 : 1);
    best = std::min(best, go(i + 1, j) + 1);
    best = std::min(best, go(i, j + 1) + 1);
    memo[key] = best;
    return best;
  };
  return static_cast<double>(go(0, 0)) / static_cast<double>(ref.size());
}

double mean_power(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

BuildOptions small_opts(int train = 24, int dev = 8, int test = 8) {
  BuildOptions opts;
  opts.sizes = {train, dev, test};
  opts.homophone_rate = 0.5;
  opts.rare_test_rate = 0.3;
  opts.two_event_rate = 0.1;
  opts.noise.kind = NoiseKind::kQuiet;
  opts.seed = 42;
  return opts;
}

}  // namespace

TEST_CASE("toy vocoder is deterministic and homophones coincide") {
  Lexicon lex = default_lexicon();
  VoiceProfile voice;
  NoiseProfile quiet;

  auto a = synthesize_clip({"miles", "met", "miles"}, lex, voice, quiet, 1);
  auto b = synthesize_clip({"miles", "met", "miles"}, lex, voice, quiet, 1);
  CHECK(a.samples == b.samples);

  // homophones ("miles"/"myles" share a pronunciation key) sound identical
  auto h1 = synthesize_clip({"miles"}, lex, voice, quiet, 1);
  auto h2 = synthesize_clip({"myles"}, lex, voice, quiet, 1);
  CHECK(h1.samples == h2.samples);

  // different keys differ
  auto d1 = word_segment("miles", lex, voice);
  auto d2 = word_segment("envoys", lex, voice);
  CHECK(d1 != d2);

  CHECK_THROWS_WITH_AS(synthesize_clip({"notaword"}, lex, voice, quiet, 1),
                       doctest::Contains("notaword"), Error);
  CHECK_THROWS_AS(synthesize_clip({}, lex, voice, quiet, 1), Error);
}

TEST_CASE("white noise lands within half a dB of the requested SNR") {
  Lexicon lex = default_lexicon();
  VoiceProfile voice;
  NoiseProfile quiet;
  NoiseProfile white{NoiseKind::kWhite, 0.0};

  std::vector<std::string> transcript = {"the", "soldiers", "attacked", "the", "convoy"};
  auto clean = synthesize_clip(transcript, lex, voice, quiet, 9);
  auto noisy = synthesize_clip(transcript, lex, voice, white, 9);
  REQUIRE(clean.samples.size() == noisy.samples.size());
  std::vector<double> noise(clean.samples.size());
  for (std::size_t i = 0; i < noise.size(); ++i)
    noise[i] = noisy.samples[i] - clean.samples[i];
  double snr = 10.0 * std::log10(mean_power(clean.samples) / mean_power(noise));
  CHECK(std::abs(snr - 0.0) < 0.5);
}

TEST_CASE("clip samples stay in range for every noise kind") {
  Lexicon lex = default_lexicon();
  VoiceProfile voice;
  for (NoiseKind kind :
       {NoiseKind::kQuiet, NoiseKind::kBabble, NoiseKind::kTonal, NoiseKind::kWhite}) {
    NoiseProfile noise{kind, 5.0};
    auto clip = synthesize_clip({"the", "convoy", "moved"}, lex, voice, noise, 3);
    for (double s : clip.samples) {
      REQUIRE(s <= 1.0);
      REQUIRE(s >= -1.0);
    }
  }
}

TEST_CASE("build_corpus honors sizes, determinism and invariants") {
  EventSchema schema = default_schema();
  Lexicon lex = default_lexicon();
  TemplateBank bank = default_template_bank();

  auto corpus = build_corpus(schema, bank, lex, small_opts());
  CHECK(corpus.size() == 40);
  CHECK(split_of(corpus, "train").size() == 24);
  CHECK(split_of(corpus, "dev").size() == 8);
  CHECK(split_of(corpus, "test").size() == 8);

  // identical seed, identical corpus (bit-exact samples pre-quantization)
  auto corpus2 = build_corpus(schema, bank, lex, small_opts());
  REQUIRE(corpus2.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(corpus[i].transcript == corpus2[i].transcript);
    CHECK(corpus[i].clip.samples == corpus2[i].clip.samples);
    CHECK(corpus[i].gold == corpus2[i].gold);
  }

  // gold mentions are substrings of the transcript word sequence
  for (const auto& ex : corpus) {
    validate_record_set(ex.gold, schema);
    for (const auto& rec : ex.gold.records) {
      for (const auto& [role, mention] : rec.arguments) {
        bool found = false;
        for (std::size_t s = 0; s + mention.size() <= ex.transcript.size(); ++s) {
          if (std::equal(mention.begin(), mention.end(), ex.transcript.begin() + s)) {
            found = true;
            break;
          }
        }
        CHECK(found);
      }
      CHECK(std::find(ex.transcript.begin(), ex.transcript.end(), rec.trigger[0]) !=
            ex.transcript.end());
    }
  }
}

TEST_CASE("homophone_rate zero excludes homophone-group mentions") {
  EventSchema schema = default_schema();
  Lexicon lex = default_lexicon();
  TemplateBank bank = default_template_bank();
  auto opts = small_opts(30, 10, 10);
  opts.homophone_rate = 0.0;

  std::set<std::string> homophone_words;
  for (const auto& g : lex.homophone_groups())
    for (const auto& w : g) homophone_words.insert(w);
  REQUIRE(!homophone_words.empty());

  for (const auto& ex : build_corpus(schema, bank, lex, opts)) {
    for (const auto& rec : ex.gold.records) {
      for (const auto& [role, mention] : rec.arguments) {
        for (const auto& w : mention) CHECK(homophone_words.count(w) == 0);
      }
    }
  }
}

TEST_CASE("rare entities appear exactly once in train") {
  EventSchema schema = default_schema();
  Lexicon lex = default_lexicon();
  TemplateBank bank = default_template_bank();
  auto corpus = build_corpus(schema, bank, lex, small_opts(60, 10, 20));

  std::map<std::string, int> train_counts;
  for (const auto& ex : corpus) {
    if (ex.split != "train") continue;
    for (const auto& rec : ex.gold.records)
      for (const auto& [role, mention] : rec.arguments)
        ++train_counts[join_tokens(mention)];
  }
  for (const auto& [role, mentions] : bank.rare_mentions) {
    for (const auto& m : mentions) {
      CHECK(train_counts[join_tokens(m)] == 1);
    }
  }
}

TEST_CASE("oversized split requests fail") {
  EventSchema schema = default_schema();
  Lexicon lex = default_lexicon();
  TemplateBank bank = default_template_bank();
  auto opts = small_opts();
  opts.two_event_rate = 0.0;
  opts.sizes.train = 100000000;
  CHECK_THROWS_WITH_AS(build_corpus(schema, bank, lex, opts),
                       doctest::Contains("capacity"), Error);
}

TEST_CASE("wer matches the brute-force oracle") {
  auto w = [](const char* s) { return split_tokens(s); };
  CHECK(wer(w("the cat sat"), w("the cat sat")) == 0.0);
  CHECK(wer(w("the cat sat"), w("")) == 1.0);
  CHECK(wer(w("the cat sat"), w("the bat sat")) == doctest::Approx(1.0 / 3).epsilon(1e-6));
  CHECK_THROWS_AS(wer({}, w("a")), Error);

  std::mt19937_64 rng(5);
  std::vector<std::string> alphabet = {"a", "b", "c", "d"};
  std::uniform_int_distribution<int> len(1, 8), pick(0, 3);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::string> ref, hyp;
    int nr = len(rng), nh = len(rng) - 1;
    for (int i = 0; i < nr; ++i) ref.push_back(alphabet[std::size_t(pick(rng))]);
    for (int i = 0; i < nh; ++i) hyp.push_back(alphabet[std::size_t(pick(rng))]);
    CHECK(wer(ref, hyp) == doctest::Approx(wer_oracle(ref, hyp)).epsilon(1e-4));
  }
}

TEST_CASE("wav and corpus directory roundtrip") {
  namespace fs = std::filesystem;
  EventSchema schema = default_schema();
  Lexicon lex = default_lexicon();
  TemplateBank bank = default_template_bank();
  auto corpus = build_corpus(schema, bank, lex, small_opts(4, 2, 2));

  std::string dir = "test_corpus_dir";
  save_corpus(corpus, schema, lex, dir);
  LoadedCorpus loaded = load_corpus(dir);
  REQUIRE(loaded.examples.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(loaded.examples[i].transcript == corpus[i].transcript);
    CHECK(loaded.examples[i].gold == corpus[i].gold);
    CHECK(loaded.examples[i].split == corpus[i].split);
    REQUIRE(loaded.examples[i].clip.samples.size() == corpus[i].clip.samples.size());
    for (std::size_t s = 0; s < corpus[i].clip.samples.size(); ++s) {
      CHECK(std::abs(loaded.examples[i].clip.samples[s] - corpus[i].clip.samples[s]) <=
            std::pow(2.0, -15.0));
    }
  }

  SUBCASE("missing wav names the record") {
    fs::remove(fs::path(dir) / "wav" / (corpus[0].clip.id + ".wav"));
    CHECK_THROWS_WITH_AS(load_corpus(dir), doctest::Contains(corpus[0].clip.id.c_str()), Error);
  }
  SUBCASE("corrupt jsonl names the line") {
    std::ofstream out(fs::path(dir) / "corpus.jsonl", std::ios::app);
    out << "{broken\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_corpus(dir), doctest::Contains("line"), Error);
  }
  fs::remove_all(dir);
}

TEST_CASE("empty corpus saves and loads") {
  namespace fs = std::filesystem;
  std::string dir = "test_corpus_empty";
  save_corpus({}, default_schema(), default_lexicon(), dir);
  LoadedCorpus loaded = load_corpus(dir);
  CHECK(loaded.examples.empty());
  fs::remove_all(dir);
}

TEST_CASE("default lexicon stays inside the desk-scale budget") {
  CHECK(default_lexicon().size() <= 50);
  CHECK(default_lexicon().homophone_groups().size() >= 3);
}
