#ifndef SPEECHEE_CORPUS_HPP_
#define SPEECHEE_CORPUS_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "speechee/schema.hpp"

namespace speechee {

// Raw mono waveform, samples in [-1, 1].
struct AcousticClip {
  std::vector<double> samples;
  int sample_rate = 16000;
  std::string id;

  double duration_sec() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

struct VoiceProfile {
  double base_frequency = 150.0;  // Hz
  double speaking_rate = 1.0;     // scales per-word duration
  double amplitude = 0.25;
};

enum class NoiseKind { kQuiet, kBabble, kTonal, kWhite };

struct NoiseProfile {
  NoiseKind kind = NoiseKind::kQuiet;
  double snr_db = 20.0;  // ignored for quiet
};

NoiseKind noise_kind_from_string(const std::string& s);
std::string noise_kind_to_string(NoiseKind k);

// Word list with pronunciation keys; words sharing a key are homophones and
// synthesize to identical clean audio.
class Lexicon {
 public:
  void add(const std::string& word, const std::string& pron_key);
  bool contains(const std::string& word) const;
  const std::string& pron_key(const std::string& word) const;
  std::vector<std::string> words() const;           // sorted
  std::vector<std::vector<std::string>> homophone_groups() const;  // size >= 2 only
  std::size_t size() const { return key_by_word_.size(); }

  std::string to_json_text() const;
  static Lexicon from_json_text(const std::string& text);

 private:
  std::map<std::string, std::string> key_by_word_;
};

struct CorpusExample {
  AcousticClip clip;
  std::vector<std::string> transcript;
  RecordSet gold;
  std::string split;  // train|dev|test
  VoiceProfile voice;
  NoiseProfile noise;
};

// Deterministic toy vocoder: each word becomes a fixed sinusoid chord keyed
// by its lexicon pronunciation key, so homophones are acoustically identical.
AcousticClip synthesize_clip(const std::vector<std::string>& transcript,
                             const Lexicon& lexicon, const VoiceProfile& voice,
                             const NoiseProfile& noise, std::uint64_t seed);

// Clean per-word segment (before noise), exposed for confusability checks.
std::vector<double> word_segment(const std::string& word, const Lexicon& lexicon,
                                 const VoiceProfile& voice, int sample_rate = 16000);

// One sentence pattern: literal words plus role slots filled from mention pools.
struct SentenceTemplate {
  std::string event_type;
  std::string trigger;                    // single trigger word in the pattern
  std::vector<std::string> pattern;      // words; "{role}" marks a slot
  // Every "{role}" in pattern must appear here in order.
  std::vector<std::string> slot_roles;
};

struct TemplateBank {
  std::vector<SentenceTemplate> templates;
  // role -> candidate mentions (each mention = 1..n words)
  std::map<std::string, std::vector<std::vector<std::string>>> mention_pool;
  // mentions used exactly once in train (Entity Dictionary feedstock),
  // role -> mentions
  std::map<std::string, std::vector<std::vector<std::string>>> rare_mentions;
  // fraction of eligible slots drawn from homophone-group words is the
  // builder's homophone_rate; pools may include homophones directly
};

struct CorpusSizes {
  int train = 0;
  int dev = 0;
  int test = 0;
  int total() const { return train + dev + test; }
};

struct BuildOptions {
  CorpusSizes sizes;
  double homophone_rate = 0.5;   // fraction of slot fills drawn from homophone groups
  double rare_test_rate = 0.3;   // fraction of dev/test slot fills using rare mentions
  double two_event_rate = 0.1;   // fraction of clips with two concatenated events
  NoiseProfile noise;
  std::uint64_t seed = 0;
};

std::vector<CorpusExample> build_corpus(const EventSchema& schema,
                                        const TemplateBank& bank, const Lexicon& lexicon,
                                        const BuildOptions& opts);

// Word error rate: word-level Levenshtein distance / |reference|.
double wer(const std::vector<std::string>& reference,
           const std::vector<std::string>& hypothesis);

// 16-bit PCM mono WAV.
void save_wav(const AcousticClip& clip, const std::string& path);
AcousticClip load_wav(const std::string& path);

// Directory layout: corpus.jsonl + schema.json + lexicon.json + wav/<id>.wav
void save_corpus(const std::vector<CorpusExample>& corpus, const EventSchema& schema,
                 const Lexicon& lexicon, const std::string& dir);

struct LoadedCorpus {
  std::vector<CorpusExample> examples;
  EventSchema schema;
  Lexicon lexicon;
};

LoadedCorpus load_corpus(const std::string& dir);

std::vector<const CorpusExample*> split_of(const std::vector<CorpusExample>& corpus,
                                           const std::string& split);

// The stock desk-scale setup used by the CLI and experiments: three event
// types, homophone pairs, and rare entities for the dictionary.
EventSchema default_schema();
Lexicon default_lexicon();
TemplateBank default_template_bank();

}  // namespace speechee

#endif  // SPEECHEE_CORPUS_HPP_
