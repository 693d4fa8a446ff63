#include "speechee/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "speechee/error.hpp"
#include "speechee/rng.hpp"

namespace speechee {

namespace fs = std::filesystem;

NoiseKind noise_kind_from_string(const std::string& s) {
  if (s == "quiet") return NoiseKind::kQuiet;
  if (s == "babble") return NoiseKind::kBabble;
  if (s == "tonal") return NoiseKind::kTonal;
  if (s == "white") return NoiseKind::kWhite;
  throw Error("unknown noise kind '" + s + "'");
}

std::string noise_kind_to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::kQuiet: return "quiet";
    case NoiseKind::kBabble: return "babble";
    case NoiseKind::kTonal: return "tonal";
    case NoiseKind::kWhite: return "white";
  }
  return "quiet";
}

void Lexicon::add(const std::string& word, const std::string& pron_key) {
  if (word.empty() || pron_key.empty()) throw Error("lexicon: empty word or key");
  key_by_word_[word] = pron_key;
}

bool Lexicon::contains(const std::string& word) const {
  return key_by_word_.count(word) > 0;
}

const std::string& Lexicon::pron_key(const std::string& word) const {
  auto it = key_by_word_.find(word);
  if (it == key_by_word_.end())
    throw Error("out-of-lexicon word: '" + word + "'");
  return it->second;
}

std::vector<std::string> Lexicon::words() const {
  std::vector<std::string> out;
  for (const auto& [w, _] : key_by_word_) out.push_back(w);
  return out;
}

std::vector<std::vector<std::string>> Lexicon::homophone_groups() const {
  std::map<std::string, std::vector<std::string>> by_key;
  for (const auto& [w, k] : key_by_word_) by_key[k].push_back(w);
  std::vector<std::vector<std::string>> out;
  for (auto& [_, group] : by_key) {
    if (group.size() >= 2) out.push_back(group);
  }
  return out;
}

std::string Lexicon::to_json_text() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [w, k] : key_by_word_) j[w] = k;
  return j.dump();
}

Lexicon Lexicon::from_json_text(const std::string& text) {
  Lexicon lex;
  nlohmann::json j = nlohmann::json::parse(text);
  for (auto it = j.begin(); it != j.end(); ++it) {
    lex.add(it.key(), it.value().get<std::string>());
  }
  return lex;
}

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kWordGapSec = 0.02;

struct Chord {
  double freqs[3];
  double amps[3];
  double phases[3];
  double duration_sec;
};

// Pronunciation key -> fixed chord. Homophones share the key and therefore
// the exact same clean waveform for a given voice.
Chord chord_for_key(const std::string& key, const VoiceProfile& voice) {
  Chord c;
  std::uint64_t h = hash_string(key);
  double base_scale = voice.base_frequency / 150.0;
  double amp_left = 1.0;
  for (int i = 0; i < 3; ++i) {
    h = splitmix64(h);
    c.freqs[i] = base_scale * (180.0 + static_cast<double>(h % 1800));
    h = splitmix64(h);
    c.phases[i] = 2.0 * kPi * static_cast<double>(h % 1000) / 1000.0;
    double a = (i == 2) ? amp_left : amp_left * (0.45 + 0.001 * static_cast<double>(h % 300));
    c.amps[i] = a;
    amp_left -= a;
  }
  h = splitmix64(h);
  c.duration_sec = (0.10 + 0.01 * static_cast<double>(h % 5)) * voice.speaking_rate;
  return c;
}

void append_word(std::vector<double>& out, const Chord& c, const VoiceProfile& voice,
                 int sample_rate) {
  int n = static_cast<int>(std::lround(c.duration_sec * sample_rate));
  for (int i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / sample_rate;
    double env = std::sin(kPi * static_cast<double>(i) / n);  // hann-like onset/offset
    double x = 0.0;
    for (int p = 0; p < 3; ++p) {
      x += c.amps[p] * std::sin(2.0 * kPi * c.freqs[p] * t + c.phases[p]);
    }
    out.push_back(voice.amplitude * env * x);
  }
}

std::vector<double> make_noise(std::size_t n, NoiseKind kind, int sample_rate,
                               std::mt19937_64& rng) {
  std::vector<double> noise(n, 0.0);
  if (kind == NoiseKind::kQuiet) return noise;
  if (kind == NoiseKind::kWhite) {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& x : noise) x = dist(rng);
    return noise;
  }
  if (kind == NoiseKind::kTonal) {
    std::uniform_real_distribution<double> ph(0.0, 2.0 * kPi);
    double p1 = ph(rng), p2 = ph(rng), p3 = ph(rng);
    for (std::size_t i = 0; i < n; ++i) {
      double t = static_cast<double>(i) / sample_rate;
      noise[i] = std::sin(2 * kPi * 120.0 * t + p1) + 0.5 * std::sin(2 * kPi * 240.0 * t + p2) +
                 0.25 * std::sin(2 * kPi * 360.0 * t + p3);
    }
    return noise;
  }
  // babble: a handful of gated wandering tones
  std::uniform_real_distribution<double> fdist(150.0, 900.0);
  std::uniform_real_distribution<double> ph(0.0, 2.0 * kPi);
  for (int v = 0; v < 6; ++v) {
    double f = fdist(rng);
    double gate_f = 1.5 + 0.7 * v;
    double p = ph(rng), gp = ph(rng);
    for (std::size_t i = 0; i < n; ++i) {
      double t = static_cast<double>(i) / sample_rate;
      double gate = 0.5 * (1.0 + std::sin(2 * kPi * gate_f * t + gp));
      noise[i] += gate * std::sin(2 * kPi * f * t + p) / 6.0;
    }
  }
  return noise;
}

double mean_power(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

}  // namespace

std::vector<double> word_segment(const std::string& word, const Lexicon& lexicon,
                                 const VoiceProfile& voice, int sample_rate) {
  Chord c = chord_for_key(lexicon.pron_key(word), voice);
  std::vector<double> out;
  append_word(out, c, voice, sample_rate);
  return out;
}

AcousticClip synthesize_clip(const std::vector<std::string>& transcript,
                             const Lexicon& lexicon, const VoiceProfile& voice,
                             const NoiseProfile& noise, std::uint64_t seed) {
  if (transcript.empty()) throw Error("synthesize_clip: empty transcript");
  const int sample_rate = 16000;
  std::vector<double> samples;
  const int gap = static_cast<int>(std::lround(kWordGapSec * sample_rate));
  for (std::size_t i = 0; i < transcript.size(); ++i) {
    if (i) samples.insert(samples.end(), gap, 0.0);
    Chord c = chord_for_key(lexicon.pron_key(transcript[i]), voice);
    append_word(samples, c, voice, sample_rate);
  }
  if (noise.kind != NoiseKind::kQuiet) {
    if (!std::isfinite(noise.snr_db)) throw Error("synthesize_clip: non-finite snr_db");
    auto rng = make_rng(seed, "noise");
    std::vector<double> n = make_noise(samples.size(), noise.kind, sample_rate, rng);
    double psig = mean_power(samples);
    double pnoise = mean_power(n);
    if (pnoise > 0.0 && psig > 0.0) {
      double target = psig / std::pow(10.0, noise.snr_db / 10.0);
      double scale = std::sqrt(target / pnoise);
      for (std::size_t i = 0; i < samples.size(); ++i) samples[i] += scale * n[i];
    }
  }
  double peak = 0.0;
  for (double v : samples) peak = std::max(peak, std::abs(v));
  if (peak > 1.0) {
    for (double& v : samples) v /= peak;
  }
  AcousticClip clip;
  clip.samples = std::move(samples);
  clip.sample_rate = sample_rate;
  return clip;
}

double wer(const std::vector<std::string>& reference,
           const std::vector<std::string>& hypothesis) {
  if (reference.empty()) throw Error("wer: empty reference");
  const std::size_t n = reference.size(), m = hypothesis.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  std::iota(prev.begin(), prev.end(), 0);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = prev[j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[m]) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// corpus builder

namespace {

struct SlotFill {
  std::vector<std::vector<std::string>> mentions;  // per slot
};

bool in_homophone_group(const std::vector<std::string>& mention, const Lexicon& lex,
                        const std::set<std::string>& homophone_words) {
  for (const auto& w : mention)
    if (homophone_words.count(w)) return true;
  return false;
}

struct Instantiated {
  std::vector<std::string> words;
  EventRecord record;
};

Instantiated instantiate(const SentenceTemplate& tpl,
                         const std::vector<std::vector<std::string>>& fills) {
  Instantiated out;
  out.record.event_type = tpl.event_type;
  out.record.trigger = {tpl.trigger};
  std::size_t slot = 0;
  for (const auto& tok : tpl.pattern) {
    if (tok.size() >= 2 && tok.front() == '{' && tok.back() == '}') {
      const auto& mention = fills.at(slot);
      for (const auto& w : mention) out.words.push_back(w);
      out.record.arguments.emplace_back(tpl.slot_roles.at(slot), mention);
      ++slot;
    } else {
      out.words.push_back(tok);
    }
  }
  return out;
}

std::uint64_t capacity_of(const TemplateBank& bank) {
  std::uint64_t total = 0;
  for (const auto& tpl : bank.templates) {
    std::uint64_t combos = 1;
    for (const auto& role : tpl.slot_roles) {
      auto it = bank.mention_pool.find(role);
      std::uint64_t pool = it == bank.mention_pool.end() ? 0 : it->second.size();
      auto rit = bank.rare_mentions.find(role);
      if (rit != bank.rare_mentions.end()) pool += rit->second.size();
      if (pool == 0) return 0;
      combos = std::min<std::uint64_t>(combos * pool, 1ULL << 40);
    }
    total = std::min<std::uint64_t>(total + combos, 1ULL << 40);
  }
  return total;
}

}  // namespace

std::vector<CorpusExample> build_corpus(const EventSchema& schema,
                                        const TemplateBank& bank, const Lexicon& lexicon,
                                        const BuildOptions& opts) {
  // validate the bank against the schema up front
  for (const auto& tpl : bank.templates) {
    if (!schema.has_type(tpl.event_type))
      throw ValidationError("template bank: unknown event type '" + tpl.event_type + "'");
    for (const auto& role : tpl.slot_roles) {
      if (!schema.has_role(tpl.event_type, role))
        throw ValidationError("template bank: role '" + role + "' not valid for type '" +
                              tpl.event_type + "'");
      if (!bank.mention_pool.count(role) || bank.mention_pool.at(role).empty())
        throw ValidationError("template bank: empty mention pool for role '" + role + "'");
    }
  }

  std::uint64_t capacity = capacity_of(bank);
  if (opts.two_event_rate > 0.0)
    capacity = std::min<std::uint64_t>(capacity * capacity, 1ULL << 40);
  for (int size : {opts.sizes.train, opts.sizes.dev, opts.sizes.test}) {
    if (size < 0) throw Error("build_corpus: negative split size");
    if (static_cast<std::uint64_t>(size) > capacity)
      throw Error("build_corpus: split size exceeds template capacity");
  }

  std::set<std::string> homophone_words;
  for (const auto& group : lexicon.homophone_groups())
    for (const auto& w : group) homophone_words.insert(w);

  // Rare mentions: each appears exactly once in train. Homophone rares are
  // excluded entirely when homophone_rate is zero.
  struct RareEntry {
    std::string role;
    std::vector<std::string> mention;
  };
  std::vector<RareEntry> rares;
  for (const auto& [role, mentions] : bank.rare_mentions) {
    for (const auto& m : mentions) {
      if (opts.homophone_rate <= 0.0 && in_homophone_group(m, lexicon, homophone_words))
        continue;
      rares.push_back({role, m});
    }
  }

  auto rng = make_rng(opts.seed, "build");
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  // voice bank
  const double f0s[] = {115.0, 150.0, 195.0, 250.0};
  const double rates[] = {0.9, 1.0, 1.15};

  auto pick_mention = [&](const std::string& role,
                          bool allow_rare) -> std::vector<std::string> {
    const auto& pool = bank.mention_pool.at(role);
    std::vector<const std::vector<std::string>*> homos, plains;
    for (const auto& m : pool) {
      (in_homophone_group(m, lexicon, homophone_words) ? homos : plains).push_back(&m);
    }
    if (allow_rare && coin(rng) < opts.rare_test_rate) {
      std::vector<const RareEntry*> cands;
      for (const auto& r : rares)
        if (r.role == role) cands.push_back(&r);
      if (!cands.empty()) {
        std::uniform_int_distribution<std::size_t> d(0, cands.size() - 1);
        return cands[d(rng)]->mention;
      }
    }
    bool want_homo = !homos.empty() && coin(rng) < opts.homophone_rate;
    const auto& source = want_homo ? homos : (plains.empty() ? homos : plains);
    if (opts.homophone_rate <= 0.0 && source.empty())
      throw Error("build_corpus: role '" + role + "' has only homophone mentions");
    std::uniform_int_distribution<std::size_t> d(0, source.size() - 1);
    return *source[d(rng)];
  };

  auto pick_template = [&](const std::string* required_role) -> const SentenceTemplate& {
    std::vector<const SentenceTemplate*> cands;
    for (const auto& tpl : bank.templates) {
      if (required_role == nullptr ||
          std::find(tpl.slot_roles.begin(), tpl.slot_roles.end(), *required_role) !=
              tpl.slot_roles.end()) {
        cands.push_back(&tpl);
      }
    }
    if (cands.empty()) throw Error("build_corpus: no template provides required role");
    std::uniform_int_distribution<std::size_t> d(0, cands.size() - 1);
    return *cands[d(rng)];
  };

  struct Planned {
    std::string split;
    int index;
    const RareEntry* rare = nullptr;  // train-only scheduled rare injection
  };
  std::vector<Planned> plan;
  for (int i = 0; i < opts.sizes.train; ++i) plan.push_back({"train", i, nullptr});
  for (int i = 0; i < opts.sizes.dev; ++i) plan.push_back({"dev", i, nullptr});
  for (int i = 0; i < opts.sizes.test; ++i) plan.push_back({"test", i, nullptr});

  if (!rares.empty() && opts.sizes.train > 0) {
    // distinct train indices hosting exactly one rare mention each
    std::vector<int> idx(static_cast<std::size_t>(opts.sizes.train));
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t r = 0; r < rares.size() && r < idx.size(); ++r) {
      plan[static_cast<std::size_t>(idx[r])].rare = &rares[r];
    }
  }

  std::vector<CorpusExample> corpus;
  corpus.reserve(plan.size());
  for (const auto& p : plan) {
    CorpusExample ex;
    ex.split = p.split;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%05d", p.split.c_str(), p.index);
    std::string id = buf;

    bool two_events = p.rare == nullptr && coin(rng) < opts.two_event_rate;
    std::vector<Instantiated> parts;
    int n_events = two_events ? 2 : 1;
    for (int e = 0; e < n_events; ++e) {
      const SentenceTemplate& tpl =
          pick_template(e == 0 && p.rare ? &p.rare->role : nullptr);
      std::vector<std::vector<std::string>> fills;
      bool rare_used = false;
      for (const auto& role : tpl.slot_roles) {
        if (e == 0 && p.rare && !rare_used && role == p.rare->role) {
          fills.push_back(p.rare->mention);
          rare_used = true;
        } else {
          fills.push_back(pick_mention(role, p.split != "train"));
        }
      }
      parts.push_back(instantiate(tpl, fills));
    }
    for (std::size_t e = 0; e < parts.size(); ++e) {
      if (e) ex.transcript.push_back("and");
      ex.transcript.insert(ex.transcript.end(), parts[e].words.begin(),
                           parts[e].words.end());
      ex.gold.records.push_back(parts[e].record);
    }

    std::uniform_int_distribution<int> fd(0, 3), rd(0, 2);
    ex.voice.base_frequency = f0s[fd(rng)];
    ex.voice.speaking_rate = rates[rd(rng)];
    ex.voice.amplitude = 0.25;
    ex.noise = opts.noise;

    std::uint64_t clip_seed = splitmix64(opts.seed ^ hash_string(id));
    ex.clip = synthesize_clip(ex.transcript, lexicon, ex.voice, ex.noise, clip_seed);
    ex.clip.id = id;
    corpus.push_back(std::move(ex));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// WAV + corpus serialization

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

void save_wav(const AcousticClip& clip, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_bytes = n * 2;
  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (double x : clip.samples) {
    double c = std::clamp(x, -1.0, 1.0);
    auto s = static_cast<std::int16_t>(std::lround(c * 32767.0));
    char b[2] = {static_cast<char>(s & 0xff), static_cast<char>((s >> 8) & 0xff)};
    out.write(b, 2);
  }
}

AcousticClip load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw Error("'" + path + "' is not a RIFF/WAVE file");
  AcousticClip clip;
  std::size_t pos = 12;
  bool have_fmt = false, have_data = false;
  while (pos + 8 <= bytes.size()) {
    std::string tag(reinterpret_cast<char*>(bytes.data() + pos), 4);
    std::uint32_t size = get_u32(bytes.data() + pos + 4);
    pos += 8;
    if (pos + size > bytes.size()) throw Error("'" + path + "': truncated chunk");
    if (tag == "fmt ") {
      if (size < 16) throw Error("'" + path + "': bad fmt chunk");
      if (get_u16(bytes.data() + pos) != 1 || get_u16(bytes.data() + pos + 2) != 1 ||
          get_u16(bytes.data() + pos + 14) != 16)
        throw Error("'" + path + "': expected 16-bit PCM mono");
      clip.sample_rate = static_cast<int>(get_u32(bytes.data() + pos + 4));
      have_fmt = true;
    } else if (tag == "data") {
      clip.samples.reserve(size / 2);
      for (std::uint32_t i = 0; i + 1 < size; i += 2) {
        auto s = static_cast<std::int16_t>(get_u16(bytes.data() + pos + i));
        clip.samples.push_back(static_cast<double>(s) / 32767.0);
      }
      have_data = true;
    }
    pos += size + (size & 1);
  }
  if (!have_fmt || !have_data) throw Error("'" + path + "': missing fmt or data chunk");
  return clip;
}

void save_corpus(const std::vector<CorpusExample>& corpus, const EventSchema& schema,
                 const Lexicon& lexicon, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "wav");
  {
    std::ofstream s(fs::path(dir) / "schema.json");
    s << schema.to_json_text() << '\n';
    std::ofstream l(fs::path(dir) / "lexicon.json");
    l << lexicon.to_json_text() << '\n';
  }
  std::ofstream out(fs::path(dir) / "corpus.jsonl");
  if (!out) throw Error("cannot write corpus.jsonl in '" + dir + "'");
  for (const auto& ex : corpus) {
    std::string wav_rel = "wav/" + ex.clip.id + ".wav";
    save_wav(ex.clip, (fs::path(dir) / wav_rel).string());
    nlohmann::json j;
    j["id"] = ex.clip.id;
    j["wav"] = wav_rel;
    j["transcript"] = join_tokens(ex.transcript);
    j["records"] = nlohmann::json::parse(record_set_to_json(ex.gold));
    j["split"] = ex.split;
    j["voice"] = {{"f0", ex.voice.base_frequency},
                  {"rate", ex.voice.speaking_rate},
                  {"amp", ex.voice.amplitude}};
    j["noise"] = {{"kind", noise_kind_to_string(ex.noise.kind)},
                  {"snr_db", ex.noise.snr_db}};
    out << j.dump() << '\n';
  }
}

LoadedCorpus load_corpus(const std::string& dir) {
  LoadedCorpus out;
  out.schema = EventSchema::from_json_file((fs::path(dir) / "schema.json").string());
  {
    std::ifstream l(fs::path(dir) / "lexicon.json");
    if (!l) throw Error("missing lexicon.json in '" + dir + "'");
    std::stringstream ss;
    ss << l.rdbuf();
    out.lexicon = Lexicon::from_json_text(ss.str());
  }
  std::ifstream in(fs::path(dir) / "corpus.jsonl");
  if (!in) throw Error("missing corpus.jsonl in '" + dir + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error("corpus.jsonl: line " + std::to_string(lineno) + ": " + e.what());
    }
    CorpusExample ex;
    std::string id;
    try {
      id = j.at("id").get<std::string>();
      ex.transcript = split_tokens(j.at("transcript").get<std::string>());
      ex.gold = record_set_from_json(j.at("records").dump());
      ex.split = j.at("split").get<std::string>();
      ex.voice.base_frequency = j.at("voice").at("f0").get<double>();
      ex.voice.speaking_rate = j.at("voice").at("rate").get<double>();
      ex.voice.amplitude = j.at("voice").at("amp").get<double>();
      ex.noise.kind = noise_kind_from_string(j.at("noise").at("kind").get<std::string>());
      ex.noise.snr_db = j.at("noise").at("snr_db").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw Error("corpus.jsonl: line " + std::to_string(lineno) + ": " + e.what());
    }
    fs::path wav_path = fs::path(dir) / j.at("wav").get<std::string>();
    if (!fs::exists(wav_path))
      throw Error("corpus record '" + id + "': missing WAV file " + wav_path.string());
    ex.clip = load_wav(wav_path.string());
    ex.clip.id = id;
    out.examples.push_back(std::move(ex));
  }
  return out;
}

std::vector<const CorpusExample*> split_of(const std::vector<CorpusExample>& corpus,
                                           const std::string& split) {
  std::vector<const CorpusExample*> out;
  for (const auto& ex : corpus)
    if (ex.split == split) out.push_back(&ex);
  return out;
}

// ---------------------------------------------------------------------------
// stock desk-scale setup

EventSchema default_schema() {
  return EventSchema({"Attack", "Transport", "Meet"},
                     {{"Attack", {"Attacker", "Target", "Place"}},
                      {"Transport", {"Artifact", "Destination"}},
                      {"Meet", {"Participant", "Place"}}});
}

Lexicon default_lexicon() {
  Lexicon lex;
  // function / pattern words
  for (const char* w : {"the", "at", "to", "near", "and", "by"}) lex.add(w, std::string("k_") + w);
  // triggers
  for (const char* w : {"attacked", "raided", "struck", "moved", "hauled", "met", "gathered"})
    lex.add(w, std::string("k_") + w);
  // filler words for long sentences
  for (const char* w :
       {"yesterday", "quietly", "again", "before", "sundown", "while", "crowds", "watched"})
    lex.add(w, std::string("k_") + w);
  // common mentions
  for (const char* w : {"soldiers", "rebels", "pirates", "convoy", "outpost", "harbor",
                        "valley", "market", "plaza", "cargo", "cattle", "depot", "port",
                        "envoys", "miners", "scholars"})
    lex.add(w, std::string("k_") + w);
  // homophone pairs (shared pronunciation keys)
  lex.add("guerrillas", "k_gorilla");
  lex.add("gorillas", "k_gorilla");
  lex.add("miles", "k_miles");
  lex.add("myles", "k_miles");
  lex.add("timber", "k_timber");
  lex.add("timbre", "k_timber");
  // markers introducing rare entities
  lex.add("captain", "k_captain");
  lex.add("doctor", "k_doctor");
  lex.add("old", "k_old");
  // unique-pronunciation rare entity words
  lex.add("zanzibar", "k_zanzibar");
  lex.add("padua", "k_padua");
  return lex;
}

TemplateBank default_template_bank() {
  TemplateBank bank;
  auto tpl = [&](std::string type, std::string trig, std::vector<std::string> pattern,
                 std::vector<std::string> roles) {
    bank.templates.push_back(
        {std::move(type), std::move(trig), std::move(pattern), std::move(roles)});
  };
  tpl("Attack", "attacked",
      {"the", "{Attacker}", "attacked", "the", "{Target}", "near", "the", "{Place}"},
      {"Attacker", "Target", "Place"});
  tpl("Attack", "raided", {"the", "{Attacker}", "raided", "the", "{Target}"},
      {"Attacker", "Target"});
  tpl("Attack", "struck",
      {"the", "{Attacker}", "struck", "the", "{Target}", "at", "the", "{Place}"},
      {"Attacker", "Target", "Place"});
  tpl("Attack", "attacked",
      {"yesterday", "the", "{Attacker}", "quietly", "attacked", "the", "{Target}", "near",
       "the", "{Place}", "while", "crowds", "watched"},
      {"Attacker", "Target", "Place"});
  tpl("Transport", "moved", {"the", "{Artifact}", "moved", "to", "the", "{Destination}"},
      {"Artifact", "Destination"});
  tpl("Transport", "hauled", {"the", "{Artifact}", "hauled", "to", "the", "{Destination}"},
      {"Artifact", "Destination"});
  tpl("Transport", "moved",
      {"before", "sundown", "the", "{Artifact}", "quietly", "moved", "again", "to", "the",
       "{Destination}", "while", "crowds", "watched"},
      {"Artifact", "Destination"});
  tpl("Meet", "met",
      {"the", "{Participant}", "met", "the", "{Participant}", "at", "the", "{Place}"},
      {"Participant", "Participant", "Place"});
  tpl("Meet", "gathered", {"the", "{Participant}", "gathered", "at", "the", "{Place}"},
      {"Participant", "Place"});
  tpl("Meet", "gathered",
      {"yesterday", "the", "{Participant}", "quietly", "gathered", "near", "the",
       "{Place}", "while", "crowds", "watched"},
      {"Participant", "Place"});

  auto add_pool = [&](const std::string& role, std::vector<std::string> words) {
    for (auto& w : words) bank.mention_pool[role].push_back({w});
  };
  add_pool("Attacker", {"soldiers", "rebels", "pirates", "guerrillas"});
  add_pool("Target", {"convoy", "outpost", "harbor", "gorillas"});
  add_pool("Place", {"valley", "market", "plaza"});
  add_pool("Artifact", {"cargo", "cattle", "timber"});
  add_pool("Destination", {"depot", "port"});
  add_pool("Participant", {"envoys", "miners", "scholars", "miles"});

  bank.rare_mentions["Participant"].push_back({"captain", "myles"});
  bank.rare_mentions["Participant"].push_back({"doctor", "padua"});
  bank.rare_mentions["Artifact"].push_back({"old", "timbre"});
  bank.rare_mentions["Destination"].push_back({"zanzibar"});
  return bank;
}

}  // namespace speechee
