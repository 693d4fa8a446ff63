#ifndef SPEECHEE_ENCODER_HPP_
#define SPEECHEE_ENCODER_HPP_

#include <string>
#include <vector>

#include "speechee/corpus.hpp"
#include "speechee/nn/layers.hpp"

namespace speechee {

// Frames x channels log-mel feature matrix.
struct MelSpectrogram {
  nn::Matrix frames;      // T0 x C
  double frame_rate = 100.0;
};

struct EncoderConfig {
  int mel_channels = 80;  // >= 8 at toy scale
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int model_dim = 48;
  int layers = 2;
  int heads = 4;
  int ffn_mult = 3;
  int stem_kernel = 3;  // odd

  void check() const;
};

// Deterministic log-mel front end; frame count = ceil(samples / hop) with
// centered zero padding. Log floor epsilon 1e-10.
MelSpectrogram extract_features(const AcousticClip& clip, const EncoderConfig& cfg);

// Two GELU conv layers, kernel `stem_kernel`, second layer stride 2.
// Output length ceil(T0 / 2), width model_dim.
class ConvStem {
 public:
  ConvStem() = default;
  ConvStem(nn::ParamStore& ps, const std::string& prefix, const EncoderConfig& cfg);
  nn::Var operator()(const nn::Var& mel) const;

 private:
  nn::Var w1_, b1_, w2_, b2_;
  int kernel_ = 3;
};

// Pre-norm transformer encoder with sinusoidal positions; shape preserving.
class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(nn::ParamStore& ps, const std::string& prefix,
                     const EncoderConfig& cfg);
  nn::Var operator()(const nn::Var& stem_out) const;

 private:
  std::vector<nn::EncoderLayer> layers_;
  nn::LayerNormParams final_ln_;
};

// Full speech encoder: features -> stem -> transformer states (T x d).
class SpeechEncoder {
 public:
  SpeechEncoder() = default;
  SpeechEncoder(nn::ParamStore& ps, const std::string& prefix, const EncoderConfig& cfg);
  nn::Var encode_mel(const MelSpectrogram& mel) const;
  nn::Var encode(const AcousticClip& clip) const;
  const EncoderConfig& config() const { return cfg_; }

 private:
  EncoderConfig cfg_;
  ConvStem stem_;
  TransformerEncoder transformer_;
};

}  // namespace speechee

#endif  // SPEECHEE_ENCODER_HPP_
