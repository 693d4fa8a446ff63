#include "speechee/encoder.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <vector>

#include "speechee/error.hpp"

namespace speechee {

namespace {

constexpr double kLogFloor = 1e-10;
constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Triangular mel filterbank, C filters over [0, nyquist].
nn::Matrix mel_filterbank(int channels, int n_fft, int sample_rate) {
  const int bins = n_fft / 2 + 1;
  nn::Matrix fb = nn::Matrix::Zero(bins, channels);
  double mel_lo = hz_to_mel(0.0);
  double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers(static_cast<std::size_t>(channels) + 2);
  for (int i = 0; i < channels + 2; ++i) {
    double mel = mel_lo + (mel_hi - mel_lo) * i / (channels + 1);
    centers[static_cast<std::size_t>(i)] = mel_to_hz(mel) * n_fft / sample_rate;
  }
  for (int c = 0; c < channels; ++c) {
    double left = centers[static_cast<std::size_t>(c)];
    double mid = centers[static_cast<std::size_t>(c) + 1];
    double right = centers[static_cast<std::size_t>(c) + 2];
    for (int b = 0; b < bins; ++b) {
      double f = b;
      if (f > left && f < mid) {
        fb(b, c) = (f - left) / (mid - left);
      } else if (f >= mid && f < right) {
        fb(b, c) = (right - f) / (right - mid);
      }
    }
  }
  return fb;
}

// FFTW plans are not thread-safe to create; guard creation.
std::mutex g_fftw_mutex;

struct RealFft {
  explicit RealFft(int n) : n(n) {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    in = fftw_alloc_real(static_cast<std::size_t>(n));
    out = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard<std::mutex> lock(g_fftw_mutex);
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int n;
  double* in;
  fftw_complex* out;
  fftw_plan plan;
};

}  // namespace

void EncoderConfig::check() const {
  if (mel_channels < 8) throw Error("encoder: mel_channels must be >= 8");
  if (stem_kernel % 2 == 0) throw Error("encoder: stem kernel width must be odd");
  if (model_dim % heads != 0) throw Error("encoder: model_dim not divisible by heads");
  if (window_ms <= 0 || hop_ms <= 0) throw Error("encoder: bad window/hop");
}

MelSpectrogram extract_features(const AcousticClip& clip, const EncoderConfig& cfg) {
  cfg.check();
  if (clip.sample_rate <= 0) throw Error("extract_features: bad sample rate");
  const int win = static_cast<int>(std::lround(cfg.window_ms * clip.sample_rate / 1000.0));
  const int hop = static_cast<int>(std::lround(cfg.hop_ms * clip.sample_rate / 1000.0));
  const auto n_samples = static_cast<long>(clip.samples.size());
  if (n_samples < win)
    throw Error("extract_features: clip shorter than one analysis window");

  const int t0 = static_cast<int>((n_samples + hop - 1) / hop);  // ceil(samples / hop)
  const int n_fft = next_pow2(win);
  RealFft fft(n_fft);
  nn::Matrix fb = mel_filterbank(cfg.mel_channels, n_fft, clip.sample_rate);

  std::vector<double> hann(static_cast<std::size_t>(win));
  for (int i = 0; i < win; ++i) {
    hann[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (win - 1));
  }

  MelSpectrogram mel;
  mel.frames = nn::Matrix::Zero(t0, cfg.mel_channels);
  mel.frame_rate = 1000.0 / cfg.hop_ms;
  Eigen::VectorXd power(n_fft / 2 + 1);
  for (int t = 0; t < t0; ++t) {
    long start = static_cast<long>(t) * hop + hop / 2 - win / 2;  // centered framing
    for (int i = 0; i < n_fft; ++i) {
      long src = start + i;
      double x = (i < win && src >= 0 && src < n_samples)
                     ? clip.samples[static_cast<std::size_t>(src)] *
                           hann[static_cast<std::size_t>(i)]
                     : 0.0;
      fft.in[i] = x;
    }
    fftw_execute(fft.plan);
    for (int b = 0; b <= n_fft / 2; ++b) {
      power(b) = fft.out[b][0] * fft.out[b][0] + fft.out[b][1] * fft.out[b][1];
    }
    Eigen::VectorXd energies = fb.transpose() * power;
    for (int c = 0; c < cfg.mel_channels; ++c) {
      mel.frames(t, c) = std::log(energies(c) + kLogFloor);
    }
  }
  return mel;
}

ConvStem::ConvStem(nn::ParamStore& ps, const std::string& prefix, const EncoderConfig& cfg)
    : kernel_(cfg.stem_kernel) {
  w1_ = ps.create(prefix + ".conv1.w",
                  static_cast<Eigen::Index>(cfg.stem_kernel) * cfg.mel_channels,
                  cfg.model_dim);
  b1_ = ps.create_zeros(prefix + ".conv1.b", 1, cfg.model_dim);
  w2_ = ps.create(prefix + ".conv2.w",
                  static_cast<Eigen::Index>(cfg.stem_kernel) * cfg.model_dim,
                  cfg.model_dim);
  b2_ = ps.create_zeros(prefix + ".conv2.b", 1, cfg.model_dim);
}

nn::Var ConvStem::operator()(const nn::Var& mel) const {
  nn::Var h = nn::gelu(nn::conv1d(mel, w1_, b1_, kernel_, 1));
  return nn::gelu(nn::conv1d(h, w2_, b2_, kernel_, 2));
}

TransformerEncoder::TransformerEncoder(nn::ParamStore& ps, const std::string& prefix,
                                       const EncoderConfig& cfg) {
  for (int i = 0; i < cfg.layers; ++i) {
    layers_.emplace_back(ps, prefix + ".layer" + std::to_string(i), cfg.model_dim,
                         cfg.heads,
                         static_cast<Eigen::Index>(cfg.ffn_mult) * cfg.model_dim);
  }
  final_ln_ = nn::LayerNormParams(ps, prefix + ".final_ln", cfg.model_dim);
}

nn::Var TransformerEncoder::operator()(const nn::Var& stem_out) const {
  if (stem_out.rows() < 1) throw Error("encoder: empty input sequence");
  nn::Var x = nn::add_const(stem_out,
                            nn::sinusoidal_positions(stem_out.rows(), stem_out.cols()));
  for (const auto& layer : layers_) x = layer(x);
  return final_ln_(x);
}

SpeechEncoder::SpeechEncoder(nn::ParamStore& ps, const std::string& prefix,
                             const EncoderConfig& cfg)
    : cfg_(cfg), stem_(ps, prefix + ".stem", cfg), transformer_(ps, prefix + ".tf", cfg) {
  cfg.check();
}

nn::Var SpeechEncoder::encode_mel(const MelSpectrogram& mel) const {
  nn::Var m = nn::Var::constant(mel.frames);
  return transformer_(stem_(m));
}

nn::Var SpeechEncoder::encode(const AcousticClip& clip) const {
  return encode_mel(extract_features(clip, cfg_));
}

}  // namespace speechee
