// SPDX-License-Identifier: Apache-2.0
#include "flexpose/dldm/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include <fmt/format.h>

#include "flexpose/error.hpp"
#include "flexpose/log.hpp"
#include "flexpose/nn/adam.hpp"
#include "flexpose/nn/checkpoint.hpp"

namespace flexpose::dldm {

namespace {

constexpr std::size_t kInferChunk = 256;

nn::Tensor normal_matrix(std::size_t rows, std::size_t cols, nn::Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  nn::Tensor t = nn::Tensor::matrix(rows, cols);
  for (auto& v : t.data()) v = normal(rng);
  return t;
}

std::vector<std::size_t> random_batch(std::size_t population, std::size_t batch, nn::Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, population - 1);
  std::vector<std::size_t> idx(batch);
  for (auto& i : idx) i = pick(rng);
  return idx;
}

void append_number(std::string& line, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  line.append(buf, res.ptr);
}

nn::Tensor gather_rows(const nn::Tensor& src, std::span<const std::size_t> idx) {
  nn::Tensor out = nn::Tensor::matrix(idx.size(), src.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) std::copy_n(src.row(idx[r]).data(), src.cols(), out.row(r).data());
  return out;
}

}  // namespace

std::vector<DisplacementWindow> make_windows(std::span<const synth::DisplacementFrame> frames, std::size_t window,
                                             std::size_t stride, double fps) {
  if (window == 0 || stride == 0) throw ValidationError("window and stride must be positive");
  std::vector<DisplacementWindow> out;
  for (std::size_t start = 0; start + window <= frames.size(); start += stride) {
    DisplacementWindow w{nn::Tensor::matrix(window, synth::kImuFrameSize), fps};
    for (std::size_t k = 0; k < window; ++k) {
      std::copy(frames[start + k].ch.begin(), frames[start + k].ch.end(), w.values.row(k).begin());
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<synth::DisplacementFrame> concat_windows(std::span<const DisplacementWindow> windows,
                                                     std::size_t frames) {
  std::vector<synth::DisplacementFrame> out;
  out.reserve(frames);
  for (const auto& w : windows) {
    if (w.values.cols() != synth::kImuFrameSize) throw DimensionError("displacement windows need 36 channels");
    for (std::size_t k = 0; k < w.values.rows() && out.size() < frames; ++k) {
      synth::DisplacementFrame f;
      std::copy_n(w.values.row(k).data(), synth::kImuFrameSize, f.ch.begin());
      out.push_back(f);
    }
  }
  if (out.size() < frames) throw LengthError("not enough windows to cover the requested frames");
  return out;
}

TimeMajor to_time_major(std::span<const DisplacementWindow> windows, std::span<const std::size_t> indices,
                        const nn::Standardizer* norm) {
  if (indices.empty()) return {};
  const std::size_t w_len = windows[indices[0]].values.rows();
  const std::size_t ch = windows[indices[0]].values.cols();
  TimeMajor steps(w_len, nn::Tensor::matrix(indices.size(), ch));
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& win = windows[indices[b]].values;
    if (win.rows() != w_len || win.cols() != ch) throw DimensionError("windows differ in shape");
    for (std::size_t w = 0; w < w_len; ++w) {
      auto dst = steps[w].row(b);
      std::copy_n(win.row(w).data(), ch, dst.data());
      if (norm) norm->apply(dst);
    }
  }
  return steps;
}

std::vector<DisplacementWindow> from_time_major(const TimeMajor& steps, double fps, const nn::Standardizer* denorm) {
  if (steps.empty()) return {};
  const std::size_t batch = steps.front().rows(), ch = steps.front().cols();
  std::vector<DisplacementWindow> out(batch, DisplacementWindow{nn::Tensor::matrix(steps.size(), ch), fps});
  for (std::size_t w = 0; w < steps.size(); ++w) {
    for (std::size_t b = 0; b < batch; ++b) {
      auto dst = out[b].values.row(w);
      std::copy_n(steps[w].row(b).data(), ch, dst.data());
      if (denorm) denorm->invert(dst);
    }
  }
  return out;
}

double TrainReport::initial_loss() const {
  if (losses.empty()) return 0.0;
  const std::size_t n = std::max<std::size_t>(1, losses.size() / 10);
  return std::accumulate(losses.begin(), losses.begin() + n, 0.0) / n;
}

double TrainReport::final_loss() const {
  if (losses.empty()) return 0.0;
  const std::size_t n = std::max<std::size_t>(1, losses.size() / 10);
  return std::accumulate(losses.end() - n, losses.end(), 0.0) / n;
}

namespace {

nlohmann::json train_to_json(const TrainOptions& t) {
  return {{"iterations", t.iterations}, {"batch", t.batch}, {"learning_rate", t.learning_rate},
          {"clip_norm", t.clip_norm}};
}

TrainOptions train_from_json(const nlohmann::json& j, TrainOptions t) {
  t.iterations = j.value("iterations", t.iterations);
  t.batch = j.value("batch", t.batch);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.clip_norm = j.value("clip_norm", t.clip_norm);
  return t;
}

}  // namespace

nlohmann::json DldmConfig::to_json() const {
  return {{"vae",
           {{"window", vae.window}, {"channels", vae.channels}, {"latent", vae.latent}, {"hidden", vae.hidden},
            {"layers", vae.layers}, {"time_features", vae.time_features}}},
          {"denoiser",
           {{"hidden", denoiser.hidden}, {"layers", denoiser.layers}, {"time_dim", denoiser.time_dim}}},
          {"diffusion_steps", diffusion_steps},
          {"beta_start", beta_start},
          {"beta_end", beta_end},
          {"kl_weight", kl_weight},
          {"vae_train", train_to_json(vae_train)},
          {"ldm_train", train_to_json(ldm_train)}};
}

DldmConfig DldmConfig::from_json(const nlohmann::json& j) {
  DldmConfig c;
  if (j.contains("vae")) {
    const auto& v = j["vae"];
    c.vae.window = v.value("window", c.vae.window);
    c.vae.channels = v.value("channels", c.vae.channels);
    c.vae.latent = v.value("latent", c.vae.latent);
    c.vae.hidden = v.value("hidden", c.vae.hidden);
    c.vae.layers = v.value("layers", c.vae.layers);
    c.vae.time_features = v.value("time_features", c.vae.time_features);
  }
  if (j.contains("denoiser")) {
    const auto& d = j["denoiser"];
    c.denoiser.hidden = d.value("hidden", c.denoiser.hidden);
    c.denoiser.layers = d.value("layers", c.denoiser.layers);
    c.denoiser.time_dim = d.value("time_dim", c.denoiser.time_dim);
  }
  c.denoiser.latent = c.vae.latent;
  c.diffusion_steps = j.value("diffusion_steps", c.diffusion_steps);
  c.beta_start = j.value("beta_start", c.beta_start);
  c.beta_end = j.value("beta_end", c.beta_end);
  c.kl_weight = j.value("kl_weight", c.kl_weight);
  if (j.contains("vae_train")) c.vae_train = train_from_json(j["vae_train"], c.vae_train);
  if (j.contains("ldm_train")) c.ldm_train = train_from_json(j["ldm_train"], c.ldm_train);
  return c;
}

DldmModel::DldmModel(const DldmConfig& cfg, std::uint64_t seed)
    : config(cfg),
      schedule(NoiseSchedule::linear(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end)),
      window_norm(cfg.vae.channels),
      latent_norm(cfg.vae.latent) {
  config.denoiser.latent = config.vae.latent;
  nn::Rng rng(seed);
  vae = Vae(config.vae, rng);
  denoiser = Denoiser(config.denoiser, rng);
}

TrainReport train_vae(DldmModel& model, std::span<const DisplacementWindow> windows, std::uint64_t seed) {
  if (windows.empty()) throw LengthError("no windows to train the VAE on");
  const auto& opt = model.config.vae_train;
  nn::StatsAccumulator stats(model.config.vae.channels);
  for (const auto& w : windows) {
    if (w.values.rows() != model.config.vae.window || w.values.cols() != model.config.vae.channels) {
      throw DimensionError("window shape " + w.values.shape_string() + " does not match the VAE");
    }
    for (std::size_t r = 0; r < w.values.rows(); ++r) stats.add(w.values.row(r));
  }
  model.window_norm = stats.finish();

  nn::Rng rng(seed);
  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = opt.learning_rate;
  nn::Adam adam(model.vae.parameters(), adam_cfg);
  TrainReport report;
  for (std::size_t it = 0; it < opt.iterations; ++it) {
    const auto idx = random_batch(windows.size(), opt.batch, rng);
    const TimeMajor x = to_time_major(windows, idx, &model.window_norm);
    const nn::Tensor eps = normal_matrix(opt.batch, model.config.vae.latent, rng);
    nn::Graph g;
    const auto terms = elbo_loss(g, model.vae, x, eps, model.config.kl_weight);
    const double loss = g.value(terms.loss)[0];
    try {
      adam.zero_grad();
      g.backward(terms.loss);
    } catch (const NumericError& e) {
      throw TrainingError(fmt::format("VAE diverged at iteration {} (loss {}): {}", it, loss, e.what()));
    }
    nn::clip_grad_norm(adam.params(), opt.clip_norm);
    adam.step();
    report.losses.push_back(loss);
    if ((it + 1) % 100 == 0) spdlog::debug("vae iteration {}/{} loss {:.5g}", it + 1, opt.iterations, loss);
  }
  return report;
}

nn::Tensor encode_means(const DldmModel& model, std::span<const DisplacementWindow> windows) {
  nn::Tensor mu_all = nn::Tensor::matrix(windows.size(), model.config.vae.latent);
  for (std::size_t start = 0; start < windows.size(); start += kInferChunk) {
    const std::size_t end = std::min(windows.size(), start + kInferChunk);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto [mu, logvar] = model.vae.encode(to_time_major(windows, idx, &model.window_norm));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      std::copy_n(mu.row(r).data(), mu.cols(), mu_all.row(start + r).data());
    }
  }
  return mu_all;
}

TrainReport train_denoiser(Denoiser& denoiser, const nn::Tensor& latents, const NoiseSchedule& schedule,
                           const TrainOptions& options, std::uint64_t seed) {
  if (latents.rows() == 0) throw LengthError("no latents to train the denoiser on");
  nn::Rng rng(seed);
  std::uniform_int_distribution<int> pick_t(1, schedule.steps());
  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = options.learning_rate;
  nn::Adam adam(denoiser.parameters(), adam_cfg);
  TrainReport report;
  for (std::size_t it = 0; it < options.iterations; ++it) {
    const auto idx = random_batch(latents.rows(), options.batch, rng);
    const nn::Tensor z0 = gather_rows(latents, idx);
    const nn::Tensor eps = normal_matrix(options.batch, latents.cols(), rng);
    std::vector<int> t(options.batch);
    for (auto& v : t) v = pick_t(rng);
    nn::Tensor z_t = z0;
    for (std::size_t r = 0; r < options.batch; ++r) {
      const double a = std::sqrt(schedule.alpha_bar_at(t[r])), b = std::sqrt(1.0 - schedule.alpha_bar_at(t[r]));
      for (std::size_t c = 0; c < z0.cols(); ++c) z_t(r, c) = a * z0(r, c) + b * eps(r, c);
    }
    nn::Graph g;
    const nn::Var loss = g.mse(denoiser.forward(g, g.constant(z_t), t), g.constant(eps));
    const double value = g.value(loss)[0];
    try {
      adam.zero_grad();
      g.backward(loss);
    } catch (const NumericError& e) {
      throw TrainingError(fmt::format("denoiser diverged at iteration {} (loss {}): {}", it, value, e.what()));
    }
    nn::clip_grad_norm(adam.params(), options.clip_norm);
    adam.step();
    report.losses.push_back(value);
    if ((it + 1) % 100 == 0) spdlog::debug("denoiser iteration {}/{} loss {:.5g}", it + 1, options.iterations, value);
  }
  return report;
}

TrainReport train_ldm(DldmModel& model, std::span<const DisplacementWindow> windows, std::uint64_t seed) {
  const nn::Tensor mu = encode_means(model, windows);
  model.latent_norm = nn::Standardizer::fit(mu);
  return train_denoiser(model.denoiser, model.latent_norm.apply(mu), model.schedule, model.config.ldm_train, seed);
}

nn::Tensor sample_latents(const Denoiser& denoiser, const NoiseSchedule& schedule, std::size_t n,
                          std::uint64_t seed) {
  nn::Rng rng(seed);
  const std::size_t dim = denoiser.config().latent;
  nn::Tensor z = normal_matrix(n, dim, rng);
  if (n == 0) return z;
  std::vector<int> t(n);
  for (int step = schedule.steps(); step >= 1; --step) {
    std::fill(t.begin(), t.end(), step);
    z = reverse_mean(z, step, schedule, denoiser.infer(z, t));
    if (step > 1) {
      const double sigma = std::sqrt(schedule.posterior_variance(step));
      const nn::Tensor noise = normal_matrix(n, dim, rng);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += sigma * noise[i];
    }
  }
  if (!z.all_finite()) throw NumericError("reverse diffusion produced non-finite latents");
  return z;
}

std::vector<DisplacementWindow> sample(const DldmModel& model, std::size_t n, std::uint64_t seed, SampleMode mode) {
  std::vector<DisplacementWindow> out;
  if (n == 0) return out;
  out.reserve(n);
  nn::Rng rng(seed);
  for (std::size_t start = 0; start < n; start += kInferChunk) {
    const std::size_t count = std::min(kInferChunk, n - start);
    const std::uint64_t chunk_seed = rng();
    nn::Tensor z;
    if (mode == SampleMode::kDiffusion) {
      z = sample_latents(model.denoiser, model.schedule, count, chunk_seed);
    } else {
      nn::Rng chunk_rng(chunk_seed);
      z = normal_matrix(count, model.config.vae.latent, chunk_rng);
    }
    const auto windows = from_time_major(model.vae.decode(model.latent_norm.invert(z)), 60.0, &model.window_norm);
    out.insert(out.end(), windows.begin(), windows.end());
  }
  return out;
}

std::vector<DisplacementWindow> gaussian_baseline(const nn::Standardizer& window_norm, std::size_t n,
                                                  std::size_t window, std::uint64_t seed, double fps) {
  nn::Rng rng(seed);
  std::vector<DisplacementWindow> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    DisplacementWindow w{normal_matrix(window, window_norm.features(), rng), fps};
    for (std::size_t r = 0; r < window; ++r) window_norm.invert(w.values.row(r));
    out.push_back(std::move(w));
  }
  return out;
}

void export_latents(const DldmModel& model, std::span<const DisplacementWindow> windows,
                    const std::filesystem::path& path) {
  const nn::Tensor mu = windows.empty() ? nn::Tensor::matrix(0, model.config.vae.latent)
                                        : encode_means(model, windows);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write latent file " + path.string());
  for (std::size_t c = 0; c < model.config.vae.latent; ++c) out << (c ? "," : "") << "mu_" << c;
  out << "\n";
  for (std::size_t r = 0; r < mu.rows(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < mu.cols(); ++c) {
      if (c) line += ',';
      append_number(line, mu(r, c));
    }
    out << line << "\n";
  }
  if (!out) throw IoError("failed writing latent file " + path.string());
}

void save_dldm(const DldmModel& model, const std::filesystem::path& path) {
  auto& m = const_cast<DldmModel&>(model);
  std::vector<nn::NamedTensor> tensors;
  for (auto* p : m.vae.parameters()) tensors.push_back({p->name, p->value});
  for (auto* p : m.denoiser.parameters()) tensors.push_back({p->name, p->value});
  for (auto& t : model.window_norm.to_tensors("window_norm")) tensors.push_back(std::move(t));
  for (auto& t : model.latent_norm.to_tensors("latent_norm")) tensors.push_back(std::move(t));
  nn::CheckpointMeta meta;
  meta.kind = "dldm";
  meta.extra = model.config.to_json();
  nn::save_checkpoint(path, meta, tensors);
}

DldmModel load_dldm(const std::filesystem::path& path) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(path);
  if (ckpt.meta.kind != "dldm") throw ValidationError("checkpoint " + path.string() + " is not a DLDM model");
  DldmModel model(DldmConfig::from_json(ckpt.meta.extra), 0);
  nn::load_parameters(ckpt, model.vae.parameters());
  nn::load_parameters(ckpt, model.denoiser.parameters());
  model.window_norm = nn::Standardizer::from_checkpoint(ckpt, "window_norm");
  model.latent_norm = nn::Standardizer::from_checkpoint(ckpt, "latent_norm");
  return model;
}

void write_windows_csv(std::span<const DisplacementWindow> windows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write displacement file " + path.string());
  out << "window";
  for (std::size_t c = 0; c < synth::kImuFrameSize; ++c) out << ",d" << c;
  out << "\n";
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto& v = windows[w].values;
    for (std::size_t r = 0; r < v.rows(); ++r) {
      std::string line = std::to_string(w);
      for (std::size_t c = 0; c < v.cols(); ++c) {
        line += ',';
        append_number(line, v(r, c));
      }
      out << line << "\n";
    }
  }
  if (!out) throw IoError("failed writing displacement file " + path.string());
}

std::vector<DisplacementWindow> read_windows_csv(const std::filesystem::path& path, double fps) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open displacement file " + path.string());
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> ids;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> vals;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      auto res = std::from_chars(p, comma, v);
      if (res.ec != std::errc()) throw IoError("bad number in " + path.string());
      vals.push_back(v);
      p = comma == end ? end : comma + 1;
    }
    if (vals.size() != synth::kImuFrameSize + 1) throw IoError("displacement rows need 37 columns");
    ids.push_back(static_cast<std::size_t>(vals[0]));
    rows.emplace_back(vals.begin() + 1, vals.end());
  }
  std::vector<DisplacementWindow> out;
  std::size_t r = 0;
  while (r < rows.size()) {
    std::size_t e = r;
    while (e < rows.size() && ids[e] == ids[r]) ++e;
    DisplacementWindow w{nn::Tensor::matrix(e - r, synth::kImuFrameSize), fps};
    for (std::size_t k = r; k < e; ++k) std::copy(rows[k].begin(), rows[k].end(), w.values.row(k - r).begin());
    out.push_back(std::move(w));
    r = e;
  }
  return out;
}

}  // namespace flexpose::dldm
