#include "evotf/model.hpp"

#include <cmath>
#include <cstddef>

#include "evotf/errors.hpp"
#include "evotf/rng.hpp"

namespace evotf {

namespace {

using ad::Tensor;

std::size_t uz(int v) { return static_cast<std::size_t>(v); }

Tensor make_weight(Rng& rng, int in, int out) {
  std::vector<float> w(uz(in) * uz(out));
  const float s = 1.0f / std::sqrt(static_cast<float>(in));
  for (float& v : w) v = s * rng.normal();
  return Tensor::param({in, out}, std::move(w));
}

LinearP make_linear(Rng& rng, int in, int out) {
  LinearP l;
  l.w = make_weight(rng, in, out);
  l.b = Tensor::param({out}, std::vector<float>(uz(out), 0.0f));
  return l;
}

LayerNormP make_ln(int d) {
  LayerNormP ln;
  ln.gamma = Tensor::param({d}, std::vector<float>(uz(d), 1.0f));
  ln.beta = Tensor::param({d}, std::vector<float>(uz(d), 0.0f));
  return ln;
}

PerceiverP make_perceiver(Rng& rng, const ModelConfig& c, int channels) {
  PerceiverP p;
  p.token_ln = make_ln(channels);
  p.key = make_linear(rng, channels, c.embed_dim);
  p.value = make_linear(rng, channels, c.embed_dim);
  std::vector<float> z(uz(c.num_latents) * uz(c.latent_dim));
  for (float& v : z) v = rng.normal();
  p.latents = Tensor::param({c.num_latents, c.latent_dim}, std::move(z));
  p.latent_ln = make_ln(c.latent_dim);
  p.query = make_linear(rng, c.latent_dim, c.embed_dim);
  p.ffn_ln = make_ln(c.embed_dim);
  p.ffn1 = make_linear(rng, c.embed_dim, 4 * c.embed_dim);
  p.ffn2 = make_linear(rng, 4 * c.embed_dim, c.embed_dim);
  p.out = make_linear(rng, c.num_latents * c.embed_dim, c.embed_dim);
  return p;
}

MhsaBlockP make_block(Rng& rng, const ModelConfig& c) {
  MhsaBlockP b;
  b.ln1 = make_ln(c.embed_dim);
  b.qkv = make_linear(rng, c.embed_dim, 3 * c.embed_dim);
  b.proj = make_linear(rng, c.embed_dim, c.embed_dim);
  b.ln2 = make_ln(c.embed_dim);
  b.ffn1 = make_linear(rng, c.embed_dim, 4 * c.embed_dim);
  b.ffn2 = make_linear(rng, 4 * c.embed_dim, c.embed_dim);
  return b;
}

void reg_linear(std::vector<std::pair<std::string, Tensor>>& out,
                const std::string& name, const LinearP& l) {
  out.emplace_back(name + ".w", l.w);
  out.emplace_back(name + ".b", l.b);
}

void reg_ln(std::vector<std::pair<std::string, Tensor>>& out,
            const std::string& name, const LayerNormP& ln) {
  out.emplace_back(name + ".gamma", ln.gamma);
  out.emplace_back(name + ".beta", ln.beta);
}

void reg_perceiver(std::vector<std::pair<std::string, Tensor>>& out,
                   const std::string& name, const PerceiverP& p) {
  reg_ln(out, name + ".token_ln", p.token_ln);
  reg_linear(out, name + ".key", p.key);
  reg_linear(out, name + ".value", p.value);
  out.emplace_back(name + ".latents", p.latents);
  reg_ln(out, name + ".latent_ln", p.latent_ln);
  reg_linear(out, name + ".query", p.query);
  reg_ln(out, name + ".ffn_ln", p.ffn_ln);
  reg_linear(out, name + ".ffn1", p.ffn1);
  reg_linear(out, name + ".ffn2", p.ffn2);
  reg_linear(out, name + ".out", p.out);
}

void reg_block(std::vector<std::pair<std::string, Tensor>>& out,
               const std::string& name, const MhsaBlockP& b) {
  reg_ln(out, name + ".ln1", b.ln1);
  reg_linear(out, name + ".qkv", b.qkv);
  reg_linear(out, name + ".proj", b.proj);
  reg_ln(out, name + ".ln2", b.ln2);
  reg_linear(out, name + ".ffn1", b.ffn1);
  reg_linear(out, name + ".ffn2", b.ffn2);
}

Tensor linear(const Tensor& x, const LinearP& l) {
  return ad::add_suffix(ad::matmul(x, l.w), l.b);
}

Tensor lnorm(const Tensor& x, const LayerNormP& ln) {
  return ad::layer_norm(x, ln.gamma, ln.beta);
}

// x: [batch, tokens, channels] -> [batch, embed]
Tensor encode_perceiver(const PerceiverP& p, const Tensor& x, int embed,
                        Tensor* cap) {
  const int batch = x.dim(0);
  Tensor t = lnorm(x, p.token_ln);
  Tensor k = linear(t, p.key);
  Tensor v = linear(t, p.value);
  Tensor q = linear(lnorm(p.latents, p.latent_ln), p.query);
  Tensor scores = ad::scale(ad::bmm(ad::expand_at(q, 0, batch),
                                    ad::transpose_last2(k)),
                            1.0f / std::sqrt(static_cast<float>(embed)));
  Tensor attn = ad::softmax_lastdim(scores);
  if (cap) *cap = attn;
  Tensor o = ad::bmm(attn, v);
  Tensor f = linear(ad::gelu(linear(lnorm(o, p.ffn_ln), p.ffn1)), p.ffn2);
  o = ad::add(o, f);
  o = ad::reshape(o, {batch, p.latents.dim(0) * embed});
  return linear(o, p.out);
}

// x: [batch, tokens, embed]; mask (optional) is a [tokens, tokens] keep-mask.
Tensor mhsa_block(const MhsaBlockP& b, const Tensor& x, int heads,
                  const Tensor* mask, Tensor* cap) {
  const int batch = x.dim(0), tokens = x.dim(1), embed = x.dim(2);
  const int hd = embed / heads;
  Tensor a = lnorm(x, b.ln1);
  Tensor qkv = linear(a, b.qkv);
  auto split_heads = [&](int off) {
    Tensor s = ad::slice_lastdim(qkv, off, embed);
    return ad::permute(ad::reshape(s, {batch, tokens, heads, hd}),
                       {0, 2, 1, 3});
  };
  Tensor q = split_heads(0), k = split_heads(embed), v = split_heads(2 * embed);
  Tensor scores = ad::scale(ad::bmm(q, ad::transpose_last2(k)),
                            1.0f / std::sqrt(static_cast<float>(hd)));
  Tensor attn = ad::softmax_lastdim(scores, mask);
  if (cap) *cap = attn;
  Tensor o = ad::permute(ad::bmm(attn, v), {0, 2, 1, 3});
  o = linear(ad::reshape(o, {batch, tokens, embed}), b.proj);
  Tensor h = ad::add(x, o);
  Tensor f = linear(ad::gelu(linear(lnorm(h, b.ln2), b.ffn1)), b.ffn2);
  return ad::add(h, f);
}

Tensor sinusoidal_pe(int length, int dim) {
  std::vector<float> pe(uz(length) * uz(dim));
  for (int pos = 0; pos < length; ++pos) {
    for (int i = 0; i < dim; i += 2) {
      const double freq =
          std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
      const double ang = static_cast<double>(pos) * freq;
      pe[uz(pos) * uz(dim) + uz(i)] = static_cast<float>(std::sin(ang));
      if (i + 1 < dim)
        pe[uz(pos) * uz(dim) + uz(i) + 1] = static_cast<float>(std::cos(ang));
    }
  }
  return Tensor::from({length, dim}, std::move(pe));
}

Tensor causal_mask(int tokens) {
  std::vector<float> m(uz(tokens) * uz(tokens), 0.0f);
  for (int i = 0; i < tokens; ++i)
    for (int j = 0; j <= i; ++j) m[uz(i) * uz(tokens) + uz(j)] = 1.0f;
  return Tensor::from({tokens, tokens}, std::move(m));
}

}  // namespace

void ModelConfig::validate() const {
  if (num_blocks < 1) throw ConfigError("model: num_blocks must be >= 1");
  if (num_heads < 1 || embed_dim % num_heads != 0)
    throw ConfigError("model: embed_dim must be divisible by num_heads");
  if (num_latents < 1 || latent_dim < 1)
    throw ConfigError("model: latent sizes must be positive");
  if (d_x < 1 || d_f < 1 || d_d < 1)
    throw ConfigError("model: feature dims must be positive");
  if (max_context < 1) throw ConfigError("model: max_context must be >= 1");
}

ModelParams make_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(split(make_key(seed), 0x6d6f64656cULL));
  ModelParams p;
  p.cfg = cfg;
  p.solution = make_perceiver(rng, cfg, cfg.d_x);
  if (cfg.use_fitness) p.fitness = make_perceiver(rng, cfg, cfg.d_f);
  if (cfg.use_distribution) {
    p.dist_embed = make_linear(rng, cfg.d_d, cfg.embed_dim);
    p.dist_block = make_block(rng, cfg);
  }
  if (cfg.use_cross_dim) p.cross_dim = make_perceiver(rng, cfg, cfg.d_d);
  p.stack = make_linear(rng, cfg.streams() * cfg.embed_dim, cfg.embed_dim);
  for (int i = 0; i < cfg.num_blocks; ++i)
    p.temporal.push_back(make_block(rng, cfg));
  p.final_ln = make_ln(cfg.embed_dim);
  p.head1 = make_linear(rng, cfg.embed_dim, cfg.embed_dim);
  p.head2.w = Tensor::param({cfg.embed_dim, 2},
                            std::vector<float>(uz(cfg.embed_dim) * 2, 0.0f));
  p.head2.b = Tensor::param({2}, std::vector<float>(2, 0.0f));
  return p;
}

std::vector<std::pair<std::string, Tensor>> named_params(
    const ModelParams& p) {
  std::vector<std::pair<std::string, Tensor>> out;
  reg_perceiver(out, "solution", p.solution);
  if (p.cfg.use_fitness) reg_perceiver(out, "fitness", p.fitness);
  if (p.cfg.use_distribution) {
    reg_linear(out, "distribution.embed", p.dist_embed);
    reg_block(out, "distribution.block", p.dist_block);
  }
  if (p.cfg.use_cross_dim) reg_perceiver(out, "cross_dim", p.cross_dim);
  reg_linear(out, "stack", p.stack);
  for (std::size_t i = 0; i < p.temporal.size(); ++i)
    reg_block(out, "temporal." + std::to_string(i), p.temporal[i]);
  reg_ln(out, "final_ln", p.final_ln);
  reg_linear(out, "head1", p.head1);
  reg_linear(out, "head2", p.head2);
  return out;
}

std::vector<Tensor> param_list(const ModelParams& p) {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_params(p)) out.push_back(t);
  return out;
}

std::int64_t param_count(const ModelConfig& cfg) {
  std::int64_t n = 0;
  for (auto& [name, t] : named_params(make_params(cfg, 0))) n += t.numel();
  return n;
}

std::vector<float> flatten_params(const ModelParams& p) {
  std::vector<float> theta;
  for (auto& [name, t] : named_params(p))
    theta.insert(theta.end(), t.values().begin(), t.values().end());
  return theta;
}

void load_flat_params(ModelParams& p, const std::vector<float>& theta) {
  std::size_t off = 0;
  for (auto& [name, t] : named_params(p)) {
    const std::size_t n = static_cast<std::size_t>(t.numel());
    if (off + n > theta.size())
      throw ConfigError("load_flat_params: vector too short");
    std::copy(theta.begin() + static_cast<std::ptrdiff_t>(off),
              theta.begin() + static_cast<std::ptrdiff_t>(off + n),
              t.values().begin());
    off += n;
  }
  if (off != theta.size())
    throw ConfigError("load_flat_params: vector too long");
}

Tensor perceiver_op(const Tensor& x, const Tensor& z, const Tensor& wq,
                    const Tensor& wk, const Tensor& wv) {
  if (x.dim(0) < 1) throw ConfigError("perceiver_op: needs at least one row");
  const int dk = wk.dim(1);
  Tensor q = ad::matmul(z, wq);
  Tensor k = ad::matmul(x, wk);
  Tensor v = ad::matmul(x, wv);
  Tensor scores = ad::scale(ad::matmul(q, ad::transpose_last2(k)),
                            1.0f / std::sqrt(static_cast<float>(dk)));
  return ad::matmul(ad::softmax_lastdim(scores), v);
}

TrajectoryBatch pack_trajectories(
    const std::vector<std::vector<GenFeatures>>& trajs) {
  if (trajs.empty() || trajs[0].empty())
    throw ConfigError("pack_trajectories: empty batch");
  TrajectoryBatch tb;
  tb.B = static_cast<int>(trajs.size());
  tb.G = static_cast<int>(trajs[0].size());
  tb.N = trajs[0][0].N;
  tb.D = trajs[0][0].D;
  std::vector<float> sol, fit, dist;
  sol.reserve(uz(tb.B) * uz(tb.G) * uz(tb.D) * uz(tb.N) * uz(kDX));
  fit.reserve(uz(tb.B) * uz(tb.G) * uz(tb.N) * uz(kDF));
  dist.reserve(uz(tb.B) * uz(tb.G) * uz(tb.D) * uz(kDD));
  for (const auto& traj : trajs) {
    if (static_cast<int>(traj.size()) != tb.G)
      throw ConfigError("pack_trajectories: ragged generation counts");
    for (const GenFeatures& g : traj) {
      if (g.N != tb.N || g.D != tb.D)
        throw ConfigError("pack_trajectories: mismatched N or D");
      for (int d = 0; d < tb.D; ++d)
        for (int i = 0; i < tb.N; ++i)
          for (int c = 0; c < kDX; ++c)
            sol.push_back(g.solution[(uz(i) * uz(tb.D) + uz(d)) * uz(kDX) +
                                     uz(c)]);
      fit.insert(fit.end(), g.fitness.begin(), g.fitness.end());
      dist.insert(dist.end(), g.distribution.begin(), g.distribution.end());
    }
  }
  tb.sol = Tensor::from({tb.B * tb.G * tb.D, tb.N, kDX}, std::move(sol));
  tb.fit = Tensor::from({tb.B * tb.G, tb.N, kDF}, std::move(fit));
  tb.dist = Tensor::from({tb.B * tb.G, tb.D, kDD}, std::move(dist));
  return tb;
}

Tensor forward(const ModelParams& p, const TrajectoryBatch& in,
               AttnCapture* capture) {
  const ModelConfig& c = p.cfg;
  const int B = in.B, G = in.G, D = in.D, E = c.embed_dim;
  if (G < 1 || G > c.max_context)
    throw ConfigError("forward: generation count outside [1, max_context]");

  Tensor sol_e = encode_perceiver(p.solution, in.sol, E,
                                  capture ? &capture->solution : nullptr);
  std::vector<Tensor> streams{ad::reshape(sol_e, {B * G, D, E})};
  if (c.use_fitness) {
    Tensor f = encode_perceiver(p.fitness, in.fit, E,
                                capture ? &capture->fitness : nullptr);
    streams.push_back(ad::expand_at(f, 1, D));
  }
  if (c.use_distribution) {
    Tensor e = linear(in.dist, p.dist_embed);
    streams.push_back(mhsa_block(p.dist_block, e, c.num_heads, nullptr,
                                 capture ? &capture->distribution : nullptr));
  }
  if (c.use_cross_dim) {
    Tensor cd = encode_perceiver(p.cross_dim, in.dist, E,
                                 capture ? &capture->cross_dim : nullptr);
    streams.push_back(ad::expand_at(cd, 1, D));
  }

  Tensor h = linear(ad::concat_lastdim(streams), p.stack);  // [B*G, D, E]
  h = ad::permute(ad::reshape(h, {B, G, D, E}), {0, 2, 1, 3});
  h = ad::reshape(h, {B * D, G, E});
  h = ad::add_suffix(h, sinusoidal_pe(G, E));

  Tensor mask = causal_mask(G);
  if (capture) capture->temporal.resize(p.temporal.size());
  for (std::size_t i = 0; i < p.temporal.size(); ++i)
    h = mhsa_block(p.temporal[i], h, c.num_heads, &mask,
                   capture ? &capture->temporal[i] : nullptr);

  Tensor y = lnorm(h, p.final_ln);
  y = linear(ad::gelu(linear(y, p.head1)), p.head2);  // [B*D, G, 2]
  return ad::reshape(y, {B, D, G, 2});
}

AttentionMaps attention_maps(const ModelParams& p,
                             const std::vector<GenFeatures>& traj, int gen,
                             int dim) {
  ad::NoGradGuard ng;
  TrajectoryBatch tb = pack_trajectories({traj});
  if (gen < 0 || gen >= tb.G)
    throw ConfigError("attention_maps: generation index out of range");
  if (dim < 0 || dim >= tb.D)
    throw ConfigError("attention_maps: dimension index out of range");
  AttnCapture cap;
  forward(p, tb, &cap);

  const ModelConfig& c = p.cfg;
  auto slice_mat = [](const Tensor& t, std::size_t block, int rows, int cols) {
    Mat m(rows, cols);
    const std::size_t base = block * uz(rows) * uz(cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j)
        m.at(i, j) = t.values()[base + uz(i) * uz(cols) + uz(j)];
    return m;
  };

  AttentionMaps maps;
  for (int d = 0; d < tb.D; ++d)
    maps.solution.push_back(slice_mat(cap.solution,
                                      uz(gen) * uz(tb.D) + uz(d),
                                      c.num_latents, tb.N));
  if (c.use_fitness)
    maps.fitness = slice_mat(cap.fitness, uz(gen), c.num_latents, tb.N);
  if (c.use_distribution)
    for (int h = 0; h < c.num_heads; ++h)
      maps.distribution.push_back(slice_mat(
          cap.distribution, uz(gen) * uz(c.num_heads) + uz(h), tb.D, tb.D));
  if (c.use_cross_dim)
    maps.cross_dim = slice_mat(cap.cross_dim, uz(gen), c.num_latents, tb.D);
  for (const Tensor& t : cap.temporal)
    for (int h = 0; h < c.num_heads; ++h)
      maps.temporal.push_back(
          slice_mat(t, uz(dim) * uz(c.num_heads) + uz(h), tb.G, tb.G));
  return maps;
}

DistributionUpdate update_at(const Tensor& updates, int b, int g) {
  const int D = updates.dim(1), G = updates.dim(2);
  DistributionUpdate u;
  u.out_mu.resize(uz(D));
  u.out_sigma.resize(uz(D));
  const auto& v = updates.values();
  for (int d = 0; d < D; ++d) {
    const std::size_t base = ((uz(b) * uz(D) + uz(d)) * uz(G) + uz(g)) * 2;
    u.out_mu[uz(d)] = v[base];
    u.out_sigma[uz(d)] = v[base + 1];
  }
  return u;
}

void apply_update(Vec& mu, Vec& sigma, const DistributionUpdate& u,
                  float eta_mu, float eta_sigma) {
  for (std::size_t d = 0; d < mu.size(); ++d) {
    mu[d] += eta_mu * sigma[d] * u.out_mu[d];
    sigma[d] *= std::exp(eta_sigma * u.out_sigma[d]);
  }
}

}  // namespace evotf
