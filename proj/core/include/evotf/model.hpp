#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "evotf/array.hpp"
#include "evotf/autodiff.hpp"
#include "evotf/features.hpp"

// The learned optimizer network.  Each generation is summarized by three
// parallel encoders (a solution Perceiver shared across search dimensions, a
// fitness Perceiver shared across dimensions, multi-head self-attention over
// dimension tokens plus a cross-dimension Perceiver); the concatenated
// per-dimension embeddings then flow through causal Transformer blocks over
// the generation axis, and a small MLP head emits a (mu, sigma) update per
// dimension and generation.
namespace evotf {

struct ModelConfig {
  int num_blocks{1};
  int num_heads{2};
  int num_latents{4};
  int latent_dim{32};
  int embed_dim{64};
  int d_x{kDX};
  int d_f{kDF};
  int d_d{kDD};
  int max_context{32};
  bool use_fitness{true};
  bool use_distribution{true};
  bool use_cross_dim{true};

  void validate() const;  // throws ConfigError on a bad combination
  int streams() const {
    return 1 + (use_fitness ? 1 : 0) + (use_distribution ? 1 : 0) +
           (use_cross_dim ? 1 : 0);
  }
};

struct LinearP {
  ad::Tensor w;  // [in, out]
  ad::Tensor b;  // [out]
};

struct LayerNormP {
  ad::Tensor gamma;
  ad::Tensor beta;
};

struct PerceiverP {
  LayerNormP token_ln;  // over the raw feature channels
  LinearP key, value;   // channels -> embed
  ad::Tensor latents;   // [num_latents, latent_dim]
  LayerNormP latent_ln;
  LinearP query;        // latent_dim -> embed
  LayerNormP ffn_ln;
  LinearP ffn1, ffn2;   // embed -> 4*embed -> embed, residual
  LinearP out;          // num_latents*embed (flattened) -> embed
};

struct MhsaBlockP {
  LayerNormP ln1;
  LinearP qkv;   // embed -> 3*embed
  LinearP proj;  // embed -> embed
  LayerNormP ln2;
  LinearP ffn1, ffn2;
};

struct ModelParams {
  ModelConfig cfg;
  PerceiverP solution;
  PerceiverP fitness;     // allocated iff cfg.use_fitness
  LinearP dist_embed;     // allocated iff cfg.use_distribution
  MhsaBlockP dist_block;  // allocated iff cfg.use_distribution
  PerceiverP cross_dim;   // allocated iff cfg.use_cross_dim
  LinearP stack;          // streams*embed -> embed
  std::vector<MhsaBlockP> temporal;
  LayerNormP final_ln;
  LinearP head1;  // embed -> embed
  LinearP head2;  // embed -> 2, zero-initialized so a fresh model is a no-op
};

// Deterministic initialization: weights ~ N(0, 1/sqrt(fan_in)), biases 0,
// layer-norm affine (1, 0), Perceiver latents ~ N(0, 1), final head zero.
ModelParams make_params(const ModelConfig& cfg, std::uint64_t seed);

// Stable (name, tensor) registry; the tensors alias the model's storage, so
// writing through values() mutates the model.  Order is the serialization
// and flattening order.
std::vector<std::pair<std::string, ad::Tensor>> named_params(
    const ModelParams& p);
std::vector<ad::Tensor> param_list(const ModelParams& p);
std::int64_t param_count(const ModelConfig& cfg);

// Flat views for evolving the whole parameter vector.
std::vector<float> flatten_params(const ModelParams& p);
void load_flat_params(ModelParams& p, const std::vector<float>& theta);

// The bare latent cross-attention: softmax(z Wq (x Wk)^T / sqrt(d)) x Wv.
// x: [M, F], z: [L, Z], wq: [Z, E], wk/wv: [F, E] -> [L, E].
ad::Tensor perceiver_op(const ad::Tensor& x, const ad::Tensor& z,
                        const ad::Tensor& wq, const ad::Tensor& wk,
                        const ad::Tensor& wv);

// A batch of equally-shaped trajectories packed into token tensors.
struct TrajectoryBatch {
  int B{0}, G{0}, N{0}, D{0};
  ad::Tensor sol;   // [B*G*D, N, d_x]
  ad::Tensor fit;   // [B*G, N, d_f]
  ad::Tensor dist;  // [B*G, D, d_d]
};
TrajectoryBatch pack_trajectories(
    const std::vector<std::vector<GenFeatures>>& trajs);

// Softmax matrices recorded during a forward pass (values only).
struct AttnCapture {
  ad::Tensor solution;               // [B*G*D, num_latents, N]
  ad::Tensor fitness;                // [B*G, num_latents, N]
  ad::Tensor distribution;           // [B*G, heads, D, D]
  ad::Tensor cross_dim;              // [B*G, num_latents, D]
  std::vector<ad::Tensor> temporal;  // per block: [B*D, heads, G, G]
};

// -> updates [B, D, G, 2]; channel 0 is out_mu, channel 1 is out_sigma.
ad::Tensor forward(const ModelParams& p, const TrajectoryBatch& in,
                   AttnCapture* capture = nullptr);

struct AttentionMaps {
  std::vector<Mat> solution;      // one num_latents x N map per dimension
  Mat fitness;                    // num_latents x N
  std::vector<Mat> distribution;  // one D x D map per head
  Mat cross_dim;                  // num_latents x D
  std::vector<Mat> temporal;      // one G x G map per (block, head)
};
// Maps for generation `gen` of a single trajectory; temporal maps are taken
// for search dimension `dim`.
AttentionMaps attention_maps(const ModelParams& p,
                             const std::vector<GenFeatures>& traj, int gen,
                             int dim = 0);

struct DistributionUpdate {
  Vec out_mu;
  Vec out_sigma;
};
// Reads the update for (batch item b, generation g) out of a forward result.
DistributionUpdate update_at(const ad::Tensor& updates, int b, int g);

// mu'    = mu + eta_mu * sigma * out_mu
// sigma' = sigma * exp(eta_sigma * out_sigma)
void apply_update(Vec& mu, Vec& sigma, const DistributionUpdate& u,
                  float eta_mu, float eta_sigma);

}  // namespace evotf
