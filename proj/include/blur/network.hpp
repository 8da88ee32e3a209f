#pragma once

#include <string>
#include <vector>

#include "blur/lru.hpp"
#include "blur/tensor.hpp"

namespace blur {

enum class Nonlinearity { glu, mlp };
enum class NormKind { batch, layer };
enum class TaskKind { regression, classification };

struct ModelConfig {
  int64_t input_dim = 7;    // d
  int64_t embed_dim = 256;  // m
  int64_t latent_dim = 128;  // n
  int64_t num_blocks = 4;
  int64_t output_dim = 7;  // s; class count for classification
  Nonlinearity nonlinearity = Nonlinearity::glu;
  int64_t mlp_hidden = 0;  // 0 -> 2n
  NormKind norm = NormKind::batch;
  TaskKind task = TaskKind::regression;
  double dropout = 0.1;
  double e_min = 0.0;
  double e_max = 1.0;
  double phase_max = 6.283185307179586476925286766559;
  bool bidirectional = true;
  bool gamma_learnable = false;
  uint64_t seed = 0;

  int64_t mlp_width() const { return mlp_hidden > 0 ? mlp_hidden : 2 * latent_dim; }
};

// One bidirectional block: forward LRU + backward LRU, additive complex
// merge, GLU/MLP nonlinearity, learnable skip from the block input, and
// batch/layer normalization.
struct BlurBlockParams {
  LruParams fwd, bwd;
  Tensor merge_f_re, merge_f_im;  // (n, n)
  Tensor merge_b_re, merge_b_im;  // (n, n)
  Tensor merge_bias_re, merge_bias_im;  // (n)
  Tensor g1_w, g1_b, g2_w, g2_b;  // GLU: both (n,n); MLP: (D,n),(D),(n,D),(n)
  Tensor skip_c;                  // (n, m_in)
  Tensor norm_gamma, norm_beta;   // (n)
  std::vector<double> run_mean, run_var;  // batch-norm running statistics
  double dropout_rate = 0.1;
  int64_t in_dim = 0;
  bool bidirectional = true;  // when false, bwd and merge_b are inert
};

struct BlurModel {
  ModelConfig config;
  Tensor enc_w, enc_b;  // (m, d), (m)
  std::vector<BlurBlockParams> blocks;
  Tensor head_w, head_b;  // (s, n), (s)
};

struct NamedParam {
  std::string name;
  Tensor tensor;
  bool weight_decay = true;
  bool trainable = true;
};

BlurModel init_model(const ModelConfig& cfg);

// Deterministic traversal order; also the checkpoint entry order.
std::vector<NamedParam> parameters(BlurModel& model);

// u_k = E v_k per time step. v: (B, N, d) -> (B, N, m).
Tensor encode(Tape* tape, const BlurModel& model, Tensor v);

// ĥ = merge_f·→h + merge_b·←h + bias; keeps width n (not a concatenation).
HiddenStates merge(Tape* tape, const BlurBlockParams& block, const HiddenStates& hf,
                   const HiddenStates& hb);

Tensor block_forward(Tape* tape, const ModelConfig& cfg, BlurBlockParams& block, Tensor u,
                     bool train, Rng* dropout_rng, int64_t block_index);

// encode -> blocks -> head. Regression: per-step head, (B, N, s).
// Classification: mean pool over time, then head, (B, s).
Tensor model_forward(Tape* tape, BlurModel& model, Tensor v, bool train, Rng* dropout_rng);

// Structured norm ops shared by blocks and tests.
Tensor batch_norm(Tape* tape, Tensor x, Tensor gamma, Tensor beta, std::vector<double>& run_mean,
                  std::vector<double>& run_var, bool train, double momentum = 0.1,
                  double eps = 1e-5);
Tensor layer_norm(Tape* tape, Tensor x, Tensor gamma, Tensor beta, double eps = 1e-5);

}  // namespace blur
