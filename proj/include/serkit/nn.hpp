// serkit/nn.hpp
//
// From-scratch trainable models: fully connected stacks with dropout and
// sigmoid, an LSTM, and an attention-pooled LSTM, each ending in a softmax
// classifier. Everything is dense double-precision Eigen; gradients are
// exact analytic forms checked against finite differences in the test
// suite.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SERKIT_NN_HPP
#define SERKIT_NN_HPP

#include "serkit/rng.hpp"
#include "serkit/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace serkit {

enum class Arch { kFc1, kFc2, kLstm, kLstmAttention };
enum class Activation { kSigmoid, kTanh, kIdentity };

// Architecture description in the table notation: F(w) one hidden layer,
// F(w)/F(w) two, L(w) an LSTM, L(w)/A an LSTM with attention pooling.
struct ModelSpec {
  Arch arch = Arch::kFc1;
  int width = 0;
  Activation activation = Activation::kSigmoid;
  Scalar dropout = 0.0;
  int num_classes = 0;
  int input_dim = 0;

  // Parses the table notation; whitespace is ignored ("L (100)/A" works).
  // Fully connected specs get sigmoid + 20% dropout, recurrent specs tanh +
  // no dropout.
  static ModelSpec parse(const std::string& name, int num_classes,
                         int input_dim);

  std::string name() const;
  bool isRecurrent() const {
    return arch == Arch::kLstm || arch == Arch::kLstmAttention;
  }
};

struct Tensor {
  std::string name;
  Matrix value;
};
using ParamSet = std::vector<Tensor>;

// --- primitives ---------------------------------------------------------

// Overflow-safe elementwise logistic function.
Matrix sigmoid(const Matrix& z);

Matrix applyActivation(const Matrix& z, Activation act);

// activation(x * weights + bias), bias broadcast over rows.
Matrix denseForward(const Matrix& x, const Matrix& weights,
                    const RowVector& bias, Activation act);

// Inverted dropout: entries are 0 with probability rate, 1/(1-rate)
// otherwise, so expectations are preserved and inference is the identity.
Matrix dropoutMask(Index rows, Index cols, Scalar rate, Rng& rng);
Matrix applyDropout(const Matrix& x, Scalar rate, bool training, Rng* rng);

// Row-wise softmax via log-sum-exp.
Matrix softmaxRows(const Matrix& logits);

struct SoftmaxLoss {
  Scalar loss = 0.0;   // mean negative log-likelihood
  Matrix dlogits;      // (softmax - onehot) / batch
  Matrix probs;
};
SoftmaxLoss softmaxCrossEntropy(const Matrix& logits,
                                const std::vector<int>& labels);

// --- LSTM ---------------------------------------------------------------

// Gate column order within the 4w blocks: input, forget, candidate, output.
struct LstmParams {
  Matrix w_input;   // D x 4w
  Matrix w_hidden;  // w x 4w
  RowVector bias;   // 1 x 4w; forget block initialized to 1
};

struct LstmGrads {
  Matrix w_input;
  Matrix w_hidden;
  RowVector bias;
};

// Per-step activations kept for BPTT. Sequences in a batch are stepped
// together up to the longest true length; steps at or beyond a sample's
// true length read zero input and are never consumed downstream.
struct LstmCache {
  std::vector<Matrix> gate_i, gate_f, gate_g, gate_o;  // each B x w
  std::vector<Matrix> cell, hidden;                    // each B x w
  Index max_len = 0;
};

// reps[b] is the true-length feature matrix of sample b; lengths[b] <=
// reps[b]->rows() is how many of its rows are real.
void lstmForward(const std::vector<const Matrix*>& reps,
                 const std::vector<Index>& lengths, const LstmParams& params,
                 LstmCache* cache);

// dh_per_step, when set, adds an external gradient to every step's hidden
// state (attention pooling). dh_at_final, when set, adds row b at step
// lengths[b]-1 (final-state classification). Either may be null.
void lstmBackward(const std::vector<const Matrix*>& reps,
                  const std::vector<Index>& lengths, const LstmParams& params,
                  const LstmCache& cache,
                  const std::vector<Matrix>* dh_per_step,
                  const Matrix* dh_at_final, LstmGrads* grads);

// --- attention pooling ----------------------------------------------------

// Additive scoring: score_t = v^T tanh(W h_t); weights are a softmax over
// the real steps of each sample, exactly zero on padded steps.
struct AttentionParams {
  Matrix w_score;  // w x w
  Vector v_score;  // w
};

struct AttentionGrads {
  Matrix w_score;
  Vector v_score;
};

struct AttentionCache {
  Matrix alphas;  // B x max_len, rows are simplexes over the real steps
  Matrix pooled;  // B x w
};

AttentionCache attentionForward(const std::vector<Matrix>& hidden,
                                const std::vector<Index>& lengths,
                                const AttentionParams& params);

// d_pooled is dL/dpooled (B x w). Emits parameter grads and accumulates
// dL/dh_t into dh (resized/zeroed here).
void attentionBackward(const std::vector<Matrix>& hidden,
                       const std::vector<Index>& lengths,
                       const AttentionParams& params,
                       const AttentionCache& cache, const Matrix& d_pooled,
                       AttentionGrads* grads, std::vector<Matrix>* dh);

// --- optimizer ------------------------------------------------------------

struct AdamConfig {
  Scalar learning_rate = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar epsilon = 1e-8;
};

// Standard Adam with bias correction. Moments are lazily shaped to the
// parameters on the first step. Throws on non-finite gradients, naming the
// offending tensor.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  void step(ParamSet& params, const ParamSet& grads);
  long stepCount() const { return steps_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> first_moment_, second_moment_;
  long steps_ = 0;
};

// --- model ------------------------------------------------------------

// One trainable classifier. Parameters live in a named ParamSet (the unit
// Adam and checkpoints operate on); gradients mirror it and are overwritten
// by each loss call.
class Model {
 public:
  Model(const ModelSpec& spec, std::uint64_t init_seed);

  const ModelSpec& spec() const { return spec_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const ParamSet& grads() const { return grads_; }

  // Validates names and shapes.
  void setParams(const ParamSet& params);

  // Frame-batch loss for fully connected specs. dropout_rng may be null
  // only when spec().dropout == 0.
  Scalar lossAndGradFrames(const Matrix& x, const std::vector<int>& labels,
                           Rng* dropout_rng);

  // Sequence-batch loss for recurrent specs.
  Scalar lossAndGradSequences(const std::vector<const Matrix*>& reps,
                              const std::vector<Index>& lengths,
                              const std::vector<int>& labels);

  // Inference-mode posteriors (dropout off, deterministic).
  Matrix framePosteriors(const Matrix& x) const;
  Matrix sequencePosteriors(const std::vector<const Matrix*>& reps,
                            const std::vector<Index>& lengths) const;

  // Posterior for one true-length utterance; fully connected models average
  // their per-frame posteriors.
  Vector utterancePosterior(const Matrix& rep) const;

 private:
  Matrix fcnnLogits(const Matrix& x, bool training, Rng* dropout_rng,
                    std::vector<Matrix>* hidden_cache,
                    std::vector<Matrix>* mask_cache) const;
  Matrix recurrentLogits(const std::vector<const Matrix*>& reps,
                         const std::vector<Index>& lengths, LstmCache* cache,
                         AttentionCache* att_cache) const;

  Matrix& tensor(const std::string& name);
  const Matrix& tensor(const std::string& name) const;
  Matrix& grad(const std::string& name);

  ModelSpec spec_;
  ParamSet params_;
  ParamSet grads_;
};

// Lowest class index wins ties.
int argmaxLowest(const Eigen::Ref<const RowVector>& row);

}  // namespace serkit

#endif  // SERKIT_NN_HPP
