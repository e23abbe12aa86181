// serkit/nn.cpp
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

#include "serkit/nn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace serkit {

// --- spec parsing -------------------------------------------------------

namespace {

std::string stripSpaces(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  }
  return out;
}

// "F(800)" -> ('F', 800). Returns the position one past the ')'.
std::size_t parseUnit(const std::string& s, std::size_t pos, char* kind,
                      int* width, const std::string& original) {
  const auto fail = [&]() -> std::size_t {
    throw ConfigError("ModelSpec: cannot parse architecture '" + original +
                      "' (expected F(w), F(w)/F(w), L(w) or L(w)/A)");
  };
  if (pos >= s.size() || (s[pos] != 'F' && s[pos] != 'L')) return fail();
  *kind = s[pos];
  ++pos;
  if (pos >= s.size() || s[pos] != '(') return fail();
  ++pos;
  const std::size_t close = s.find(')', pos);
  if (close == std::string::npos || close == pos) return fail();
  int w = 0;
  for (std::size_t i = pos; i < close; ++i) {
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return fail();
    w = w * 10 + (s[i] - '0');
  }
  if (w <= 0) return fail();
  *width = w;
  return close + 1;
}

}  // namespace

ModelSpec ModelSpec::parse(const std::string& name, int num_classes,
                           int input_dim) {
  if (num_classes < 2) {
    throw ConfigError("ModelSpec: num_classes must be >= 2");
  }
  if (input_dim < 1) {
    throw ConfigError("ModelSpec: input_dim must be >= 1");
  }
  const std::string s = stripSpaces(name);

  char kind = 0;
  int width = 0;
  std::size_t pos = parseUnit(s, 0, &kind, &width, name);

  ModelSpec spec;
  spec.width = width;
  spec.num_classes = num_classes;
  spec.input_dim = input_dim;

  if (pos == s.size()) {
    spec.arch = kind == 'F' ? Arch::kFc1 : Arch::kLstm;
  } else if (s[pos] == '/') {
    ++pos;
    if (kind == 'L' && pos + 1 == s.size() && s[pos] == 'A') {
      spec.arch = Arch::kLstmAttention;
    } else if (kind == 'F') {
      char kind2 = 0;
      int width2 = 0;
      pos = parseUnit(s, pos, &kind2, &width2, name);
      if (pos != s.size() || kind2 != 'F' || width2 != width) {
        throw ConfigError("ModelSpec: cannot parse architecture '" + name +
                          "' (two-layer networks use matching widths)");
      }
      spec.arch = Arch::kFc2;
    } else {
      throw ConfigError("ModelSpec: cannot parse architecture '" + name + "'");
    }
  } else {
    throw ConfigError("ModelSpec: cannot parse architecture '" + name + "'");
  }

  if (spec.isRecurrent()) {
    spec.activation = Activation::kTanh;
    spec.dropout = 0.0;
  } else {
    spec.activation = Activation::kSigmoid;
    spec.dropout = 0.2;
  }
  return spec;
}

std::string ModelSpec::name() const {
  const std::string w = std::to_string(width);
  switch (arch) {
    case Arch::kFc1:
      return "F(" + w + ")";
    case Arch::kFc2:
      return "F(" + w + ")/F(" + w + ")";
    case Arch::kLstm:
      return "L(" + w + ")";
    case Arch::kLstmAttention:
      return "L(" + w + ")/A";
  }
  return {};
}

// --- primitives -----------------------------------------------------------

Matrix sigmoid(const Matrix& z) {
  return z.unaryExpr([](Scalar v) {
    if (v >= 0.0) {
      return 1.0 / (1.0 + std::exp(-v));
    }
    const Scalar e = std::exp(v);
    return e / (1.0 + e);
  });
}

Matrix applyActivation(const Matrix& z, Activation act) {
  switch (act) {
    case Activation::kSigmoid:
      return sigmoid(z);
    case Activation::kTanh:
      return z.array().tanh().matrix();
    case Activation::kIdentity:
      return z;
  }
  return z;
}

Matrix denseForward(const Matrix& x, const Matrix& weights,
                    const RowVector& bias, Activation act) {
  if (x.cols() != weights.rows() || weights.cols() != bias.cols()) {
    throw InputError("denseForward: shape mismatch (" +
                     std::to_string(x.cols()) + " vs " +
                     std::to_string(weights.rows()) + ")");
  }
  Matrix z = x * weights;
  z.rowwise() += bias;
  return applyActivation(z, act);
}

Matrix dropoutMask(Index rows, Index cols, Scalar rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropoutMask: rate must be in [0, 1)");
  }
  const Scalar keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      mask(i, j) = rng.uniform() < rate ? 0.0 : keep_scale;
    }
  }
  return mask;
}

Matrix applyDropout(const Matrix& x, Scalar rate, bool training, Rng* rng) {
  if (!training || rate == 0.0) return x;
  if (rng == nullptr) {
    throw InputError("applyDropout: training with rate > 0 needs an rng");
  }
  return x.cwiseProduct(dropoutMask(x.rows(), x.cols(), rate, *rng));
}

Matrix softmaxRows(const Matrix& logits) {
  const Vector row_max = logits.rowwise().maxCoeff();
  Matrix shifted = logits.colwise() - row_max;
  Matrix exps = shifted.array().exp().matrix();
  const Vector sums = exps.rowwise().sum();
  return (exps.array().colwise() / sums.array()).matrix();
}

SoftmaxLoss softmaxCrossEntropy(const Matrix& logits,
                                const std::vector<int>& labels) {
  const Index batch = logits.rows();
  const Index num_classes = logits.cols();
  if (static_cast<Index>(labels.size()) != batch) {
    throw InputError("softmaxCrossEntropy: " + std::to_string(labels.size()) +
                     " labels for " + std::to_string(batch) + " rows");
  }
  for (int label : labels) {
    if (label < 0 || label >= num_classes) {
      throw InputError("softmaxCrossEntropy: label " + std::to_string(label) +
                       " out of range for " + std::to_string(num_classes) +
                       " classes");
    }
  }

  SoftmaxLoss out;
  out.probs = softmaxRows(logits);

  const Vector row_max = logits.rowwise().maxCoeff();
  const Vector lse =
      (row_max.array() +
       (logits.colwise() - row_max).array().exp().rowwise().sum().log())
          .matrix();

  Scalar total = 0.0;
  for (Index b = 0; b < batch; ++b) {
    total += lse(b) - logits(b, labels[static_cast<std::size_t>(b)]);
  }
  out.loss = total / static_cast<Scalar>(batch);

  out.dlogits = out.probs;
  for (Index b = 0; b < batch; ++b) {
    out.dlogits(b, labels[static_cast<std::size_t>(b)]) -= 1.0;
  }
  out.dlogits /= static_cast<Scalar>(batch);
  return out;
}

int argmaxLowest(const Eigen::Ref<const RowVector>& row) {
  int best = 0;
  for (Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = static_cast<int>(j);
  }
  return best;
}

// --- LSTM -----------------------------------------------------------------

namespace {

void gatherStep(const std::vector<const Matrix*>& reps,
                const std::vector<Index>& lengths, Index t, Matrix* x_t) {
  for (std::size_t b = 0; b < reps.size(); ++b) {
    if (t < lengths[b]) {
      x_t->row(static_cast<Index>(b)) = reps[b]->row(t);
    } else {
      x_t->row(static_cast<Index>(b)).setZero();
    }
  }
}

void validateSequences(const std::vector<const Matrix*>& reps,
                       const std::vector<Index>& lengths, Index input_dim) {
  if (reps.empty() || reps.size() != lengths.size()) {
    throw InputError("lstm: empty batch or mismatched lengths");
  }
  for (std::size_t b = 0; b < reps.size(); ++b) {
    if (lengths[b] < 1) {
      throw InputError("lstm: sample " + std::to_string(b) +
                       " has true length 0");
    }
    if (lengths[b] > reps[b]->rows()) {
      throw InputError("lstm: sample " + std::to_string(b) +
                       " declares more real rows than it has");
    }
    if (reps[b]->cols() != input_dim) {
      throw InputError("lstm: sample " + std::to_string(b) + " has width " +
                       std::to_string(reps[b]->cols()) + ", expected " +
                       std::to_string(input_dim));
    }
  }
}

}  // namespace

void lstmForward(const std::vector<const Matrix*>& reps,
                 const std::vector<Index>& lengths, const LstmParams& params,
                 LstmCache* cache) {
  const Index input_dim = params.w_input.rows();
  const Index width = params.w_hidden.rows();
  validateSequences(reps, lengths, input_dim);

  const Index batch = static_cast<Index>(reps.size());
  const Index max_len = *std::max_element(lengths.begin(), lengths.end());

  cache->max_len = max_len;
  const std::size_t steps = static_cast<std::size_t>(max_len);
  cache->gate_i.resize(steps);
  cache->gate_f.resize(steps);
  cache->gate_g.resize(steps);
  cache->gate_o.resize(steps);
  cache->cell.resize(steps);
  cache->hidden.resize(steps);

  Matrix x_t(batch, input_dim);
  Matrix z(batch, 4 * width);
  Matrix h_prev = Matrix::Zero(batch, width);
  Matrix c_prev = Matrix::Zero(batch, width);

  for (Index t = 0; t < max_len; ++t) {
    gatherStep(reps, lengths, t, &x_t);
    z.noalias() = x_t * params.w_input;
    z.noalias() += h_prev * params.w_hidden;
    z.rowwise() += params.bias;

    const std::size_t s = static_cast<std::size_t>(t);
    cache->gate_i[s] = sigmoid(z.leftCols(width));
    cache->gate_f[s] = sigmoid(z.middleCols(width, width));
    cache->gate_g[s] = z.middleCols(2 * width, width).array().tanh().matrix();
    cache->gate_o[s] = sigmoid(z.rightCols(width));

    cache->cell[s] = cache->gate_f[s].cwiseProduct(c_prev) +
                     cache->gate_i[s].cwiseProduct(cache->gate_g[s]);
    cache->hidden[s] = cache->gate_o[s].cwiseProduct(
        cache->cell[s].array().tanh().matrix());

    h_prev = cache->hidden[s];
    c_prev = cache->cell[s];
  }
}

void lstmBackward(const std::vector<const Matrix*>& reps,
                  const std::vector<Index>& lengths, const LstmParams& params,
                  const LstmCache& cache,
                  const std::vector<Matrix>* dh_per_step,
                  const Matrix* dh_at_final, LstmGrads* grads) {
  const Index input_dim = params.w_input.rows();
  const Index width = params.w_hidden.rows();
  const Index batch = static_cast<Index>(reps.size());
  const Index max_len = cache.max_len;

  grads->w_input = Matrix::Zero(input_dim, 4 * width);
  grads->w_hidden = Matrix::Zero(width, 4 * width);
  grads->bias = RowVector::Zero(4 * width);

  const Matrix zero_state = Matrix::Zero(batch, width);
  Matrix dh_rec = Matrix::Zero(batch, width);
  Matrix dc_next = Matrix::Zero(batch, width);
  Matrix x_t(batch, input_dim);
  Matrix dz(batch, 4 * width);

  for (Index t = max_len - 1; t >= 0; --t) {
    const std::size_t s = static_cast<std::size_t>(t);
    Matrix dh = dh_rec;
    if (dh_per_step != nullptr) dh += (*dh_per_step)[s];
    if (dh_at_final != nullptr) {
      for (Index b = 0; b < batch; ++b) {
        if (lengths[static_cast<std::size_t>(b)] - 1 == t) {
          dh.row(b) += dh_at_final->row(b);
        }
      }
    }

    const Matrix& gi = cache.gate_i[s];
    const Matrix& gf = cache.gate_f[s];
    const Matrix& gg = cache.gate_g[s];
    const Matrix& go = cache.gate_o[s];
    const Matrix& c_prev = t > 0 ? cache.cell[s - 1] : zero_state;
    const Matrix& h_prev = t > 0 ? cache.hidden[s - 1] : zero_state;

    const ArrayXX tanh_c = cache.cell[s].array().tanh();
    const ArrayXX dc =
        dc_next.array() + dh.array() * go.array() * (1.0 - tanh_c.square());

    dz.leftCols(width) =
        (dc * gg.array() * gi.array() * (1.0 - gi.array())).matrix();
    dz.middleCols(width, width) =
        (dc * c_prev.array() * gf.array() * (1.0 - gf.array())).matrix();
    dz.middleCols(2 * width, width) =
        (dc * gi.array() * (1.0 - gg.array().square())).matrix();
    dz.rightCols(width) =
        (dh.array() * tanh_c * go.array() * (1.0 - go.array())).matrix();

    gatherStep(reps, lengths, t, &x_t);
    grads->w_input.noalias() += x_t.transpose() * dz;
    grads->w_hidden.noalias() += h_prev.transpose() * dz;
    grads->bias += dz.colwise().sum();

    dh_rec.noalias() = dz * params.w_hidden.transpose();
    dc_next = (dc * gf.array()).matrix();
  }
}

// --- attention pooling ------------------------------------------------------

AttentionCache attentionForward(const std::vector<Matrix>& hidden,
                                const std::vector<Index>& lengths,
                                const AttentionParams& params) {
  if (hidden.empty()) {
    throw InputError("attentionForward: no hidden states");
  }
  const Index max_len = static_cast<Index>(hidden.size());
  const Index batch = hidden.front().rows();
  const Index width = hidden.front().cols();

  Matrix scores(batch, max_len);
  for (Index t = 0; t < max_len; ++t) {
    const Matrix m = (hidden[static_cast<std::size_t>(t)] * params.w_score)
                         .array()
                         .tanh()
                         .matrix();
    scores.col(t).noalias() = m * params.v_score;
  }

  AttentionCache cache;
  cache.alphas = Matrix::Zero(batch, max_len);
  for (Index b = 0; b < batch; ++b) {
    const Index len = lengths[static_cast<std::size_t>(b)];
    if (len < 1 || len > max_len) {
      throw InputError("attentionForward: bad true length for sample " +
                       std::to_string(b));
    }
    const Scalar m = scores.row(b).head(len).maxCoeff();
    RowVector exps = (scores.row(b).head(len).array() - m).exp().matrix();
    cache.alphas.row(b).head(len) = exps / exps.sum();
  }

  cache.pooled = Matrix::Zero(batch, width);
  for (Index t = 0; t < max_len; ++t) {
    cache.pooled.noalias() += cache.alphas.col(t).asDiagonal() *
                              hidden[static_cast<std::size_t>(t)];
  }
  return cache;
}

void attentionBackward(const std::vector<Matrix>& hidden,
                       const std::vector<Index>& lengths,
                       const AttentionParams& params,
                       const AttentionCache& cache, const Matrix& d_pooled,
                       AttentionGrads* grads, std::vector<Matrix>* dh) {
  const Index max_len = static_cast<Index>(hidden.size());
  const Index batch = hidden.front().rows();
  const Index width = hidden.front().cols();
  (void)lengths;  // masking is already encoded in the zero alphas

  // dL/dalpha, then back through the per-sample softmax.
  Matrix dalpha(batch, max_len);
  for (Index t = 0; t < max_len; ++t) {
    dalpha.col(t) = d_pooled.cwiseProduct(hidden[static_cast<std::size_t>(t)])
                        .rowwise()
                        .sum();
  }
  const Vector row_dot =
      (cache.alphas.array() * dalpha.array()).rowwise().sum().matrix();
  const Matrix dscore =
      (cache.alphas.array() * (dalpha.array().colwise() - row_dot.array()))
          .matrix();

  grads->w_score = Matrix::Zero(width, width);
  grads->v_score = Vector::Zero(width);

  dh->resize(static_cast<std::size_t>(max_len));
  for (Index t = 0; t < max_len; ++t) {
    const std::size_t s = static_cast<std::size_t>(t);
    const Matrix m = (hidden[s] * params.w_score).array().tanh().matrix();
    const Matrix dm = dscore.col(t) * params.v_score.transpose();
    grads->v_score.noalias() += m.transpose() * dscore.col(t);
    const Matrix da = (dm.array() * (1.0 - m.array().square())).matrix();
    grads->w_score.noalias() += hidden[s].transpose() * da;
    (*dh)[s] = cache.alphas.col(t).asDiagonal() * d_pooled;
    (*dh)[s].noalias() += da * params.w_score.transpose();
  }
}

// --- optimizer --------------------------------------------------------------

void Adam::step(ParamSet& params, const ParamSet& grads) {
  if (params.size() != grads.size()) {
    throw InputError("Adam: parameter/gradient count mismatch");
  }
  if (first_moment_.empty()) {
    first_moment_.resize(params.size());
    second_moment_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_moment_[i] = Matrix::Zero(params[i].value.rows(),
                                      params[i].value.cols());
      second_moment_[i] = first_moment_[i];
    }
  }

  ++steps_;
  const Scalar correction1 =
      1.0 - std::pow(config_.beta1, static_cast<Scalar>(steps_));
  const Scalar correction2 =
      1.0 - std::pow(config_.beta2, static_cast<Scalar>(steps_));

  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[i].value;
    if (!g.allFinite()) {
      throw std::runtime_error("Adam: non-finite gradient in tensor '" +
                               grads[i].name + "'");
    }
    Matrix& m = first_moment_[i];
    Matrix& v = second_moment_[i];
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = (config_.beta2 * v.array() +
         (1.0 - config_.beta2) * g.array().square())
            .matrix();
    const ArrayXX m_hat = m.array() / correction1;
    const ArrayXX v_hat = v.array() / correction2;
    params[i].value.array() -=
        config_.learning_rate * m_hat / (v_hat.sqrt() + config_.epsilon);
  }
}

// --- model --------------------------------------------------------------

namespace {

Matrix glorotUniform(Index rows, Index cols, Index fan_in, Index fan_out,
                     Rng& rng) {
  const Scalar limit =
      std::sqrt(6.0 / static_cast<Scalar>(fan_in + fan_out));
  Matrix w(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      w(i, j) = rng.uniform(-limit, limit);
    }
  }
  return w;
}

}  // namespace

Model::Model(const ModelSpec& spec, std::uint64_t init_seed) : spec_(spec) {
  if (spec.width < 1 || spec.num_classes < 2 || spec.input_dim < 1) {
    throw ConfigError("Model: invalid spec " + spec.name());
  }
  Rng rng(deriveSeed(init_seed, "model-init"));
  const Index in = spec.input_dim;
  const Index w = spec.width;
  const Index classes = spec.num_classes;

  auto add = [&](const std::string& name, Matrix value) {
    params_.push_back({name, std::move(value)});
  };

  switch (spec.arch) {
    case Arch::kFc1:
    case Arch::kFc2:
      add("fc1.weight", glorotUniform(in, w, in, w, rng));
      add("fc1.bias", Matrix::Zero(1, w));
      if (spec.arch == Arch::kFc2) {
        add("fc2.weight", glorotUniform(w, w, w, w, rng));
        add("fc2.bias", Matrix::Zero(1, w));
      }
      break;
    case Arch::kLstm:
    case Arch::kLstmAttention: {
      add("lstm.w_input", glorotUniform(in, 4 * w, in, 4 * w, rng));
      add("lstm.w_hidden", glorotUniform(w, 4 * w, w, 4 * w, rng));
      Matrix bias = Matrix::Zero(1, 4 * w);
      bias.middleCols(w, w).setOnes();  // forget gate opens at init
      add("lstm.bias", std::move(bias));
      if (spec.arch == Arch::kLstmAttention) {
        add("attention.w_score", glorotUniform(w, w, w, w, rng));
        add("attention.v_score", glorotUniform(w, 1, w, 1, rng));
      }
      break;
    }
  }
  add("out.weight", glorotUniform(w, classes, w, classes, rng));
  add("out.bias", Matrix::Zero(1, classes));

  grads_ = params_;
  for (Tensor& t : grads_) t.value.setZero();
}

Matrix& Model::tensor(const std::string& name) {
  for (Tensor& t : params_) {
    if (t.name == name) return t.value;
  }
  throw InputError("Model: no tensor named '" + name + "'");
}

const Matrix& Model::tensor(const std::string& name) const {
  for (const Tensor& t : params_) {
    if (t.name == name) return t.value;
  }
  throw InputError("Model: no tensor named '" + name + "'");
}

Matrix& Model::grad(const std::string& name) {
  for (Tensor& t : grads_) {
    if (t.name == name) return t.value;
  }
  throw InputError("Model: no gradient named '" + name + "'");
}

void Model::setParams(const ParamSet& params) {
  if (params.size() != params_.size()) {
    throw InputError("Model::setParams: expected " +
                     std::to_string(params_.size()) + " tensors, got " +
                     std::to_string(params.size()));
  }
  for (const Tensor& t : params) {
    Matrix& dst = tensor(t.name);
    if (dst.rows() != t.value.rows() || dst.cols() != t.value.cols()) {
      throw InputError("Model::setParams: shape mismatch for '" + t.name +
                       "'");
    }
    dst = t.value;
  }
}

Matrix Model::fcnnLogits(const Matrix& x, bool training, Rng* dropout_rng,
                         std::vector<Matrix>* hidden_cache,
                         std::vector<Matrix>* mask_cache) const {
  if (spec_.isRecurrent()) {
    throw InputError("Model: frame batches only apply to F(w) family");
  }
  const int layers = spec_.arch == Arch::kFc2 ? 2 : 1;
  Matrix current = x;
  for (int layer = 1; layer <= layers; ++layer) {
    const std::string prefix = "fc" + std::to_string(layer);
    Matrix a = denseForward(current, tensor(prefix + ".weight"),
                            tensor(prefix + ".bias").row(0),
                            spec_.activation);
    if (hidden_cache != nullptr) hidden_cache->push_back(a);
    if (training && spec_.dropout > 0.0) {
      if (dropout_rng == nullptr) {
        throw InputError("Model: dropout requires an rng during training");
      }
      Matrix mask = dropoutMask(a.rows(), a.cols(), spec_.dropout,
                                *dropout_rng);
      a = a.cwiseProduct(mask);
      if (mask_cache != nullptr) mask_cache->push_back(std::move(mask));
    } else if (mask_cache != nullptr) {
      mask_cache->push_back(Matrix::Constant(a.rows(), a.cols(), 1.0));
    }
    current = std::move(a);
  }
  Matrix logits = current * tensor("out.weight");
  logits.rowwise() += tensor("out.bias").row(0);
  if (hidden_cache != nullptr) hidden_cache->push_back(std::move(current));
  return logits;
}

Scalar Model::lossAndGradFrames(const Matrix& x, const std::vector<int>& labels,
                                Rng* dropout_rng) {
  // hidden_cache holds [A1, (A2,) Dlast] where Dlast is the post-dropout
  // input to the output layer.
  std::vector<Matrix> hidden_cache;
  std::vector<Matrix> mask_cache;
  const Matrix logits =
      fcnnLogits(x, /*training=*/true, dropout_rng, &hidden_cache, &mask_cache);
  const SoftmaxLoss sm = softmaxCrossEntropy(logits, labels);

  for (Tensor& t : grads_) t.value.setZero();

  const int layers = spec_.arch == Arch::kFc2 ? 2 : 1;
  const Matrix& final_input = hidden_cache.back();
  grad("out.weight").noalias() = final_input.transpose() * sm.dlogits;
  grad("out.bias") = sm.dlogits.colwise().sum();

  Matrix dcurrent = sm.dlogits * tensor("out.weight").transpose();
  for (int layer = layers; layer >= 1; --layer) {
    const std::string prefix = "fc" + std::to_string(layer);
    const Matrix& a = hidden_cache[static_cast<std::size_t>(layer - 1)];
    const Matrix& mask = mask_cache[static_cast<std::size_t>(layer - 1)];
    Matrix da = dcurrent.cwiseProduct(mask);
    Matrix dz;
    if (spec_.activation == Activation::kSigmoid) {
      dz = (da.array() * a.array() * (1.0 - a.array())).matrix();
    } else {
      dz = (da.array() * (1.0 - a.array().square())).matrix();
    }
    const Matrix& input =
        layer == 1 ? x : hidden_cache[static_cast<std::size_t>(layer - 2)]
                             .cwiseProduct(
                                 mask_cache[static_cast<std::size_t>(layer - 2)]);
    grad(prefix + ".weight").noalias() = input.transpose() * dz;
    grad(prefix + ".bias") = dz.colwise().sum();
    if (layer > 1) {
      dcurrent = dz * tensor(prefix + ".weight").transpose();
    }
  }
  return sm.loss;
}

Matrix Model::recurrentLogits(const std::vector<const Matrix*>& reps,
                              const std::vector<Index>& lengths,
                              LstmCache* cache,
                              AttentionCache* att_cache) const {
  LstmParams lstm{tensor("lstm.w_input"), tensor("lstm.w_hidden"),
                  tensor("lstm.bias").row(0)};
  lstmForward(reps, lengths, lstm, cache);

  Matrix features;
  if (spec_.arch == Arch::kLstmAttention) {
    AttentionParams att{tensor("attention.w_score"),
                        tensor("attention.v_score").col(0)};
    *att_cache = attentionForward(cache->hidden, lengths, att);
    features = att_cache->pooled;
  } else {
    const Index batch = static_cast<Index>(reps.size());
    features.resize(batch, spec_.width);
    for (Index b = 0; b < batch; ++b) {
      const Index last = lengths[static_cast<std::size_t>(b)] - 1;
      features.row(b) =
          cache->hidden[static_cast<std::size_t>(last)].row(b);
    }
  }
  Matrix logits = features * tensor("out.weight");
  logits.rowwise() += tensor("out.bias").row(0);
  return logits;
}

Scalar Model::lossAndGradSequences(const std::vector<const Matrix*>& reps,
                                   const std::vector<Index>& lengths,
                                   const std::vector<int>& labels) {
  if (!spec_.isRecurrent()) {
    throw InputError("Model: sequence batches only apply to L(w) family");
  }
  LstmCache cache;
  AttentionCache att_cache;
  const Matrix logits = recurrentLogits(reps, lengths, &cache, &att_cache);
  const SoftmaxLoss sm = softmaxCrossEntropy(logits, labels);

  for (Tensor& t : grads_) t.value.setZero();

  const Index batch = static_cast<Index>(reps.size());
  Matrix features;
  if (spec_.arch == Arch::kLstmAttention) {
    features = att_cache.pooled;
  } else {
    features.resize(batch, spec_.width);
    for (Index b = 0; b < batch; ++b) {
      const Index last = lengths[static_cast<std::size_t>(b)] - 1;
      features.row(b) = cache.hidden[static_cast<std::size_t>(last)].row(b);
    }
  }

  grad("out.weight").noalias() = features.transpose() * sm.dlogits;
  grad("out.bias") = sm.dlogits.colwise().sum();
  const Matrix d_features = sm.dlogits * tensor("out.weight").transpose();

  LstmParams lstm{tensor("lstm.w_input"), tensor("lstm.w_hidden"),
                  tensor("lstm.bias").row(0)};
  LstmGrads lstm_grads;

  if (spec_.arch == Arch::kLstmAttention) {
    AttentionParams att{tensor("attention.w_score"),
                        tensor("attention.v_score").col(0)};
    AttentionGrads att_grads;
    std::vector<Matrix> dh;
    attentionBackward(cache.hidden, lengths, att, att_cache, d_features,
                      &att_grads, &dh);
    lstmBackward(reps, lengths, lstm, cache, &dh, nullptr, &lstm_grads);
    grad("attention.w_score") = att_grads.w_score;
    grad("attention.v_score") = att_grads.v_score;
  } else {
    lstmBackward(reps, lengths, lstm, cache, nullptr, &d_features,
                 &lstm_grads);
  }
  grad("lstm.w_input") = lstm_grads.w_input;
  grad("lstm.w_hidden") = lstm_grads.w_hidden;
  grad("lstm.bias") = lstm_grads.bias;
  return sm.loss;
}

Matrix Model::framePosteriors(const Matrix& x) const {
  return softmaxRows(
      fcnnLogits(x, /*training=*/false, nullptr, nullptr, nullptr));
}

Matrix Model::sequencePosteriors(const std::vector<const Matrix*>& reps,
                                 const std::vector<Index>& lengths) const {
  LstmCache cache;
  AttentionCache att_cache;
  return softmaxRows(recurrentLogits(reps, lengths, &cache, &att_cache));
}

Vector Model::utterancePosterior(const Matrix& rep) const {
  if (spec_.isRecurrent()) {
    const std::vector<const Matrix*> reps{&rep};
    const std::vector<Index> lengths{rep.rows()};
    return sequencePosteriors(reps, lengths).row(0).transpose();
  }
  const Matrix probs = framePosteriors(rep);
  return probs.colwise().mean().transpose();
}

}  // namespace serkit
