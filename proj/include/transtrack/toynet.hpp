#pragma once

// Single-head encoder / two-decoder attention network on feature grids.
//
// The encoder sees the current and previous frame grids as one token
// sequence. One decoder turns learned object queries into detection boxes,
// the other turns track queries (final-layer embeddings of last frame's
// detections) into tracking boxes. Both read the same memory.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "transtrack/geometry.hpp"
#include "transtrack/losses.hpp"
#include "transtrack/tensor.hpp"

namespace transtrack::toynet {

struct ModelConfig {
  int grid_h = 8;
  int grid_w = 8;
  int feature_channels = 11;
  int d_model = 32;  // multiple of 4
  int ffn_dim = 64;
  int num_queries = 10;
  int encoder_layers = 1;
  int decoder_layers = 2;
  int classes = 1;
  bool share_decoders = false;
  double init_scale = 1.0;  // multiplies the Xavier-uniform bound
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument.
  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct AttentionWeights {
  Tensor wq, wk, wv, wo;  // d x d, no biases
};

struct FfnWeights {
  Tensor w1, b1, w2, b2;  // d x f, f, f x d, d
};

struct EncoderLayer {
  AttentionWeights self;
  FfnWeights ffn;
};

struct DecoderLayer {
  AttentionWeights self;
  AttentionWeights cross;
  FfnWeights ffn;
};

struct DecoderWeights {
  std::vector<DecoderLayer> layers;
  Tensor box_w, box_b;  // d x 4, 4
  Tensor cls_w, cls_b;  // d x classes, classes
};

enum class DecoderRole { Detection, Track };

struct ModelParams {
  ModelConfig config;
  Tensor embed;         // C x d
  Tensor frame_offset;  // 2 x d, row 0 current frame, row 1 previous frame
  std::vector<EncoderLayer> encoder;
  Tensor object_queries;  // N_q x d
  DecoderWeights det_decoder;
  DecoderWeights track_decoder;  // unused when config.share_decoders

  [[nodiscard]] const DecoderWeights& decoder(DecoderRole role) const;
  DecoderWeights& decoder(DecoderRole role);
};

/// Zero-filled parameters of the right shapes.
ModelParams zero_params(const ModelConfig& cfg);
/// Xavier-uniform weights, zero biases, deterministic in cfg.seed.
ModelParams init_params(const ModelConfig& cfg);

/// Visits every trainable tensor in a fixed order with a stable name.
void for_each_tensor(ModelParams& p, const std::function<void(const std::string&, Tensor&)>& fn);
void for_each_tensor(const ModelParams& p,
                     const std::function<void(const std::string&, const Tensor&)>& fn);
std::size_t parameter_count(const ModelParams& p);

/// softmax(Q K^T / sqrt(d)) V.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// Fixed 2-D sinusoidal encoding, [H * W, d]. The first half of the channels
/// encodes the column, the second half the row.
Tensor positional_encoding(int grid_h, int grid_w, int d);

/// Cached activations of one forward pass, consumed by the backward pass.
struct EncodeCache;
struct DecodeCache;

/// Memory of shape [2 H W, d] from two [H, W, C] grids.
Tensor encode(const Tensor& feat_curr, const Tensor& feat_prev, const ModelParams& p,
              EncodeCache* cache = nullptr);

struct DecodeOutput {
  std::vector<CenterBox> boxes;  // normalized
  Tensor class_probs;            // n x classes
  Tensor out_features;           // n x d
};

/// queries is [n, d]; n may be zero.
DecodeOutput decode(const Tensor& queries, const Tensor& memory, const ModelParams& p,
                    DecoderRole role, DecodeCache* cache = nullptr);

std::vector<Prediction> to_predictions(const DecodeOutput& out);

/// One (frame, perturbed frame) training example.
struct TrainingPair {
  Tensor feat_a;
  Tensor feat_b;
  std::vector<GroundTruth> gt_a;
  std::vector<GroundTruth> gt_b;
  std::vector<int> ids_a;  // object id per gt_a entry
  std::vector<int> ids_b;
};

enum class MatchingStrategy {
  Current,   // optimal matching of track queries to frame-2 objects
  Previous,  // each track query keeps the object it came from
};

struct PairLoss {
  double loss = 0.0;
  double det_loss = 0.0;
  double track_loss = 0.0;
};

/// Loss of one pair and, when grads is non-null, its gradient added into
/// grads. Frame A goes through the detection decoder without gradient; its
/// matched out_features become the track queries for frame B.
PairLoss pair_loss(const ModelParams& p, const TrainingPair& pair, const LossWeights& w,
                   MatchingStrategy strategy, ModelParams* grads = nullptr);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

/// Relative errors use max(|analytic|, |numeric|, floor) as the denominator.
inline constexpr double kGradCheckFloor = 1e-4;

/// Central differences on every parameter of the pair loss. Track queries
/// and both matchings are computed once at p and held fixed.
GradCheckResult grad_check(const ModelParams& p, const TrainingPair& pair, const LossWeights& w,
                           double epsilon = 1e-5);

enum class Optimizer {
  Gd,    // fixed-step gradient descent
  Adam,  // Kingma & Ba, bias-corrected moments
};

struct TrainConfig {
  int epochs = 60;
  Optimizer optimizer = Optimizer::Gd;
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 8;
  double clip_norm = 0.0;  // global gradient-norm clip, 0 disables
  MatchingStrategy strategy = MatchingStrategy::Current;
  LossWeights weights;
};

struct TrainResult {
  ModelParams params;
  /// history[e] is the mean pair loss at the start of epoch e; the last entry
  /// is the loss after the final epoch.
  std::vector<double> history;
};

/// Minibatch training with a fixed step size, pairs visited in order.
/// Throws std::runtime_error naming the epoch if the loss becomes non-finite.
TrainResult train_toy(const std::vector<TrainingPair>& data, ModelParams init,
                      const TrainConfig& cfg,
                      const std::function<void(int, double, const ModelParams&)>& on_epoch = {});

double mean_loss(const ModelParams& p, const std::vector<TrainingPair>& data,
                 const LossWeights& w, MatchingStrategy strategy);

/// Versioned little-endian checkpoint. Throws std::runtime_error on a bad
/// magic, version, or shape table.
void save_checkpoint(std::ostream& out, const ModelParams& p);
void save_checkpoint(const std::string& path, const ModelParams& p);
ModelParams load_checkpoint(std::istream& in);
ModelParams load_checkpoint(const std::string& path);

/// Per-frame [H, W, C] grids of one sequence, same header layout with its
/// own magic. All grids must share one shape.
void save_feature_grids(std::ostream& out, const std::vector<Tensor>& frames);
void save_feature_grids(const std::string& path, const std::vector<Tensor>& frames);
std::vector<Tensor> load_feature_grids(std::istream& in);
std::vector<Tensor> load_feature_grids(const std::string& path);

}  // namespace transtrack::toynet
