#pragma once

#include "grafair/autodiff.hpp"
#include "grafair/graph.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace grafair {

/// The trained model and its ablations.
enum class Variant {
  Full,           // sampling + KL + S concatenated into the decoder
  NoKl,           // GRAFair(-): no KL term
  NoSConcat,      // GRAFair(#): decoder sees z only
  Deterministic,  // GRAFair-GAE: no sampling, no KL, keeps S concatenation
  Vanilla,        // plain GCN classifier trained with cross-entropy
  VanillaWoS,     // vanilla with the sensitive feature column zeroed
};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view text);
const std::vector<Variant>& all_variants();

bool concatenates_sensitive(Variant v);
bool samples_latent(Variant v);
bool uses_kl(Variant v);
bool masks_sensitive_input(Variant v);

struct ModelDims {
  Index in_features = 0;
  Index hidden_dim = 20;
  int encoder_layers = 1;
  int classifier_layers = 1;
  Index classes = 2;
};

/// Encoder layer l maps f_in -> 2f' (mean half, variance half). The decoder is
/// one affine layer, or two with a ReLU between them, ending in a row softmax.
struct GrafairModel {
  Variant variant = Variant::Full;
  ModelDims dims;
  std::vector<Matrix> encoder_weights;
  std::vector<Matrix> decoder_weights;
  std::vector<Matrix> decoder_biases;  // 1 x width

  Index decoder_input_width() const;
  /// Encoder weights, then decoder weight/bias pairs, in a fixed order.
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;
};

/// Glorot-uniform weights, zero biases.
GrafairModel init_weights(const ModelDims& dims, Variant variant, std::uint64_t seed);

void validate_dims(const ModelDims& dims);

/// ln sigma^2 is stored rather than sigma^2 so that z = mu + exp(log_var / 2) * epsilon.
struct EncodedPosterior {
  Matrix mu;
  Matrix log_var;
  Matrix z;
  Matrix epsilon;  // final-layer noise; all zeros when not sampling
};

struct EncodeOptions {
  bool sample = false;
  /// Sample only in the last layer; earlier layers pass their mean forward.
  bool final_layer_only = false;
};

struct ParameterValues {
  std::vector<ad::Value> encoder;
  std::vector<ad::Value> decoder_weights;
  std::vector<ad::Value> decoder_biases;

  std::vector<ad::Value> flat() const;
};

struct PosteriorValues {
  ad::Value mu;
  ad::Value log_var;
  ad::Value z;
  Matrix epsilon;
};

ParameterValues bind_parameters(ad::Tape& tape, const GrafairModel& model, bool requires_grad);
/// Rebinds a flat parameter list (as returned by ParameterValues::flat) to its roles.
ParameterValues unflatten_parameters(const GrafairModel& model, std::span<const ad::Value> flat);

/// Feature matrix the encoder actually sees (sensitive column zeroed for vanilla-wo-s).
Matrix encoder_input(const GrafairModel& model, const AttributedGraph& g);

PosteriorValues encode_on_tape(ad::Tape& tape, const GrafairModel& model,
                               const ParameterValues& params, const Matrix& input,
                               const NormalizedAdjacency& adj, const EncodeOptions& options,
                               std::mt19937_64& rng);

/// Two-column one-hot encoding [1 - s, s].
Matrix one_hot_sensitive(const BinaryVector& sensitive);

ad::Value decode_on_tape(ad::Tape& tape, const GrafairModel& model, const ParameterValues& params,
                         const ad::Value& z, const BinaryVector& sensitive);

EncodedPosterior encode(const GrafairModel& model, const AttributedGraph& g,
                        const NormalizedAdjacency& adj, bool sample, std::uint64_t rng_seed,
                        bool final_layer_only = false);

/// n x K class probabilities. `sensitive` is ignored by variants that do not
/// concatenate S but its length is still checked.
Matrix decode(const GrafairModel& model, const EncodedPosterior& posterior,
              const BinaryVector& sensitive);

/// Decoder output averaged over S ~ Bernoulli(p_sensitive): sum_s Q(s) p(y | z, s).
Matrix decode_marginal(const GrafairModel& model, const EncodedPosterior& posterior,
                       double p_sensitive);

/// Row argmax; an exact tie goes to class 0.
BinaryVector predict_labels(const Matrix& prob);

/// Plain-text checkpoint: header, metadata lines, then named matrices written
/// with 17 significant digits so a reload is bit-exact.
void save_checkpoint(const std::string& path, const GrafairModel& model,
                     const std::map<std::string, std::string>& metadata);
GrafairModel load_checkpoint(const std::string& path, std::map<std::string, std::string>* metadata);

}  // namespace grafair
