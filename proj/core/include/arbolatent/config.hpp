#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace arbolatent {

enum class EncoderKind { Window, Recurrent };
enum class TreeEncoderKind { StructuredAttention, Gcn };
enum class ChildContext { ChildStates, LiteralSelf };  // Eq-literal variant uses h_i
enum class SelectionMetric { Accuracy, MacroF1 };

// Resolved run configuration. Flat JSON with dotted keys on disk; unknown keys
// are rejected. The resolved form (with the training seed) is echoed into
// every output artifact.
struct RunConfig {
  EncoderKind encoder_kind = EncoderKind::Window;
  std::size_t encoder_dim = 64;
  std::size_t encoder_window = 1;

  TreeEncoderKind tree_encoder_kind = TreeEncoderKind::StructuredAttention;
  std::size_t tree_encoder_layers = 2;
  ChildContext child_ctx = ChildContext::ChildStates;

  std::size_t prune_k = 0;  // 0 = no pruning; k >= 1 masks beyond order k

  double alpha = 0.5;
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 30;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout = 0.1;
  SelectionMetric metric = SelectionMetric::Accuracy;
  double dev_fraction = 0.1;

  std::size_t embedding_dim = 64;
  bool lowercase = true;

  std::optional<std::size_t> prune() const {
    if (prune_k == 0) return std::nullopt;
    return prune_k;
  }

  void validate() const;  // throws ValidationError

  // Flat {"dotted.key": value} object, keys sorted.
  std::string to_json() const;

  // Applies overrides from a flat JSON object; unknown keys are an error.
  void apply_json(const std::string& flat_json);
  void apply_file(const std::string& path);

  // Single "key=value" override (CLI --set).
  void apply_override(const std::string& key_eq_value);
};

const char* to_string(EncoderKind k);
const char* to_string(TreeEncoderKind k);
const char* to_string(ChildContext c);
const char* to_string(SelectionMetric m);

}  // namespace arbolatent
