#include "arbolatent/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "arbolatent/error.hpp"

namespace arbolatent {

using nlohmann::json;

const char* to_string(EncoderKind k) {
  return k == EncoderKind::Window ? "window" : "recurrent";
}
const char* to_string(TreeEncoderKind k) {
  return k == TreeEncoderKind::StructuredAttention ? "structured_attention" : "gcn";
}
const char* to_string(ChildContext c) {
  return c == ChildContext::ChildStates ? "h_k" : "h_i";
}
const char* to_string(SelectionMetric m) {
  return m == SelectionMetric::Accuracy ? "accuracy" : "macro_f1";
}

void RunConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha out of range (0,1)");
  if (encoder_dim < 1) throw ValidationError("encoder.dim must be >= 1");
  if (batch_size < 1) throw ValidationError("train.batch_size must be >= 1");
  if (max_epochs < 1) throw ValidationError("train.max_epochs must be >= 1");
  if (tree_encoder_layers < 1) throw ValidationError("tree_encoder.layers must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("train.dropout must be in [0,1)");
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) throw ValidationError("train.dev_fraction must be in (0,1)");
  if (!(learning_rate > 0.0)) throw ValidationError("train.lr must be positive");
  if (embedding_dim < 1) throw ValidationError("embeddings.dim must be >= 1");
}

std::string RunConfig::to_json() const {
  json obj;
  obj["encoder.kind"] = to_string(encoder_kind);
  obj["encoder.dim"] = encoder_dim;
  obj["encoder.window"] = encoder_window;
  obj["tree_encoder.kind"] = to_string(tree_encoder_kind);
  obj["tree_encoder.layers"] = tree_encoder_layers;
  obj["tree_encoder.child_ctx"] = to_string(child_ctx);
  obj["prune.k"] = prune_k;
  obj["train.alpha"] = alpha;
  obj["train.lr"] = learning_rate;
  obj["train.batch_size"] = batch_size;
  obj["train.max_epochs"] = max_epochs;
  obj["train.seed"] = seed;
  obj["train.adam_beta1"] = adam_beta1;
  obj["train.adam_beta2"] = adam_beta2;
  obj["train.adam_eps"] = adam_eps;
  obj["train.dropout"] = dropout;
  obj["train.metric"] = to_string(metric);
  obj["train.dev_fraction"] = dev_fraction;
  obj["embeddings.dim"] = embedding_dim;
  obj["data.lowercase"] = lowercase;
  return obj.dump();
}

namespace {

EncoderKind encoder_kind_from(const std::string& s) {
  if (s == "window") return EncoderKind::Window;
  if (s == "recurrent") return EncoderKind::Recurrent;
  throw ValidationError("encoder.kind must be window or recurrent, got \"" + s + "\"");
}

TreeEncoderKind tree_encoder_kind_from(const std::string& s) {
  if (s == "structured_attention") return TreeEncoderKind::StructuredAttention;
  if (s == "gcn") return TreeEncoderKind::Gcn;
  throw ValidationError("tree_encoder.kind must be structured_attention or gcn, got \"" + s + "\"");
}

ChildContext child_ctx_from(const std::string& s) {
  if (s == "h_k") return ChildContext::ChildStates;
  if (s == "h_i") return ChildContext::LiteralSelf;
  throw ValidationError("tree_encoder.child_ctx must be h_k or h_i, got \"" + s + "\"");
}

SelectionMetric metric_from(const std::string& s) {
  if (s == "accuracy") return SelectionMetric::Accuracy;
  if (s == "macro_f1") return SelectionMetric::MacroF1;
  throw ValidationError("train.metric must be accuracy or macro_f1, got \"" + s + "\"");
}

template <typename T>
T as_number(const json& v, const std::string& key) {
  if (!v.is_number()) throw ValidationError("config key " + key + " must be a number");
  return v.get<T>();
}

std::string as_string(const json& v, const std::string& key) {
  if (!v.is_string()) throw ValidationError("config key " + key + " must be a string");
  return v.get<std::string>();
}

}  // namespace

void RunConfig::apply_json(const std::string& flat_json) {
  json obj;
  try {
    obj = json::parse(flat_json);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed config JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ValidationError("config must be a JSON object of dotted keys");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    const std::string& key = it.key();
    const json& v = it.value();
    if (key == "encoder.kind") encoder_kind = encoder_kind_from(as_string(v, key));
    else if (key == "encoder.dim") encoder_dim = as_number<std::size_t>(v, key);
    else if (key == "encoder.window") encoder_window = as_number<std::size_t>(v, key);
    else if (key == "tree_encoder.kind") tree_encoder_kind = tree_encoder_kind_from(as_string(v, key));
    else if (key == "tree_encoder.layers") tree_encoder_layers = as_number<std::size_t>(v, key);
    else if (key == "tree_encoder.child_ctx") child_ctx = child_ctx_from(as_string(v, key));
    else if (key == "prune.k") prune_k = as_number<std::size_t>(v, key);
    else if (key == "train.alpha") alpha = as_number<double>(v, key);
    else if (key == "train.lr") learning_rate = as_number<double>(v, key);
    else if (key == "train.batch_size") batch_size = as_number<std::size_t>(v, key);
    else if (key == "train.max_epochs") max_epochs = as_number<std::size_t>(v, key);
    else if (key == "train.seed") seed = as_number<std::uint64_t>(v, key);
    else if (key == "train.adam_beta1") adam_beta1 = as_number<double>(v, key);
    else if (key == "train.adam_beta2") adam_beta2 = as_number<double>(v, key);
    else if (key == "train.adam_eps") adam_eps = as_number<double>(v, key);
    else if (key == "train.dropout") dropout = as_number<double>(v, key);
    else if (key == "train.metric") metric = metric_from(as_string(v, key));
    else if (key == "train.dev_fraction") dev_fraction = as_number<double>(v, key);
    else if (key == "embeddings.dim") embedding_dim = as_number<std::size_t>(v, key);
    else if (key == "data.lowercase") {
      if (!v.is_boolean()) throw ValidationError("config key data.lowercase must be a boolean");
      lowercase = v.get<bool>();
    } else {
      throw ValidationError("unknown config key: \"" + key + "\"");
    }
  }
}

void RunConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_json(ss.str());
}

void RunConfig::apply_override(const std::string& key_eq_value) {
  const auto eq = key_eq_value.find('=');
  if (eq == std::string::npos) throw ValidationError("--set expects key=value, got \"" + key_eq_value + "\"");
  const std::string key = key_eq_value.substr(0, eq);
  const std::string raw = key_eq_value.substr(eq + 1);
  // numbers and booleans pass through as JSON; anything else is a string
  json v;
  try {
    v = json::parse(raw);
    if (!v.is_number() && !v.is_boolean() && !v.is_string()) v = raw;
  } catch (const json::exception&) {
    v = raw;
  }
  json obj;
  obj[key] = v;
  apply_json(obj.dump());
}

}  // namespace arbolatent
