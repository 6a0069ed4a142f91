#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "arbolatent/config.hpp"
#include "arbolatent/data.hpp"
#include "arbolatent/error.hpp"
#include "arbolatent/rng.hpp"
#include "arbolatent/snapshot.hpp"
#include "arbolatent/train.hpp"
#include "arbolatent/tree_tools.hpp"
#include "arbolatent/verify.hpp"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitVerifyFailed = 3;

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
};

arbolatent::RunConfig resolve_config(const CommonOpts& opts) {
  arbolatent::RunConfig cfg;
  if (!opts.config_path.empty()) cfg.apply_file(opts.config_path);
  for (const std::string& kv : opts.overrides) cfg.apply_override(kv);
  return cfg;
}

json config_echo(const arbolatent::RunConfig& cfg) { return json::parse(cfg.to_json()); }

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw arbolatent::ValidationError("cannot write: " + path);
  out << content;
}

void write_report(const std::string& path, const arbolatent::RunConfig& cfg, const json& payload) {
  if (path.empty()) return;
  json obj;
  obj["config"] = config_echo(cfg);
  obj["report"] = payload;
  write_file(path, obj.dump() + "\n");
}

arbolatent::EmbeddingTable make_table(const std::string& embeddings_path,
                                      const std::vector<arbolatent::Instance>& instances,
                                      const arbolatent::RunConfig& cfg) {
  if (!embeddings_path.empty()) {
    return arbolatent::EmbeddingTable::load(embeddings_path, cfg.embedding_dim,
                                            arbolatent::mix_seed(cfg.seed, 0x656d62ULL, 0));
  }
  return arbolatent::EmbeddingTable::random(arbolatent::collect_vocabulary(instances, cfg.lowercase),
                                            cfg.embedding_dim,
                                            arbolatent::mix_seed(cfg.seed, 0x656d62ULL, 1));
}

int cmd_train(const CommonOpts& common, const std::string& train_path, const std::string& dev_path,
              std::optional<std::uint64_t> split_seed, const std::string& embeddings_path,
              std::optional<double> alpha, std::optional<std::uint64_t> seed,
              const std::string& model_out, std::string log_out) {
  arbolatent::RunConfig cfg = resolve_config(common);
  if (alpha) cfg.alpha = *alpha;
  if (seed) cfg.seed = *seed;
  cfg.validate();

  std::vector<arbolatent::Instance> train_set = arbolatent::load_jsonl(train_path);
  std::vector<arbolatent::Instance> dev_set;
  if (!dev_path.empty()) {
    dev_set = arbolatent::load_jsonl(dev_path);
  } else if (split_seed) {
    auto [tr, dv] = arbolatent::split(train_set, cfg.dev_fraction, *split_seed);
    train_set = std::move(tr);
    dev_set = std::move(dv);
  } else {
    throw arbolatent::ValidationError("provide --dev or --split-seed");
  }

  std::vector<arbolatent::Instance> all = train_set;
  all.insert(all.end(), dev_set.begin(), dev_set.end());
  const arbolatent::EmbeddingTable table = make_table(embeddings_path, all, cfg);

  const arbolatent::TrainResult result = arbolatent::train(train_set, dev_set, table, cfg);
  arbolatent::save_model(model_out, result.best_params, table, cfg);

  if (log_out.empty()) log_out = model_out + ".log.jsonl";
  std::ostringstream log;
  const json echo = config_echo(cfg);
  for (const arbolatent::EpochLog& e : result.log) {
    json line;
    line["epoch"] = e.epoch;
    line["loss_a"] = e.loss_a;
    line["loss_s"] = e.loss_s;
    line["dev_acc"] = e.dev_acc;
    line["dev_macro_f1"] = e.dev_macro_f1;
    line["aspect_root_mass"] = e.aspect_root_mass;
    line["config"] = echo;
    log << line.dump() << '\n';
  }
  write_file(log_out, log.str());

  std::cout << "trained " << result.log.size() << " epochs; best epoch " << result.best_epoch
            << " (" << to_string(cfg.metric) << " " << result.best_metric << ")\n"
            << "snapshot: " << model_out << "\nlog: " << log_out << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& data_path, const std::string& out,
             std::optional<int> prune_k) {
  arbolatent::ModelSnapshot snap = arbolatent::load_model(model_path);
  if (prune_k) snap.config.prune_k = static_cast<std::size_t>(*prune_k);
  const auto data = arbolatent::load_jsonl(data_path);
  const arbolatent::EvalReport report =
      arbolatent::evaluate(snap.params, data, snap.table, snap.config, snap.config.prune());
  std::cout << report.to_text();
  write_report(out, snap.config, json::parse(report.to_json()));
  return kExitOk;
}

int cmd_induce(const std::string& model_path, const std::string& data_path, const std::string& out) {
  const arbolatent::ModelSnapshot snap = arbolatent::load_model(model_path);
  auto& params = const_cast<arbolatent::ParamStore&>(snap.params);
  const auto data = arbolatent::load_jsonl(data_path);
  const auto trees = arbolatent::induce_trees(params, data, snap.table, snap.config);
  std::ostringstream os;
  os << "# config: " << config_echo(snap.config).dump() << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << arbolatent::dump_tree_block(data[i], trees[i].tree, trees[i].root_p);
    if (i + 1 < data.size()) os << '\n';
  }
  if (out.empty()) {
    std::cout << os.str();
  } else {
    write_file(out, os.str());
  }
  return kExitOk;
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::map<std::string, arbolatent::TreeBank> collect_banks(const std::vector<std::string>& sources,
                                                          const std::vector<arbolatent::Instance>& data,
                                                          const std::string& model_path,
                                                          const std::string& mtt_model_path) {
  std::map<std::string, arbolatent::TreeBank> banks;
  for (const std::string& source : sources) {
    if (source == "parser") {
      banks[source] = arbolatent::parser_bank(data);
    } else if (source == "aclt" || source == "mtt") {
      const std::string& path = source == "aclt" ? model_path : mtt_model_path;
      if (path.empty()) {
        throw arbolatent::ValidationError("source \"" + source + "\" needs " +
                                          (source == "aclt" ? "--model" : "--mtt-model"));
      }
      arbolatent::ModelSnapshot snap = arbolatent::load_model(path);
      banks[source] =
          arbolatent::to_tree_bank(arbolatent::induce_trees(snap.params, data, snap.table, snap.config));
    } else {
      throw arbolatent::ValidationError("unknown tree source: \"" + source + "\"");
    }
  }
  return banks;
}

int cmd_analyze_distance(const std::string& data_path, const std::string& lexicon_path,
                         const std::string& sources_csv, const std::string& model_path,
                         const std::string& mtt_model_path, const std::string& out) {
  const auto data = arbolatent::load_jsonl(data_path);
  const arbolatent::Lexicon lexicon = arbolatent::load_lexicon(lexicon_path);
  const auto sources = split_csv(sources_csv);
  const auto banks = collect_banks(sources, data, model_path, mtt_model_path);
  const arbolatent::DistanceReport report = arbolatent::distance_report(data, banks, lexicon);

  json payload;
  for (const auto& [source, rows] : report.rows) {
    std::cout << source << " (skipped " << report.skipped.at(source) << "):\n";
    json jrows = json::array();
    for (const arbolatent::DistanceRow& row : rows) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "  %-12s %-8s mean %.4f  n=%zu\n", row.word.c_str(),
                    to_string(row.word_polarity), row.mean_distance, row.count);
      std::cout << buf;
      json jrow;
      jrow["word"] = row.word;
      jrow["polarity"] = to_string(row.word_polarity);
      jrow["mean_distance"] = row.mean_distance;
      jrow["count"] = row.count;
      jrows.push_back(jrow);
    }
    json entry;
    entry["rows"] = jrows;
    entry["skipped"] = report.skipped.at(source);
    entry["overall_mean"] = report.overall_mean(source);
    payload[source] = entry;
    char buf[80];
    std::snprintf(buf, sizeof buf, "  overall mean %.4f\n", report.overall_mean(source));
    std::cout << buf;
  }
  arbolatent::RunConfig cfg;  // analysis has no model config of its own
  write_report(out, cfg, payload);
  return kExitOk;
}

int cmd_analyze_roots(const std::string& data_path, const std::string& sources_csv,
                      const std::string& model_path, const std::string& mtt_model_path,
                      const std::string& out) {
  const auto data = arbolatent::load_jsonl(data_path);
  const auto sources = split_csv(sources_csv);
  const auto banks = collect_banks(sources, data, model_path, mtt_model_path);

  json payload;
  for (const auto& [source, bank] : banks) {
    const arbolatent::RootConsistency rc = arbolatent::root_consistency(data, bank);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-8s root in aspect: %zu / %zu (%.1f%%), skipped %zu\n",
                  source.c_str(), rc.rooted_in_aspect, rc.total, rc.percent(), rc.skipped);
    std::cout << buf;
    json entry;
    entry["rooted_in_aspect"] = rc.rooted_in_aspect;
    entry["total"] = rc.total;
    entry["percent"] = rc.percent();
    entry["skipped"] = rc.skipped;
    payload[source] = entry;
  }
  arbolatent::RunConfig cfg;
  write_report(out, cfg, payload);
  return kExitOk;
}

int cmd_prune_eval(const std::string& model_path, const std::string& data_path, int k,
                   const std::string& out) {
  arbolatent::ModelSnapshot snap = arbolatent::load_model(model_path);
  snap.config.prune_k = k <= 0 ? 0 : static_cast<std::size_t>(k);
  const auto data = arbolatent::load_jsonl(data_path);
  const arbolatent::EvalReport report =
      arbolatent::evaluate(snap.params, data, snap.table, snap.config, snap.config.prune());
  std::cout << "prune k=" << (k <= 0 ? std::string("none") : std::to_string(k)) << "\n"
            << report.to_text();
  write_report(out, snap.config, json::parse(report.to_json()));
  return kExitOk;
}

int cmd_verify(std::size_t max_n, std::uint64_t seed) {
  const auto results = arbolatent::run_verification(max_n, seed);
  std::string first_fail;
  for (const arbolatent::PropertyResult& r : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << ' ' << r.name << " (" << r.detail << ")\n";
    if (!r.pass && first_fail.empty()) first_fail = r.name;
  }
  if (!first_fail.empty()) {
    std::cerr << "verify failed: " << first_fail << "\n";
    return kExitVerifyFailed;
  }
  return kExitOk;
}

int cmd_stats(const std::string& data_path, const std::string& out) {
  const auto data = arbolatent::load_jsonl(data_path);
  const arbolatent::PolarityCounts counts = arbolatent::stats(data);
  std::cout << "positive " << counts.counts[0] << "\nneutral " << counts.counts[1] << "\nnegative "
            << counts.counts[2] << "\ntotal " << counts.total() << "\n";
  json payload;
  payload["positive"] = counts.counts[0];
  payload["neutral"] = counts.counts[1];
  payload["negative"] = counts.counts[2];
  payload["total"] = counts.total();
  arbolatent::RunConfig cfg;
  write_report(out, cfg, payload);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aspect-centric latent-tree induction for aspect-level sentiment"};
  app.require_subcommand(1);

  CommonOpts common;

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::string train_path, dev_path, embeddings_path, model_out = "model.bin", log_out;
  std::optional<std::uint64_t> split_seed, seed;
  std::optional<double> alpha;
  train->add_option("--train", train_path, "training JSONL")->required();
  train->add_option("--dev", dev_path, "development JSONL");
  train->add_option("--split-seed", split_seed, "carve the dev split from --train with this seed");
  train->add_option("--embeddings", embeddings_path, "pretrained embeddings (word v1 ... vd)");
  train->add_option("--config", common.config_path, "flat JSON config file");
  train->add_option("--set", common.overrides, "config override key=value")->take_all();
  train->add_option("--alpha", alpha, "root-refinement loss weight");
  train->add_option("--seed", seed, "training seed");
  train->add_option("--out", model_out, "model snapshot path");
  train->add_option("--log", log_out, "per-epoch JSONL log path");

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate a snapshot on a dataset");
  std::string eval_model, eval_data, eval_out;
  eval->add_option("--model", eval_model, "model snapshot")->required();
  eval->add_option("--data", eval_data, "JSONL dataset")->required();
  eval->add_option("--out", eval_out, "JSON report path");

  // induce
  auto* induce = app.add_subcommand("induce", "decode trees for a dataset");
  std::string ind_model, ind_data, ind_out;
  induce->add_option("--model", ind_model, "model snapshot")->required();
  induce->add_option("--data", ind_data, "JSONL dataset")->required();
  induce->add_option("--out", ind_out, "tree dump path (stdout when omitted)");

  // analyze-distance
  auto* dist = app.add_subcommand("analyze-distance", "opinion-to-aspect hop distances per tree source");
  std::string dist_data, dist_lexicon, dist_sources = "parser,mtt,aclt", dist_model, dist_mtt, dist_out;
  dist->add_option("--data", dist_data, "JSONL dataset")->required();
  dist->add_option("--lexicon", dist_lexicon, "opinion lexicon JSON")->required();
  dist->add_option("--sources", dist_sources, "comma list of parser,mtt,aclt");
  dist->add_option("--model", dist_model, "snapshot for the aclt source");
  dist->add_option("--mtt-model", dist_mtt, "snapshot for the mtt source");
  dist->add_option("--out", dist_out, "JSON report path");

  // analyze-roots
  auto* roots = app.add_subcommand("analyze-roots", "root-in-aspect counts per tree source");
  std::string roots_data, roots_sources = "parser,mtt,aclt", roots_model, roots_mtt, roots_out;
  roots->add_option("--data", roots_data, "JSONL dataset")->required();
  roots->add_option("--sources", roots_sources, "comma list of parser,mtt,aclt");
  roots->add_option("--model", roots_model, "snapshot for the aclt source");
  roots->add_option("--mtt-model", roots_mtt, "snapshot for the mtt source");
  roots->add_option("--out", roots_out, "JSON report path");

  // prune-eval
  auto* prune = app.add_subcommand("prune-eval", "evaluate with order-k pruned trees");
  std::string prune_model, prune_data, prune_out;
  int prune_kk = 0;
  prune->add_option("--model", prune_model, "model snapshot")->required();
  prune->add_option("--data", prune_data, "JSONL dataset")->required();
  prune->add_option("--k", prune_kk, "prune order (0 = entire tree)")->required();
  prune->add_option("--out", prune_out, "JSON report path");

  // verify
  auto* verify = app.add_subcommand("verify", "run the self-contained property suite");
  std::size_t verify_max_n = 5;
  std::uint64_t verify_seed = 20210901;
  verify->add_option("--max-n", verify_max_n, "largest node count for the oracle suite");
  verify->add_option("--seed", verify_seed, "suite seed");

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "per-polarity dataset counts");
  std::string stats_data, stats_out;
  stats_cmd->add_option("--data", stats_data, "JSONL dataset")->required();
  stats_cmd->add_option("--out", stats_out, "JSON report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return kExitValidation;
  }

  try {
    if (*train) {
      return cmd_train(common, train_path, dev_path, split_seed, embeddings_path, alpha, seed,
                       model_out, log_out);
    }
    if (*eval) return cmd_eval(eval_model, eval_data, eval_out, std::nullopt);
    if (*induce) return cmd_induce(ind_model, ind_data, ind_out);
    if (*dist) {
      return cmd_analyze_distance(dist_data, dist_lexicon, dist_sources, dist_model, dist_mtt,
                                  dist_out);
    }
    if (*roots) return cmd_analyze_roots(roots_data, roots_sources, roots_model, roots_mtt, roots_out);
    if (*prune) return cmd_prune_eval(prune_model, prune_data, prune_kk, prune_out);
    if (*verify) return cmd_verify(verify_max_n, verify_seed);
    if (*stats_cmd) return cmd_stats(stats_data, stats_out);
  } catch (const arbolatent::NumericError& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const arbolatent::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
