#include "cli.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <memory>
#include <optional>

#include <CLI11.hpp>

#include "selfens/ensemble.hpp"
#include "selfens/eval.hpp"
#include "selfens/transformer.hpp"
#include "selfens/verification.hpp"

namespace selfens::cli {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelOptions {
  std::string path;
  std::optional<std::uint64_t> synthetic_seed;
  ModelConfig config;
  CLI::Option* path_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

void add_config_flags(CLI::App& cmd, ModelConfig& config) {
  cmd.add_option("--vocab", config.vocab_size, "Vocabulary size (>= 256 for byte tokens)")
      ->capture_default_str();
  cmd.add_option("--embed-dim", config.embed_dim, "Embedding width")->capture_default_str();
  cmd.add_option("--heads", config.num_heads, "Attention heads")->capture_default_str();
  cmd.add_option("--layers", config.num_layers, "Transformer blocks")->capture_default_str();
  cmd.add_option("--ffn-dim", config.ffn_dim, "Feed-forward hidden width")->capture_default_str();
  cmd.add_option("--max-seq-len", config.max_seq_len, "Longest accepted sequence")
      ->capture_default_str();
  cmd.add_option("--rope-base", config.rope_base, "Rotary frequency base")->capture_default_str();
}

void add_model_flags(CLI::App& cmd, ModelOptions& m) {
  m.path_opt = cmd.add_option("--model", m.path, "SEW1 weights file")->check(CLI::ExistingFile);
  m.seed_opt = cmd.add_option("--model-seed", m.synthetic_seed,
                              "Build a synthetic model from this seed instead of --model");
  m.path_opt->excludes(m.seed_opt);
  add_config_flags(cmd, m.config);
}

std::unique_ptr<Transformer> make_model(const ModelOptions& m) {
  if (m.path_opt->count() == 0 && !m.synthetic_seed) {
    throw UsageError("one of --model or --model-seed is required");
  }
  if (m.synthetic_seed) {
    if (m.config.vocab_size < kByteVocabSize) {
      throw UsageError("--vocab must be at least 256 for the byte tokenizer");
    }
    return std::make_unique<Transformer>(init_weights(m.config, *m.synthetic_seed));
  }
  ModelWeights w = load_weights(m.path);
  if (w.config.vocab_size < kByteVocabSize) {
    throw WeightsFormatError(m.path + ": vocabulary smaller than 256 byte tokens");
  }
  return std::make_unique<Transformer>(std::move(w));
}

std::string unescape(std::string_view text) {
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size()) {
      const char n = text[++i];
      out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
    } else {
      out += text[i];
    }
  }
  return out;
}

struct RunOptions {
  ModelOptions model;
  std::string data;
  std::string method = "self-ensemble";
  std::optional<std::size_t> m;
  std::optional<std::size_t> trials;
  std::uint64_t seed = 0;
  std::string prob_mode = "full-vocab";
  std::string out;
  std::size_t workers = 1;
  std::optional<std::string> prompt_template;
  CLI::Option* m_opt = nullptr;
  CLI::Option* trials_opt = nullptr;
};

void add_run_flags(CLI::App& cmd, RunOptions& r) {
  add_model_flags(cmd, r.model);
  cmd.add_option("--data", r.data, "Dataset JSONL file")->required();
  cmd.add_option("--method", r.method, "standard | self-ensemble")
      ->check(CLI::IsMember({"standard", "self-ensemble"}))
      ->capture_default_str();
  r.m_opt = cmd.add_option("--m", r.m, "Choices per group")->check(CLI::PositiveNumber);
  r.trials_opt =
      cmd.add_option("--trials", r.trials, "Partitions per question")->check(CLI::PositiveNumber);
  cmd.add_option("--seed", r.seed, "Base partition seed")->capture_default_str();
  cmd.add_option("--prob-mode", r.prob_mode, "full-vocab | group-renorm")
      ->check(CLI::IsMember({"full-vocab", "group-renorm"}))
      ->capture_default_str();
  cmd.add_option("--out", r.out, "Output directory for CSV reports")->required();
  cmd.add_option("--workers", r.workers, "Questions evaluated in parallel")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd.add_option("--template", r.prompt_template,
                 "Prompt template with {q}, {label}, {choice}; \\n is a newline");
}

EvalConfig base_eval_config(const RunOptions& r) {
  EvalConfig config;
  config.method = *parse_method(r.method);
  if (config.method == Method::Standard && (r.m_opt->count() || r.trials_opt->count())) {
    throw UsageError("--m and --trials only apply to --method self-ensemble");
  }
  config.base_seed = r.seed;
  config.prob_mode = *parse_prob_mode(r.prob_mode);
  config.workers = r.workers;
  if (r.prompt_template) {
    try {
      config.prompt = PromptTemplate::parse(unescape(*r.prompt_template));
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--template: ") + e.what());
    }
  }
  return config;
}

// Fills group size and trial count, falling back to the per-K defaults.
void resolve_ensemble(EvalConfig& config, const RunOptions& r, std::size_t num_choices) {
  const EnsembleConfig defaults = default_ensemble_settings(num_choices);
  config.group_size = r.m.value_or(defaults.group_size);
  config.num_trials = r.trials.value_or(defaults.num_trials);
}

std::size_t max_choices(const std::vector<DatasetRecord>& records) {
  std::size_t k = 0;
  for (const auto& rec : records) k = std::max(k, rec.choices.size());
  return k;
}

void log_skipped(const EvalReport& report, std::ostream& err) {
  for (const auto& s : report.skipped) err << "skipped " << s.id << ": " << s.reason << '\n';
}

int cmd_init_model(const ModelConfig& config, std::uint64_t seed, const std::string& out_path,
                   std::ostream& out) {
  if (config.vocab_size < kByteVocabSize) {
    throw UsageError("--vocab must be at least 256 for the byte tokenizer");
  }
  const ModelWeights weights = init_weights(config, seed);
  save_weights(weights, out_path);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, weights_checksum(weights));
  out << "wrote " << out_path << '\n' << "checksum " << buf << '\n';
  return kOk;
}

int cmd_eval(const RunOptions& r, std::ostream& out, std::ostream& err) {
  EvalConfig config = base_eval_config(r);
  auto model = make_model(r.model);
  const auto records = load_dataset(r.data);
  if (records.empty()) throw DatasetError(r.data + ": no records");
  if (config.method == Method::SelfEnsemble) resolve_ensemble(config, r, max_choices(records));

  const EvalReport report = evaluate(*model, records, config);
  write_report(report, r.out);
  log_skipped(report, err);
  out << to_string(report.method) << " m=" << report.group_size
      << " trials=" << report.num_trials << " accuracy=" << format_fixed6(report.accuracy)
      << " evaluated=" << report.per_question.size() << " skipped=" << report.skipped.size()
      << '\n';
  return kOk;
}

int cmd_ablate(const RunOptions& r, const std::vector<std::size_t>& counts, std::ostream& out,
               std::ostream& err) {
  const EvalConfig base = base_eval_config(r);
  auto model = make_model(r.model);
  const auto records = load_dataset(r.data);
  if (records.empty()) throw DatasetError(r.data + ": no records");
  for (std::size_t k : counts) {
    if (k < 2) throw UsageError("--counts: every count must be >= 2");
  }
  for (const auto& rec : records) {
    const std::size_t need = *std::max_element(counts.begin(), counts.end());
    if (rec.choices.size() < need) {
      throw DatasetError(r.data + ": record " + rec.id + " has fewer than " +
                         std::to_string(need) + " choices");
    }
  }

  std::vector<AblationRow> rows;
  for (std::size_t k : counts) {
    EvalConfig config = base;
    if (config.method == Method::SelfEnsemble) resolve_ensemble(config, r, k);
    const std::size_t one[] = {k};
    auto part = choice_count_ablation(*model, records, one, config);
    write_report(part.front().report, std::filesystem::path(r.out) / ("choices_" + std::to_string(k)));
    log_skipped(part.front().report, err);
    out << k << "-choice accuracy=" << format_fixed6(part.front().report.accuracy) << '\n';
    rows.push_back(std::move(part.front()));
  }
  write_ablation(rows, r.out);
  return kOk;
}

void print_arm(const char* name, const EquivalenceArm& arm, double tol, std::ostream& out) {
  out << name << ": max_rel_dev=" << arm.max_deviation << " cases_over_tol="
      << arm.cases_exceeding(tol) << '/' << arm.cases.size() << '\n';
}

int cmd_verify(const ModelOptions& mopts, const EquivalenceOptions& options, double tolerance,
               EncodingOptions primary, std::ostream& out, std::ostream& err) {
  auto model = make_model(mopts);
  const EquivalenceReport report = verify_equivalence(*model, options, tolerance, primary);
  out << "samples=" << options.samples << " tolerance=" << tolerance << '\n';
  print_arm("single-pass", report.primary, tolerance, out);
  print_arm("ablation w/o attention mask", report.without_mask, tolerance, out);
  print_arm("ablation w/o position re-encoding", report.without_reencoding, tolerance, out);

  bool ok = true;
  if (!report.primary_passes()) {
    err << "FAIL: single-pass arm";
    if (!primary.group_mask) err << " (attention mask disabled)";
    if (!primary.reencode_positions) err << " (position re-encoding disabled)";
    err << " deviates from separate passes beyond tolerance\n";
    ok = false;
  }
  if (report.without_mask.max_deviation <= tolerance) {
    err << "FAIL: ablation w/o attention mask unexpectedly matches separate passes\n";
    ok = false;
  }
  if (report.without_reencoding.max_deviation <= tolerance) {
    err << "FAIL: ablation w/o position re-encoding unexpectedly matches separate passes\n";
    ok = false;
  }
  out << (ok ? "equivalence verified" : "equivalence check failed") << '\n';
  return ok ? kOk : kVerificationFailed;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-ensemble multi-choice inference over a small transformer", "selfens"};
  app.require_subcommand(1);

  auto* init = app.add_subcommand("init-model", "Write a seeded SEW1 weights file");
  ModelConfig init_config;
  std::uint64_t init_seed = 0;
  std::string init_out;
  init->add_option("--seed", init_seed, "Weight seed")->capture_default_str();
  init->add_option("--out", init_out, "Output weights path")->required();
  add_config_flags(*init, init_config);

  auto* eval = app.add_subcommand("eval", "Evaluate a method on a JSONL dataset");
  RunOptions eval_opts;
  add_run_flags(*eval, eval_opts);

  auto* ablate = app.add_subcommand("ablate-choices",
                                    "Accuracy as the number of choices per question grows");
  RunOptions ablate_opts;
  std::vector<std::size_t> counts{2, 4, 6, 8};
  add_run_flags(*ablate, ablate_opts);
  ablate->add_option("--counts", counts, "Choice counts to evaluate")
      ->delimiter(',')
      ->capture_default_str();

  auto* verify = app.add_subcommand(
      "verify-equivalence", "Check the single masked pass against one pass per group");
  ModelOptions verify_model;
  EquivalenceOptions eq;
  double tolerance = 1e-5;
  std::string verify_mode = "full-vocab";
  bool disable_mask = false;
  bool disable_reencoding = false;
  add_model_flags(*verify, verify_model);
  verify->add_option("--samples", eq.samples, "Random cases")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  verify->add_option("--seed", eq.seed, "Case seed")->capture_default_str();
  verify->add_option("--tolerance", tolerance, "Max relative deviation")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  verify->add_option("--prob-mode", verify_mode, "full-vocab | group-renorm")
      ->check(CLI::IsMember({"full-vocab", "group-renorm"}))
      ->capture_default_str();
  verify->add_flag("--disable-mask", disable_mask,
                   "Run the single-pass arm with a plain causal mask");
  verify->add_flag("--disable-reencoding", disable_reencoding,
                   "Run the single-pass arm with physical positions");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*init) return cmd_init_model(init_config, init_seed, init_out, out);
    if (*eval) return cmd_eval(eval_opts, out, err);
    if (*ablate) return cmd_ablate(ablate_opts, counts, out, err);
    if (*verify) {
      eq.mode = *parse_prob_mode(verify_mode);
      return cmd_verify(verify_model, eq, tolerance, {!disable_mask, !disable_reencoding}, out,
                        err);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsageError;
  } catch (const DatasetError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const WeightsFormatError& e) {
    err << "model error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}

}  // namespace selfens::cli
