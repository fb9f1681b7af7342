// SPDX-License-Identifier: Apache-2.0

#include "mpt/cli.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

#include "mpt/analysis.hpp"
#include "mpt/binio.hpp"

namespace mpt::cli {

namespace fs = std::filesystem;

// ---- config ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc{} || ptr != last)
    throw ConfigError("bad value '" + value + "' for key '" + key + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "on" || value == "1") return true;
  if (value == "false" || value == "off" || value == "0") return false;
  throw ConfigError("bad boolean '" + value + "' for key '" + key + "' (use true/false)");
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

template <typename T>
Field size_field(std::string key, T RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return std::to_string(c.*member); },
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<T>(k, v);
          }};
}

template <typename Get>
Field nested_size(std::string key, Get get) {
  return {key, [get](const RunConfig& c) { return std::to_string(get(const_cast<RunConfig&>(c))); },
          [get](RunConfig& c, const std::string& k, const std::string& v) {
            get(c) = parse_number<std::remove_reference_t<decltype(get(c))>>(k, v);
          }};
}

template <typename Get>
Field nested_double(std::string key, Get get) {
  return {key, [get](const RunConfig& c) { return fmt_double(get(const_cast<RunConfig&>(c))); },
          [get](RunConfig& c, const std::string& k, const std::string& v) {
            get(c) = parse_number<double>(k, v);
          }};
}

Field double_field(std::string key, double RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return fmt_double(c.*member); },
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_number<double>(k, v);
          }};
}

Field bool_field(std::string key, bool RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); },
          [member](RunConfig& c, const std::string& k, const std::string& v) {
            c.*member = parse_bool(k, v);
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(nested_size("vocab_size", [](RunConfig& c) -> std::size_t& { return c.model.vocab_size; }));
    f.push_back(nested_size("d_model", [](RunConfig& c) -> std::size_t& { return c.model.d_model; }));
    f.push_back(nested_size("n_heads", [](RunConfig& c) -> std::size_t& { return c.model.n_heads; }));
    f.push_back(nested_size("enc_layers", [](RunConfig& c) -> std::size_t& { return c.model.enc_layers; }));
    f.push_back(nested_size("dec_layers", [](RunConfig& c) -> std::size_t& { return c.model.dec_layers; }));
    f.push_back(nested_size("ff_dim", [](RunConfig& c) -> std::size_t& { return c.model.ff_dim; }));
    f.push_back(nested_size("max_src_len", [](RunConfig& c) -> std::size_t& { return c.model.max_src_len; }));
    f.push_back(nested_size("max_tgt_len", [](RunConfig& c) -> std::size_t& { return c.model.max_tgt_len; }));
    f.push_back(nested_double("weight_gain", [](RunConfig& c) -> double& { return c.init.weight_gain; }));
    f.push_back(nested_double("embedding_std", [](RunConfig& c) -> double& { return c.init.embedding_std; }));
    f.push_back(size_field("model_seed", &RunConfig::model_seed));
    f.push_back(size_field("data_seed", &RunConfig::data_seed));
    f.push_back(nested_size("train_size", [](RunConfig& c) -> std::size_t& { return c.sizes.train; }));
    f.push_back(nested_size("dev_size", [](RunConfig& c) -> std::size_t& { return c.sizes.dev; }));
    f.push_back(nested_size("test_size", [](RunConfig& c) -> std::size_t& { return c.sizes.test; }));
    f.push_back(nested_size("min_len", [](RunConfig& c) -> std::size_t& { return c.lengths.min; }));
    f.push_back(nested_size("max_len", [](RunConfig& c) -> std::size_t& { return c.lengths.max; }));
    f.push_back(size_field("prompt_length", &RunConfig::prompt_length));
    f.push_back(double_field("lambda", &RunConfig::lambda));
    f.push_back(double_field("temperature", &RunConfig::temperature));
    f.push_back(double_field("factor_init_noise", &RunConfig::factor_init_noise));
    f.push_back({"optimizer", [](const RunConfig& c) { return optimizer_name(c.optimizer); },
                 [](RunConfig& c, const std::string& k, const std::string& v) {
                   try {
                     c.optimizer = parse_optimizer(v);
                   } catch (const std::invalid_argument& e) {
                     throw ConfigError(std::string(e.what()) + " for key '" + k + "'");
                   }
                 }});
    f.push_back(double_field("lr_teacher", &RunConfig::lr_teacher));
    f.push_back(double_field("lr_shared_source", &RunConfig::lr_shared_source));
    f.push_back(double_field("lr_specific_source", &RunConfig::lr_specific_source));
    f.push_back(double_field("lr_shared_target", &RunConfig::lr_shared_target));
    f.push_back(double_field("lr_specific_target", &RunConfig::lr_specific_target));
    f.push_back(double_field("adam_beta1", &RunConfig::adam_beta1));
    f.push_back(double_field("adam_beta2", &RunConfig::adam_beta2));
    f.push_back(double_field("adam_eps", &RunConfig::adam_eps));
    f.push_back(size_field("teacher_epochs", &RunConfig::teacher_epochs));
    f.push_back(size_field("source_epochs", &RunConfig::source_epochs));
    f.push_back(size_field("target_epochs", &RunConfig::target_epochs));
    f.push_back(size_field("batch_size", &RunConfig::batch_size));
    f.push_back(size_field("mixing_cap", &RunConfig::mixing_cap));
    f.push_back(size_field("seed", &RunConfig::seed));
    f.push_back(size_field("seeds", &RunConfig::num_seeds));
    f.push_back(bool_field("decomposition", &RunConfig::decomposition));
    f.push_back(bool_field("distillation", &RunConfig::distillation));
    f.push_back(bool_field("logits_loss", &RunConfig::logits_loss));
    f.push_back(bool_field("hidden_loss", &RunConfig::hidden_loss));
    f.push_back(bool_field("prompt_distance", &RunConfig::prompt_distance));
    f.push_back(bool_field("stochastic_sampling", &RunConfig::stochastic_sampling));
    f.push_back(bool_field("freeze_shared", &RunConfig::freeze_shared));
    f.push_back(bool_field("freeze_specific", &RunConfig::freeze_specific));
    f.push_back(size_field("few_shot_k", &RunConfig::few_shot_k));
    f.push_back(size_field("few_shot_draws", &RunConfig::few_shot_draws));
    return f;
  }();
  return table;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (std::find(seen.begin(), seen.end(), key) != seen.end())
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    seen.push_back(key);
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig parse_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  try {
    return parse_config_text(read_file_bytes(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

RunConfig resolve_config(const CliInvocation& inv) {
  RunConfig cfg = inv.config_path ? parse_config(*inv.config_path) : RunConfig{};
  for (const auto& kv : inv.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + kv + "' is not key=value");
    set_config_value(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }
  if (const char* env = std::getenv("MPT_SEED"); env && *env)
    cfg.seed = parse_number<std::uint64_t>("MPT_SEED", env);
  if (inv.seed) cfg.seed = *inv.seed;
  cfg.validate();
  return cfg;
}

// ---- artifact store ----------------------------------------------------------------------

std::string content_hash(const fs::path& path) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(read_file_bytes(path))));
  return buf;
}

std::map<std::string, std::string> read_manifest(const fs::path& output_dir) {
  std::map<std::string, std::string> entries;
  const fs::path path = output_dir / "manifest.tsv";
  if (!fs::exists(path)) return entries;
  std::istringstream in(read_file_bytes(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("manifest.tsv: malformed line '" + line + "'");
    entries[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return entries;
}

namespace {

class OutputLock {
 public:
  explicit OutputLock(const fs::path& dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0)
      throw std::runtime_error("output directory is in use (lock file " + path_.string() + ")");
  }
  ~OutputLock() {
    ::close(fd_);
    std::error_code ec;
    fs::remove(path_, ec);
  }
  OutputLock(const OutputLock&) = delete;
  OutputLock& operator=(const OutputLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

struct Stage {
  RunConfig cfg;
  fs::path out;
  std::ostream& log;
  std::map<std::string, std::string> manifest;
  std::vector<std::string> written;

  fs::path at(const std::string& rel) const { return out / rel; }

  void wrote(const std::string& rel) { written.push_back(rel); }

  void write_text(const std::string& rel, const std::string& text) {
    write_file_bytes(at(rel), text);
    wrote(rel);
  }

  // The file must exist and, when recorded, still match its manifest hash.
  fs::path require(const std::string& rel, const std::string& producer) const {
    const fs::path p = at(rel);
    if (!fs::exists(p))
      throw MissingArtifactError("missing artifact " + p.string() + " (run " + producer + " first)");
    auto it = manifest.find(rel);
    if (it != manifest.end() && content_hash(p) != it->second)
      throw std::runtime_error("artifact " + rel + " changed since it was recorded");
    return p;
  }

  void commit() {
    for (const auto& rel : written) manifest[rel] = content_hash(at(rel));
    std::string text;
    for (const auto& [rel, h] : manifest) text += rel + "\t" + h + "\n";
    write_file_bytes(out / "manifest.tsv", text);
  }

  FrozenModel model() const { return FrozenModel::load(require("model.mptm", "gen-tasks")); }

  TaskCorpus corpus(const std::string& id) const {
    for (Split s : {Split::kTrain, Split::kDev, Split::kTest})
      require("tasks/" + id + "." + split_name(s) + ".tsv", "gen-tasks");
    return read_corpus(out / "tasks", id);
  }

  std::vector<TaskCorpus> corpora(const std::vector<TaskSpec>& specs) const {
    std::vector<TaskCorpus> out_corpora;
    for (const auto& t : specs) out_corpora.push_back(corpus(t.task_id));
    return out_corpora;
  }

  std::vector<TaskSpec> selected_targets(const std::optional<std::string>& task) const {
    const std::vector<TaskSpec> all = cfg.suite_spec().targets;
    if (!task) return all;
    for (const auto& t : all)
      if (t.task_id == *task) return {t};
    throw std::invalid_argument("unknown target task '" + *task + "'");
  }

  Decomposition source() const {
    return load_decomposition(require("source/decomposition.mptp", "train-source"));
  }
};

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void gen_tasks(Stage& s) {
  Rng model_rng(s.cfg.model_seed);
  const FrozenModel model = init_model(s.cfg.model, model_rng, s.cfg.init);
  model.save(s.at("model.mptm"));
  s.wrote("model.mptm");
  const Suite suite = generate_suite(s.cfg.suite_spec(), s.cfg.data_seed);
  std::size_t n = 0;
  for (const auto* group : {&suite.sources, &suite.targets})
    for (const auto& c : *group) {
      write_corpus(s.at("tasks"), c);
      for (Split sp : {Split::kTrain, Split::kDev, Split::kTest})
        s.wrote("tasks/" + c.task_id + "." + split_name(sp) + ".tsv");
      ++n;
    }
  s.write_text("config.txt", serialize_config(s.cfg));
  s.log << "gen-tasks: model " << hex(model.checksum()) << ", " << n << " tasks\n";
}

void train_teachers_stage(Stage& s) {
  const FrozenModel model = s.model();
  const std::vector<TaskCorpus> sources = s.corpora(s.cfg.suite_spec().sources);
  std::map<std::string, TrainReport> reports;
  const TeacherSet teachers = train_teachers(model, sources, s.cfg, &reports);
  for (const auto& [id, p] : teachers) {
    save_vanilla(s.at("teachers/" + id + ".mptv"), p);
    s.wrote("teachers/" + id + ".mptv");
    s.write_text("reports/teacher_" + id + ".tsv", format_report(reports.at(id)));
    s.log << "train-teachers: " << id << " final l_plm " << reports.at(id).epochs.back().l_plm
          << "\n";
  }
}

void train_source_stage(Stage& s) {
  const FrozenModel model = s.model();
  const std::vector<TaskCorpus> sources = s.corpora(s.cfg.suite_spec().sources);
  TeacherSet teachers;
  if (s.cfg.distill_config().distillation_active())
    for (const auto& c : sources)
      teachers.emplace(c.task_id,
                       load_vanilla(s.require("teachers/" + c.task_id + ".mptv", "train-teachers")));
  const SourceResult r = train_source(model, sources, teachers, s.cfg);
  save_decomposition(s.at("source/decomposition.mptp"), r.shared, r.factors);
  s.wrote("source/decomposition.mptp");
  std::ostringstream manifests;
  write_manifests(manifests, r.manifests);
  s.write_text("source/manifests.tsv", manifests.str());
  s.write_text("reports/source.tsv", format_report(r.report));
  s.log << "train-source: " << r.manifests.size() << " steps, final l_total "
        << (r.report.epochs.empty() ? 0.0 : r.report.epochs.back().l_total) << "\n";
}

void adapt_target_stage(Stage& s, const std::optional<std::string>& task) {
  const FrozenModel model = s.model();
  const Decomposition src = s.source();
  for (const auto& spec : s.selected_targets(task)) {
    const TaskCorpus target = s.corpus(spec.task_id);
    const AdaptResult r = adapt_target(model, src.shared, src.factors, target, s.cfg);
    const std::string dir = "targets/" + spec.task_id + "/";
    save_decomposition(s.at(dir + "decomposition.mptp"), r.shared, {r.factors});
    s.wrote(dir + "decomposition.mptp");
    save_vanilla(s.at(dir + "compressed.mptv"), compress(r.shared, r.factors));
    s.wrote(dir + "compressed.mptv");
    s.write_text("reports/target_" + spec.task_id + ".tsv", format_report(r.report));
    s.log << "adapt-target: " << spec.task_id << " accuracy " << r.accuracy << "\n";
  }
}

void adapt_group_stage(Stage& s) {
  const FrozenModel model = s.model();
  const Decomposition src = s.source();
  const std::vector<TaskCorpus> targets = s.corpora(s.cfg.suite_spec().targets);
  const GroupResult r = adapt_target_group(model, src.shared, src.factors, targets, s.cfg);
  save_decomposition(s.at("targets/group/decomposition.mptp"), r.shared, r.factors);
  s.wrote("targets/group/decomposition.mptp");
  s.write_text("reports/group.tsv", format_report(r.report));
  for (const auto& [id, acc] : r.accuracy) s.log << "adapt-group: " << id << " accuracy " << acc << "\n";
  s.log << "adapt-group: " << r.params_per_task << " parameters per task\n";
}

void few_shot_stage(Stage& s, const std::optional<std::string>& task) {
  const FrozenModel model = s.model();
  const Decomposition src = s.source();
  for (const auto& spec : s.selected_targets(task)) {
    const TaskCorpus target = s.corpus(spec.task_id);
    const FewShotComparison r = run_few_shot(model, src.shared, src.factors, target, s.cfg);
    std::ostringstream os;
    os << "draw\tmpt\tpt\n";
    char buf[64];
    for (std::size_t i = 0; i < r.mpt.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu\t%.4f\t%.4f\n", i, r.mpt[i], r.pt[i]);
      os << buf;
    }
    std::snprintf(buf, sizeof buf, "mean\t%.4f\t%.4f\n", r.mpt_mean(), r.pt_mean());
    os << buf;
    s.write_text("reports/few_shot_" + spec.task_id + ".tsv", os.str());
    s.log << "few-shot: " << spec.task_id << " k=" << r.k << " mpt " << r.mpt_mean() << " pt "
          << r.pt_mean() << "\n";
  }
}

void ablate_stage(Stage& s) {
  const FrozenModel model = s.model();
  const SuiteSpec spec = s.cfg.suite_spec();
  Suite suite{s.corpora(spec.sources), s.corpora(spec.targets)};
  const AblationTable table = run_ablation_grid(model, suite, s.cfg);
  std::ostringstream os;
  write_ablation(os, table);
  s.write_text("reports/ablation.tsv", os.str());
  s.log << os.str();
}

void analyze_stage(Stage& s) {
  const Decomposition src = s.source();
  const SuiteSpec spec = s.cfg.suite_spec();
  std::vector<std::pair<std::string, Vector>> embeddings;
  for (const auto& t : spec.sources) {
    auto it = std::find_if(src.factors.begin(), src.factors.end(),
                           [&](const TaskFactors& f) { return f.task_id == t.task_id; });
    const TaskFactors f = it != src.factors.end()
                              ? *it
                              : identity_factors(t.task_id, src.shared.length(), src.shared.width());
    embeddings.emplace_back(t.task_id, prompt_embedding(src.shared, f));
  }
  for (const auto& t : spec.targets) {
    const Decomposition adapted = load_decomposition(
        s.require("targets/" + t.task_id + "/decomposition.mptp", "adapt-target"));
    if (adapted.factors.size() != 1)
      throw FormatError("targets/" + t.task_id + ": expected exactly one task factor");
    embeddings.emplace_back(t.task_id, prompt_embedding(adapted.shared, adapted.factors.front()));
  }
  const SimilarityMatrix sim = similarity_matrix(embeddings);
  s.write_text("reports/similarity.txt", format_similarity_text(sim));
  write_heatmap_ppm(s.at("reports/similarity.ppm"), sim);
  s.wrote("reports/similarity.ppm");
  std::ostringstream eff;
  write_efficiency(eff, efficiency_report(s.cfg.prompt_length, s.cfg.model.d_model,
                                          spec.targets.size()));
  s.write_text("reports/efficiency.tsv", eff.str());
  s.log << format_similarity_text(sim) << eff.str();
}

void report_stage(Stage& s) {
  if (s.manifest.empty()) throw MissingArtifactError("no manifest.tsv in " + s.out.string());
  std::size_t bad = 0;
  for (const auto& [rel, h] : s.manifest) {
    const fs::path p = s.at(rel);
    const bool ok = fs::exists(p) && content_hash(p) == h;
    if (!ok) ++bad;
    s.log << (ok ? "ok      " : "CHANGED ") << h << "  " << rel << "\n";
  }
  for (const auto* name : {"reports/ablation.tsv", "reports/similarity.txt", "reports/efficiency.tsv"})
    if (fs::exists(s.at(name))) s.log << "\n" << name << ":\n" << read_file_bytes(s.at(name));
  if (bad) throw std::runtime_error(std::to_string(bad) + " artifact(s) do not match the manifest");
}

}  // namespace

int run(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
  const std::string& stage = inv.subcommand;
  try {
    if (std::find(subcommands().begin(), subcommands().end(), stage) == subcommands().end())
      throw std::invalid_argument("unknown subcommand '" + stage + "'");
    RunConfig cfg = resolve_config(inv);
    OutputLock lock(inv.output_dir);
    Stage s{std::move(cfg), inv.output_dir, out, read_manifest(inv.output_dir), {}};
    if (stage == "gen-tasks") gen_tasks(s);
    else if (stage == "train-teachers") train_teachers_stage(s);
    else if (stage == "train-source") train_source_stage(s);
    else if (stage == "adapt-target") adapt_target_stage(s, inv.task);
    else if (stage == "adapt-group") adapt_group_stage(s);
    else if (stage == "few-shot") few_shot_stage(s, inv.task);
    else if (stage == "ablate") ablate_stage(s);
    else if (stage == "analyze") analyze_stage(s);
    else report_stage(s);
    if (!s.written.empty()) s.commit();
    return 0;
  } catch (const MissingArtifactError& e) {
    err << "mpt " << stage << ": " << e.what() << "\n";
    return 3;
  } catch (const ConfigError& e) {
    err << "mpt " << stage << ": config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "mpt " << stage << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace mpt::cli
