// tspsel: generate corpora, benchmark the solver portfolio, analyze run
// tables, train and evaluate the image-based selector.
//
// Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tspsel/instances.hpp"
#include "tspsel/metrics.hpp"
#include "tspsel/raster.hpp"
#include "tspsel/report.hpp"
#include "tspsel/run_table.hpp"
#include "tspsel/runner.hpp"
#include "tspsel/selector.hpp"
#include "tspsel/workspace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tspsel;

namespace {

std::string timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

json manifest_header(const std::string& command) {
  return {{"tool", "tspsel"},
          {"tool_version", kToolVersion},
          {"format_version", kManifestFormatVersion},
          {"command", command},
          {"created", timestamp()}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed to write " + path.string());
}

fs::path manifest_path(const fs::path& csv) { return fs::path(csv.string() + ".manifest.json"); }

/// Cutoff and penalty recorded next to a run table, or the given fallbacks.
std::pair<double, double> table_settings(const fs::path& csv, double cutoff, double penalty, bool* wallclock) {
  const auto mpath = manifest_path(csv);
  if (fs::exists(mpath)) {
    const auto m = read_json(mpath);
    if (m.contains("config")) {
      const auto& c = m["config"];
      if (cutoff <= 0.0) cutoff = c.value("cutoff", 900.0);
      if (penalty <= 0.0) penalty = c.value("penalty_factor", 10.0);
      if (wallclock) *wallclock = c.value("mode", std::string("deterministic")) == "wallclock";
    }
  }
  return {cutoff > 0.0 ? cutoff : 900.0, penalty > 0.0 ? penalty : 10.0};
}

/// Checks `path` against the hash a manifest recorded for it. Files without a
/// manifest entry are accepted as they are.
void verify_hash(const fs::path& path, const fs::path& manifest, const char* key, bool enabled) {
  if (!enabled || !fs::exists(manifest)) return;
  const auto m = read_json(manifest);
  if (!m.contains(key) || !m[key].contains("hash")) return;
  if (m[key]["hash"].get<std::string>() != file_hash(path))
    throw Error(path.string() + " does not match the hash recorded in " + manifest.string() +
                "; pass --no-verify to use it anyway");
}

RunTable load_table(const std::string& csv, double cutoff, double penalty, bool verify, bool* wallclock = nullptr) {
  verify_hash(csv, manifest_path(csv), "run_table", verify);
  const auto [c, p] = table_settings(csv, cutoff, penalty, wallclock);
  RunTable table = load_csv(fs::path(csv), c, p);
  table.validate();
  return table;
}

// ---------------------------------------------------------------------------

struct GenerateOpts {
  std::string family = "all";
  std::size_t count = 1;
  std::size_t n_min = 50, n_max = 200;
  std::uint64_t seed = 0;
  std::vector<std::string> params;
  std::string out;
};

int cmd_generate(const GenerateOpts& o) {
  std::vector<Family> families;
  if (o.family == "all") {
    families.assign(kGeneratedFamilies.begin(), kGeneratedFamilies.end());
  } else {
    const auto f = parse_family(o.family);
    if (!f || *f == Family::unknown) throw ConfigError("unknown family '" + o.family + "'");
    families.push_back(*f);
  }
  std::map<std::string, double> params;
  for (const auto& kv : o.params) {
    const auto eq = kv.find('=');
    double v = 0.0;
    if (eq == std::string::npos || !detail::parse_number(kv.substr(eq + 1), v))
      throw ConfigError("--param expects key=value, got '" + kv + "'");
    params[kv.substr(0, eq)] = v;
  }
  fs::create_directories(o.out);
  json config{{"family", o.family}, {"count", o.count}, {"n_min", o.n_min}, {"n_max", o.n_max}, {"seed", o.seed},
              {"params", params}};
  std::size_t written = 0;
  for (Family f : families) {
    GenSpec spec;
    spec.family = f;
    spec.count = o.count;
    spec.n_min = o.n_min;
    spec.n_max = o.n_max;
    spec.seed = o.seed;
    spec.family_params = params;
    for (const auto& inst : generate(spec)) {
      write_tsplib(inst, fs::path(o.out) / (inst.id + ".tsp"));
      ++written;
    }
  }
  json manifest = manifest_header("generate");
  manifest["config"] = config;
  manifest["corpus"] = corpus_hashes(o.out);
  write_json(manifest, fs::path(o.out) / "manifest.json");
  std::cout << "wrote " << written << " instances to " << o.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct RunOpts {
  std::string corpus, portfolio, out, scratch;
  std::size_t reps = 5;
  double cutoff = 900.0, penalty = 10.0, cost_rate = 1e6, epsilon = 0.0, ref_multiplier = 2.0;
  std::string mode = "deterministic";
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool resume = false;
  bool quiet = false;
};

/// Rows of an interrupted run's journal; a torn final line is ignored.
std::vector<RunTableRow> read_journal(const fs::path& path) {
  std::vector<RunTableRow> rows;
  std::ifstream in(path, std::ios::binary);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (!detail::trim(line).empty()) lines.push_back(line);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    std::istringstream one(lines[k]);
    try {
      for (auto& r : parse_rows(one, k + 1)) rows.push_back(std::move(r));
    } catch (const ParseError&) {
      if (k + 1 != lines.size()) throw;
    }
  }
  return rows;
}

int cmd_run(const RunOpts& o) {
  RunConfig cfg;
  cfg.reps = o.reps;
  cfg.cutoff_s = o.cutoff;
  cfg.penalty_factor = o.penalty;
  cfg.seed = o.seed;
  cfg.cost_rate = o.cost_rate;
  cfg.epsilon = o.epsilon;
  cfg.workers = std::max<std::size_t>(1, o.workers);
  if (o.mode == "deterministic")
    cfg.mode = TimingMode::deterministic;
  else if (o.mode == "wallclock")
    cfg.mode = TimingMode::wallclock;
  else
    throw ConfigError("--mode must be deterministic or wallclock");
  if (!o.scratch.empty()) cfg.scratch_dir = o.scratch;
  cfg.validate();
  if (!(o.ref_multiplier >= 1.0)) throw ConfigError("--ref-multiplier must be at least 1");

  const auto instances = load_corpus(o.corpus);
  const auto solvers = o.portfolio.empty() ? default_portfolio() : load_portfolio(o.portfolio);
  const fs::path out = o.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const fs::path journal = fs::path(out.string() + ".partial");
  const fs::path mpath = manifest_path(out);

  json config{{"reps", cfg.reps},         {"cutoff", cfg.cutoff_s},   {"penalty_factor", cfg.penalty_factor},
              {"mode", o.mode},           {"seed", cfg.seed},         {"cost_rate", cfg.cost_rate},
              {"epsilon", cfg.epsilon},   {"ref_multiplier", o.ref_multiplier}};
  const json portfolio = portfolio_json(solvers);
  const json corpus = corpus_hashes(o.corpus);

  std::map<std::string, double> refs;
  if (o.resume && fs::exists(mpath)) {
    const auto old = read_json(mpath);
    if (old.value("config", json{}) != config || old.value("portfolio", json{}) != portfolio ||
        old.value("corpus", json{}).value("corpus_hash", "") != corpus["corpus_hash"])
      throw ConfigError("cannot resume: configuration, portfolio or corpus changed since the interrupted run");
    refs = old.at("references").get<std::map<std::string, double>>();
  } else {
    const auto lengths = oracle_pass(instances, solvers, o.ref_multiplier, cfg);
    for (std::size_t i = 0; i < instances.size(); ++i) refs[instances[i].id] = lengths[i];
  }
  json manifest = manifest_header("run");
  manifest["config"] = config;
  manifest["portfolio"] = portfolio;
  manifest["corpus"] = corpus;
  manifest["corpus_dir"] = o.corpus;
  json ref_json = json::object();
  for (const auto& [id, len] : refs) ref_json[id] = len;
  manifest["references"] = ref_json;
  manifest["status"] = "running";
  write_json(manifest, mpath);

  std::map<PairKey, PairResult> completed;
  if (o.resume) {
    std::vector<RunTableRow> rows;
    if (fs::exists(journal)) rows = read_journal(journal);
    for (const auto& r : rows) completed[{r.instance_id, r.solver_id}] = {r.median_time_s, r.success};
  }
  // The journal is rewritten from the parsed rows so that a line cut off by
  // the interruption does not merge with the first appended one.
  std::ofstream sink(journal, std::ios::trunc | std::ios::binary);
  if (!sink) throw IoError("cannot open " + journal.string());
  for (const auto& [key, r] : completed) {
    const auto f = std::find_if(instances.begin(), instances.end(), [&](const Instance& x) { return x.id == key.first; });
    sink << format_row({key.first, f == instances.end() ? Family::unknown : f->family, key.second, r.median_time_s,
                        r.success})
         << '\n';
  }
  sink << std::flush;
  std::size_t done = completed.size();
  const std::size_t total = instances.size() * solvers.size();
  auto on_pair = [&](const Instance& inst, const SolverSpec& spec, const PairResult& r) {
    sink << format_row({inst.id, inst.family, spec.id, r.median_time_s, r.success}) << '\n' << std::flush;
    ++done;
    if (!o.quiet && (done % 50 == 0 || done == total)) std::cerr << "run: " << done << "/" << total << " pairs\n";
  };
  const auto result = run_portfolio(instances, solvers, cfg, refs, completed, on_pair);
  sink.close();
  save_csv(result.table, out);
  fs::remove(journal);
  manifest["status"] = "complete";
  manifest["run_table"] = {{"path", out.filename().string()}, {"hash", file_hash(out)}};
  write_json(manifest, mpath);
  std::cout << "wrote " << out.string() << " (" << result.table.rows() << " instances x " << result.table.cols()
            << " solvers)\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct AnalyzeOpts {
  std::string table, scatter, json_out, report_out;
  double tie_tol = -1.0, cutoff = 0.0, penalty = 0.0;
  bool no_verify = false;
};

int cmd_analyze(const AnalyzeOpts& o) {
  bool wallclock = false;
  const RunTable table = load_table(o.table, o.cutoff, o.penalty, !o.no_verify, &wallclock);
  const double tie_tol = o.tie_tol >= 0.0 ? o.tie_tol : (wallclock ? 0.05 : 0.0);
  const auto stats = family_stats(table, tie_tol);
  const std::string report = format_family_report(table, stats);
  std::cout << report;
  if (!o.report_out.empty()) write_text(o.report_out, report);
  if (!o.json_out.empty()) {
    json j = family_report_json(table, stats);
    j["tie_tol"] = tie_tol;
    j["table_hash"] = file_hash(o.table);
    write_json(j, o.json_out);
  }
  if (!o.scatter.empty()) {
    std::ofstream out(o.scatter, std::ios::binary);
    if (!out) throw IoError("cannot open " + o.scatter + " for writing");
    write_scatter(table, out);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainOpts {
  std::string table, corpus, out, strategy = "cla", label = "hard", target = "log10", normalize = "isotropic";
  std::size_t epochs = 50, batch = 64, patience = 10, d = 7, c = 64, k = 1;
  double lr = 1e-4, decay_rate = 0.9, alpha = 0.5, tau = 1.0, train_fraction = 0.7, cutoff = 0.0, penalty = 0.0;
  bool flip = true, quiet = false, no_verify = false;
  std::uint64_t seed = 0, split_seed = 0;
};

NormalizeMode parse_normalize(const std::string& s) {
  if (s == "isotropic") return NormalizeMode::isotropic;
  if (s == "per_axis") return NormalizeMode::per_axis;
  throw ConfigError("--normalize must be isotropic or per_axis");
}

int cmd_train(const TrainOpts& o) {
  const RunTable table = load_table(o.table, o.cutoff, o.penalty, !o.no_verify);
  const auto instances = load_corpus(o.corpus);
  LabelConfig lc;
  if (o.label == "hard")
    lc.mode = LabelMode::hard;
  else if (o.label == "soft")
    lc.mode = LabelMode::soft;
  else
    throw ConfigError("--label must be hard or soft");
  lc.tau = o.tau;
  lc.alpha = o.alpha;
  const auto examples = build_dataset(instances, table, lc);
  const SplitSpec ss{o.train_fraction, o.split_seed};
  const auto parts = split(examples, ss);
  for (const auto& w : parts.warnings) std::cerr << "warning: " << w << '\n';
  std::vector<LabeledExample> train_set;
  for (std::size_t i : parts.train) train_set.push_back(examples[i]);

  TrainConfig tc;
  tc.strategy = parse_strategy(o.strategy);
  tc.epochs = o.epochs;
  tc.batch = o.batch;
  tc.lr = o.lr;
  tc.decay_rate = o.decay_rate;
  tc.patience = o.patience;
  if (o.target == "log10")
    tc.target_transform = TargetTransform::log10;
  else if (o.target == "raw")
    tc.target_transform = TargetTransform::raw;
  else
    throw ConfigError("--target must be log10 or raw");
  tc.augment = {o.flip, o.d};
  tc.raster = {o.c, o.k, parse_normalize(o.normalize)};
  tc.seed = o.seed;
  auto on_epoch = [&](std::size_t e, double loss, double lr) {
    if (!o.quiet) std::cerr << "epoch " << e << " loss " << format_real(loss) << " lr " << format_real(lr) << '\n';
  };
  SelectorModel sm;
  try {
    sm = train(train_set, table.solvers, tc, on_epoch);
  } catch (const TrainingDiverged& e) {
    const fs::path rescue = o.out + ".last_good";
    save_selector(e.last_good(), rescue);
    std::cerr << "training diverged; last good model saved to " << rescue.string() << '\n';
    throw;
  }
  save_selector(sm, o.out);

  json manifest = manifest_header("train");
  manifest["corpus"] = corpus_hashes(o.corpus);
  manifest["run_table"] = {{"path", o.table}, {"hash", file_hash(o.table)}};
  json assignment = json::object();
  for (std::size_t i : parts.train) assignment[examples[i].instance.id] = "train";
  for (std::size_t i : parts.test) assignment[examples[i].instance.id] = "test";
  manifest["split"] = {{"seed", o.split_seed}, {"train_fraction", o.train_fraction}, {"assignment", assignment}};
  manifest["train_config"] = {{"strategy", o.strategy}, {"epochs", o.epochs},   {"batch", o.batch},
                              {"lr", o.lr},             {"decay_rate", o.decay_rate}, {"patience", o.patience},
                              {"alpha", o.alpha},       {"label", o.label},     {"tau", o.tau},
                              {"target", o.target},     {"d", o.d},             {"flip", o.flip},
                              {"c", o.c},               {"k", o.k},             {"normalize", o.normalize},
                              {"seed", o.seed}};
  manifest["epoch_losses"] = sm.epoch_losses;
  manifest["checkpoint"] = {{"path", o.out}, {"hash", file_hash(o.out)}};
  write_json(manifest, o.out + ".dataset.json");
  std::cout << "trained " << o.strategy << " selector on " << train_set.size() << " instances; final loss "
            << format_real(sm.epoch_losses.back()) << "; wrote " << o.out << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateOpts {
  std::string table, corpus, model, baseline, decisions, predictions, json_out;
  std::size_t k = 5;
  double train_fraction = 0.7, cutoff = 0.0, penalty = 0.0, cost_rate = 1e6;
  std::uint64_t split_seed = 0;
  bool no_verify = false;
};

int cmd_evaluate(const EvaluateOpts& o) {
  const RunTable table = load_table(o.table, o.cutoff, o.penalty, !o.no_verify);
  std::vector<std::pair<std::string, EvalReport>> rows;

  auto reference_rows = [&](const RunTable& sub) {
    const std::vector<std::size_t> single(sub.rows(), sbs(sub));
    rows.emplace_back("SBS (" + sub.solvers[single[0]] + ")", evaluate_selector(sub, single));
    rows.emplace_back("VBS", evaluate_selector(sub, vbs(sub).choice));
  };

  if (!o.decisions.empty()) {
    std::ifstream in(o.decisions, std::ios::binary);
    if (!in) throw IoError("cannot open " + o.decisions);
    const auto preds = read_predictions(in);
    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < table.rows(); ++i) row_of[table.instances[i]] = i;
    std::vector<std::size_t> subset;
    for (const auto& p : preds) {
      const auto it = row_of.find(p.instance_id);
      if (it == row_of.end()) throw ConfigError("decision for unknown instance " + p.instance_id);
      subset.push_back(it->second);
    }
    std::sort(subset.begin(), subset.end());
    const RunTable sub = subset_rows(table, subset);
    const auto [decisions, overhead] = align_predictions(sub, preds);
    rows.emplace_back("decisions", evaluate_selector(sub, decisions, overhead));
    reference_rows(sub);
  } else {
    if (o.corpus.empty()) throw ConfigError("--corpus is required unless --decisions is given");
    const auto instances = load_corpus(o.corpus);
    const auto examples = build_dataset(instances, table);
    const auto parts = split(examples, SplitSpec{o.train_fraction, o.split_seed});
    const RunTable test = subset_rows(table, parts.test);
    if (test.rows() == 0) throw ConfigError("the test split is empty");

    if (!o.model.empty()) {
      verify_hash(o.model, o.model + ".dataset.json", "checkpoint", !o.no_verify);
      const SelectorModel sm = load_selector(o.model);
      if (sm.solvers != table.solvers)
        throw ConfigError("checkpoint was trained for solvers that differ from the run table's");
      std::vector<std::size_t> decisions;
      std::vector<double> overhead;
      std::vector<Prediction> preds;
      for (std::size_t i : parts.test) {
        const auto& inst = examples[i].instance;
        decisions.push_back(select(sm, inst));
        // Building the density map visits every city once.
        overhead.push_back(static_cast<double>(inst.size()) / o.cost_rate);
        preds.push_back({inst.id, table.solvers[decisions.back()], std::string(to_string(sm.strategy)),
                         overhead.back()});
      }
      rows.emplace_back("CNN " + std::string(to_string(sm.strategy)), evaluate_selector(test, decisions, overhead));
      if (!o.predictions.empty()) {
        std::ofstream out(o.predictions, std::ios::binary);
        if (!out) throw IoError("cannot open " + o.predictions + " for writing");
        write_predictions(preds, out);
      }
    }
    if (!o.baseline.empty()) {
      if (o.baseline != "knn") throw ConfigError("--baseline supports only knn");
      std::vector<std::array<double, kFeatureCount>> feats;
      std::vector<std::vector<double>> times;
      for (std::size_t i : parts.train) {
        feats.push_back(cheap_features(examples[i].instance, o.cost_rate).values);
        times.push_back(examples[i].t);
      }
      const KnnBaseline knn(feats, times, o.k);
      std::vector<std::size_t> decisions;
      std::vector<double> overhead;
      for (std::size_t i : parts.test) {
        const auto fv = cheap_features(examples[i].instance, o.cost_rate);
        decisions.push_back(knn.select(fv.values));
        overhead.push_back(fv.time_s);
      }
      rows.emplace_back("kNN k=" + std::to_string(o.k), evaluate_selector(test, decisions, overhead));
    }
    reference_rows(test);
  }
  std::cout << format_eval_report(rows);
  if (!o.json_out.empty()) write_json({{"rows", eval_report_json(rows)}, {"table_hash", file_hash(o.table)}}, o.json_out);
  return 0;
}

// ---------------------------------------------------------------------------

struct RasterOpts {
  std::string corpus, instance, out, normalize = "isotropic";
  std::size_t c = 64, k = 4;
};

int cmd_raster(const RasterOpts& o) {
  std::vector<Instance> instances;
  if (!o.instance.empty())
    instances.push_back(read_tsplib(fs::path(o.instance)));
  else if (!o.corpus.empty())
    instances = load_corpus(o.corpus);
  else
    throw ConfigError("give --corpus or --instance");
  const RasterConfig rc{o.c, o.k, parse_normalize(o.normalize)};
  rc.validate();
  fs::create_directories(o.out);
  for (const auto& inst : instances) {
    const Image img = render(inst.points, rc);
    write_pgm(img, fs::path(o.out) / (inst.id + ".pgm"));
    write_json(pgm_sidecar(inst.id, rc, inst.size(), img), fs::path(o.out) / (inst.id + ".json"));
  }
  std::cout << "wrote " << instances.size() << " density maps to " << o.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image-based algorithm selection for the travelling salesman problem"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read option defaults from a TOML/INI file (flags take precedence)");
  app.set_version_flag("--version", std::string("tspsel ") + kToolVersion + " (run table v" +
                                        std::to_string(kRunTableFormatVersion) + ", checkpoint v" +
                                        std::to_string(nn::kCheckpointVersion) + ", manifest v" +
                                        std::to_string(kManifestFormatVersion) + ")");
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());

  GenerateOpts gen;
  auto* g = app.add_subcommand("generate", "Write a seeded corpus of TSPLIB instances");
  g->add_option("--family", gen.family, "Family name or 'all'")->capture_default_str();
  g->add_option("--count", gen.count, "Instances per family")->capture_default_str();
  g->add_option("--n-min", gen.n_min, "Minimum number of cities")->capture_default_str();
  g->add_option("--n-max", gen.n_max, "Maximum number of cities")->capture_default_str();
  g->add_option("--seed", gen.seed, "Base seed")->capture_default_str();
  g->add_option("--param", gen.params, "Generator parameter override key=value (repeatable)");
  g->add_option("--out", gen.out, "Output directory")->required();

  RunOpts run;
  run.workers = hw;
  auto* r = app.add_subcommand("run", "Reference pass plus repeated runs of every (instance, solver) pair");
  r->add_option("--corpus", run.corpus, "Corpus directory")->required();
  r->add_option("--portfolio", run.portfolio, "Portfolio JSON (default: the four built-in solvers)");
  r->add_option("--reps", run.reps, "Runs per pair")->capture_default_str();
  r->add_option("--cutoff", run.cutoff, "Cutoff in (virtual) seconds")->capture_default_str();
  r->add_option("--penalty", run.penalty, "Penalty factor for failed runs")->capture_default_str();
  r->add_option("--mode", run.mode, "deterministic or wallclock")->capture_default_str();
  r->add_option("--seed", run.seed, "Base seed")->capture_default_str();
  r->add_option("--cost-rate", run.cost_rate, "Evaluated moves per virtual second")->capture_default_str();
  r->add_option("--epsilon", run.epsilon, "Success threshold is (1 + epsilon) * reference")->capture_default_str();
  r->add_option("--ref-multiplier", run.ref_multiplier, "Cutoff multiplier of the reference pass")
      ->capture_default_str();
  r->add_option("--workers", run.workers, "Worker threads")->capture_default_str();
  r->add_option("--scratch", run.scratch, "Scratch directory for external solvers");
  r->add_flag("--resume", run.resume, "Continue an interrupted run with the same output path");
  r->add_flag("--quiet", run.quiet, "No progress output");
  r->add_option("--out", run.out, "Output run-table CSV")->required();

  AnalyzeOpts an;
  auto* a = app.add_subcommand("analyze", "Per-family statistics, VBS and SBS of a run table");
  a->add_option("--table", an.table, "Run-table CSV")->required();
  a->add_option("--tie-tol", an.tie_tol, "Absolute tie tolerance (default 0, or 0.05 for wall-clock tables)");
  a->add_option("--cutoff", an.cutoff, "Cutoff of the table (default: from its manifest, else 900)");
  a->add_option("--penalty", an.penalty, "Penalty factor (default: from its manifest, else 10)");
  a->add_option("--scatter", an.scatter, "Write per-instance sbs/vbs/alt times to this CSV");
  a->add_option("--json", an.json_out, "Write the report as JSON");
  a->add_option("--report", an.report_out, "Also write the text report to this file");
  a->add_flag("--no-verify", an.no_verify, "Skip the manifest hash check of the table");

  TrainOpts tr;
  auto* t = app.add_subcommand("train", "Train the CNN selector on the training split");
  t->add_option("--table", tr.table, "Run-table CSV")->required();
  t->add_option("--corpus", tr.corpus, "Corpus directory")->required();
  t->add_option("--strategy", tr.strategy, "cla or reg")->capture_default_str();
  t->add_option("--epochs", tr.epochs)->capture_default_str();
  t->add_option("--batch", tr.batch)->capture_default_str();
  t->add_option("--lr", tr.lr)->capture_default_str();
  t->add_option("--decay-rate", tr.decay_rate)->capture_default_str();
  t->add_option("--patience", tr.patience)->capture_default_str();
  t->add_option("--alpha", tr.alpha, "Weight exponent, w = t^alpha")->capture_default_str();
  t->add_option("--label", tr.label, "hard or soft")->capture_default_str();
  t->add_option("--tau", tr.tau, "Soft-label temperature")->capture_default_str();
  t->add_option("--target", tr.target, "Regression target: log10 or raw")->capture_default_str();
  t->add_option("--d", tr.d, "Rotation directions (0 disables rotation)")->capture_default_str();
  t->add_option("--flip", tr.flip, "Random axis mirrors")->capture_default_str();
  t->add_option("--c", tr.c, "Grid cells per side")->capture_default_str();
  t->add_option("--k", tr.k, "Upscale factor")->capture_default_str();
  t->add_option("--normalize", tr.normalize, "isotropic or per_axis")->capture_default_str();
  t->add_option("--seed", tr.seed)->capture_default_str();
  t->add_option("--split-seed", tr.split_seed)->capture_default_str();
  t->add_option("--train-fraction", tr.train_fraction)->capture_default_str();
  t->add_option("--cutoff", tr.cutoff, "Cutoff of the table (default: from its manifest)");
  t->add_option("--penalty", tr.penalty, "Penalty factor (default: from its manifest)");
  t->add_flag("--quiet", tr.quiet);
  t->add_flag("--no-verify", tr.no_verify, "Skip the manifest hash check of the table");
  t->add_option("--out", tr.out, "Checkpoint path")->required();

  EvaluateOpts ev;
  auto* e = app.add_subcommand("evaluate", "Score selectors on the held-out split");
  e->add_option("--table", ev.table, "Run-table CSV")->required();
  e->add_option("--corpus", ev.corpus, "Corpus directory");
  e->add_option("--model", ev.model, "Checkpoint written by train");
  e->add_option("--split-seed", ev.split_seed)->capture_default_str();
  e->add_option("--train-fraction", ev.train_fraction)->capture_default_str();
  e->add_option("--baseline", ev.baseline, "Also evaluate a baseline (knn)");
  e->add_option("--k", ev.k, "Neighbours of the knn baseline")->capture_default_str();
  e->add_option("--decisions", ev.decisions, "Evaluate a predictions CSV instead of a model");
  e->add_option("--predictions", ev.predictions, "Write the model's predictions CSV");
  e->add_option("--cost-rate", ev.cost_rate, "Moves per virtual second for selection overhead")
      ->capture_default_str();
  e->add_option("--cutoff", ev.cutoff, "Cutoff of the table (default: from its manifest)");
  e->add_option("--penalty", ev.penalty, "Penalty factor (default: from its manifest)");
  e->add_option("--json", ev.json_out, "Write the report as JSON");
  e->add_flag("--no-verify", ev.no_verify, "Skip the manifest hash checks of table and checkpoint");

  RasterOpts ra;
  auto* x = app.add_subcommand("raster", "Export density maps as PGM images with JSON sidecars");
  x->add_option("--corpus", ra.corpus, "Corpus directory");
  x->add_option("--instance", ra.instance, "Single TSPLIB file");
  x->add_option("--c", ra.c)->capture_default_str();
  x->add_option("--k", ra.k)->capture_default_str();
  x->add_option("--normalize", ra.normalize)->capture_default_str();
  x->add_option("--out", ra.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (r->parsed()) return cmd_run(run);
    if (a->parsed()) return cmd_analyze(an);
    if (t->parsed()) return cmd_train(tr);
    if (e->parsed()) return cmd_evaluate(ev);
    if (x->parsed()) return cmd_raster(ra);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const ParameterError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const SpecError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 2;
}
