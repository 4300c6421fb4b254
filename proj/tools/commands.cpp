#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "confret/conformal.hpp"
#include "confret/data.hpp"
#include "confret/error.hpp"
#include "confret/eval.hpp"
#include "confret/io.hpp"
#include "confret/refine.hpp"
#include "confret/retrieval.hpp"
#include "confret/tune.hpp"

namespace confret::cli {

namespace {

// Raised while turning flag strings into typed values, before any work starts.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename F>
auto flag(F&& convert) {
  try {
    return convert();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  io::Writer out(path);
  out.write(text);
  out.close();
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    auto item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (!item.empty()) items.push_back(std::move(item));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return items;
}

std::vector<double> parse_alphas(const std::string& text) {
  std::vector<double> alphas;
  for (const auto& item : split_list(text)) {
    double a = 0.0;
    auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), a);
    if (ec != std::errc() || end != item.data() + item.size() || !(a > 0.0 && a < 1.0)) {
      throw UsageError(fmt::format("bad alpha '{}'; expected a value in (0,1)", item));
    }
    alphas.push_back(a);
  }
  if (alphas.empty()) throw UsageError("no alpha given");
  return alphas;
}

// Run plus ground truth restricted to queries that carry a label.
struct LabelledRun {
  RetrievalRun run;
  GroundTruth truth;
};

LabelledRun load_labelled(const std::string& run_path, const std::string& qrels_path, int n_trunc) {
  const auto run = load_run(run_path, n_trunc);
  auto truth = reduce_qrels(load_qrels(qrels_path), run);
  std::vector<std::string> ids;
  for (const auto& [qid, doc] : truth.labels) ids.push_back(qid);
  if (ids.empty()) {
    throw Error(ErrorCode::NoCalibrationData,
                fmt::format("no query of '{}' has a judgment in '{}'", run_path, qrels_path));
  }
  if (!truth.misses.empty()) {
    std::cerr << fmt::format("note: {} of {} labelled queries never retrieved their relevant document\n",
                             truth.misses.size(), ids.size());
  }
  return {run.subset(ids), std::move(truth)};
}

struct Shared {
  double alpha = 0.1;
  std::string transform = "identity";
  std::string method = "vanilla";
  std::uint64_t seed = 0;
  int n_trunc = kDefaultNTrunc;
  std::string out;
};

void add_alpha(CLI::App* cmd, Shared& s) {
  cmd->add_option("--alpha", s.alpha, "Target miscoverage rate")->check(CLI::Range(0.0, 1.0));
}
void add_transform(CLI::App* cmd, Shared& s) {
  cmd->add_option("--transform", s.transform, "identity | maxscore | zscore | logrank:<lambda>")
      ->capture_default_str();
}
void add_method(CLI::App* cmd, Shared& s) {
  cmd->add_option("--method", s.method, "vanilla | topk | aps | raps")->capture_default_str();
}
void add_seed(CLI::App* cmd, Shared& s) {
  cmd->add_option("--seed", s.seed, "Seed for every random choice")->capture_default_str();
}
void add_n_trunc(CLI::App* cmd, Shared& s) {
  cmd->add_option("-n,--n-trunc", s.n_trunc, "Candidates kept per query")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}
void add_out(CLI::App* cmd, Shared& s, const std::string& what) {
  cmd->add_option("--out", s.out, what)->required();
}

int cmd_retrieve(const Shared& s, const std::string& corpus_path, const std::string& queries_path) {
  const auto corpus = load_embeddings(corpus_path);
  const auto queries = load_embeddings(queries_path);
  const auto run = retrieve_all(queries, corpus, s.n_trunc);
  save_run(run, s.out);
  std::cout << fmt::format("retrieved top {} of {} documents for {} queries -> {}\n",
                           std::min<std::size_t>(s.n_trunc, corpus.rows()), corpus.rows(), queries.rows(), s.out);
  return kOk;
}

int cmd_calibrate(const Shared& s, const std::string& run_path, const std::string& qrels_path, const RapsParams& raps) {
  const auto method = flag([&] { return parse_method(s.method); });
  const auto transform = flag([&] { return parse_transform(s.transform); });
  const auto data = load_labelled(run_path, qrels_path, s.n_trunc);
  const auto cal = calibrate(method, refine_all(data.run, transform), data.truth, s.alpha, raps);
  save_calibrator(cal, s.out);

  const auto m = quantile_index(data.run.size(), s.alpha);
  if (method == Method::TopK) {
    std::cout << fmt::format("K = {} (n = {}, m = {})\n", cal.k, cal.n_calibration, m);
  } else {
    std::cout << fmt::format("tau = {} (n = {}, m = {})\n", cal.tau, cal.n_calibration, m);
  }
  if (m > data.run.size() || std::isinf(cal.tau)) {
    std::cerr << fmt::format("warning: m = {} exceeds n = {}; every retrieved candidate will be returned\n", m,
                             data.run.size());
  }
  return kOk;
}

int cmd_evaluate(const Shared& s, const std::string& run_path, const std::string& qrels_path,
                 const std::string& cal_path, const std::string& dataset, const std::string& md_path) {
  const auto cal = load_calibrator(cal_path);
  const auto data = load_labelled(run_path, qrels_path, s.n_trunc);
  const auto sets = predict_all(refine_all(data.run, cal.transform), cal);

  const Setting setting{cal.method, cal.transform, false};
  EvalRow row;
  row.dataset = dataset;
  row.alpha = cal.alpha;
  row.method = std::string(to_string(cal.method));
  row.transform = to_string(cal.transform);
  row.label = setting.label();
  row.empirical_coverage = empirical_coverage(sets, data.truth);
  row.avg_group_size = avg_group_size(sets);
  row.n_test = static_cast<int>(sets.size());
  const EvalReport report{{row}};
  write_text(s.out, report_csv(report));
  if (!md_path.empty()) write_text(md_path, report_markdown(report));
  std::cout << fmt::format("coverage = {:.4f}, avg group size = {:.2f} over {} queries\n", row.empirical_coverage,
                           row.avg_group_size, row.n_test);
  return kOk;
}

int cmd_tune(const Shared& s, const std::string& run_path, const std::string& qrels_path, const std::string& grid_text,
             const std::string& val_run_path, const std::string& val_qrels_path, double cal_fraction) {
  const auto grid = flag([&] { return grid_text.empty() ? LambdaGrid::default_grid() : LambdaGrid::parse(grid_text); });
  if (val_run_path.empty() != val_qrels_path.empty()) throw UsageError("--val-run and --val-qrels go together");

  const auto data = load_labelled(run_path, qrels_path, s.n_trunc);
  TuneResult result;
  if (!val_run_path.empty()) {
    const auto val = load_labelled(val_run_path, val_qrels_path, s.n_trunc);
    result = tune_lambda(data.run, data.truth, val.run, val.truth, s.alpha, grid);
  } else {
    const auto split = random_split(data.run, data.truth, s.seed, cal_fraction);
    result = tune_lambda(data.run.subset(split.calibration), data.truth, data.run.subset(split.test), data.truth,
                         s.alpha, grid);
  }
  write_text(s.out, curve_csv(result));
  const auto best = std::find_if(result.curve.begin(), result.curve.end(),
                                 [&](const CurvePoint& p) { return p.lambda == result.best_lambda; });
  std::cout << fmt::format("best lambda = {} (avg group size {:.2f}, coverage {:.4f})\n", result.best_lambda,
                           best->avg_group_size, best->empirical_coverage);
  return kOk;
}

int cmd_synth(const Shared& s, SynthConfig cfg, const std::string& truth_rank) {
  cfg.truth_rank = flag([&] { return TruthRankDist::parse(truth_rank); });
  cfg.seed = s.seed;
  cfg.n_trunc = s.n_trunc;
  flag([&] {
    cfg.validate();
    return 0;
  });
  const auto data = generate_synthetic(cfg);
  save_run(data.run, s.out + ".run.tsv");
  save_qrels(qrels_from_truth(data.truth), s.out + ".qrels.tsv");
  std::cout << fmt::format("{} queries x {} candidates ({} misses) -> {}.run.tsv, {}.qrels.tsv\n", cfg.n_queries,
                           cfg.n_candidates, data.truth.misses.size(), s.out, s.out);
  return kOk;
}

struct BenchFlags {
  std::string run, qrels, dataset = "dataset", preset, methods, transforms, alphas = "0.1,0.05,0.03";
  std::vector<std::string> settings;
  std::string ours = "logrank:0.03";
  std::string seeds, split_file, md, per_seed_dir, grid;
  int n_seeds = 1;
  double cal_fraction = 0.5;
  double tune_fraction = 0.5;
};

int cmd_bench(const Shared& s, const BenchFlags& f, const RapsParams& raps) {
  BenchOptions opts = flag([&] {
    BenchOptions o;
    o.dataset = f.dataset;
    o.raps = raps;
    o.cal_fraction = f.cal_fraction;
    o.tune_fraction = f.tune_fraction;
    if (!f.grid.empty()) o.grid = LambdaGrid::parse(f.grid);
    const auto ours = Setting::parse("vanilla+" + f.ours);
    if (f.preset == "table2") o.settings = table2_settings(ours);
    else if (f.preset == "table4") o.settings = table4_settings(ours);
    else if (!f.preset.empty()) throw UsageError(fmt::format("unknown preset '{}'", f.preset));
    for (const auto& text : f.settings) o.settings.push_back(Setting::parse(text));
    if (!f.methods.empty() || !f.transforms.empty()) {
      const auto methods = split_list(f.methods.empty() ? "vanilla" : f.methods);
      const auto transforms = split_list(f.transforms.empty() ? "identity" : f.transforms);
      for (const auto& m : methods) {
        for (const auto& t : transforms) o.settings.push_back(Setting::parse(m + "+" + t));
      }
    }
    if (o.settings.empty()) o.settings = table2_settings(ours);
    return o;
  });
  opts.alphas = parse_alphas(f.alphas);
  opts.seeds.clear();
  if (!f.seeds.empty()) {
    for (const auto& item : split_list(f.seeds)) {
      std::uint64_t v = 0;
      auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || end != item.data() + item.size()) throw UsageError(fmt::format("bad seed '{}'", item));
      opts.seeds.push_back(v);
    }
  } else {
    if (f.n_seeds < 1) throw UsageError("--n-seeds must be >= 1");
    for (int i = 0; i < f.n_seeds; ++i) opts.seeds.push_back(s.seed + static_cast<std::uint64_t>(i));
  }

  const auto data = load_labelled(f.run, f.qrels, s.n_trunc);
  if (!f.split_file.empty()) opts.fixed_split = load_split(f.split_file);

  const auto report = run_benchmark(data.run, data.truth, opts);
  write_text(s.out, report_csv(report));
  if (!f.md.empty()) write_text(f.md, report_markdown(report));
  if (!f.per_seed_dir.empty()) {
    for (auto seed : opts.seeds) {
      BenchOptions one = opts;
      one.seeds = {seed};
      write_text(fmt::format("{}/seed_{}.csv", f.per_seed_dir, seed),
                 report_csv(run_benchmark(data.run, data.truth, one)));
    }
  }
  std::cout << report_markdown(report);
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Conformal prediction sets over retrieval runs with rank-discounted score refinement", "confret"};
  app.set_config("--config", "", "key=value file overriding flags");
  app.require_subcommand(1);

  Shared s;
  RapsParams raps;
  auto add_raps = [&](CLI::App* cmd) {
    cmd->add_option("--raps-k-reg", raps.k_reg, "RAPS rank offset")->capture_default_str();
    cmd->add_option("--raps-lambda-reg", raps.lambda_reg, "RAPS rank penalty")->capture_default_str();
  };

  std::string corpus, queries;
  auto* retrieve = app.add_subcommand("retrieve", "Exact cosine top-n retrieval into a run file");
  retrieve->add_option("--corpus", corpus, "Corpus embeddings (CRET1 binary or text)")->required();
  retrieve->add_option("--queries", queries, "Query embeddings (CRET1 binary or text)")->required();
  add_n_trunc(retrieve, s);
  add_out(retrieve, s, "Run TSV to write");

  std::string run_path, qrels_path;
  auto* calibrate_cmd = app.add_subcommand("calibrate", "Fit a conformal calibrator");
  calibrate_cmd->add_option("--run", run_path, "Run TSV")->required();
  calibrate_cmd->add_option("--qrels", qrels_path, "Qrels TSV")->required();
  add_method(calibrate_cmd, s);
  add_transform(calibrate_cmd, s);
  add_alpha(calibrate_cmd, s);
  add_n_trunc(calibrate_cmd, s);
  add_raps(calibrate_cmd);
  add_out(calibrate_cmd, s, "Calibrator JSON to write");

  std::string cal_path, dataset = "dataset", md_path;
  auto* evaluate = app.add_subcommand("evaluate", "Coverage and set size of a calibrator on a run");
  evaluate->add_option("--run", run_path, "Run TSV")->required();
  evaluate->add_option("--qrels", qrels_path, "Qrels TSV")->required();
  evaluate->add_option("--calibrator", cal_path, "Calibrator JSON")->required();
  evaluate->add_option("--dataset", dataset, "Dataset name for the report")->capture_default_str();
  evaluate->add_option("--md", md_path, "Also write a Markdown table here");
  add_n_trunc(evaluate, s);
  add_out(evaluate, s, "Report CSV to write");

  std::string grid, val_run, val_qrels;
  double cal_fraction = 0.5;
  auto* tune = app.add_subcommand("tune", "Grid search for the rank-discount lambda");
  tune->add_option("--run", run_path, "Run TSV")->required();
  tune->add_option("--qrels", qrels_path, "Qrels TSV")->required();
  tune->add_option("--grid", grid, "start:stop:step or comma list (default 0:0.99:0.03)");
  tune->add_option("--val-run", val_run, "Separate validation run (otherwise a seeded split of --run)");
  tune->add_option("--val-qrels", val_qrels, "Qrels for --val-run");
  tune->add_option("--cal-fraction", cal_fraction, "Calibration share of the seeded split")->capture_default_str();
  add_alpha(tune, s);
  add_seed(tune, s);
  add_n_trunc(tune, s);
  add_out(tune, s, "Curve CSV to write");

  SynthConfig synth_cfg;
  std::string truth_rank = "geometric:0.3";
  auto* synth = app.add_subcommand("synth", "Generate a synthetic exchangeable run and qrels");
  synth->add_option("--n-queries", synth_cfg.n_queries)->capture_default_str();
  synth->add_option("--n-candidates", synth_cfg.n_candidates)->capture_default_str();
  synth->add_option("--scale-spread", synth_cfg.scale_spread, "sd of log score scale")->capture_default_str();
  synth->add_option("--slope-spread", synth_cfg.slope_spread, "sd of log decay exponent")->capture_default_str();
  synth->add_option("--truth-gap", synth_cfg.truth_gap, "Score drop after the truth")->capture_default_str();
  synth->add_option("--truth-rank", truth_rank, "geometric:<p> | uniform:<max_rank>")->capture_default_str();
  synth->add_option("--noise", synth_cfg.noise_sigma, "Gaussian score noise sd")->capture_default_str();
  add_seed(synth, s);
  add_n_trunc(synth, s);
  add_out(synth, s, "Output prefix; writes <prefix>.run.tsv and <prefix>.qrels.tsv");

  BenchFlags bf;
  auto* bench = app.add_subcommand("bench", "Coverage / set-size table over methods, transforms and alphas");
  bench->add_option("--run", bf.run, "Run TSV")->required();
  bench->add_option("--qrels", bf.qrels, "Qrels TSV")->required();
  bench->add_option("--dataset", bf.dataset)->capture_default_str();
  bench->add_option("--preset", bf.preset, "table2 (Baseline/APS/TopK/Ours) | table4 (Baseline/Max Score/Z-Score/Ours)");
  bench->add_option("--ours", bf.ours, "Transform used for the Ours row (logrank:<lambda> | logrank:auto)")
      ->capture_default_str();
  bench->add_option("--setting", bf.settings, "<method>+<transform>, repeatable");
  bench->add_option("--methods", bf.methods, "Comma list, crossed with --transforms");
  bench->add_option("--transforms", bf.transforms, "Comma list, crossed with --methods");
  bench->add_option("--alphas", bf.alphas)->capture_default_str();
  bench->add_option("--seeds", bf.seeds, "Comma list of split seeds");
  bench->add_option("--n-seeds", bf.n_seeds, "Seeds --seed, --seed+1, ...")->capture_default_str();
  bench->add_option("--split-file", bf.split_file, "Fixed calibration/test split TSV");
  bench->add_option("--cal-fraction", bf.cal_fraction)->capture_default_str();
  bench->add_option("--tune-fraction", bf.tune_fraction, "Calibration share used to tune logrank:auto")
      ->capture_default_str();
  bench->add_option("--grid", bf.grid, "Lambda grid for logrank:auto");
  bench->add_option("--md", bf.md, "Also write a Markdown table here");
  bench->add_option("--per-seed-dir", bf.per_seed_dir, "Also write one single-seed CSV per seed here");
  add_seed(bench, s);
  add_n_trunc(bench, s);
  add_raps(bench);
  add_out(bench, s, "Report CSV to write");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (retrieve->parsed()) return cmd_retrieve(s, corpus, queries);
    if (calibrate_cmd->parsed()) return cmd_calibrate(s, run_path, qrels_path, raps);
    if (evaluate->parsed()) return cmd_evaluate(s, run_path, qrels_path, cal_path, dataset, md_path);
    if (tune->parsed()) return cmd_tune(s, run_path, qrels_path, grid, val_run, val_qrels, cal_fraction);
    if (synth->parsed()) return cmd_synth(s, synth_cfg, truth_rank);
    if (bench->parsed()) return cmd_bench(s, bf, raps);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::Internal ? kInternal : kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}

}  // namespace confret::cli
