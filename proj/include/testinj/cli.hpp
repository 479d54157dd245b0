#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "testinj/citest.hpp"
#include "testinj/corpus.hpp"
#include "testinj/dataset.hpp"
#include "testinj/discovery.hpp"
#include "testinj/error.hpp"
#include "testinj/experiment.hpp"
#include "testinj/graph.hpp"
#include "testinj/labeling.hpp"
#include "testinj/lexicon.hpp"
#include "testinj/wordnet.hpp"

namespace testinj::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kInputData = 3, kInternal = 4 };

// Bad flags or config values, detected before any data is read.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string out;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::uint64_t seed = 1;
};

struct ExpandOptions {
  std::string lexicon;
  std::string wordnet;
};

struct LabelOptions {
  std::vector<std::string> inputs;
  std::string manifest;
  std::string lexicon;
  std::string wordnet;
  std::string race_map;
  std::string policy = "percentile90";
  double fraction = 0.10;
  std::string granularity = "fine";
  std::string outcome = "or";
};

struct DiscoverOptions {
  std::string data;
  std::string algorithm = "fci";
  double alpha = 0.05;
  std::string statistic = "g2";
  int max_cond = -1;
  std::size_t pds_max = 4;
  std::vector<std::string> roots;
  std::vector<std::string> leaf;
  bool no_background = false;
  bool trace = false;
  bool timing = false;
};

struct SweepCliOptions {
  DiscoverOptions discover;
  std::vector<double> grid;
  std::vector<std::string> features;
  bool doubled = false;
};

struct SynthOptions {
  std::size_t n = 50000;
  std::string granularity = "fine";
};

namespace cli_detail {

inline const std::vector<std::string>& demographic_columns() {
  static const std::vector<std::string> cols = {"race", "gender", "age", kRaceColumn, kGenderColumn, kAgeColumn,
                                                kCoarseColumn};
  return cols;
}

inline std::filesystem::path out_dir(const CommonOptions& c) {
  if (c.out.empty()) throw UsageError("--out DIR is required");
  std::error_code ec;
  std::filesystem::create_directories(c.out, ec);
  if (ec) throw UsageError("cannot create output directory '" + c.out + "': " + ec.message());
  return c.out;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + p.string());
}

template <class F>
void write_with(const std::filesystem::path& p, F&& fill) {
  std::ostringstream s;
  fill(s);
  write_text(p, s.str());
}

// Reject bad option values as usage errors rather than data errors.
template <class F>
void check(F&& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
}

inline Lexicon load_lexicon_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open lexicon '" + path + "'");
  return load_base_lexicon(in, path);
}

inline SynonymDatabase load_wordnet(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw UsageError("WordNet directory '" + dir + "' does not exist");
  try {
    return parse_wordnet_dir(dir);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
}

inline DiscoveryConfig discovery_config(const DiscoverOptions& o) {
  DiscoveryConfig c;
  c.alpha = o.alpha;
  c.algorithm = o.algorithm == "pc" ? Algorithm::PC : Algorithm::FCI;
  c.statistic = o.statistic == "chi2" ? CIStatistic::PearsonChiSquare : CIStatistic::GSquared;
  if (o.max_cond >= 0) c.max_conditioning_size = static_cast<std::size_t>(o.max_cond);
  c.possible_dsep_max_size = o.pds_max;
  check([&] { c.validate(); });
  return c;
}

// Explicit --roots/--leaf win; otherwise demographic columns are roots and
// is_testinj is the leaf, whichever of them the dataset has.
inline BackgroundKnowledge background(const DiscoverOptions& o, const BinaryDataset& d) {
  BackgroundKnowledge bk;
  if (o.no_background) return bk;
  if (!o.roots.empty()) bk.roots.insert(o.roots.begin(), o.roots.end());
  else
    for (const auto& c : demographic_columns())
      if (d.index_of(c)) bk.roots.insert(c);
  if (!o.leaf.empty()) bk.leaf.insert(o.leaf.begin(), o.leaf.end());
  else if (d.index_of(kOutcomeColumn))
    bk.leaf.insert(kOutcomeColumn);
  check([&] { bk.validate(); });
  for (const auto& n : bk.roots)
    if (!d.index_of(n)) throw UsageError("background-knowledge root '" + n + "' is not a dataset column");
  for (const auto& n : bk.leaf)
    if (!d.index_of(n)) throw UsageError("background-knowledge leaf '" + n + "' is not a dataset column");
  return bk;
}

inline nlohmann::json thresholds_json(const LabeledData& ld, const LabelingOptions& opt) {
  nlohmann::json j;
  j["policy"] = opt.policy.mode == ThresholdMode::Maximum ? "maximum" : "percentile90";
  j["fraction"] = opt.policy.fraction;
  j["granularity"] = opt.granularity == Granularity::Fine ? "fine" : "coarse";
  j["outcome"] = opt.outcome == OutcomeRule::Any ? "or" : "and";
  j["patients"] = ld.rates.size();
  for (auto c : kAllCategories) j["thresholds"][std::string(category_column(c))] = ld.thresholds[c];
  return j;
}

}  // namespace cli_detail

// ---------------------------------------------------------------------------
// Subcommands

inline void cmd_expand_lexicon(const CommonOptions& common, const ExpandOptions& o, std::ostream& out) {
  const auto dir = cli_detail::out_dir(common);
  auto syn = cli_detail::load_wordnet(o.wordnet);
  auto base = cli_detail::load_lexicon_file(o.lexicon);
  auto expanded = expand_lexicon(base, syn);
  cli_detail::write_with(dir / "lexicon_expanded.tsv", [&](std::ostream& s) { write_lexicon(s, expanded); });
  for (auto c : kAllCategories)
    out << category_column(c) << ": " << base.terms(c).size() << " -> " << expanded.terms(c).size() << '\n';
}

inline void cmd_label(const CommonOptions& common, const LabelOptions& o, std::ostream& out) {
  LabelingOptions opt;
  if (o.policy == "maximum") opt.policy.mode = ThresholdMode::Maximum;
  opt.policy.fraction = o.fraction;
  opt.granularity = o.granularity == "coarse" ? Granularity::Coarse : Granularity::Fine;
  opt.outcome = o.outcome == "and" ? OutcomeRule::All : OutcomeRule::Any;
  cli_detail::check([&] { opt.policy.validate(); });
  if (o.inputs.empty() && o.manifest.empty()) throw UsageError("label needs --input or --manifest");
  const auto dir = cli_detail::out_dir(common);

  auto lex = cli_detail::load_lexicon_file(o.lexicon);
  if (!o.wordnet.empty()) lex = expand_lexicon(lex, cli_detail::load_wordnet(o.wordnet));
  RaceMap races = RaceMap::defaults();
  if (!o.race_map.empty()) {
    std::ifstream in(o.race_map, std::ios::binary);
    if (!in) throw UsageError("cannot open race map '" + o.race_map + "'");
    races = RaceMap::load(in, o.race_map);
  }

  std::vector<std::filesystem::path> paths(o.inputs.begin(), o.inputs.end());
  if (!o.manifest.empty())
    for (auto& p : read_manifest(o.manifest)) paths.push_back(std::move(p));
  std::vector<RawRecord> records;
  for (const auto& p : paths) {
    auto part = read_records_file(p);
    records.insert(records.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  const auto kept = filter_records(records, races);
  const auto patients = merge_patients(kept, races);
  const auto labeled = build_dataset(patients, lex, opt);

  cli_detail::write_with(dir / "dataset.csv", [&](std::ostream& s) { write_dataset_csv(s, labeled.dataset); });
  cli_detail::write_with(dir / "rates.csv", [&](std::ostream& s) { write_rates_csv(s, labeled.rates); });
  cli_detail::write_text(dir / "thresholds.json", cli_detail::thresholds_json(labeled, opt).dump(2) + "\n");
  out << "records read: " << records.size() << ", retained: " << kept.size() << ", patients: " << patients.size()
      << '\n';
}

inline void cmd_discover(const CommonOptions& common, const DiscoverOptions& o, std::ostream& out) {
  const auto config = cli_detail::discovery_config(o);
  const auto dir = cli_detail::out_dir(common);
  const auto data = read_dataset_file(o.data);
  const auto bk = cli_detail::background(o, data);
  const auto result = run(data, config, bk);

  const auto dot = emit_dot(result.graph);
  cli_detail::write_text(dir / "graph.dot", dot);
  cli_detail::write_text(dir / "graph.json", to_json(result.graph).dump(2) + "\n");
  cli_detail::write_text(dir / "report.json",
                         report_json(result.report, config, bk, data.names(), o.timing).dump(2) + "\n");
  if (o.trace)
    cli_detail::write_with(dir / "ci_trace.csv",
                           [&](std::ostream& s) { write_trace_csv(s, result.trace, data.names()); });
  out << dot;
  for (const auto& c : result.report.conflicts) out << "conflict: " << c << '\n';
}

inline void cmd_sweep(const CommonOptions& common, const SweepCliOptions& o, std::ostream& out) {
  const auto config = cli_detail::discovery_config(o.discover);
  const auto& grid = o.grid.empty() ? default_alpha_grid() : o.grid;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    cli_detail::check([&] { validate_alpha(grid[i]); });
    if (i && !(grid[i] > grid[i - 1])) throw UsageError("--grid must be strictly ascending");
  }
  const auto dir = cli_detail::out_dir(common);
  auto data = read_dataset_file(o.discover.data);
  if (o.doubled) data = double_data(data);
  const auto bk = cli_detail::background(o.discover, data);

  SweepOptions so;
  so.jobs = common.jobs;
  so.features = o.features;
  if (so.features.empty())
    for (const auto& c : cli_detail::demographic_columns())
      if (data.index_of(c)) so.features.push_back(c);
  if (so.features.empty()) throw UsageError("no demographic columns found; pass --features");
  for (const auto& f : so.features)
    if (!data.index_of(f)) throw UsageError("feature '" + f + "' is not a dataset column");

  const auto result = alpha_sweep(data, grid, config, bk, so);
  auto j = sweep_json(result);
  j["doubled"] = o.doubled;
  cli_detail::write_text(dir / "sweep.json", j.dump(2) + "\n");
  print_sweep_table(out, result);
}

inline void cmd_synth(const CommonOptions& common, const SynthOptions& o, std::ostream& out) {
  if (o.n == 0) throw UsageError("--n must be at least 1");
  const auto dir = cli_detail::out_dir(common);
  const auto scm = scenario_generator(common.seed);
  auto data = sample(scm, o.n, common.seed);
  if (o.granularity == "coarse")
    data = coarsen(data, {kScenarioDemographics.begin(), kScenarioDemographics.end()});
  cli_detail::write_with(dir / "scenario.csv", [&](std::ostream& s) { write_dataset_csv(s, data); });
  cli_detail::write_text(dir / "scenario_truth.dot", emit_dot(scm.dag().to_graph()));
  out << "wrote " << data.rows() << " rows x " << data.cols() << " columns\n";
}

// ---------------------------------------------------------------------------
// Entry point

inline void add_discovery_flags(CLI::App* sub, DiscoverOptions& o) {
  sub->add_option("--data", o.data, "Binary dataset CSV")->required()->check(CLI::ExistingFile);
  sub->add_option("--algorithm", o.algorithm, "pc or fci")->check(CLI::IsMember({"pc", "fci"}));
  sub->add_option("--statistic", o.statistic, "g2 or chi2")->check(CLI::IsMember({"g2", "chi2"}));
  sub->add_option("--max-cond", o.max_cond, "Skeleton conditioning-set cap (-1: default)");
  sub->add_option("--pds-max", o.pds_max, "Possible-D-SEP conditioning-set cap");
  sub->add_option("--roots", o.roots, "Root (cause-only) columns")->delimiter(',');
  sub->add_option("--leaf", o.leaf, "Leaf (effect-only) columns")->delimiter(',');
  sub->add_flag("--no-background", o.no_background, "Run without background knowledge");
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Testimonial-injustice lexicon labeling and causal discovery"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML-style config file; flags override its values");

  CommonOptions common;
  app.add_option("--out", common.out, "Output directory");
  app.add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", common.seed, "Random seed");

  ExpandOptions expand;
  auto* ex = app.add_subcommand("expand-lexicon", "Expand the base lexicon with stems and WordNet synonyms");
  ex->add_option("--lexicon", expand.lexicon, "Base lexicon TSV")->required();
  ex->add_option("--wordnet", expand.wordnet, "WordNet dict directory")->required();

  LabelOptions label;
  auto* lb = app.add_subcommand("label", "Build the binary dataset from clinical-note CSVs");
  lb->add_option("--input", label.inputs, "Record CSV (repeatable)")->check(CLI::ExistingFile);
  lb->add_option("--manifest", label.manifest, "File listing record CSVs")->check(CLI::ExistingFile);
  lb->add_option("--lexicon", label.lexicon, "Lexicon TSV")->required();
  lb->add_option("--wordnet", label.wordnet, "Expand the lexicon with this WordNet directory first");
  lb->add_option("--race-map", label.race_map, "Ethnicity prefix map TSV");
  lb->add_option("--policy", label.policy, "percentile90 or maximum")
      ->check(CLI::IsMember({"percentile90", "maximum"}));
  lb->add_option("--fraction", label.fraction, "Threshold fraction");
  lb->add_option("--granularity", label.granularity, "fine or coarse")->check(CLI::IsMember({"fine", "coarse"}));
  lb->add_option("--outcome", label.outcome, "or: any category; and: all categories")
      ->check(CLI::IsMember({"or", "and"}));

  DiscoverOptions disc;
  auto* dc = app.add_subcommand("discover", "Run PC or FCI on a binary dataset");
  add_discovery_flags(dc, disc);
  dc->add_option("--alpha", disc.alpha, "Significance level in (0, 1)");
  dc->add_flag("--trace", disc.trace, "Also write every CI test to ci_trace.csv");
  dc->add_flag("--timing", disc.timing, "Include wall time in report.json");

  SweepCliOptions sweep;
  auto* sw = app.add_subcommand("sweep", "Scan alpha and report when demographic features connect");
  add_discovery_flags(sw, sweep.discover);
  sw->add_option("--grid", sweep.grid, "Ascending alpha values")->delimiter(',');
  sw->add_option("--features", sweep.features, "Feature columns to track")->delimiter(',');
  sw->add_flag("--double", sweep.doubled, "Duplicate every row before sweeping");

  SynthOptions synth;
  auto* sy = app.add_subcommand("synth", "Sample the synthetic scenario dataset");
  sy->add_option("--n", synth.n, "Rows");
  sy->add_option("--granularity", synth.granularity, "fine or coarse")->check(CLI::IsMember({"fine", "coarse"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (ex->parsed()) cmd_expand_lexicon(common, expand, out);
    else if (lb->parsed()) cmd_label(common, label, out);
    else if (dc->parsed()) cmd_discover(common, disc, out);
    else if (sw->parsed()) cmd_sweep(common, sweep, out);
    else if (sy->parsed()) cmd_synth(common, synth, out);
    return kOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace testinj::cli
