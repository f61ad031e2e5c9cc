// dcc: fit Gaussian statistics on embedding files, score batches with the
// dynamically calibrated Mahalanobis distance, and evaluate ID/OOD
// separability. stdout carries machine-readable JSON/CSV; stderr carries
// human-readable messages. Exit codes: 0 success, 2 usage/data error,
// 3 numerical error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dcc/diagnostics.hpp"
#include "dcc/error.hpp"
#include "dcc/feature_io.hpp"
#include "dcc/gaussian_stats.hpp"
#include "dcc/metrics.hpp"
#include "dcc/scoring.hpp"
#include "dcc/stats_archive.hpp"
#include "dcc/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string train, labels, test, ood, stats, out;
  std::string format = "fmat";
  std::string source;
  std::string method = "dcc";
  std::string grid;
  std::string spec_json;
  int k = 0;
  int threads = 0;
  int bins = 50;
  double eps_scale = 1e-6;
  bool no_dme = false, no_rsp = false, no_dcm = false, no_normalize = false;

  // synth-spec flags (mirroring SynthSpec)
  std::uint64_t seed = 7;
  int n_classes = 8;
  int dim = 32;
  int n_per_class = 500;
  double within_sigma = 0.1;
  int n_ood = 2000;
  double ood_shift = 3.0;
  double outlier_fraction = 0.1;
  double outlier_magnitude = 5.0;
  std::uint64_t outlier_direction_seed = 1;
};

int default_k(int dim) {
  return std::max(1, static_cast<int>(std::lround(dim / 3.0)));
}

dcc::FileFormat detect_format(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dcc::IoError("cannot open " + path.string() + " for reading");
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  return (in.gcount() == 4 && std::memcmp(magic, "FMAT", 4) == 0)
             ? dcc::FileFormat::binary
             : dcc::FileFormat::csv;
}

void require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw dcc::ParamError(std::string("missing required flag ") + flag);
  if (!fs::exists(value)) {
    throw dcc::IoError(std::string(flag) + " path does not exist: " + value);
  }
}

dcc::FeatureSet load_features(const std::string& path, const std::string& labels_path) {
  dcc::FeatureSet set = dcc::read_features(path, detect_format(path));
  if (!labels_path.empty()) {
    if (!fs::exists(labels_path)) {
      throw dcc::IoError("labels path does not exist: " + labels_path);
    }
    set.labels = dcc::read_labels(labels_path);
    dcc::validate(set);
  }
  return set;
}

dcc::ScoreConfig build_score_config(const Options& opt, int resolved_k) {
  dcc::ScoreConfig config;
  config.method = dcc::parse_method(opt.method);
  config.dme = !opt.no_dme;
  config.rsp = !opt.no_rsp;
  config.dcm = !opt.no_dcm;
  config.normalize = !opt.no_normalize;
  config.residual_dim = resolved_k;
  config.reg_epsilon_scale = opt.eps_scale;
  if (config.method == dcc::Method::dcc && !config.dme) {
    throw dcc::ParamError("--no-dme is incompatible with --method dcc; use --method maha");
  }
  return config;
}

// Residual basis for scoring, recomputed from the archived covariance so
// every command derives it the same way. The archived basis only supplies
// the default k; --k and --source override, dcm picks the source otherwise.
std::optional<dcc::ResidualBasis> resolve_basis(const dcc::StatsArchive& archive,
                                                const Options& opt,
                                                const dcc::ScoreConfig& config) {
  const bool dynamic =
      config.method == dcc::Method::dcc || config.method == dcc::Method::euclidean_dynamic;
  const bool needs_basis = dynamic && config.rsp;
  if (!needs_basis) return std::nullopt;

  dcc::CovSource source = config.dcm ? dcc::CovSource::within : dcc::CovSource::full;
  if (!opt.source.empty()) source = dcc::parse_cov_source(opt.source);

  int k = opt.k;
  if (k <= 0 && archive.basis) k = static_cast<int>(archive.basis->k());
  if (k <= 0) k = default_k(archive.stats.dim);

  return dcc::residual_basis(archive.stats, k, source);
}

std::vector<int> parse_grid(const std::string& grid) {
  if (grid.empty()) throw dcc::ParamError("missing required flag --grid");
  std::vector<int> ks;
  std::stringstream ss(grid);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      ks.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw dcc::ParamError("unparsable grid entry '" + item + "'");
    }
  }
  if (ks.empty()) throw dcc::ParamError("empty --grid");
  return ks;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int run_fit(const Options& opt) {
  require_path(opt.train, "--train");
  if (opt.out.empty()) throw dcc::ParamError("missing required flag --out");

  dcc::FeatureSet train = load_features(opt.train, opt.labels);
  if (!train.has_labels()) {
    throw dcc::LabelError("fit requires labels (companion .flab, csv label column, or --labels)");
  }
  train = dcc::l2_normalize(train);
  const dcc::GaussianStats stats = dcc::fit_stats(train, opt.eps_scale);

  const int k = opt.k > 0 ? opt.k : default_k(stats.dim);
  const dcc::CovSource source =
      opt.source.empty() ? dcc::CovSource::within : dcc::parse_cov_source(opt.source);
  const dcc::ResidualBasis basis = dcc::residual_basis(stats, k, source);

  dcc::write_stats_archive(opt.out, stats, &basis);

  Eigen::SelfAdjointEigenSolver<dcc::Matrix> spectrum(stats.covariance(source));
  json summary = {
      {"n", train.rows()},
      {"d", stats.dim},
      {"n_classes", stats.n_classes},
      {"reg_epsilon", stats.reg_epsilon},
      {"k", k},
      {"source", dcc::to_string(source)},
      {"eigenvalue_min", spectrum.eigenvalues()(0)},
      {"eigenvalue_max", spectrum.eigenvalues()(stats.dim - 1)},
      {"stats", opt.out},
  };
  std::cout << summary.dump() << '\n';
  return 0;
}

int run_score(const Options& opt) {
  require_path(opt.stats, "--stats");
  require_path(opt.test, "--test");
  if (opt.out.empty()) throw dcc::ParamError("missing required flag --out");

  const dcc::StatsArchive archive = dcc::read_stats_archive(opt.stats);
  const dcc::FeatureSet test = load_features(opt.test, "");

  dcc::ScoreConfig config = build_score_config(opt, opt.k);
  const auto basis = resolve_basis(archive, opt, config);
  if (basis) config.residual_dim = static_cast<int>(basis->k());

  const dcc::ScoredBatch batch = dcc::score_batch(
      test, archive.stats, basis ? &*basis : nullptr, config, opt.threads);
  dcc::write_scores(opt.out, batch, dcc::parse_format(opt.format));

  json summary = {
      {"n_scored", batch.size()},
      {"method", dcc::to_string(config.method)},
      {"clamp_count", batch.clamp_count},
      {"singular_count", batch.singular_count},
      {"out", opt.out},
  };
  std::cout << summary.dump() << '\n';
  return 0;
}

int run_eval(const Options& opt) {
  require_path(opt.test, "--test");
  require_path(opt.ood, "--ood");
  const std::vector<double> id_scores = dcc::read_scores(opt.test);
  const std::vector<double> ood_scores = dcc::read_scores(opt.ood);
  const dcc::EvalReport report = dcc::evaluate(id_scores, ood_scores);
  const std::string body = dcc::to_json(report);
  if (!opt.out.empty()) {
    std::ofstream out(opt.out);
    if (!out) throw dcc::IoError("cannot open " + opt.out + " for writing");
    out << body << '\n';
  }
  std::cout << body << '\n';
  return 0;
}

int run_sweep(const Options& opt) {
  require_path(opt.stats, "--stats");
  require_path(opt.test, "--test");
  require_path(opt.ood, "--ood");
  const std::vector<int> grid = parse_grid(opt.grid);

  const dcc::StatsArchive archive = dcc::read_stats_archive(opt.stats);
  for (int k : grid) {
    if (k < 1 || k > archive.stats.dim - 1) {
      throw dcc::ParamError("grid value " + std::to_string(k) + " out of range [1, " +
                            std::to_string(archive.stats.dim - 1) + "]");
    }
  }

  const dcc::FeatureSet id_test = load_features(opt.test, "");
  const dcc::FeatureSet ood_test = load_features(opt.ood, "");

  std::ostringstream csv;
  csv << "k,auroc,fpr95\n";
  for (int k : grid) {
    dcc::ScoreConfig config = build_score_config(opt, k);
    dcc::CovSource source = config.dcm ? dcc::CovSource::within : dcc::CovSource::full;
    if (!opt.source.empty()) source = dcc::parse_cov_source(opt.source);
    const dcc::ResidualBasis basis = dcc::residual_basis(archive.stats, k, source);

    const dcc::ScoredBatch id_batch =
        dcc::score_batch(id_test, archive.stats, &basis, config, opt.threads);
    const dcc::ScoredBatch ood_batch =
        dcc::score_batch(ood_test, archive.stats, &basis, config, opt.threads);
    const dcc::EvalReport report = dcc::evaluate(id_batch.scores, ood_batch.scores);
    csv << k << ',' << dcc::format_double(report.auroc) << ','
        << dcc::format_double(report.fpr95) << '\n';
  }

  if (!opt.out.empty()) {
    std::ofstream out(opt.out);
    if (!out) throw dcc::IoError("cannot open " + opt.out + " for writing");
    out << csv.str();
  }
  std::cout << csv.str();
  return 0;
}

int run_diagnose(const Options& opt) {
  require_path(opt.stats, "--stats");
  require_path(opt.test, "--test");
  if (opt.out.empty()) throw dcc::ParamError("missing required flag --out");

  const dcc::StatsArchive archive = dcc::read_stats_archive(opt.stats);
  const dcc::FeatureSet test = load_features(opt.test, "");

  // Diagnostics instrument the dynamic method; only dcm/normalize/eps/k vary.
  dcc::ScoreConfig config = build_score_config(opt, opt.k);
  config.method = dcc::Method::dcc;
  config.dme = true;
  config.rsp = true;
  const auto basis = resolve_basis(archive, opt, config);
  config.residual_dim = static_cast<int>(basis->k());

  const std::vector<dcc::SampleDiagnostics> diagnostics =
      dcc::diagnose_batch(test, archive.stats, *basis, config, opt.threads);
  dcc::write_diagnostics_csv(opt.out, diagnostics);

  int violations = 0, clamped = 0;
  for (const auto& d : diagnostics) {
    violations += d.condition_holds ? 0 : 1;
    clamped += d.clamped ? 1 : 0;
  }
  json summary = {
      {"n", diagnostics.size()},
      {"condition_violations", violations},
      {"clamped", clamped},
      {"out", opt.out},
  };
  std::cout << summary.dump() << '\n';
  return 0;
}

dcc::SynthSpec build_synth_spec(const Options& opt, const CLI::App* cmd) {
  dcc::SynthSpec spec;
  if (!opt.spec_json.empty()) {
    std::ifstream in(opt.spec_json);
    if (!in) throw dcc::IoError("cannot open " + opt.spec_json + " for reading");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw dcc::FormatError(opt.spec_json + ": " + e.what());
    }
    spec.seed = j.value("seed", spec.seed);
    spec.n_classes = j.value("n_classes", spec.n_classes);
    spec.dim = j.value("dim", spec.dim);
    spec.n_per_class = j.value("n_per_class", spec.n_per_class);
    spec.within_sigma = j.value("within_sigma", spec.within_sigma);
    spec.n_ood = j.value("n_ood", spec.n_ood);
    spec.ood_shift = j.value("ood_shift", spec.ood_shift);
    spec.outlier_fraction = j.value("outlier_fraction", spec.outlier_fraction);
    spec.outlier_magnitude = j.value("outlier_magnitude", spec.outlier_magnitude);
    spec.outlier_direction_seed = j.value("outlier_direction_seed", spec.outlier_direction_seed);
  }
  // Explicit flags win over the JSON spec.
  auto given = [&](const std::string& flag) { return cmd->count(flag) > 0; };
  if (given("--seed")) spec.seed = opt.seed;
  if (given("--n-classes")) spec.n_classes = opt.n_classes;
  if (given("--dim")) spec.dim = opt.dim;
  if (given("--n-per-class")) spec.n_per_class = opt.n_per_class;
  if (given("--within-sigma")) spec.within_sigma = opt.within_sigma;
  if (given("--n-ood")) spec.n_ood = opt.n_ood;
  if (given("--ood-shift")) spec.ood_shift = opt.ood_shift;
  if (given("--outlier-fraction")) spec.outlier_fraction = opt.outlier_fraction;
  if (given("--outlier-magnitude")) spec.outlier_magnitude = opt.outlier_magnitude;
  if (given("--outlier-direction-seed")) spec.outlier_direction_seed = opt.outlier_direction_seed;
  return spec;
}

int run_synth(const Options& opt, const CLI::App* cmd) {
  if (opt.out.empty()) throw dcc::ParamError("missing required flag --out");
  const dcc::SynthSpec spec = build_synth_spec(opt, cmd);
  const dcc::SynthData data = dcc::generate(spec);

  const dcc::FileFormat format = dcc::parse_format(opt.format);
  const char* ext = format == dcc::FileFormat::binary ? ".fmat" : ".csv";
  fs::create_directories(opt.out);
  const fs::path dir(opt.out);
  const fs::path train_path = dir / (std::string("train") + ext);
  const fs::path id_path = dir / (std::string("id_test") + ext);
  const fs::path ood_path = dir / (std::string("ood_test") + ext);
  dcc::write_features(data.train, train_path, format);
  dcc::write_features(data.id_test, id_path, format);
  dcc::write_features(data.ood_test, ood_path, format);

  json summary = {
      {"train", train_path.string()},
      {"id_test", id_path.string()},
      {"ood_test", ood_path.string()},
      {"n_train", data.train.rows()},
      {"n_id_test", data.id_test.rows()},
      {"n_ood", data.ood_test.rows()},
      {"seed", spec.seed},
  };
  if (format == dcc::FileFormat::binary) {
    summary["labels"] = dcc::companion_label_path(train_path).string();
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

int run_ablate(const Options& opt) {
  require_path(opt.test, "--test");
  require_path(opt.ood, "--ood");

  dcc::GaussianStats stats;
  if (!opt.stats.empty()) {
    require_path(opt.stats, "--stats");
    stats = dcc::read_stats_archive(opt.stats).stats;
  } else {
    require_path(opt.train, "--train");
    dcc::FeatureSet train = load_features(opt.train, opt.labels);
    if (!train.has_labels()) throw dcc::LabelError("ablate requires labeled training data");
    train = dcc::l2_normalize(train);
    stats = dcc::fit_stats(train, opt.eps_scale);
  }

  const dcc::FeatureSet id_test = load_features(opt.test, "");
  const dcc::FeatureSet ood_test = load_features(opt.ood, "");
  const int k = opt.k > 0 ? opt.k : default_k(stats.dim);
  if (k > stats.dim - 1) {
    throw dcc::ParamError("--k " + std::to_string(k) + " out of range [1, " +
                          std::to_string(stats.dim - 1) + "]");
  }
  const dcc::ResidualBasis basis_within = dcc::residual_basis(stats, k, dcc::CovSource::within);
  const dcc::ResidualBasis basis_full = dcc::residual_basis(stats, k, dcc::CovSource::full);

  // Table rows: baseline, +DME, +DME+RSP, +DME+DCM, full method. RSP without
  // DCM draws both the basis and the precision from the full covariance.
  struct Row {
    bool dme, rsp, dcm;
  };
  const Row rows[5] = {
      {false, false, false},
      {true, false, false},
      {true, true, false},
      {true, false, true},
      {true, true, true},
  };

  std::ostringstream csv;
  csv << "dme,rsp,dcm,auroc,fpr95\n";
  for (const Row& row : rows) {
    dcc::ScoreConfig config;
    config.method = row.dme ? dcc::Method::dcc : dcc::Method::mahalanobis_static;
    config.dme = row.dme;
    config.rsp = row.rsp;
    config.dcm = row.dcm;
    config.residual_dim = k;
    config.reg_epsilon_scale = opt.eps_scale;
    config.normalize = !opt.no_normalize;
    const dcc::ResidualBasis* basis =
        row.rsp ? (row.dcm ? &basis_within : &basis_full) : nullptr;

    const dcc::ScoredBatch id_batch =
        dcc::score_batch(id_test, stats, basis, config, opt.threads);
    const dcc::ScoredBatch ood_batch =
        dcc::score_batch(ood_test, stats, basis, config, opt.threads);
    const dcc::EvalReport report = dcc::evaluate(id_batch.scores, ood_batch.scores);
    csv << int(row.dme) << ',' << int(row.rsp) << ',' << int(row.dcm) << ','
        << dcc::format_double(report.auroc) << ',' << dcc::format_double(report.fpr95)
        << '\n';
  }

  if (!opt.out.empty()) {
    std::ofstream out(opt.out);
    if (!out) throw dcc::IoError("cannot open " + opt.out + " for writing");
    out << csv.str();
  }
  std::cout << csv.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  CLI::App app{"dynamic covariance calibration for distance-based OOD scoring"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--format", opt.format, "output file format (fmat or csv)");
    cmd->add_option("--threads", opt.threads, "worker threads (0 = auto)");
  };
  auto add_score_flags = [&](CLI::App* cmd) {
    cmd->add_option("--method", opt.method, "dcc, maha, euclid or euclid-dyn");
    cmd->add_flag("--no-dme", opt.no_dme, "disable dynamic matrix estimation");
    cmd->add_flag("--no-rsp", opt.no_rsp, "do not restrict adjustment to the residual space");
    cmd->add_flag("--no-dcm", opt.no_dcm, "use the full covariance instead of within-class");
    cmd->add_flag("--no-normalize", opt.no_normalize, "skip L2 normalization of test rows");
    cmd->add_option("--k", opt.k, "residual space dimension");
    cmd->add_option("--source", opt.source, "covariance for the basis (within or full)");
    cmd->add_option("--eps-scale", opt.eps_scale, "regularization scale for covariance inverses");
  };

  CLI::App* fit = app.add_subcommand("fit", "fit Gaussian statistics and residual basis");
  fit->add_option("--train", opt.train, "training features (fmat or csv)");
  fit->add_option("--labels", opt.labels, "label file (flab); optional when embedded");
  fit->add_option("--out", opt.out, "output stats archive");
  fit->add_option("--k", opt.k, "residual space dimension (default round(d/3))");
  fit->add_option("--source", opt.source, "covariance for the basis (within or full)");
  fit->add_option("--eps-scale", opt.eps_scale, "regularization scale");
  add_common(fit);

  CLI::App* score = app.add_subcommand("score", "score a test batch");
  score->add_option("--stats", opt.stats, "fitted stats archive");
  score->add_option("--test", opt.test, "test features");
  score->add_option("--out", opt.out, "output score file");
  add_score_flags(score);
  add_common(score);

  CLI::App* eval = app.add_subcommand("eval", "AUROC / FPR95 from two score files");
  eval->add_option("--test", opt.test, "ID score file");
  eval->add_option("--ood", opt.ood, "OOD score file");
  eval->add_option("--out", opt.out, "also write the JSON report here");

  CLI::App* sweep = app.add_subcommand("sweep", "evaluate over a grid of residual dimensions");
  sweep->add_option("--stats", opt.stats, "fitted stats archive");
  sweep->add_option("--test", opt.test, "ID test features");
  sweep->add_option("--ood", opt.ood, "OOD test features");
  sweep->add_option("--grid", opt.grid, "comma-separated k values, e.g. \"4,8,16\"");
  sweep->add_option("--out", opt.out, "also write the CSV here");
  add_score_flags(sweep);
  add_common(sweep);

  CLI::App* diagnose = app.add_subcommand("diagnose", "per-sample p/q/s and residual norms");
  diagnose->add_option("--stats", opt.stats, "fitted stats archive");
  diagnose->add_option("--test", opt.test, "test features");
  diagnose->add_option("--out", opt.out, "output diagnostics CSV");
  add_score_flags(diagnose);
  add_common(diagnose);

  CLI::App* synth = app.add_subcommand("synth", "generate the synthetic ID/OOD scenario");
  synth->add_option("--out", opt.out, "output directory");
  synth->add_option("--spec", opt.spec_json, "SynthSpec as a flat JSON file");
  synth->add_option("--seed", opt.seed, "generator seed");
  synth->add_option("--n-classes", opt.n_classes, "number of ID classes");
  synth->add_option("--dim", opt.dim, "feature dimension");
  synth->add_option("--n-per-class", opt.n_per_class, "train (and ID-test) samples per class");
  synth->add_option("--within-sigma", opt.within_sigma, "isotropic within-class noise");
  synth->add_option("--n-ood", opt.n_ood, "number of OOD samples");
  synth->add_option("--ood-shift", opt.ood_shift, "OOD mean displacement along the outlier direction");
  synth->add_option("--outlier-fraction", opt.outlier_fraction, "fraction of contaminated train samples");
  synth->add_option("--outlier-magnitude", opt.outlier_magnitude, "contamination displacement");
  synth->add_option("--outlier-direction-seed", opt.outlier_direction_seed,
                    "seed for the contamination direction");
  add_common(synth);

  CLI::App* ablate = app.add_subcommand("ablate", "run the five-configuration ablation grid");
  ablate->add_option("--train", opt.train, "training features (fit in-process)");
  ablate->add_option("--labels", opt.labels, "label file for --train");
  ablate->add_option("--stats", opt.stats, "fitted stats archive (alternative to --train)");
  ablate->add_option("--test", opt.test, "ID test features");
  ablate->add_option("--ood", opt.ood, "OOD test features");
  ablate->add_option("--k", opt.k, "residual space dimension (default round(d/3))");
  ablate->add_option("--eps-scale", opt.eps_scale, "regularization scale");
  ablate->add_option("--out", opt.out, "also write the CSV here");
  ablate->add_flag("--no-normalize", opt.no_normalize, "skip L2 normalization of test rows");
  add_common(ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (fit->parsed()) return run_fit(opt);
    if (score->parsed()) {
      // Score files default to csv; --format fmat selects the binary column.
      if (score->count("--format") == 0) opt.format = "csv";
      return run_score(opt);
    }
    if (eval->parsed()) return run_eval(opt);
    if (sweep->parsed()) return run_sweep(opt);
    if (diagnose->parsed()) return run_diagnose(opt);
    if (synth->parsed()) return run_synth(opt, synth);
    if (ablate->parsed()) return run_ablate(opt);
  } catch (const dcc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
