// End-to-end tests of the dcc binary: exit codes, stdout JSON/CSV, and file
// outputs, exercised through the real command line.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dcc/feature_io.hpp"
#include "dcc/stats_archive.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "dcc_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  return std::string(std::istreambuf_iterator<char>(in), {});
}

RunResult run(const std::string& args) {
  static int counter = 0;
  const fs::path out_path = work_dir() / ("stdout_" + std::to_string(counter) + ".txt");
  const fs::path err_path = work_dir() / ("stderr_" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string command = std::string(DCC_CLI_PATH) + " " + args + " > " +
                              out_path.string() + " 2> " + err_path.string();
  const int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WEXITSTATUS(status);
  result.out = slurp(out_path);
  result.err = slurp(err_path);
  return result;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  REQUIRE(out);
  out << content;
}

// Toy two-class set whose within covariance is exactly diag(0.5, 0.5).
fs::path toy_train_csv() {
  const fs::path path = work_dir() / "toy_train.csv";
  write_file(path,
             "f0,f1,label\n"
             "1,0,0\n"
             "-1,0,0\n"
             "0,1,1\n"
             "0,-1,1\n");
  return path;
}

}  // namespace

TEST_CASE("fit writes an archive whose within-covariance block is exact") {
  const fs::path stats_path = work_dir() / "toy.farc";
  const RunResult r =
      run("fit --train " + toy_train_csv().string() + " --out " + stats_path.string() + " --k 1");
  REQUIRE(r.exit_code == 0);

  const json summary = json::parse(r.out);
  CHECK(summary["n"] == 4);
  CHECK(summary["d"] == 2);
  CHECK(summary["n_classes"] == 2);
  CHECK(summary["k"] == 1);

  const dcc::StatsArchive archive = dcc::read_stats_archive(stats_path);
  CHECK(archive.stats.cov_within(0, 0) == 0.5);  // exact in binary32
  CHECK(archive.stats.cov_within(1, 1) == 0.5);
  CHECK(archive.stats.cov_within(0, 1) == 0.0);
  REQUIRE(archive.basis.has_value());
}

TEST_CASE("fit with a missing labels file exits 2 and names the path") {
  const fs::path features = work_dir() / "unlabeled.csv";
  write_file(features, "1,0\n0,1\n");
  const RunResult r = run("fit --train " + features.string() + " --labels " +
                          (work_dir() / "no_such.flab").string() + " --out " +
                          (work_dir() / "x.farc").string());
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("no_such.flab") != std::string::npos);
}

TEST_CASE("fit rejects k = d") {
  const RunResult r = run("fit --train " + toy_train_csv().string() + " --out " +
                          (work_dir() / "y.farc").string() + " --k 2");
  CHECK(r.exit_code == 2);
}

TEST_CASE("eval reproduces the metric examples") {
  const fs::path id_path = work_dir() / "id_scores.csv";
  const fs::path ood_path = work_dir() / "ood_scores.csv";

  SUBCASE("perfect separation") {
    write_file(id_path, "2\n3\n");
    write_file(ood_path, "0\n1\n");
    const RunResult r = run("eval --test " + id_path.string() + " --ood " + ood_path.string());
    REQUIRE(r.exit_code == 0);
    const json report = json::parse(r.out);
    CHECK(report["auroc"] == 1.0);
    CHECK(report["fpr95"] == 0.0);
  }
  SUBCASE("pairwise 0.75 quartet") {
    write_file(id_path, "3\n1\n");
    write_file(ood_path, "2\n0\n");
    const RunResult r = run("eval --test " + id_path.string() + " --ood " + ood_path.string());
    REQUIRE(r.exit_code == 0);
    CHECK(json::parse(r.out)["auroc"] == 0.75);
  }
  SUBCASE("swapped files complement the auroc") {
    write_file(id_path, "2\n3\n");
    write_file(ood_path, "0\n1\n");
    const RunResult r = run("eval --test " + ood_path.string() + " --ood " + id_path.string());
    REQUIRE(r.exit_code == 0);
    CHECK(json::parse(r.out)["auroc"] == 0.0);
  }
  SUBCASE("empty score file exits 2") {
    write_file(id_path, "");
    write_file(ood_path, "0\n");
    const RunResult r = run("eval --test " + id_path.string() + " --ood " + ood_path.string());
    CHECK(r.exit_code == 2);
  }
}

TEST_CASE("synth -> fit -> score -> eval -> sweep pipeline") {
  const fs::path data_dir = work_dir() / "synth";
  RunResult r = run("synth --out " + data_dir.string() +
                    " --seed 3 --n-classes 4 --dim 12 --n-per-class 50 --n-ood 120");
  REQUIRE(r.exit_code == 0);
  const json synth_summary = json::parse(r.out);
  CHECK(synth_summary["n_train"] == 200);
  CHECK(fs::exists(data_dir / "train.fmat"));
  CHECK(fs::exists(data_dir / "train.flab"));

  const fs::path stats_path = work_dir() / "synth.farc";
  r = run("fit --train " + (data_dir / "train.fmat").string() + " --out " +
          stats_path.string() + " --k 4");
  REQUIRE(r.exit_code == 0);

  const fs::path id_scores = work_dir() / "id.scores.csv";
  const fs::path ood_scores = work_dir() / "ood.scores.csv";
  r = run("score --stats " + stats_path.string() + " --test " +
          (data_dir / "id_test.fmat").string() + " --out " + id_scores.string() +
          " --format csv");
  REQUIRE(r.exit_code == 0);
  CHECK(json::parse(r.out)["n_scored"] == 200);
  r = run("score --stats " + stats_path.string() + " --test " +
          (data_dir / "ood_test.fmat").string() + " --out " + ood_scores.string() +
          " --format csv");
  REQUIRE(r.exit_code == 0);

  const fs::path report_path = work_dir() / "report.json";
  r = run("eval --test " + id_scores.string() + " --ood " + ood_scores.string() +
          " --out " + report_path.string());
  REQUIRE(r.exit_code == 0);
  const json report = json::parse(r.out);
  CHECK(report["auroc"].get<double>() >= 0.0);
  CHECK(report["auroc"].get<double>() <= 1.0);
  CHECK(json::parse(slurp(report_path)) == report);

  SUBCASE("sweep at a single k matches the standalone eval") {
    r = run("sweep --stats " + stats_path.string() + " --test " +
            (data_dir / "id_test.fmat").string() + " --ood " +
            (data_dir / "ood_test.fmat").string() + " --grid 4");
    REQUIRE(r.exit_code == 0);
    std::stringstream ss(r.out);
    std::string header, row;
    std::getline(ss, header);
    CHECK(header == "k,auroc,fpr95");
    std::getline(ss, row);
    const auto first_comma = row.find(',');
    const auto second_comma = row.find(',', first_comma + 1);
    CHECK(row.substr(0, first_comma) == "4");
    CHECK(std::stod(row.substr(first_comma + 1, second_comma - first_comma - 1)) ==
          report["auroc"].get<double>());
  }
  SUBCASE("duplicated grid entries give identical rows") {
    r = run("sweep --stats " + stats_path.string() + " --test " +
            (data_dir / "id_test.fmat").string() + " --ood " +
            (data_dir / "ood_test.fmat").string() + " --grid 3,3");
    REQUIRE(r.exit_code == 0);
    std::stringstream ss(r.out);
    std::string header, row1, row2;
    std::getline(ss, header);
    std::getline(ss, row1);
    std::getline(ss, row2);
    CHECK(row1 == row2);
  }
  SUBCASE("out-of-range grid exits 2 before scoring") {
    r = run("sweep --stats " + stats_path.string() + " --test " +
            (data_dir / "id_test.fmat").string() + " --ood " +
            (data_dir / "ood_test.fmat").string() + " --grid 4,12");
    CHECK(r.exit_code == 2);
  }
  SUBCASE("diagnose writes the per-sample csv") {
    const fs::path diag_path = work_dir() / "diag.csv";
    r = run("diagnose --stats " + stats_path.string() + " --test " +
            (data_dir / "ood_test.fmat").string() + " --out " + diag_path.string());
    REQUIRE(r.exit_code == 0);
    const std::string content = slurp(diag_path);
    CHECK(content.rfind("index,p,q,s,residual_norm,chosen_class,condition_holds,clamped",
                        0) == 0);
    // A static --method is overridden: diagnostics always instrument dcc.
    r = run("diagnose --stats " + stats_path.string() + " --test " +
            (data_dir / "ood_test.fmat").string() + " --out " + diag_path.string() +
            " --method maha");
    CHECK(r.exit_code == 0);
  }
  SUBCASE("threads do not change the score file") {
    const fs::path t1 = work_dir() / "scores_t1.csv";
    const fs::path t4 = work_dir() / "scores_t4.csv";
    REQUIRE(run("score --stats " + stats_path.string() + " --test " +
                (data_dir / "ood_test.fmat").string() + " --out " + t1.string() +
                " --threads 1").exit_code == 0);
    REQUIRE(run("score --stats " + stats_path.string() + " --test " +
                (data_dir / "ood_test.fmat").string() + " --out " + t4.string() +
                " --threads 4").exit_code == 0);
    CHECK(slurp(t1) == slurp(t4));
  }
}

TEST_CASE("ablate emits the five-row grid consistent with standalone runs") {
  const fs::path data_dir = work_dir() / "synth_ablate";
  REQUIRE(run("synth --out " + data_dir.string() +
              " --seed 11 --n-classes 3 --dim 10 --n-per-class 40 --n-ood 90")
              .exit_code == 0);

  const fs::path stats_path = work_dir() / "ablate.farc";
  REQUIRE(run("fit --train " + (data_dir / "train.fmat").string() + " --out " +
              stats_path.string() + " --k 3")
              .exit_code == 0);

  const RunResult ablate = run("ablate --stats " + stats_path.string() + " --test " +
                               (data_dir / "id_test.fmat").string() + " --ood " +
                               (data_dir / "ood_test.fmat").string() + " --k 3");
  REQUIRE(ablate.exit_code == 0);

  std::stringstream ss(ablate.out);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  REQUIRE(lines.size() == 6);  // header + five configurations
  CHECK(lines[0] == "dme,rsp,dcm,auroc,fpr95");
  CHECK(lines[1].rfind("0,0,0,", 0) == 0);
  CHECK(lines[5].rfind("1,1,1,", 0) == 0);

  auto metrics_of = [](const std::string& row) {
    const auto pos = row.find(',', row.find(',', row.find(',') + 1) + 1);
    return row.substr(pos + 1);
  };

  // Baseline row: static Mahalanobis with the full covariance.
  {
    const fs::path id_s = work_dir() / "ab_id.csv";
    const fs::path ood_s = work_dir() / "ab_ood.csv";
    REQUIRE(run("score --stats " + stats_path.string() + " --test " +
                (data_dir / "id_test.fmat").string() + " --out " + id_s.string() +
                " --method maha --no-dcm --no-rsp").exit_code == 0);
    REQUIRE(run("score --stats " + stats_path.string() + " --test " +
                (data_dir / "ood_test.fmat").string() + " --out " + ood_s.string() +
                " --method maha --no-dcm --no-rsp").exit_code == 0);
    const RunResult eval = run("eval --test " + id_s.string() + " --ood " + ood_s.string());
    REQUIRE(eval.exit_code == 0);
    const json report = json::parse(eval.out);
    const std::string expected = dcc::format_double(report["auroc"].get<double>()) + "," +
                                 dcc::format_double(report["fpr95"].get<double>());
    CHECK(metrics_of(lines[1]) == expected);
  }

  // Full row: the dcc method with the same k.
  {
    const fs::path id_s = work_dir() / "full_id.csv";
    const fs::path ood_s = work_dir() / "full_ood.csv";
    REQUIRE(run("score --stats " + stats_path.string() + " --test " +
                (data_dir / "id_test.fmat").string() + " --out " + id_s.string() +
                " --method dcc --k 3").exit_code == 0);
    REQUIRE(run("score --stats " + stats_path.string() + " --test " +
                (data_dir / "ood_test.fmat").string() + " --out " + ood_s.string() +
                " --method dcc --k 3").exit_code == 0);
    const RunResult eval = run("eval --test " + id_s.string() + " --ood " + ood_s.string());
    REQUIRE(eval.exit_code == 0);
    const json report = json::parse(eval.out);
    const std::string expected = dcc::format_double(report["auroc"].get<double>()) + "," +
                                 dcc::format_double(report["fpr95"].get<double>());
    CHECK(metrics_of(lines[5]) == expected);
  }
}

TEST_CASE("usage errors exit 2") {
  CHECK(run("score --stats /nonexistent.farc --test /nonexistent.fmat --out /tmp/x").exit_code == 2);
  CHECK(run("bogus-subcommand").exit_code == 2);
  CHECK(run("score").exit_code == 2);
}
