#include <doctest.h>
#include <json.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
  int exit_code = -1;
  std::string out;
};

const fs::path& workdir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "otprop_cli_tests";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run(const std::string& args) {
  const std::string cmd = "cd '" + workdir().string() + "' && '" OTPROP_CLI_PATH "' " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string file(const std::string& name, const std::string& text) {
  std::ofstream(workdir() / name) << text;
  return (workdir() / name).string();
}

std::string slurp(const std::string& name) {
  std::ifstream in(workdir() / name);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

// Everything except the seconds column.
std::string strip_seconds(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() > 5) f.erase(f.begin() + 5);
    for (const auto& c : f) out += c + ",";
    out += "\n";
  }
  return out;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("solve") {
  const auto zero = file("zero.csv", "x1\n0\n");
  const auto three = file("three.csv", "x1\n3\n");
  const auto p = file("p.csv", "x1,x2\n0.5,1\n");

  Run r = run("solve " + p + " " + p + " --loss Slambda --lambda 0.3");
  CHECK(r.exit_code == 0);
  CHECK(std::stod(r.out) == 0.0);

  r = run("solve " + zero + " " + three + " --loss W0");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "9\n");

  r = run("solve " + zero + " " + three + " --loss Wlambda --lambda 0.5 --dual-out duals.csv --plan-out plan.csv");
  CHECK(r.exit_code == 0);
  CHECK(std::abs(std::stod(r.out) - 9.0) <= 1e-9);
  CHECK(slurp("duals.csv").rfind("side,index,potential\n", 0) == 0);
  CHECK(slurp("plan.csv").rfind("i,j,mass\n", 0) == 0);

  const auto two = file("two.csv", "x1\n0\n1\n");
  const auto half = file("half.csv", "x1\n0.5\n");
  r = run("solve " + two + " " + half);
  CHECK(r.out == "0.25\n");
}

TEST_CASE("exit codes") {
  const auto p = file("p1.csv", "x1\n0\n");
  CHECK(run("solve /nonexistent.csv " + p).exit_code == 2);
  CHECK(run("solve " + p + " " + p + " --loss Wlambda").exit_code == 2);  // missing lambda
  CHECK(run("solve " + p + " " + p + " --loss W7").exit_code == 2);
  CHECK(run("solve " + p + " " + p + " --bogus").exit_code == 2);
  CHECK(run("frobnicate").exit_code == 2);
  const auto bad = file("bad.csv", "x1\n1\nabc\n");
  CHECK(run("solve " + bad + " " + p).exit_code == 2);
  const auto huge = file("huge.csv", "x1\n1e200\n-1e200\n");
  CHECK(run("solve " + huge + " " + p + " --loss Wlambda --lambda 0.1 --iters 3").exit_code == 3);
  CHECK(run("--help").exit_code == 0);
}

TEST_CASE("estimate") {
  // Two disjoint clusters; the target holds them in proportions 0.25 / 0.75.
  const auto src = file("est_src.csv", "x1,x2,label\n0,0,1\n0.5,0,1\n0,0.5,1\n5,5,2\n5.5,5,2\n5,5.5,2\n");
  const auto tgt = file("est_tgt.csv", "x1,x2\n0.1,0.1\n5.1,5.1\n5.2,5.0\n5.0,5.3\n");
  Run r = run("estimate --source " + src + " --target " + tgt + " --loss W0 --theta-out th.json --trace-out trace.csv");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.rfind("class,theta\n1,", 0) == 0);
  const auto doc = nlohmann::json::parse(slurp("th.json"));
  CHECK(std::abs(doc["theta"][0].get<double>() - 0.25) <= 0.05);
  CHECK(std::abs(doc["theta"][1].get<double>() - 0.75) <= 0.05);
  CHECK(doc["loss"] == "W0");
  CHECK(slurp("trace.csv").rfind("iteration,loss,gradient_norm\n0,", 0) == 0);

  const Run again = run("estimate --source " + src + " --target " + tgt + " --loss W0 --theta-out th2.json");
  CHECK(again.out == r.out);

  const auto one = file("one_src.csv", "x1,label\n0,1\n1,1\n");
  const auto t1 = file("one_tgt.csv", "x1\n0.3\n");
  r = run("estimate --source " + one + " --target " + t1 + " --loss Wlambda --lambda 0.5 --theta-out th3.json");
  CHECK(r.exit_code == 0);
  CHECK(r.out == "class,theta\n1,1\n");

  CHECK(run("estimate --source " + src + " --target " + tgt + " --seed-theta 0.5,0.6").exit_code == 2);
}

TEST_CASE("simulate") {
  Run r = run("simulate --seed 4 --source-out s1.csv --target-out t1.csv --labels-out l1.csv");
  REQUIRE(r.exit_code == 0);
  CHECK(lines(slurp("s1.csv")) == 251);
  CHECK(lines(slurp("t1.csv")) == 51);
  CHECK(lines(slurp("l1.csv")) == 51);
  CHECK(slurp("s1.csv").rfind("x1,x2,x3,x4,x5,x6,label\n", 0) == 0);
  run("simulate --seed 4 --source-out s2.csv --target-out t2.csv --labels-out l2.csv");
  CHECK(slurp("s1.csv") == slurp("s2.csv"));
  CHECK(slurp("t1.csv") == slurp("t2.csv"));

  const auto spec = file("spec.cfg",
                         "num_classes = 2\ndim = 2\nsigma = 0.5\nsource_counts = 3,3\ntarget_counts = 2,2\n"
                         "means = 0,0,4,4\n");
  r = run("simulate --spec-file " + spec + " --source-out s3.csv --target-out t3.csv --labels-out l3.csv");
  REQUIRE(r.exit_code == 0);
  CHECK(lines(slurp("s3.csv")) == 7);
  CHECK(lines(slurp("t3.csv")) == 5);
  CHECK(run("simulate --spec-file " + file("bad_spec.cfg", "colour = blue\n")).exit_code == 2);
}

TEST_CASE("experiment") {
  const auto cfg = file("exp.cfg",
                        "data = simulate\nseed = 2\nrepetitions = 2\nlambda_grid = 0.5\nlosses = W0,Wlambda\n"
                        "sinkhorn_tolerance = 1e-6\ntheta_tolerance = 1e-4\nrecords_out = rec1.csv\naggregates_out = agg1.json\n");
  Run r = run("experiment --config " + cfg);
  REQUIRE(r.exit_code == 0);
  const std::string rec = slurp("rec1.csv");
  CHECK(rec.rfind("loss,lambda,ell,rep,error,seconds,sinkhorn_iters,converged,dataset_hash\n", 0) == 0);
  CHECK(lines(rec) == 1 + 2 * (1 + 1));

  r = run("experiment --config " + cfg + " --records-out rec2.csv --aggregates-out agg2.json --threads 2");
  REQUIRE(r.exit_code == 0);
  CHECK(strip_seconds(slurp("rec2.csv")) == strip_seconds(rec));

  // Aggregates recomputed from the records match the JSON.
  const auto doc = nlohmann::json::parse(slurp("agg1.json"));
  std::istringstream in(rec);
  std::string line;
  std::getline(in, line);
  double sums[2] = {0, 0};
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    sums[f[0] == "W0" ? 0 : 1] += std::stod(f[4]);
  }
  CHECK(doc["cells"][0]["mean_error"].get<double>() == doctest::Approx(sums[0] / 2).epsilon(1e-15));
  CHECK(doc["cells"][1]["mean_error"].get<double>() == doctest::Approx(sums[1] / 2).epsilon(1e-15));

  CHECK(run("experiment --config " + file("bad.cfg", "repetitions = 0\n")).exit_code == 2);
  CHECK(run("experiment --config " + file("bad2.cfg", "unknown_key = 1\n")).exit_code == 2);
  CHECK(run("experiment --config /nonexistent.cfg").exit_code == 2);
}

}  // TEST_SUITE
