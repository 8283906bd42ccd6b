#include <clocale>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bsim/report.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace bsim;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("bsim_report_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<SampleSet> sweep_sets() {
  std::vector<SampleSet> sets;
  for (std::uint64_t p : {1, 64, 512}) {
    sets.push_back({"micro:read:" + std::to_string(p), "trap", {1000 + p, 1010 + p}});
    sets.push_back({"micro:read:" + std::to_string(p), "byp,ret", {500 + p, 505 + p}});
  }
  return sets;
}

}  // namespace

TEST_CASE("csv tables") {
  const std::vector<SampleSet> one{{"micro:getppid:0", "trap", {7180}}};
  const auto raw = lines(raw_csv(one));
  REQUIRE(raw.size() == 2);
  CHECK(raw[0] == "workload,config,iter,cycles");
  CHECK(raw[1] == "micro:getppid:0,trap,0,7180");

  const auto sum = lines(summary_csv(one));
  REQUIRE(sum.size() == 2);
  CHECK(sum[0] == "workload,config,mean,stdev,cv,p99,min,max,n");
  CHECK(sum[1] == "micro:getppid:0,trap,7180,0,0,7180,7180,7180,1");

  const std::vector<SampleSet> quoted{{"kv", "byp,ret", {1, 2}}};
  CHECK(lines(raw_csv(quoted))[1] == "kv,\"byp,ret\",0,1");
  CHECK(csv_field("a\"b") == "\"a\"\"b\"");
  CHECK(csv_field("plain") == "plain");
}

TEST_CASE("json report") {
  const auto doc = nlohmann::json::parse(report_json(sweep_sets()));
  REQUIRE(doc["summary"].size() == 6);
  CHECK(doc["summary"][0]["workload"] == "micro:read:1");
  CHECK(doc["summary"][0]["mean"] == 1006.0);
  CHECK(doc["raw"][1]["cycles"] == std::vector<int>{501, 506});
}

TEST_CASE("comparison rows") {
  const SampleSet trap{"micro:getppid:0", "trap", {1000, 1000}};
  const SampleSet byp{"micro:getppid:0", "byp", {250, 250}};
  const Comparison c = compare(trap, byp);
  CHECK(c.improvement_pct == doctest::Approx(75.0));
  const auto rows = lines(comparison_csv({c}));
  CHECK(rows[0] == "workload,baseline,against,baseline_mean,against_mean,improvement_pct");
  CHECK(rows[1] == "micro:getppid:0,trap,byp,1000,250,75");
  CHECK(nlohmann::json::parse(comparison_json({c}))[0]["against"] == "byp");
}

TEST_CASE("one latency plot holds every config") {
  const auto dir = scratch("plot");
  EmitOptions o;
  o.plot = true;
  o.stem = "micro";
  o.weights_text = "x=1\n";
  const auto files = emit_report(sweep_sets(), dir, o);
  CHECK(files.size() == 5);
  const std::string svg = slurp(dir / "micro_latency.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("trap") != std::string::npos);
  CHECK(svg.find("byp,ret") != std::string::npos);
  CHECK(fs::exists(dir / "micro_histogram.svg"));
  CHECK(slurp(dir / "weights.txt") == "x=1\n");
}

TEST_CASE("no latency plot without a payload axis") {
  const auto dir = scratch("noaxis");
  EmitOptions o;
  o.plot = true;
  emit_report({{"kv", "trap", {5, 6}}}, dir, o);
  CHECK_FALSE(fs::exists(dir / "results_latency.svg"));
  CHECK(fs::exists(dir / "results_histogram.svg"));
}

TEST_CASE("reports are byte-identical across reruns") {
  const auto a = scratch("rerun_a");
  const auto b = scratch("rerun_b");
  EmitOptions o;
  o.plot = true;
  const auto fa = emit_report(sweep_sets(), a, o);
  const auto fb = emit_report(sweep_sets(), b, o);
  REQUIRE(fa.size() == fb.size());
  for (std::size_t i = 0; i < fa.size(); ++i) CHECK(slurp(fa[i]) == slurp(fb[i]));
}

TEST_CASE("numbers ignore the C locale") {
  const char* prev = std::setlocale(LC_ALL, nullptr);
  const std::string saved = prev ? prev : "C";
  const bool switched = std::setlocale(LC_ALL, "de_DE.UTF-8") || std::setlocale(LC_ALL, "fr_FR.UTF-8");
  CHECK(format_number(0.25) == "0.25");
  CHECK(format_number(1234567.0) == "1234567");
  CHECK(lines(summary_csv({{"w", "trap", {1, 2}}}))[1] == "w,trap,1.5,0.5,0.3333333333333333,2,1,2,2");
  std::setlocale(LC_ALL, saved.c_str());
  if (!switched) MESSAGE("no comma-decimal locale installed; checked under the default locale");
}

TEST_CASE("unwritable output") {
  const auto dir = scratch("unwritable");
  const auto blocker = dir / "file";
  write_atomic(blocker, "x");
  CHECK(bsim::testing::error_of([&] { write_atomic(blocker / "x.csv", "x"); }) == Errc::IoError);
  CHECK(bsim::testing::error_of([] { emit_report({}, fs::temp_directory_path(), {}); }) == Errc::BadArgument);
}
