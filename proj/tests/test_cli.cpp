#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string> &args) {
  std::ostringstream out, err;
  const int code = ctpd::cli::dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ctpd_cli_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string write(const std::string &name, const std::string &text) const {
    std::ofstream(path / name) << text;
    return (path / name).string();
  }
  std::string read(const std::string &name) const {
    std::ifstream in(path / name);
    return {std::istreambuf_iterator<char>(in), {}};
  }
};

json response(const std::string &text, json teacher, json student, json logprobs) {
  return {{"text", text}, {"tokens", {{"teacher", teacher}, {"student", student}}}, {"logprobs", logprobs}};
}

json track(const std::string &tok, json values) { return {{"tokenizer", tok}, {"values", values}}; }

std::string example_line() {
  const json chosen = response("the cat", {{0, 3}, {3, 7}}, {{0, 1}, {1, 3}, {3, 4}, {4, 7}},
                               {{"policy", track("student", {-0.5, -0.2, -0.1, -0.3})},
                                {"teacher_ref", track("teacher", {-0.9, -0.4})},
                                {"positive", track("teacher", {-0.6, -0.3})},
                                {"negative", track("teacher", {-1.2, -0.5})}});
  const json rejected = response("a dog", {{0, 1}, {1, 5}}, {{0, 2}, {2, 5}},
                                 {{"policy", track("student", {-0.7, -0.9})},
                                  {"teacher_ref", track("teacher", {-0.4, -0.8})},
                                  {"positive", track("teacher", {-0.8, -1.1})},
                                  {"negative", track("teacher", {-0.3, -0.6})}});
  return json{{"prompt", "say:"}, {"chosen", chosen}, {"rejected", rejected}}.dump() + "\n";
}

} // namespace

TEST_CASE("align prints one partition record per line") {
  TempDir dir;
  const auto in = dir.write("in.jsonl", example_line() + example_line());
  const auto r = run({"align", "--in", in});
  CHECK(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = json::parse(line);
    CHECK(j["line"] == n + 1);
    CHECK(j.contains("chosen"));
    CHECK(j.contains("rejected"));
    ++n;
  }
  CHECK(n == 2);
  CHECK(r.out.find("\"spans\"") != std::string::npos);
}

TEST_CASE("usage errors exit 2") {
  CHECK(run({"align", "--bogus"}).code == 2);
  CHECK(run({"no-such-command"}).code == 2);
  CHECK(run({"align"}).code == 2);
  CHECK(run({"align", "--in", "/nonexistent/file.jsonl"}).code == 2);
  TempDir dir;
  const auto in = dir.write("in.jsonl", example_line());
  const auto r = run({"weights", "--in", in, "--strategy", "random"});
  CHECK(r.code == 2);
  CHECK_FALSE(r.err.empty());
  CHECK(run({"weights", "--in", in, "--strategy", "random", "--seed", "3"}).code == 0);
  CHECK(run({"weights", "--in", in, "--strategy", "nope"}).code == 2);
}

TEST_CASE("help lists options with defaults") {
  const auto r = run({"weights", "--help"});
  CHECK(r.code == 0);
  const std::string all = r.out + r.err;
  CHECK(all.find("--mu-pos") != std::string::npos);
  CHECK(all.find("-0.5") != std::string::npos);
  CHECK(all.find("1.5") != std::string::npos);
}

TEST_CASE("grad-check on random instances") {
  const auto r = run({"grad-check", "--random", "200", "--seed", "7"});
  CHECK(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j["pass"] == true);
  CHECK(j["max_rel_err"].get<double>() <= 1e-6);
}

TEST_CASE("loss-check reduction on random instances") {
  const auto r = run({"loss-check", "--random", "100", "--seed", "5"});
  CHECK(r.code == 0);
}

TEST_CASE("validate-trace flags broken lines and exits 1") {
  TempDir dir;
  auto bad = json::parse(example_line());
  bad["chosen"]["tokens"]["teacher"] = {{0, 2}, {3, 7}};
  const auto in = dir.write("in.jsonl", example_line() + bad.dump() + "\n");
  const auto r = run({"validate-trace", "--in", in});
  CHECK(r.code == 1);
  std::istringstream lines(r.out);
  std::string first, second;
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(json::parse(first)["valid"] == true);
  const auto v = json::parse(second);
  CHECK(v["valid"] == false);
  CHECK(v["violations"][0]["kind"] == "TilingGap");
  CHECK(v["violations"][0]["byte"] == 2);
  CHECK(r.err.find("line 2") != std::string::npos);

  const auto good = dir.write("good.jsonl", example_line());
  CHECK(run({"validate-trace", "--in", good}).code == 0);
  const auto garbage = dir.write("garbage.jsonl", "{not json\n");
  CHECK(run({"validate-trace", "--in", garbage}).code == 1);
}

TEST_CASE("weights output validates and reruns are byte-identical") {
  TempDir dir;
  const auto in = dir.write("in.jsonl", example_line());
  const auto out1 = (dir.path / "w1.jsonl").string();
  const auto out2 = (dir.path / "w2.jsonl").string();
  REQUIRE(run({"weights", "--in", in, "--out", out1}).code == 0);
  REQUIRE(run({"weights", "--in", in, "--out", out2}).code == 0);
  CHECK(dir.read("w1.jsonl") == dir.read("w2.jsonl"));
  CHECK(run({"validate-trace", "--in", out1}).code == 0);
  const auto j = json::parse(dir.read("w1.jsonl"));
  CHECK(j["chosen"]["span_weights"].size() == 2);
  // "the" spans: pos - neg = 0.6 (sum -0.6 vs -1.2) -> exp(0.6)
  CHECK(j["chosen"]["span_weights"][0].get<double>() == doctest::Approx(std::exp(0.6)));

  const auto loss = run({"loss-check", "--in", out1});
  CHECK(loss.code == 0);
  const auto l = json::parse(loss.out.substr(0, loss.out.find('\n')));
  CHECK(l.contains("loss"));
  CHECK(l["unit_weight_vs_dpo"].get<double>() <= 1e-12);
  CHECK(run({"grad-check", "--in", out1}).code == 0);
}

TEST_CASE("bounds on the bundled spec") {
  TempDir dir;
  const std::string spec = std::string(CTPD_SOURCE_DIR) + "/specs/bounds_example.json";
  const auto out = (dir.path / "b.json").string();
  const auto r = run({"bounds", "--spec", spec, "--out", out, "--jobs", "2"});
  CHECK(r.code == 0);
  CHECK(json::parse(dir.read("b.json"))["all_pass"] == true);
}
