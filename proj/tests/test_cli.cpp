#include <doctest.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <string>
#include <sys/wait.h>

using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
};

// Runs the CLI with stderr dropped, capturing stdout and the exit code.
RunResult run(const std::string& args) {
  const std::string cmd = std::string(POSLAYOUT_BIN) + " " + args + " 2>/dev/null";
  RunResult res;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) res.out.append(buf.data(), n);
  const int status = pclose(pipe);
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("layout encode emits the demo chunk as JSON") {
  const RunResult res = run("layout encode");
  REQUIRE(res.exit_code == 0);
  const json doc = json::parse(res.out);
  REQUIRE(doc.is_array());
  REQUIRE(doc.size() == 10);  // 8 context + 2 memory
  CHECK(doc.at(0).at("position_id") == 1);
  CHECK(doc.at(8).at("role") == "memory");
  CHECK(doc.at(8).at("position_id") == 2);
  CHECK(doc.at(9).at("position_id") == 6);
}

TEST_CASE("layout encode honours the canonical config and chunk flag") {
  const RunResult res = run("layout encode --canonical --scheme epl --chunk 2");
  REQUIRE(res.exit_code == 0);
  const json doc = json::parse(res.out);
  REQUIRE(doc.size() == 612);
  CHECK(doc.at(0).at("position_id") == 511);
  CHECK(doc.at(510).at("role") == "memory");
  CHECK(doc.at(510).at("position_id") == 513);
  CHECK(doc.at(611).at("position_id") == 1018);
}

TEST_CASE("layout decode emits the reconstruction decoder") {
  const RunResult res = run("layout decode --canonical");
  REQUIRE(res.exit_code == 0);
  const json doc = json::parse(res.out);
  REQUIRE(doc.size() == 204 + 1 + 1020);
  CHECK(doc.at(203).at("role") == "carrier");
  CHECK(doc.at(203).at("position_id") == 203);
  CHECK(doc.at(204).at("role") == "ae");
  CHECK(doc.at(204).at("position_id") == 204);
  CHECK(doc.back().at("position_id") == 1224);
}

TEST_CASE("layout voco defaults to the reference vision shape") {
  const RunResult res = run("layout voco --format csv");
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.rfind("role,chunk,index,position_id\n", 0) == 0);
  // Default scheme numbers 576 + 128 + 10 tokens consecutively.
  CHECK(res.out.find("\nvision,,0,0\n") != std::string::npos);
  CHECK(res.out.find("voco,,0,576") != std::string::npos);
  CHECK(res.out.find("context,,9,713") != std::string::npos);

  const RunResult epl = run("layout voco --scheme epl");
  const json doc = json::parse(epl.out);
  CHECK(doc.at(576).at("role") == "voco");
  CHECK(doc.at(576).at("position_id") == 3);
  CHECK(doc.at(703).at("position_id") == 574);
}

TEST_CASE("layout validate reports and signals failures") {
  CHECK(run("layout validate --canonical").exit_code == 0);
  CHECK(run("layout validate --canonical --scheme epl --task lm").exit_code == 0);
  CHECK(run("layout validate --canonical --scheme epl --stage encoder --chunk 2").exit_code == 0);

  const RunResult bad = run("layout validate --canonical --framework x500 --task lm");
  CHECK(bad.exit_code == 2);
  const json doc = json::parse(bad.out);
  bool causal_failed = false;
  for (const auto& item : doc)
    if (item.at("check") == "causal id ordering" && item.at("passed") == false)
      causal_failed = true;
  CHECK(causal_failed);
}

TEST_CASE("layout oracle certifies small instances") {
  const RunResult res = run("layout oracle -L 10 -M 3");
  REQUIRE(res.exit_code == 0);
  const json doc = json::parse(res.out);
  CHECK(doc.at("optimal") == 2);
  CHECK(doc.at("witness") == json::array({1, 3, 8}));
  CHECK(run("layout oracle -L 100 -M 1").exit_code == 1);  // guarded size
}

TEST_CASE("pe curves come out as CSV with fixed headers") {
  const RunResult sine = run("pe sine-sim --dmodel 8 --maxpos 4");
  REQUIRE(sine.exit_code == 0);
  CHECK(sine.out.rfind("pos_a,pos_b,cosine\n", 0) == 0);
  CHECK(sine.out.find("0,0,1\n") != std::string::npos);

  const RunResult decay = run("pe rope-decay --dim 16 --max-delta 8 --samples 100");
  REQUIRE(decay.exit_code == 0);
  CHECK(decay.out.rfind("delta,mean_score\n", 0) == 0);
  // one header + 9 deltas
  CHECK(std::count(decay.out.begin(), decay.out.end(), '\n') == 10);
}

TEST_CASE("toy loss reports the demo pipeline loss") {
  const RunResult res = run("toy loss");
  REQUIRE(res.exit_code == 0);
  const json doc = json::parse(res.out);
  CHECK(doc.at("loss") == 4.158596796090426);
  CHECK(doc.at("grad_check").is_null());
}

TEST_CASE("toy grad-check passes the gradient audit from the command line") {
  for (const std::string kind : {"ae", "lm", "qa"}) {
    CAPTURE(kind);
    const RunResult res = run("toy grad-check --loss " + kind);
    REQUIRE(res.exit_code == 0);
    const json doc = json::parse(res.out);
    CHECK(doc.at("grad_check").get<double>() < 1e-4);
    CHECK(doc.at("loss").get<double>() > 0.0);
  }
}

TEST_CASE("toy shift-test passes and reports the worst logit change") {
  const RunResult res = run("toy shift-test --shift 9");
  REQUIRE(res.exit_code == 0);
  const json doc = json::parse(res.out);
  CHECK(doc.at("max_abs_diff").get<double>() <= 1e-9);
}

TEST_CASE("toy attn-dump labels each map") {
  const RunResult res = run("toy attn-dump");
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.rfind("# 0,0\n", 0) == 0);
  CHECK(res.out.find("# 1,1\n") != std::string::npos);
}

TEST_CASE("run-spec files drive the toy subcommands") {
  const std::string path = "/tmp/poslayout_test_spec.json";
  {
    std::ofstream out(path);
    out << R"({"seed": 3, "model": {"d_model": 16}})" << "\n";
  }
  const RunResult res = run("toy loss --spec " + path);
  REQUIRE(res.exit_code == 0);
  const json doc = json::parse(res.out);
  CHECK(doc.at("loss").get<double>() > 0.0);
  // Flags override the file.
  const RunResult over = run("toy loss --spec " + path + " --seed 4");
  CHECK(over.out != res.out);

  {
    std::ofstream out(path);
    out << R"({"model": {"width": 16}})" << "\n";  // unknown key
  }
  CHECK(run("toy loss --spec " + path).exit_code == 1);
  std::remove(path.c_str());
}

TEST_CASE("bad invocations exit with the input-error code") {
  CHECK(run("").exit_code == 1);                       // subcommand required
  CHECK(run("layout").exit_code == 1);                 // nested subcommand required
  CHECK(run("layout encode --no-such-flag").exit_code == 1);
  CHECK(run("layout encode --format yaml").exit_code == 1);
  CHECK(run("layout encode --canonical --config /tmp/nope.json").exit_code == 1);
  CHECK(run("layout encode --config /tmp/definitely-missing.json").exit_code == 1);
  CHECK(run("layout encode --chunk 7").exit_code == 1);
  CHECK(run("layout oracle -L 4").exit_code == 1);     // -M required
  CHECK(run("pe sine-sim --dmodel 7 --maxpos 4").exit_code == 1);
  CHECK(run("toy grad-check --epsilon 0.5").exit_code == 1);
  CHECK(run("toy loss --chunk-size 4 --memory-count 9").exit_code == 1);
}

TEST_CASE("--out writes exactly what stdout would carry") {
  const std::string path = "/tmp/poslayout_test_out.json";
  const RunResult direct = run("layout encode --canonical --scheme epl");
  const RunResult filed = run("layout encode --canonical --scheme epl --out " + path);
  REQUIRE(filed.exit_code == 0);
  CHECK(filed.out.empty());
  CHECK(read_file(path) == direct.out);
  std::remove(path.c_str());
}

TEST_CASE("every subcommand is byte-deterministic across runs") {
  const std::string commands[] = {
      "layout encode --canonical --scheme epl --chunk 2",
      "layout decode --canonical --scheme epl --task qa",
      "layout voco --scheme epl",
      "layout validate --canonical --scheme epl --task lm",
      "layout oracle -L 24 -M 5",
      "pe sine-sim --dmodel 16 --maxpos 8",
      "pe rope-decay --dim 16 --max-delta 8 --samples 100 --threads 3",
      "toy loss --task qa",
      "toy grad-check --loss lm",
      "toy attn-dump",
      "toy shift-test --shift 3",
  };
  for (const auto& cmd : commands) {
    CAPTURE(cmd);
    const RunResult a = run(cmd);
    const RunResult b = run(cmd);
    CHECK(a.exit_code == 0);
    CHECK(a.exit_code == b.exit_code);
    CHECK(a.out == b.out);
    CHECK_FALSE(a.out.empty());
  }
}
