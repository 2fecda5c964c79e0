#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cdckws/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(CDCKWS_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("cdckws_cli_test_" + std::to_string(getpid()));
    fs::remove_all(dir_);
    const auto corpus = dir_ / "corpus";
    ASSERT_EQ(run("--quiet --seed 3 synth --out " + corpus.string() + " --num-pos 14 --num-neg 4 --neg-hours 0.02").code, 0);
  }

  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string decode_args(const fs::path& out, const std::string& keyword = "HEY SNIPS") {
    const auto c = dir_ / "corpus";
    return "--quiet decode --manifest " + (c / "manifest.jsonl").string() + " --lexicon " + (c / "lexicon.txt").string() +
           " --phones " + (c / "phones.txt").string() + " --keyword \"" + keyword + "\" --out " + out.string();
  }

  static inline fs::path dir_;
};

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("synth").code, 1);
  EXPECT_EQ(run("eval --manifest /nonexistent.jsonl --scores-dir /tmp").code, 1);
  EXPECT_EQ(run("--threads 0 synth --out /tmp/x").code, 1);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(CliPipeline, FullPipelineProducesTheTableLayout) {
  const auto scores = dir_ / "scores";
  ASSERT_EQ(run(decode_args(scores)).code, 0);
  ASSERT_EQ(run("--quiet refine --init-dir " + scores.string() + " --inter-dir " + scores.string() + " --out " +
                (dir_ / "refined").string())
                .code,
            0);
  const auto report = run("--quiet eval --manifest " + (dir_ / "corpus/manifest.jsonl").string() + " --scores-dir " +
                          (dir_ / "refined").string() + " --far 0.05");
  ASSERT_EQ(report.code, 0);
  EXPECT_NE(report.out.find("SNR         -5      0      5     10     15     20   +inf   Avg."), std::string::npos)
      << report.out;

  const auto json = run("--quiet eval --report json --manifest " + (dir_ / "corpus/manifest.jsonl").string() +
                        " --scores-dir " + (dir_ / "refined").string());
  ASSERT_EQ(json.code, 0);
  EXPECT_EQ(json.out.front(), '{');

  const auto csv = run("--quiet sweep --manifest " + (dir_ / "corpus/manifest.jsonl").string() + " --scores-dir " +
                       (dir_ / "refined").string() + " --grid 0,0.5,1");
  ASSERT_EQ(csv.code, 0);
  EXPECT_EQ(csv.out.substr(0, csv.out.find('\n')), "threshold,far_per_hour,macro_recall");
  EXPECT_EQ(std::count(csv.out.begin(), csv.out.end(), '\n'), 4);
}

TEST_F(CliPipeline, OneFrameTimeoutScoresNothing) {
  const auto scores = dir_ / "scores_short";
  ASSERT_EQ(run(decode_args(scores) + " --timeout-s 0.03").code, 0);
  std::size_t files = 0;
  for (const auto& entry : fs::directory_iterator(scores)) {
    ++files;
    for (double s : cdckws::io::load_scores(entry.path())) ASSERT_EQ(s, 0.0) << entry.path();
  }
  EXPECT_EQ(files, 2u * 18u);
}

TEST_F(CliPipeline, DataErrorsExitTwo) {
  EXPECT_EQ(run(decode_args(dir_ / "unused", "HEY ALEXA")).code, 2);

  const auto broken = dir_ / "broken";
  fs::create_directories(broken);
  std::ofstream(broken / "pos_00000.init.scores") << "not a score file";
  EXPECT_EQ(run("--quiet eval --manifest " + (dir_ / "corpus/manifest.jsonl").string() + " --scores-dir " +
                broken.string() + " --stream init")
                .code,
            2);
}

TEST_F(CliPipeline, BadConfigValuesExitOne) {
  EXPECT_EQ(run(decode_args(dir_ / "unused") + " --timeout-s 0.001").code, 1);
  EXPECT_EQ(run(decode_args(dir_ / "unused") + " --tie-break sideways").code, 1);
  EXPECT_EQ(run("--quiet refine --init-dir " + dir_.string() + " --inter-dir " + dir_.string() +
                " --l-his 0 --l-fut 1 --out " + (dir_ / "r").string())
                .code,
            1);
}
