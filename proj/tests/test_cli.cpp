#include <cstdlib>
#include <regex>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace testing_support;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(const TempDir& dir, const std::string& args, const std::string& stdin_text = {}) {
  write_text(dir / "stdin.txt", stdin_text);
  const std::string cmd = std::string("'") + GROUNDGAP_CLI + "' " + args + " < '" + (dir / "stdin.txt").string() +
                          "' > '" + (dir / "stdout.txt").string() + "' 2> '" + (dir / "stderr.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text(dir / "stdout.txt"), read_text(dir / "stderr.txt")};
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, HelpAndUsageErrors) {
  TempDir dir;
  EXPECT_EQ(run_cli(dir, "--help").code, 0);
  EXPECT_NE(run_cli(dir, "prep").code, 0);
  EXPECT_NE(run_cli(dir, "nosuchcommand").code, 0);
}

TEST(Cli, PrepIsDeterministic) {
  TempDir dir;
  const auto corpus = fixture("esconv_fixture.jsonl");
  const auto a = run_cli(dir, "prep --corpus " + q(corpus) + " --out " + q(dir / "a") + " --n 5 --seed 7");
  ASSERT_EQ(a.code, 0) << a.err;
  const auto b = run_cli(dir, "prep --corpus " + q(corpus) + " --out " + q(dir / "b") + " --n 5 --seed 7");
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(read_text(dir / "a" / "corpus.jsonl"), read_text(dir / "b" / "corpus.jsonl"));
  EXPECT_EQ(read_text(dir / "a" / "splits.json"), read_text(dir / "b" / "splits.json"));
  const auto c = run_cli(dir, "prep --corpus " + q(corpus) + " --out " + q(dir / "c") + " --n 5 --seed 8");
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NE(read_text(dir / "a" / "corpus.jsonl"), read_text(dir / "c" / "corpus.jsonl"));
}

TEST(Cli, PrepReportsEligibleCount) {
  TempDir dir;
  const auto r = run_cli(dir, "prep --corpus " + q(fixture("esconv_fixture.jsonl")) + " --out " + q(dir / "o") +
                                  " --n 1000 --seed 1");
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(std::regex_search(r.err, std::regex(R"(^error\[corpus\]: .*only \d+ have)")));
}

TEST(Cli, ErrorsCarryCategory) {
  TempDir dir;
  write_text(dir / "bad.jsonl", "{\"id\": \"x\"}\n");
  const auto r = run_cli(dir, "prep --corpus " + q(dir / "bad.jsonl") + " --out " + q(dir / "o"));
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(r.err.starts_with("error[corpus]: ")) << r.err;

  write_text(dir / "bad.toml", "dataset = \"esconv\"\nbogus = 1\n");
  const auto c = run_cli(dir, "classify --corpus " + q(fixture("esconv_fixture.jsonl")) +
                                  " --who human --config " + q(dir / "bad.toml"));
  EXPECT_EQ(c.code, 1);
  EXPECT_TRUE(c.err.starts_with("error[config]: ")) << c.err;
}

TEST(Cli, PrefStats) {
  TempDir dir;
  write_text(dir / "p.jsonl",
             "{\"id\":1,\"chosen\":[\"a?\"],\"rejected\":[\"b?\"]}\n"
             "{\"id\":2,\"chosen\":[\"c\"],\"rejected\":[\"d?\"]}\n");
  const auto r = run_cli(dir, "prefstats --pairs " + q(dir / "p.jsonl"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("50.00"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("100.00"), std::string::npos) << r.out;
}

TEST(Cli, AnnotateQuitSavesResume) {
  TempDir dir;
  const auto prep = run_cli(dir, "prep --corpus " + q(fixture("esconv_fixture.jsonl")) + " --out " + q(dir / "p") +
                                     " --n 10 --seed 3");
  ASSERT_EQ(prep.code, 0) << prep.err;
  const auto r = run_cli(dir,
                         "annotate --mode acts --annotator ann --corpus " + q(dir / "p") + " --out " +
                             q(dir / "gold.jsonl") + " --resume " + q(dir / "resume.json"),
                         "q\n");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("[1/"), std::string::npos) << r.out;
  EXPECT_TRUE(std::filesystem::exists(dir / "resume.json"));
}
