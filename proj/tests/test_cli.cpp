#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "selfens");
  std::ostringstream out, err;
  const int code = selfens::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "selfens_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_dataset(const fs::path& dir, std::size_t n, std::size_t k) {
  const auto path = dir / "data.jsonl";
  std::ofstream out(path);
  for (std::size_t q = 0; q < n; ++q) {
    out << R"({"id":"q)" << q << R"(","question":"What is item )" << q << R"(?","choices":[)";
    for (std::size_t i = 0; i < k; ++i) out << (i ? "," : "") << "\"option " << i << "\"";
    out << R"(],"answer_index":)" << (q % k) << "}\n";
  }
  return path;
}

std::string read_line(const fs::path& p, std::size_t index) {
  std::ifstream in(p);
  std::string line;
  for (std::size_t i = 0; i <= index; ++i) std::getline(in, line);
  return line;
}

const std::vector<std::string> kSmallModel{"--model-seed", "1", "--layers", "1", "--embed-dim", "16",
                                           "--heads", "2", "--ffn-dim", "32"};

std::vector<std::string> with_model(std::vector<std::string> args) {
  args.insert(args.end(), kSmallModel.begin(), kSmallModel.end());
  return args;
}

}  // namespace

TEST(Cli, HelpListsSubcommandsAndFlags) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* s : {"init-model", "eval", "ablate-choices", "verify-equivalence"})
    EXPECT_NE(r.out.find(s), std::string::npos) << s;
  const auto e = run({"eval", "--help"});
  EXPECT_EQ(e.code, 0);
  for (const char* f : {"--model", "--data", "--method", "--m", "--trials", "--seed", "--prob-mode",
                        "--out", "--workers"})
    EXPECT_NE(e.out.find(f), std::string::npos) << f;
  EXPECT_NE(run({"verify-equivalence", "--help"}).out.find("--tolerance"), std::string::npos);
}

TEST(Cli, UnknownFlagAndMissingSubcommand) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"eval", "--bogus"}).code, 1);
}

TEST(Cli, InitModelWritesValidFileDeterministically) {
  const auto dir = scratch("init");
  const auto a = run({"init-model", "--seed", "0", "--out", (dir / "a.sew").string()});
  const auto b = run({"init-model", "--seed", "0", "--out", (dir / "b.sew").string()});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  const auto checksum = [](const std::string& out) { return out.substr(out.find("checksum")); };
  EXPECT_EQ(checksum(a.out), checksum(b.out));
  std::ifstream in(dir / "a.sew", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  EXPECT_EQ(std::string(magic, 4), "SEW1");
}

TEST(Cli, CorruptModelIsDataError) {
  const auto dir = scratch("corrupt");
  ASSERT_EQ(run({"init-model", "--out", (dir / "m.sew").string(), "--layers", "1"}).code, 0);
  {
    std::fstream f(dir / "m.sew", std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  const auto data = write_dataset(dir, 2, 4);
  const auto r = run({"eval", "--model", (dir / "m.sew").string(), "--data", data.string(),
                      "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("m.sew"), std::string::npos);
}

TEST(Cli, EvalSelfEnsembleRecordsConfig) {
  const auto dir = scratch("eval_se");
  const auto data = write_dataset(dir, 3, 8);
  const auto r = run(with_model({"eval", "--data", data.string(), "--method", "self-ensemble",
                                 "--m", "4", "--trials", "20", "--out", (dir / "out").string()}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_line(dir / "out" / "summary.csv", 1).substr(0, 36),
            "self-ensemble,4,20,0,full-vocab,0.33");
}

TEST(Cli, EvalDefaultsFollowChoiceCount) {
  const auto dir = scratch("eval_defaults");
  const auto data = write_dataset(dir, 2, 6);
  const auto r = run(with_model({"eval", "--data", data.string(), "--out", (dir / "out").string(),
                                 "--prob-mode", "group-renorm"}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_line(dir / "out" / "summary.csv", 1).substr(0, 33),
            "self-ensemble,3,6,0,group-renorm,");
}

TEST(Cli, EvalStandardRecordsKAndOne) {
  const auto dir = scratch("eval_std");
  const auto data = write_dataset(dir, 2, 8);
  const auto r = run(with_model({"eval", "--data", data.string(), "--method", "standard", "--out",
                                 (dir / "out").string(), "--workers", "2"}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_line(dir / "out" / "summary.csv", 1).substr(0, 16), "standard,8,1,0,f");
  EXPECT_EQ(run(with_model({"eval", "--data", data.string(), "--method", "standard", "--m", "2",
                            "--out", (dir / "o2").string()}))
                .code,
            1);
}

TEST(Cli, UsageErrors) {
  const auto dir = scratch("usage");
  const auto data = write_dataset(dir, 2, 4);
  const auto out = (dir / "out").string();
  EXPECT_EQ(run(with_model({"eval", "--data", data.string(), "--m", "0", "--out", out})).code, 1);
  EXPECT_EQ(run(with_model({"eval", "--data", data.string(), "--trials", "0", "--out", out})).code, 1);
  EXPECT_EQ(run({"eval", "--data", data.string(), "--out", out}).code, 1);  // no model
  EXPECT_EQ(run(with_model({"eval", "--data", data.string(), "--method", "vote", "--out", out})).code, 1);
  EXPECT_EQ(run(with_model({"eval", "--data", data.string(), "--out", out, "--heads", "3"})).code, 1);
  EXPECT_EQ(run(with_model({"eval", "--data", data.string(), "--out", out, "--template", "{q}"})).code, 1);
}

TEST(Cli, SchemaErrorIsDataError) {
  const auto dir = scratch("schema");
  std::ofstream(dir / "bad.jsonl") << R"({"id":"a","question":"Q","choices":["x","y"],"answer_index":2})"
                                   << '\n';
  const auto r = run(with_model({"eval", "--data", (dir / "bad.jsonl").string(), "--out",
                                 (dir / "out").string()}));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.jsonl:1"), std::string::npos);
}

TEST(Cli, AblateChoicesWritesTable) {
  const auto dir = scratch("ablate");
  const auto data = write_dataset(dir, 3, 8);
  const auto r = run(with_model({"ablate-choices", "--data", data.string(), "--counts", "2,4,6,8",
                                 "--out", (dir / "out").string()}));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_line(dir / "out" / "ablation.csv", 0), "choices,method,m,trials,accuracy");
  EXPECT_EQ(read_line(dir / "out" / "ablation.csv", 4).substr(0, 21), "8,self-ensemble,4,20,");
  EXPECT_TRUE(fs::exists(dir / "out" / "choices_2" / "summary.csv"));
  EXPECT_EQ(run(with_model({"ablate-choices", "--data", data.string(), "--counts", "1,4", "--out",
                            (dir / "o").string()}))
                .code,
            1);
  EXPECT_EQ(run(with_model({"ablate-choices", "--data", data.string(), "--counts", "4,10", "--out",
                            (dir / "o").string()}))
                .code,
            2);
}

TEST(Cli, VerifyEquivalenceExitCodes) {
  const std::vector<std::string> base{"verify-equivalence", "--samples", "6", "--tolerance", "1e-5"};
  const auto ok = run(with_model(base));
  EXPECT_EQ(ok.code, 0) << ok.out << ok.err;
  EXPECT_NE(ok.out.find("equivalence verified"), std::string::npos);

  auto no_mask = with_model(base);
  no_mask.push_back("--disable-mask");
  const auto r1 = run(no_mask);
  EXPECT_EQ(r1.code, 3);
  EXPECT_NE(r1.err.find("attention mask disabled"), std::string::npos);

  auto no_pos = with_model(base);
  no_pos.push_back("--disable-reencoding");
  EXPECT_EQ(run(no_pos).code, 3);
}
