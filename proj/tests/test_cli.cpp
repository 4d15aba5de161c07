#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(DPGNN_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / ("dpgnn_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    std::ofstream cfg(root_ / "small.cfg");
    cfg << "# small run\n"
        << "synth.n = 60\nsynth.m = 50\nsynth.d_o = 8\nsynth.apply_rate = 0.2\nsynth.reachout_rate = 0.15\n"
        << "synth.days = 30\nt_valid = 20\nt_test = 25\n"
        << "d_e = 8\nd_t = 4\nbatch_size = 64\nmax_epochs = 3\nlr = 0.01\neval_negatives = 10\n"
        << "data_dir = " << (root_ / "data").string() << "\n"
        << "out_dir = " << (root_ / "run").string() << "\n";
    cfg.close();
    ASSERT_EQ(run("synth -c " + config()).code, 0);
    ASSERT_EQ(run("train -c " + config()).code, 0);
  }

  static void TearDownTestSuite() { fs::remove_all(root_); }

  static std::string config() { return (root_ / "small.cfg").string(); }
  static fs::path root_;
};

fs::path Cli::root_;

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run("--help").code, 0);
  auto r = run("train --help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("--lambda"), std::string::npos);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("train --no-such-flag").code, 2);
  EXPECT_EQ(run("train -c /nonexistent.cfg").code, 2);
}

TEST_F(Cli, SynthIsDeterministicAndWritesManifest) {
  const auto data = root_ / "data";
  for (const char* f : {"events.tsv", "candidates.emb", "jobs.emb", "manifest.txt"}) {
    EXPECT_TRUE(fs::exists(data / f)) << f;
  }
  const auto before = slurp(data / "events.tsv") + slurp(data / "candidates.emb") + slurp(data / "jobs.emb");
  ASSERT_EQ(run("synth -c " + config()).code, 0);
  const auto after = slurp(data / "events.tsv") + slurp(data / "candidates.emb") + slurp(data / "jobs.emb");
  EXPECT_EQ(before, after);
  const auto manifest = slurp(data / "manifest.txt");
  EXPECT_NE(manifest.find("synth.n = 60"), std::string::npos);
  EXPECT_NE(manifest.find("synth.asymmetry = 0.5"), std::string::npos);
  EXPECT_NE(manifest.find("config_hash="), std::string::npos);
  EXPECT_NE(slurp(data / "events.tsv").find("# dpgnn "), std::string::npos);
}

TEST_F(Cli, SynthRejectsEmptySide) {
  auto r = run("synth -c " + config() + " --set synth.n=0 --data-dir " + (root_ / "bad").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("n and m must be > 0"), std::string::npos);
}

TEST_F(Cli, TrainOutputs) {
  const auto run_dir = root_ / "run";
  EXPECT_TRUE(fs::exists(run_dir / "model.ckpt"));
  EXPECT_TRUE(fs::exists(run_dir / "manifest.txt"));
  const auto hist = slurp(run_dir / "history.tsv");
  EXPECT_EQ(hist.rfind("# dpgnn ", 0), 0u);
  EXPECT_NE(hist.find("epoch\tloss_main\tloss_ssl\tval_mrr_cand\tval_mrr_job\n"), std::string::npos);
}

TEST_F(Cli, ManifestReproducesTraining) {
  const auto other = root_ / "rerun";
  ASSERT_EQ(run("train -c " + (root_ / "run" / "manifest.txt").string() + " --out-dir " + other.string()).code, 0);
  auto strip = [](std::string s) { return s.substr(s.find('\n') + 1); };  // provenance hashes out_dir
  EXPECT_EQ(strip(slurp(other / "history.tsv")), strip(slurp(root_ / "run" / "history.tsv")));
  EXPECT_EQ(slurp(other / "model.ckpt"), slurp(root_ / "run" / "model.ckpt"));
}

TEST_F(Cli, MissingEmbeddingFileNamesThePath) {
  const auto missing = (root_ / "nowhere.emb").string();
  auto r = run("train -c " + config() + " --set candidate_docs=" + missing + " --out-dir " + (root_ / "x").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find(missing), std::string::npos);
}

TEST_F(Cli, EvalIsDeterministicAndReportsK) {
  const auto a = root_ / "eval_a.tsv", b = root_ / "eval_b.tsv";
  ASSERT_EQ(run("eval -c " + config() + " -o " + a.string()).code, 0);
  ASSERT_EQ(run("eval -c " + config() + " -o " + b.string()).code, 0);
  const auto text = slurp(a);
  EXPECT_EQ(text, slurp(b));
  EXPECT_NE(text.find("k=5"), std::string::npos);
  EXPECT_NE(text.find("candidate\trecall@5\t"), std::string::npos);
  ASSERT_EQ(run("eval -c " + config() + " --k 3 -o " + b.string()).code, 0);
  EXPECT_NE(slurp(b).find("recall@3"), std::string::npos);
}

TEST_F(Cli, EvalSparsityGroupsEmitsFivePerSide) {
  const auto out = root_ / "groups.tsv";
  auto r = run("eval -c " + config() + " --sparsity-groups --eval-split valid -o " + out.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const auto text = slurp(out);
  for (const char* side : {"candidate", "job"}) {
    for (int g = 1; g <= 5; ++g) {
      EXPECT_NE(text.find(std::string(side) + "\tG" + std::to_string(g) + "\tmrr\t"), std::string::npos);
    }
    EXPECT_EQ(text.find(std::string(side) + "\tG6"), std::string::npos);
  }
}

TEST_F(Cli, SinglePerspectiveCheckpoint) {
  const auto dir = root_ / "nodpg";
  ASSERT_EQ(run("train -c " + config() + " --variant no-dpg --out-dir " + dir.string()).code, 0);
  const auto ckpt = (dir / "model.ckpt").string();
  auto mismatch = run("eval -c " + config() + " --checkpoint " + ckpt);
  EXPECT_EQ(mismatch.code, 2);
  EXPECT_NE(mismatch.output.find("dimension mismatch"), std::string::npos);
  auto r = run("score-pair -c " + config() + " --checkpoint " + ckpt + " --candidate 1 --job 2");
  ASSERT_EQ(r.code, 0) << r.output;
  double rv = 0, sv = 0, yv = 0;
  ASSERT_EQ(std::sscanf(r.output.substr(r.output.find("\nr ")).c_str(), "\nr %lf\ns %lf\ny %lf", &rv, &sv, &yv), 3);
  EXPECT_EQ(rv, sv);
}

TEST_F(Cli, ScorePair) {
  auto r = run("score-pair -c " + config() + " --candidate 3 --job 4");
  ASSERT_EQ(r.code, 0) << r.output;
  double rv = 0, sv = 0, yv = 0;
  ASSERT_EQ(std::sscanf(r.output.substr(r.output.find("\nr ")).c_str(), "\nr %lf\ns %lf\ny %lf", &rv, &sv, &yv), 3);
  EXPECT_NEAR(yv, 0.5 * (rv + sv), 1.5e-6);
  EXPECT_EQ(run("score-pair -c " + config() + " --candidate 60 --job 0").code, 2);
  EXPECT_EQ(run("score-pair -c " + config() + " --candidate 0 --job 999").code, 2);
}

TEST_F(Cli, SweepLayers) {
  const auto dir = root_ / "sweep";
  auto r = run("sweep -c " + config() + " --axis layers --grid 0,1,2,2,3,4 --max-epochs 1 --out-dir " + dir.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("duplicate sweep value 2"), std::string::npos);
  std::istringstream in(slurp(dir / "sweep_layers.tsv"));
  std::string line;
  int rows = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      EXPECT_EQ(line.rfind("layers\t", 0), 0u);
      continue;
    }
    ++rows;
  }
  EXPECT_EQ(rows, 5);
  EXPECT_EQ(run("sweep -c " + config() + " --axis depth").code, 2);
  EXPECT_EQ(run("sweep -c " + config() + " --axis tau --grid ,").code, 2);
}

TEST_F(Cli, InspectGraph) {
  const auto dump = root_ / "edges.tsv";
  auto r = run("inspect-graph -c " + config() + " --dump-edges " + dump.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("nodes\t220"), std::string::npos);
  EXPECT_NE(r.output.find("edges.match\t"), std::string::npos);
  EXPECT_NE(slurp(dump).find("src\tdst\tclass\tcoeff\n"), std::string::npos);
  auto single = run("inspect-graph -c " + config() + " --variant no-dpg");
  EXPECT_NE(single.output.find("nodes\t110"), std::string::npos);
}

TEST_F(Cli, SplitWritesThreeFiles) {
  const auto dir = root_ / "split";
  auto r = run("split -c " + config() + " --out-dir " + dir.string());
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"train.tsv", "valid.tsv", "test.tsv"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
}

}  // namespace
