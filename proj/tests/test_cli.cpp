#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "repsel/repsel.hpp"
#include "temp_dir.hpp"

using namespace repsel;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(const TempDir& tmp, const std::string& args) {
  const auto out = tmp.file("stdout.txt"), err = tmp.file("stderr.txt");
  const std::string cmd = std::string(REPSEL_CLI) + " " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = detail::read_file(out);
  r.err = detail::read_file(err);
  return r;
}

const char* kTenRecords =
    "id,label,split,v0,v1,v2\n"
    "1,cat,train,1,0,0\n"
    "2,cat,train,0.9,0.1,0\n"
    "3,cat,test,0.8,0.2,0\n"
    "4,dog,train,0,1,0\n"
    "5,dog,train,0.1,0.9,0\n"
    "6,dog,test,0.2,0.8,0.1\n"
    "7,eel,train,0,0,1\n"
    "8,eel,train,0,0.1,0.9\n"
    "9,eel,train,0.1,0,0.9\n"
    "10,eel,test,0,0.2,0.8\n";

std::string synth(const TempDir& tmp, const std::string& name, const std::string& shape) {
  const auto path = tmp.file(name);
  const auto r = run(tmp, "synth " + shape + " --seed 4 --out " + path);
  EXPECT_EQ(r.code, 0) << r.err;
  return path;
}

}  // namespace

TEST(Cli, IngestPrintsSummary) {
  TempDir tmp;
  detail::write_file(tmp.file("in.csv"), kTenRecords);
  const auto r = run(tmp, "ingest --in " + tmp.file("in.csv") + " --out " + tmp.file("out.emb"));
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "10 records, 3 classes\n");
  EXPECT_EQ(load_embeddings(tmp.file("out.emb")).size(), 10u);
}

TEST(Cli, RaggedRowExitsTwoWithLine) {
  TempDir tmp;
  detail::write_file(tmp.file("in.csv"), "id,label,split,v0,v1\n1,a,train,1,0\n2,a,train,1\n");
  const auto r = run(tmp, "ingest --in " + tmp.file("in.csv") + " --out " + tmp.file("out.emb"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("offset 3"), std::string::npos) << r.err;
  EXPECT_FALSE(std::filesystem::exists(tmp.file("out.emb")));
}

TEST(Cli, IngestExportRoundTrip) {
  TempDir tmp;
  detail::write_file(tmp.file("in.csv"), kTenRecords);
  ASSERT_EQ(run(tmp, "ingest --in " + tmp.file("in.csv") + " --out " + tmp.file("a.emb")).code, 0);
  ASSERT_EQ(run(tmp, "export --in " + tmp.file("a.emb") + " --out " + tmp.file("b.csv")).code, 0);
  ASSERT_EQ(run(tmp, "ingest --in " + tmp.file("b.csv") + " --out " + tmp.file("b.emb")).code, 0);
  EXPECT_EQ(detail::read_file(tmp.file("a.emb")), detail::read_file(tmp.file("b.emb")));
  EXPECT_EQ(parse_embeddings_csv(detail::read_file(tmp.file("b.csv"))),
            parse_embeddings_csv(kTenRecords));
}

TEST(Cli, ScoreWritesOneRowPerRecord) {
  TempDir tmp;
  const auto data = synth(tmp, "d.emb", "--classes 4 --views 2 --points 10 --dim 8");
  const auto r = run(tmp, "score --in " + data + " --out " + tmp.file("s.csv") + " --neighbors 5");
  EXPECT_EQ(r.code, 0) << r.err;
  const auto text = detail::read_file(tmp.file("s.csv"));
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 81);
  EXPECT_EQ(load_scores_csv(tmp.file("s.csv"), 5).size(), 80u);
}

TEST(Cli, SelectWritesSubsetAndProvenance) {
  TempDir tmp;
  const auto data = synth(tmp, "d.emb", "--classes 5 --views 3 --points 12 --dim 16 --noise 0.1");
  const auto before = detail::read_file(data);
  const auto r = run(tmp, "select --in " + data + " --out " + tmp.file("sub.emb") +
                              " --method cs-density --threshold 0.4 --neighbors 10 --min-cluster 3");
  EXPECT_EQ(r.code, 0) << r.err;
  const auto subset = load_embeddings(tmp.file("sub.emb"));
  EXPECT_GT(subset.size(), 0u);
  EXPECT_LT(subset.size(), 180u);
  const auto prov = Json::parse(detail::read_file(tmp.file("sub.emb.json")));
  EXPECT_EQ(prov.at("method"), "cs-density");
  EXPECT_EQ(detail::read_file(data), before);
}

TEST(Cli, MissingSeedNamesTheFlag) {
  TempDir tmp;
  const auto data = synth(tmp, "d.emb", "--classes 3 --views 2 --points 10 --dim 8");
  const auto r = run(tmp, "select --in " + data + " --out " + tmp.file("sub.emb") + " --method kmeans");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--seed"), std::string::npos) << r.err;
}

TEST(Cli, UsageAndRuntimeErrors) {
  TempDir tmp;
  EXPECT_EQ(run(tmp, "select --in " + tmp.file("missing.emb") + " --out " + tmp.file("x") + " --method uniform --seed 1")
                .code,
            1);
  EXPECT_EQ(run(tmp, "frobnicate").code, 2);
  const auto data = synth(tmp, "d.emb", "--classes 3 --views 2 --points 10 --dim 8");
  const auto r = run(tmp, "select --in " + data + " --out " + tmp.file("x") + " --method wizardry --seed 1");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--method"), std::string::npos) << r.err;
  EXPECT_EQ(run(tmp, "--help").code, 0);
}

TEST(Cli, RerunsAreByteIdentical) {
  TempDir tmp;
  const auto data = synth(tmp, "d.emb", "--classes 4 --views 3 --points 10 --dim 8 --noise 0.1");
  EXPECT_EQ(detail::read_file(data), detail::read_file(synth(tmp, "d2.emb", "--classes 4 --views 3 --points 10 --dim 8 --noise 0.1")));
  for (const std::string method : {"kmeans", "cs-density-medoid", "kcenter", "ue-high"}) {
    for (const std::string jobs : {"1", "3"}) {
      const auto out = tmp.file(method + jobs + ".emb");
      const auto r = run(tmp, "select --in " + data + " --out " + out + " --method " + method +
                                  " --seed 11 --fraction 0.3 --jobs " + jobs);
      ASSERT_EQ(r.code, 0) << r.err;
    }
    EXPECT_EQ(detail::read_file(tmp.file(method + "1.emb")), detail::read_file(tmp.file(method + "3.emb"))) << method;
    EXPECT_EQ(detail::read_file(tmp.file(method + "1.emb.json")), detail::read_file(tmp.file(method + "3.emb.json")));
  }
}

TEST(Cli, SweepWritesOneRowPerCell) {
  TempDir tmp;
  const auto data = synth(tmp, "bench.emb", "--classes 50 --views 5 --points 40 --dim 64 --noise 0.2");
  const auto before = detail::read_file(data);
  detail::write_file(tmp.file("grid.cfg"), "input = " + data +
                                               "\ntest_fraction = 0.2\nsplit_seed = 0\n"
                                               "methods = [uniform, kcenter]\nfractions = [0.1, 0.3]\nseeds = [0, 1]\n");
  const auto r = run(tmp, "sweep --config " + tmp.file("grid.cfg") + " --out " + tmp.file("res") + " --jobs 4");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = detail::read_file(tmp.file("res/sweep.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2 * 2);
  const auto json = Json::parse(detail::read_file(tmp.file("res/sweep.json")));
  EXPECT_EQ(json.at("cells").size(), 8u);
  EXPECT_EQ(json.at("summary").size(), 4u);
  EXPECT_NE(r.out.find("best kcenter"), std::string::npos);
  EXPECT_EQ(detail::read_file(data), before);
}

TEST(Cli, EvalReportsDigests) {
  TempDir tmp;
  const auto data = synth(tmp, "d.emb", "--classes 4 --views 2 --points 10 --dim 8");
  ASSERT_EQ(run(tmp, "split --in " + data + " --test-fraction 0.25 --seed 2 --out-train " + tmp.file("tr.emb") +
                         " --out-test " + tmp.file("te.emb"))
                .code,
            0);
  const auto r = run(tmp, "eval --in " + tmp.file("tr.emb") + " --test " + tmp.file("te.emb") + " --out " +
                              tmp.file("r.json") + " --ks 1,3");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = Json::parse(detail::read_file(tmp.file("r.json")));
  EXPECT_TRUE(j.at("metrics").contains("top3"));
  EXPECT_EQ(j.at("config").at("test_digest"), hex64(digest(load_embeddings(tmp.file("te.emb")))));
}
