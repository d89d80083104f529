#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

#include "splitgate/cli.hpp"
#include "support.hpp"

using namespace splitgate;
namespace fx = splitgate::fixtures;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    Outcome o;
    o.code = cli::run(std::move(args), out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

class CliTest : public ::testing::Test {
protected:
    static void SetUpTestSuite()
    {
        dir_ = new fx::TempDir();
        const auto o = run({"synth", "--out-dir", path("corpus"), "--seed", "3", "--volumes-per-class", "5",
                            "--slices-per-volume", "4", "--width", "32", "--height", "32"});
        ASSERT_EQ(o.code, 0) << o.err;
        const auto s = run({"split", "--manifest", path("corpus/manifest.jsonl"), "--strategy", "per-image",
                            "--group-key", "volume", "--test-per-class", "4", "--seed", "1", "--out", path("leaky.json")});
        ASSERT_EQ(s.code, 0) << s.err;
    }
    static void TearDownTestSuite()
    {
        delete dir_;
        dir_ = nullptr;
    }
    static std::string path(const std::string& rel) { return (*dir_ / rel).string(); }
    static std::string manifest() { return path("corpus/manifest.jsonl"); }

    static fx::TempDir* dir_;
};

fx::TempDir* CliTest::dir_ = nullptr;

Json parse_error(const Outcome& o)
{
    const Json j = Json::parse(o.err);
    EXPECT_TRUE(j.contains("code"));
    EXPECT_TRUE(j.contains("message"));
    EXPECT_TRUE(j.contains("context"));
    return j;
}

} // namespace

TEST_F(CliTest, UnknownAndMissingSubcommand)
{
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    const auto none = run({});
    EXPECT_EQ(none.code, 2);
    EXPECT_NE(none.err.find("Usage"), std::string::npos);
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({"split", "--help"}).code, 0);
    EXPECT_EQ(run({"--version"}).out, std::string(cli::tool_version) + "\n");
}

TEST_F(CliTest, DocumentEnvelope)
{
    const auto o = run({"null-test", "--n-test", "20", "--k", "2", "--iters", "30", "--seed", "8"});
    ASSERT_EQ(o.code, 0) << o.err;
    const Json j = Json::parse(o.out);
    EXPECT_EQ(j["tool"]["name"], "splitgate");
    EXPECT_EQ(j["tool"]["version"], cli::tool_version);
    EXPECT_EQ(j["subcommand"], "null-test");
    EXPECT_EQ(j["flags"]["iters"], "30");
    EXPECT_EQ(j["flags"]["keep-samples"], "false");
    EXPECT_TRUE(j["flags"].contains("out"));
    EXPECT_EQ(j["seeds"]["null"], 8);
    EXPECT_EQ(j["result"]["iters"], 30);
}

TEST_F(CliTest, Scan)
{
    fx::touch(*dir_ / "tree/cancer/s1/a.pgm");
    fx::touch(*dir_ / "tree/healthy/s2/b.pgm");
    const auto ok = run({"scan", "--root", path("tree"), "--write-manifest", path("tree.jsonl")});
    ASSERT_EQ(ok.code, 0) << ok.err;
    EXPECT_EQ(Json::parse(ok.out)["result"]["record_count"], 2);
    EXPECT_EQ(read_manifest(path("tree.jsonl")).size(), 2u);

    const auto flat = run({"scan", "--root", path("corpus"), "--layout", "flat", "--pattern", "{class}-{volume}-{slice}",
                           "--write-manifest", path("flat.jsonl"), "--hash"});
    ASSERT_EQ(flat.code, 0) << flat.err;
    EXPECT_EQ(read_manifest(path("flat.jsonl")).records[0].volume, "v000");

    const auto missing = run({"scan", "--root", path("nope"), "--write-manifest", path("x.jsonl")});
    EXPECT_EQ(missing.code, 1);
    EXPECT_EQ(parse_error(missing)["code"], "RootNotFound");
    EXPECT_EQ(run({"scan", "--root", path("tree")}).code, 2);
    EXPECT_EQ(run({"scan", "--root", path("tree"), "--write-manifest", "m", "--layout", "zigzag"}).code, 2);
}

TEST_F(CliTest, AuditOverlap)
{
    const auto ok = run({"audit-overlap", "--manifest", manifest(), "--plan", path("leaky.json"), "--group-key", "volume"});
    ASSERT_EQ(ok.code, 0) << ok.err;
    EXPECT_GT(Json::parse(ok.out)["result"]["fraction"].get<double>(), 0.0);

    const auto fail = run({"audit-overlap", "--manifest", manifest(), "--plan", path("leaky.json"), "--group-key",
                           "volume", "--fail-above", "0.0"});
    EXPECT_EQ(fail.code, 1);
    EXPECT_EQ(parse_error(fail)["code"], "OverlapAboveThreshold");
    EXPECT_FALSE(fail.out.empty()); // the report is still written

    const auto nosplit = run({"audit-overlap", "--manifest", manifest()});
    EXPECT_EQ(nosplit.code, 1);
    EXPECT_EQ(parse_error(nosplit)["code"], "EmptyTest");
    EXPECT_EQ(run({"audit-overlap", "--manifest", manifest(), "--group-key", "patient"}).code, 2);
    EXPECT_EQ(run({"audit-overlap", "--manifest", manifest(), "--fail-above", "abc"}).code, 2);
}

TEST_F(CliTest, AuditDups)
{
    const auto ok = run({"audit-dups", "--manifest", manifest(), "--plan", path("leaky.json"), "--check-flip"});
    ASSERT_EQ(ok.code, 0) << ok.err;
    const Json r = Json::parse(ok.out)["result"];
    EXPECT_EQ(r["compared"], 32 * 8);
    const auto fail = run({"audit-dups", "--manifest", manifest(), "--plan", path("leaky.json"), "--fail-on-dups"});
    EXPECT_EQ(fail.code, r["near_count"].get<int>() + r["exact_count"].get<int>() > 0 ? 1 : 0);
    const auto missing = run({"audit-dups", "--manifest", path("missing.jsonl"), "--test-manifest", manifest()});
    EXPECT_EQ(missing.code, 1);
    EXPECT_EQ(parse_error(missing)["code"], "IoFailure");
    EXPECT_EQ(run({"audit-dups", "--manifest", manifest(), "--threshold", "99"}).code, 2);
}

TEST_F(CliTest, Split)
{
    const auto ok = run({"split", "--manifest", manifest(), "--strategy", "per-group", "--group-key", "subject",
                         "--test-per-class", "4", "--seed", "1", "--out", path("plan.json")});
    ASSERT_EQ(ok.code, 0) << ok.err;
    EXPECT_TRUE(ok.out.empty());
    const Json j = read_json_file(path("plan.json"));
    EXPECT_EQ(j["result"]["audit"]["fraction"].get<double>(), 0.0);
    EXPECT_EQ(j["seeds"]["split"], 1);

    const auto preset = run({"split", "--manifest", manifest(), "--preset", "srinivasan-like", "--seed", "1"});
    EXPECT_EQ(preset.code, 1);
    EXPECT_EQ(parse_error(preset)["code"], "InsufficientImages");
    EXPECT_EQ(run({"split", "--manifest", manifest(), "--test-per-class", "4"}).code, 2);
    EXPECT_EQ(run({"split", "--manifest", manifest(), "--seed", "1", "--strategy", "random"}).code, 2);
}

TEST_F(CliTest, CvPlan)
{
    const auto ok = run({"cv-plan", "--manifest", manifest(), "--k", "5", "--repeats", "2", "--grouped", "--group-key",
                         "volume", "--seed", "4"});
    ASSERT_EQ(ok.code, 0) << ok.err;
    EXPECT_EQ(Json::parse(ok.out)["result"]["plans"].size(), 2u);
    const auto few = run({"cv-plan", "--manifest", manifest(), "--k", "6", "--grouped", "--seed", "4"});
    EXPECT_EQ(few.code, 1);
    EXPECT_EQ(parse_error(few)["code"], "TooFewGroups");
    EXPECT_EQ(run({"cv-plan", "--manifest", manifest(), "--k", "1", "--seed", "4"}).code, 2);
}

TEST_F(CliTest, Evaluate)
{
    write_text_file(path("pred.csv"), "image_id,true_label,pred_label,score_0,score_1\n"
                                      "a,0,0,0.9,0.1\nb,0,1,0.4,0.6\nc,1,1,0.2,0.8\nd,1,1,0.3,0.7\n");
    write_text_file(path("classes.json"), R"(["NORMAL","CNV"])");
    const auto ok = run({"evaluate", "--predictions", path("pred.csv"), "--classes", path("classes.json")});
    ASSERT_EQ(ok.code, 0) << ok.err;
    const Json r = Json::parse(ok.out)["result"];
    EXPECT_EQ(r["per_class"][1]["class"], "CNV");
    EXPECT_NEAR(r["mcc"].get<double>(), 1.0 / std::sqrt(3.0), 1e-12);
    EXPECT_DOUBLE_EQ(r["macro_auc"].get<double>(), 1.0);

    write_text_file(path("bad.csv"), "image_id,true_label,pred_label\na,0\n");
    const auto bad = run({"evaluate", "--predictions", path("bad.csv")});
    EXPECT_EQ(bad.code, 1);
    EXPECT_EQ(parse_error(bad)["code"], "MalformedCsv");
    EXPECT_EQ(run({"evaluate"}).code, 2);
}

TEST_F(CliTest, NullTest)
{
    const auto ok = run({"null-test", "--n-test", "40", "--k", "2", "--iters", "200", "--seed", "1", "--keep-samples",
                         "--out", path("null.json")});
    ASSERT_EQ(ok.code, 0) << ok.err;
    EXPECT_EQ(read_json_file(path("null.json"))["result"]["samples"].size(), 200u);
    const auto bad = run({"null-test", "--n-test", "40", "--k", "1", "--seed", "1"});
    EXPECT_EQ(bad.code, 1);
    EXPECT_EQ(parse_error(bad)["code"], "BadDimensions");
    EXPECT_EQ(run({"null-test", "--n-test", "40", "--k", "2"}).code, 2);
}

TEST_F(CliTest, Probe)
{
    ASSERT_EQ(run({"null-test", "--n-test", "40", "--k", "2", "--iters", "200", "--seed", "1", "--keep-samples", "--out",
                   path("null-probe.json")})
                  .code,
              0);
    const auto ok = run({"probe", "--observed", "0.9", "--null", path("null-probe.json"), "--seed", "2"});
    ASSERT_EQ(ok.code, 0) << ok.err;
    EXPECT_TRUE(Json::parse(ok.out)["result"]["flagged"].get<bool>());

    const auto surrogate = run({"probe", "--manifest", manifest(), "--plan", path("leaky.json"), "--iters", "100",
                                "--knn-k", "3", "--seed", "2", "--fold-mccs", "0.1,0.2,0.3"});
    ASSERT_EQ(surrogate.code, 0) << surrogate.err;
    const Json r = Json::parse(surrogate.out)["result"];
    EXPECT_EQ(r["null"]["n_test"], 8);
    EXPECT_TRUE(r.contains("folds_vs_null"));

    ASSERT_EQ(run({"null-test", "--n-test", "40", "--k", "2", "--iters", "10", "--seed", "1", "--out", path("nos.json")})
                  .code,
              0);
    const auto nosamples = run({"probe", "--observed", "0.1", "--null", path("nos.json"), "--seed", "2"});
    EXPECT_EQ(nosamples.code, 1);
    EXPECT_EQ(parse_error(nosamples)["code"], "InvalidNull");
    EXPECT_EQ(run({"probe", "--observed", "0.1", "--n-test", "10", "--k", "2"}).code, 2);
    EXPECT_EQ(run({"probe", "--seed", "1"}).code, 2);
}

TEST_F(CliTest, Synth)
{
    const auto ok = run({"synth", "--out-dir", path("synth2"), "--seed", "1", "--preset", "kermany-like",
                         "--volumes-per-class", "1", "--slices-per-volume", "2", "--width", "16", "--height", "16"});
    ASSERT_EQ(ok.code, 0) << ok.err;
    EXPECT_EQ(Json::parse(ok.out)["result"]["record_count"], 8);
    fx::touch(*dir_ / "plainfile");
    const auto bad = run({"synth", "--out-dir", path("plainfile"), "--seed", "1"});
    EXPECT_EQ(bad.code, 1);
    EXPECT_EQ(parse_error(bad)["code"], "IoFailure");
    EXPECT_EQ(run({"synth", "--out-dir", path("x"), "--seed", "1", "--preset", "bogus"}).code, 2);
    EXPECT_EQ(run({"synth", "--out-dir", path("x")}).code, 2);
}

TEST_F(CliTest, ExperimentAndReport)
{
    const auto ok = run({"experiment", "--seed", "2", "--repeats", "1", "--cv-k", "3", "--knn-k", "3",
                         "--volumes-per-class", "3", "--slices-per-volume", "6", "--width", "32", "--height", "32",
                         "--predictions-dir", path("preds"), "--out", path("exp.json")});
    ASSERT_EQ(ok.code, 0) << ok.err;
    EXPECT_TRUE(std::filesystem::exists(*dir_ / "preds/per_group_r0_f2.csv"));
    const auto ev = run({"evaluate", "--predictions", path("preds/per_image_r0_f0.csv")});
    ASSERT_EQ(ev.code, 0) << ev.err;
    const Json exp = read_json_file(path("exp.json"));
    EXPECT_DOUBLE_EQ(Json::parse(ev.out)["result"]["mcc"].get<double>(),
                     exp["result"]["folds_per_image"][0]["mcc"].get<double>());

    const auto rep = run({"report", path("exp.json")});
    ASSERT_EQ(rep.code, 0) << rep.err;
    EXPECT_NE(rep.out.find("per-image"), std::string::npos);
    EXPECT_NE(rep.out.find("per-volume/subject"), std::string::npos);
    EXPECT_NE(rep.out.find("mean_gap"), std::string::npos);
    EXPECT_NE(rep.out.find("+/-"), std::string::npos);

    const auto few = run({"experiment", "--seed", "2", "--volumes-per-class", "1"});
    EXPECT_EQ(few.code, 1);
    EXPECT_EQ(parse_error(few)["code"], "TooFewGroups");
    EXPECT_EQ(run({"experiment", "--repeats", "1"}).code, 2);

    write_text_file(path("random.json"), R"({"hello": 1})");
    const auto unknown = run({"report", path("random.json")});
    EXPECT_EQ(unknown.code, 1);
    EXPECT_EQ(parse_error(unknown)["code"], "UnknownDocument");
    EXPECT_EQ(run({"report"}).code, 2);
}

TEST_F(CliTest, ReportRendersEveryDocumentKind)
{
    const std::vector<std::vector<std::string>> commands{
        {"split", "--manifest", manifest(), "--test-per-class", "4", "--seed", "1"},
        {"audit-overlap", "--manifest", manifest(), "--plan", path("leaky.json"), "--group-key", "volume"},
        {"audit-dups", "--manifest", manifest(), "--plan", path("leaky.json")},
        {"cv-plan", "--manifest", manifest(), "--k", "2", "--repeats", "1", "--seed", "1"},
        {"null-test", "--n-test", "10", "--k", "2", "--iters", "20", "--seed", "1"},
        {"probe", "--observed", "0.1", "--n-test", "10", "--k", "2", "--iters", "20", "--seed", "1"},
    };
    for (const auto& cmd : commands) {
        const auto o = run(cmd);
        ASSERT_EQ(o.code, 0) << cmd[0] << ": " << o.err;
        write_text_file(path("doc.json"), o.out);
        const auto r = run({"report", path("doc.json")});
        EXPECT_EQ(r.code, 0) << cmd[0] << ": " << r.err;
        EXPECT_NE(r.out.find(cmd[0]), std::string::npos);
    }
}

TEST(CliBinary, ExitCodesFromProcess)
{
    auto status = [](const std::string& args) {
        const std::string cmd = std::string(SPLITGATE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
        const int raw = std::system(cmd.c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    EXPECT_EQ(status("frobnicate"), 2);
    EXPECT_EQ(status("null-test --n-test 10 --k 2 --iters 5 --seed 1"), 0);
    EXPECT_EQ(status("null-test --n-test 10 --k 1 --iters 5 --seed 1"), 1);
}
