#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sdsrl/cli.hpp"
#include "sdsrl/dataio.hpp"
#include "sdsrl/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace sdsrl;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
    static const fs::path dir = [] {
        fs::path d = "sdsrl_tmp_cli";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("sdsrl");
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

struct CaptureStdout {
    std::ostringstream captured;
    std::streambuf* saved;
    CaptureStdout() : saved(std::cout.rdbuf(captured.rdbuf())) {}
    ~CaptureStdout() { std::cout.rdbuf(saved); }
};

const std::string kCorpus = (tmp_dir() / "corp").string();
const std::string kDb = (tmp_dir() / "db").string();
const std::string kQueries = (tmp_dir() / "queries").string();
const std::string kModel = (tmp_dir() / "model.sdsrl").string();

}  // namespace

TEST_CASE("synth writes a loadable corpus") {
    REQUIRE(run_cli({"synth", "--classes", "5", "--per-class", "20", "--dim-img", "16", "--dim-txt",
                     "12", "--noise", "0.05", "--seed", "7", "--out", kCorpus}) == 0);
    for (const char* name : {"image_features.sdsm", "text_features.sdsm", "image_labels.csv",
                             "text_labels.csv", "corpus.manifest", "image_ids.txt", "text_ids.txt"})
        CHECK(fs::exists(fs::path(kCorpus) / name));
    const Corpus c = load_corpus(kCorpus);
    CHECK(c.image_features.rows() == 100);
    CHECK(c.text_features.cols() == 12);
}

TEST_CASE("split produces disjoint database and query corpora") {
    REQUIRE(run_cli({"split", "--corpus", kCorpus, "--fraction", "0.75", "--seed", "3", "--out-db",
                     kDb, "--out-queries", kQueries}) == 0);
    const Corpus db = load_corpus(kDb);
    const Corpus queries = load_corpus(kQueries);
    CHECK(db.image_features.rows() == 75);
    CHECK(queries.image_features.rows() == 25);
    for (const auto& id : queries.image_ids)
        CHECK(std::find(db.image_ids.begin(), db.image_ids.end(), id) == db.image_ids.end());
}

TEST_CASE("train writes a model and a loss trace") {
    REQUIRE(run_cli({"train", "--corpus", kDb, "--landmarks", "50", "--sigma", "1", "--mu", "0.01",
                     "--q", "5", "--outer", "50", "--inner", "10", "--tol", "1e-4", "--seed", "7",
                     "--model", kModel}) == 0);
    CHECK(fs::exists(kModel));
    const SdsrlModel model = load_model(kModel);
    CHECK(model.q == 5);

    const std::string trace = slurp(kModel + ".trace.csv");
    CHECK(trace.rfind("outer_loop,loss\n", 0) == 0);
    CHECK(count_lines(trace) == 52);  // header + init + 50 loops
}

TEST_CASE("train runs are byte-identical for identical flags") {
    const std::string m2 = (tmp_dir() / "model2.sdsrl").string();
    REQUIRE(run_cli({"train", "--corpus", kDb, "--landmarks", "50", "--sigma", "1", "--mu", "0.01",
                     "--q", "5", "--outer", "50", "--inner", "10", "--tol", "1e-4", "--seed", "7",
                     "--model", m2}) == 0);
    CHECK(slurp(kModel) == slurp(m2));
    CHECK(slurp(kModel + ".trace.csv") == slurp(m2 + ".trace.csv"));
}

TEST_CASE("train can dump the link matrices") {
    const std::string prefix = (tmp_dir() / "links_").string();
    REQUIRE(run_cli({"train", "--corpus", kDb, "--landmarks", "20", "--q", "3", "--outer", "5",
                     "--model", (tmp_dir() / "model_links.sdsrl").string(), "--dump-links",
                     prefix}) == 0);
    const Matrix intra = load_matrix(prefix + "intra_image.sdsm", MatrixFormat::binary);
    CHECK(intra.rows() == intra.cols());
    CHECK(fs::exists(prefix + "intra_text.sdsm"));
    CHECK(fs::exists(prefix + "cross.sdsm"));
}

TEST_CASE("eval writes report and PR files for all tasks") {
    const std::string report = (tmp_dir() / "rep.csv").string();
    const std::string pr = (tmp_dir() / "pr.csv").string();
    CaptureStdout capture;
    REQUIRE(run_cli({"eval", "--model", kModel, "--db", kDb, "--queries", kQueries, "--task", "all",
                     "--report", report, "--pr", pr}) == 0);
    const std::string rep_text = slurp(report);
    CHECK(rep_text.rfind("task,map,num_queries,num_db\n", 0) == 0);
    CHECK(count_lines(rep_text) == 5);  // header + 4 tasks
    for (const char* task : {"I2I", "I2T", "T2I", "T2T"})
        CHECK(rep_text.find(task) != std::string::npos);

    const std::string pr_text = slurp(pr);
    CHECK(pr_text.rfind("task,recall,precision\n", 0) == 0);
    CHECK(count_lines(pr_text) == 1 + 4 * 11);
    CHECK(capture.captured.str().find("I2T map=") != std::string::npos);
}

TEST_CASE("eval reports are reproducible") {
    const std::string r1 = (tmp_dir() / "rep1.csv").string();
    const std::string r2 = (tmp_dir() / "rep2.csv").string();
    for (const auto& r : {r1, r2}) {
        CaptureStdout capture;
        REQUIRE(run_cli({"eval", "--model", kModel, "--db", kDb, "--queries", kQueries, "--task",
                         "T2I", "--report", r}) == 0);
    }
    CHECK(slurp(r1) == slurp(r2));
}

TEST_CASE("embed maps a matrix file into the shared space") {
    const Corpus queries = load_corpus(kQueries);
    const std::string input = (tmp_dir() / "input.csv").string();
    store_matrix(queries.image_features, input, MatrixFormat::csv);
    const std::string out = (tmp_dir() / "embedded.sdsm").string();
    REQUIRE(run_cli({"embed", "--model", kModel, "--input", input, "--modality", "image", "--out",
                     out}) == 0);
    const Matrix z = load_matrix(out, MatrixFormat::binary);
    CHECK(z.rows() == queries.image_features.rows());
    CHECK(z.cols() == 5);
}

TEST_CASE("query prints the top-k ids with scores") {
    const Corpus queries = load_corpus(kQueries);
    const std::string vec = (tmp_dir() / "query_vec.csv").string();
    store_matrix(queries.image_features.topRows(1), vec, MatrixFormat::csv);

    CaptureStdout capture;
    REQUIRE(run_cli({"query", "--model", kModel, "--db", kDb, "--vector", vec, "--task", "I2T",
                     "--top-k", "5"}) == 0);
    const std::string out = capture.captured.str();
    CHECK(count_lines(out) == 5);
    CHECK(out.find("txt_") != std::string::npos);
    CHECK(out.find(',') != std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(run_cli({"frobnicate"}) == 2);
    CHECK(run_cli({"train", "--corpus", kDb, "--model", kModel, "--warp-speed", "9"}) == 2);
    CHECK(run_cli({"train"}) == 2);  // missing required flags
    CHECK(run_cli({}) == 2);         // missing subcommand
    CHECK(run_cli({"eval", "--model", kModel, "--db", kDb, "--queries", kQueries, "--task", "X2X",
                   "--report", "r.csv"}) == 2);
}

TEST_CASE("stage failures exit with code 1") {
    CHECK(run_cli({"train", "--corpus", kDb, "--landmarks", "5000", "--model",
                   (tmp_dir() / "nope.sdsrl").string()}) == 1);
    CHECK(run_cli({"eval", "--model", (tmp_dir() / "absent.sdsrl").string(), "--db", kDb,
                   "--queries", kQueries, "--report", (tmp_dir() / "r.csv").string()}) == 1);
    CHECK(run_cli({"synth", "--classes", "9", "--dim-img", "4", "--dim-txt", "32", "--out",
                   (tmp_dir() / "degenerate").string()}) == 1);
}

TEST_CASE("help exits cleanly") {
    CaptureStdout capture;
    CHECK(run_cli({"--help"}) == 0);
    CHECK(run_cli({"train", "--help"}) == 0);
    CHECK(capture.captured.str().find("paper default") != std::string::npos);
}
