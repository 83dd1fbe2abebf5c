#include "sdsrl/cli.hpp"

#include "sdsrl/dataio.hpp"
#include "sdsrl/evalkit.hpp"
#include "sdsrl/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace sdsrl::cli {

namespace {

struct SynthArgs {
    Index classes = 5, per_class = 20, dim_img = 16, dim_txt = 12;
    double noise = 0.1;
    std::uint64_t seed = 0;
    std::string out;
};

struct SplitArgs {
    std::string corpus, out_db, out_queries;
    double fraction = 0.75;
    std::uint64_t seed = 0;
};

struct TrainArgs {
    std::string corpus, model, trace, dump_links;
    Index landmarks = 1000, landmarks_img = 0, landmarks_txt = 0;
    double sigma = 1.0, sigma_img = 0.0, sigma_txt = 0.0;
    double mu = 1e-2, tol = 1e-4, eig_floor = 1e-10;
    Index q = 10;
    int outer = 50, inner = 10;
    std::uint64_t seed = 0;
    bool no_normalize = false;
};

struct EmbedArgs {
    std::string model, input, modality = "image", out;
};

struct EvalArgs {
    std::string model, db, queries, task = "all", rule = "share_any_concept", report, pr;
    bool exclude_self = false;
};

struct QueryArgs {
    std::string model, db, vector_path, task = "I2T";
    Index top_k = 10;
};

void run_synth(const SynthArgs& a) {
    Corpus corpus = generate_synthetic_corpus(a.classes, a.per_class, a.dim_img, a.dim_txt,
                                              a.noise, a.seed);
    store_corpus(corpus, a.out);
    std::cerr << "[synth] wrote " << corpus.image_features.rows() << "+"
              << corpus.text_features.rows() << " documents to " << a.out << "\n";
}

void run_split(const SplitArgs& a) {
    Corpus corpus = load_corpus(a.corpus);
    auto [db, queries] = split_corpus(corpus, SplitSpec{a.fraction, a.seed});
    store_corpus(db, a.out_db);
    store_corpus(queries, a.out_queries);
    std::cerr << "[split] database " << db.image_features.rows() << "+" << db.text_features.rows()
              << ", queries " << queries.image_features.rows() << "+"
              << queries.text_features.rows() << "\n";
}

TrainConfig train_config(const TrainArgs& a) {
    TrainConfig cfg;
    cfg.kernel_img = {KernelKind::rbf, a.sigma_img > 0.0 ? a.sigma_img : a.sigma};
    cfg.kernel_txt = {KernelKind::rbf, a.sigma_txt > 0.0 ? a.sigma_txt : a.sigma};
    cfg.landmarks_img = a.landmarks_img > 0 ? a.landmarks_img : a.landmarks;
    cfg.landmarks_txt = a.landmarks_txt > 0 ? a.landmarks_txt : a.landmarks;
    cfg.mu = a.mu;
    cfg.eig_floor = a.eig_floor;
    cfg.solver.q = a.q;
    cfg.solver.outer_loops = a.outer;
    cfg.solver.inner_iters = a.inner;
    cfg.solver.tol = a.tol;
    cfg.normalize_inputs = !a.no_normalize;
    cfg.seed = a.seed;
    return cfg;
}

void write_loss_trace(const std::string& path, const std::vector<double>& trace) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << "outer_loop,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i)
        out << i << ',' << format_double(trace[i]) << '\n';
    if (!out) throw IoError("short write to " + path);
}

void run_train(const TrainArgs& a) {
    Corpus corpus = load_corpus(a.corpus);
    const TrainConfig cfg = train_config(a);
    std::cerr << "[train] corpus " << corpus.image_features.rows() << "+"
              << corpus.text_features.rows() << " documents, landmarks " << cfg.landmarks_img
              << "/" << cfg.landmarks_txt << ", q=" << cfg.solver.q << "\n";
    SdsrlModel model = train(corpus, cfg);
    save_model(model, a.model);
    const std::string trace_path = a.trace.empty() ? a.model + ".trace.csv" : a.trace;
    write_loss_trace(trace_path, model.loss_trace);
    std::cerr << "[train] final loss " << format_double(model.loss_trace.back()) << ", model "
              << a.model << "\n";

    if (!a.dump_links.empty()) {
        const Matrix x =
            cfg.normalize_inputs ? l2_normalize_rows(corpus.image_features) : corpus.image_features;
        const Matrix y =
            cfg.normalize_inputs ? l2_normalize_rows(corpus.text_features) : corpus.text_features;
        const Matrix phi = transform(model.map_img, x);
        const Matrix psi = transform(model.map_txt, y);
        LinkMatrices links =
            build_all_links(phi, psi, corpus.image_labels, corpus.text_labels, cfg.mu);
        store_matrix(links.intra_image, a.dump_links + "intra_image.sdsm", MatrixFormat::binary);
        store_matrix(links.intra_text, a.dump_links + "intra_text.sdsm", MatrixFormat::binary);
        store_matrix(links.cross, a.dump_links + "cross.sdsm", MatrixFormat::binary);
    }
}

void run_embed(const EmbedArgs& a) {
    const SdsrlModel model = load_model(a.model);
    const Matrix input = load_matrix(a.input, format_for_path(a.input));
    const Modality modality = a.modality == "image" ? Modality::image : Modality::text;
    store_matrix(embed(model, input, modality), a.out, format_for_path(a.out));
}

void run_eval(const EvalArgs& a) {
    const SdsrlModel model = load_model(a.model);
    const Corpus db = load_corpus(a.db);
    const Corpus queries = load_corpus(a.queries);

    std::vector<Task> tasks;
    if (a.task == "all") tasks = {Task::i2i, Task::i2t, Task::t2i, Task::t2t};
    else tasks = {parse_task(a.task)};

    std::vector<EvalReport> reports;
    for (Task task : tasks) {
        TaskSpec spec{task, parse_relevance_rule(a.rule), a.exclude_self};
        reports.push_back(evaluate(model, db, queries, spec));
        const EvalReport& r = reports.back();
        std::cout << task_name(task) << " map=" << format_double(r.map) << " queries="
                  << r.num_queries << " skipped=" << r.num_skipped << " db=" << r.num_db << "\n";
    }
    write_report_csv(a.report, reports);
    if (!a.pr.empty()) write_pr_csv(a.pr, reports);
}

void run_query(const QueryArgs& a) {
    const SdsrlModel model = load_model(a.model);
    const Corpus db = load_corpus(a.db);
    const Matrix vec = load_matrix(a.vector_path, format_for_path(a.vector_path));
    if (vec.rows() != 1) throw DataError("query vector file must hold exactly one row");

    const TaskSpec spec{parse_task(a.task), RelevanceRule::share_any_concept, false};
    const bool query_is_image = spec.task == Task::i2i || spec.task == Task::i2t;
    const bool db_is_image = spec.task == Task::i2i || spec.task == Task::t2i;

    const Matrix query_emb =
        embed(model, vec, query_is_image ? Modality::image : Modality::text);
    const Matrix db_emb = embed(model, db_is_image ? db.image_features : db.text_features,
                                db_is_image ? Modality::image : Modality::text);
    const auto& ids = db_is_image ? db.image_ids : db.text_ids;

    const Vector scores = score(query_emb.row(0).transpose(), db_emb);
    std::vector<double> score_vec(scores.data(), scores.data() + scores.size());
    const std::vector<Index> order = rank_permutation(score_vec, ids);
    const Index k = std::min<Index>(a.top_k, static_cast<Index>(order.size()));
    for (Index i = 0; i < k; ++i) {
        const Index di = order[static_cast<std::size_t>(i)];
        std::cout << ids[static_cast<std::size_t>(di)] << ","
                  << format_double(score_vec[static_cast<std::size_t>(di)]) << "\n";
    }
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"shared-space multimodal retrieval: kernel feature lifting + joint projection learning"};
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "generate a seeded synthetic multimodal corpus");
    synth->add_option("--classes", synth_args.classes, "number of classes")->capture_default_str();
    synth->add_option("--per-class", synth_args.per_class, "documents per class and modality")
        ->capture_default_str();
    synth->add_option("--dim-img", synth_args.dim_img, "image feature dimension")->capture_default_str();
    synth->add_option("--dim-txt", synth_args.dim_txt, "text feature dimension")->capture_default_str();
    synth->add_option("--noise", synth_args.noise, "Gaussian noise scale around class prototypes")
        ->capture_default_str();
    synth->add_option("--seed", synth_args.seed, "random seed")->capture_default_str();
    synth->add_option("--out", synth_args.out, "output corpus directory")->required();

    SplitArgs split_args;
    auto* split = app.add_subcommand("split", "split a corpus into database and query sets");
    split->add_option("--corpus", split_args.corpus, "corpus directory or manifest")->required();
    split->add_option("--fraction", split_args.fraction, "database fraction (paper default)")
        ->capture_default_str();
    split->add_option("--seed", split_args.seed, "random seed")->capture_default_str();
    split->add_option("--out-db", split_args.out_db, "database corpus directory")->required();
    split->add_option("--out-queries", split_args.out_queries, "query corpus directory")->required();

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "train a shared-space model on a corpus");
    train->add_option("--corpus", train_args.corpus, "corpus directory or manifest")->required();
    train->add_option("--landmarks", train_args.landmarks, "landmark count per modality (paper default)")
        ->capture_default_str();
    train->add_option("--landmarks-img", train_args.landmarks_img,
                      "override landmark count for the image modality");
    train->add_option("--landmarks-txt", train_args.landmarks_txt,
                      "override landmark count for the text modality");
    train->add_option("--sigma", train_args.sigma, "RBF bandwidth (paper default)")->capture_default_str();
    train->add_option("--sigma-img", train_args.sigma_img, "override RBF bandwidth for images");
    train->add_option("--sigma-txt", train_args.sigma_txt, "override RBF bandwidth for text");
    train->add_option("--mu", train_args.mu, "link-matrix ridge regularizer")->capture_default_str();
    train->add_option("--q", train_args.q, "shared-space dimension")->capture_default_str();
    train->add_option("--outer", train_args.outer, "outer alternation loops (paper default)")
        ->capture_default_str();
    train->add_option("--inner", train_args.inner, "coordinate sweeps per factor pass (paper default)")
        ->capture_default_str();
    train->add_option("--tol", train_args.tol, "relative loss-change stop per sweep")
        ->capture_default_str();
    train->add_option("--eig-floor", train_args.eig_floor,
                      "relative eigenvalue floor for the lifting maps")->capture_default_str();
    train->add_option("--seed", train_args.seed, "master seed for all stage randomness")
        ->capture_default_str();
    train->add_flag("--no-normalize", train_args.no_normalize, "skip L2 normalization of inputs");
    train->add_option("--model", train_args.model, "output model file")->required();
    train->add_option("--trace", train_args.trace, "loss trace CSV (default: <model>.trace.csv)");
    train->add_option("--dump-links", train_args.dump_links,
                      "debug: write the three link matrices under this path prefix");

    EmbedArgs embed_args;
    auto* embed_cmd = app.add_subcommand("embed", "map a feature matrix into the shared space");
    embed_cmd->add_option("--model", embed_args.model, "model file")->required();
    embed_cmd->add_option("--input", embed_args.input, "input feature matrix (.csv or binary)")
        ->required();
    embed_cmd->add_option("--modality", embed_args.modality, "input modality")
        ->check(CLI::IsMember({"image", "text"}))
        ->required();
    embed_cmd->add_option("--out", embed_args.out, "output matrix path")->required();

    EvalArgs eval_args;
    auto* eval = app.add_subcommand("eval", "rank a database against queries and report MAP/PR");
    eval->add_option("--model", eval_args.model, "model file")->required();
    eval->add_option("--db", eval_args.db, "database corpus")->required();
    eval->add_option("--queries", eval_args.queries, "query corpus")->required();
    eval->add_option("--task", eval_args.task, "retrieval task")
        ->check(CLI::IsMember({"all", "I2I", "I2T", "T2I", "T2T"}))
        ->capture_default_str();
    eval->add_option("--rule", eval_args.rule, "relevance rule")
        ->check(CLI::IsMember({"share_any_concept", "same_category"}))
        ->capture_default_str();
    eval->add_flag("--exclude-self", eval_args.exclude_self,
                   "drop database documents whose id equals the query id");
    eval->add_option("--report", eval_args.report, "output report CSV")->required();
    eval->add_option("--pr", eval_args.pr, "output precision-recall CSV");

    QueryArgs query_args;
    auto* query = app.add_subcommand("query", "rank the database for a single query vector");
    query->add_option("--model", query_args.model, "model file")->required();
    query->add_option("--db", query_args.db, "database corpus")->required();
    query->add_option("--vector", query_args.vector_path, "one-row matrix file with the query features")
        ->required();
    query->add_option("--task", query_args.task, "retrieval task")
        ->check(CLI::IsMember({"I2I", "I2T", "T2I", "T2T"}))
        ->capture_default_str();
    query->add_option("--top-k", query_args.top_k, "number of results to print")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) run_synth(synth_args);
        else if (split->parsed()) run_split(split_args);
        else if (train->parsed()) run_train(train_args);
        else if (embed_cmd->parsed()) run_embed(embed_args);
        else if (eval->parsed()) run_eval(eval_args);
        else if (query->parsed()) run_query(query_args);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace sdsrl::cli
