#include "sdsrl/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace sdsrl {

namespace {

struct QueryOutcome {
    bool defined = false;
    double ap = 0.0;
    std::array<double, 11> interp{};
};

// Interpolated precision at the standard recall levels: at level r, the best
// precision achieved at any rank where recall has reached r.
std::array<double, 11> interpolate_precision(const std::vector<int>& relevance, Index total_relevant) {
    const std::size_t n = relevance.size();
    std::vector<double> precision(n), recall(n);
    Index seen = 0;
    for (std::size_t k = 0; k < n; ++k) {
        seen += relevance[k];
        precision[k] = static_cast<double>(seen) / static_cast<double>(k + 1);
        recall[k] = static_cast<double>(seen) / static_cast<double>(total_relevant);
    }
    std::vector<double> best_from(n + 1, 0.0);
    for (std::size_t k = n; k-- > 0;) best_from[k] = std::max(best_from[k + 1], precision[k]);

    std::array<double, 11> out{};
    for (std::size_t level = 0; level < kRecallLevels.size(); ++level) {
        const double target = kRecallLevels[level];
        std::size_t k = 0;
        while (k < n && recall[k] < target) ++k;
        out[level] = k < n ? best_from[k] : 0.0;
    }
    return out;
}

}  // namespace

std::string task_name(Task t) {
    switch (t) {
        case Task::i2i: return "I2I";
        case Task::i2t: return "I2T";
        case Task::t2i: return "T2I";
        case Task::t2t: return "T2T";
    }
    throw ConfigError("unknown task");
}

Task parse_task(const std::string& name) {
    if (name == "I2I" || name == "i2i") return Task::i2i;
    if (name == "I2T" || name == "i2t") return Task::i2t;
    if (name == "T2I" || name == "t2i") return Task::t2i;
    if (name == "T2T" || name == "t2t") return Task::t2t;
    throw ConfigError("unknown task '" + name + "' (expected I2I, I2T, T2I or T2T)");
}

RelevanceRule parse_relevance_rule(const std::string& name) {
    if (name == "share_any_concept" || name == "same_category") return RelevanceRule::share_any_concept;
    throw ConfigError("unknown relevance rule '" + name + "'");
}

Vector score(const Vector& query_embedding, const Matrix& db_embeddings) {
    if (query_embedding.size() != db_embeddings.cols())
        throw ShapeError("query dimension " + std::to_string(query_embedding.size()) +
                         " does not match database dimension " +
                         std::to_string(db_embeddings.cols()));
    return db_embeddings * query_embedding;
}

std::vector<Index> rank_permutation(std::span<const double> scores,
                                    std::span<const std::string> ids) {
    if (scores.size() != ids.size())
        throw ShapeError("score count " + std::to_string(scores.size()) +
                         " does not match id count " + std::to_string(ids.size()));
    std::vector<Index> order(scores.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
            return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
        return ids[static_cast<std::size_t>(a)] < ids[static_cast<std::size_t>(b)];
    });
    return order;
}

std::vector<std::string> rank(std::span<const double> scores, std::span<const std::string> ids) {
    std::vector<std::string> ordered;
    ordered.reserve(ids.size());
    for (Index i : rank_permutation(scores, ids)) ordered.push_back(ids[static_cast<std::size_t>(i)]);
    return ordered;
}

std::optional<double> average_precision(std::span<const int> relevance) {
    Index total = 0;
    for (int r : relevance) total += r != 0;
    if (total == 0) return std::nullopt;
    double sum = 0.0;
    Index seen = 0;
    for (std::size_t k = 0; k < relevance.size(); ++k) {
        if (relevance[k] != 0) {
            ++seen;
            sum += static_cast<double>(seen) / static_cast<double>(k + 1);
        }
    }
    return sum / static_cast<double>(total);
}

EvalReport evaluate_embeddings(const Matrix& query_emb, const Matrix& query_labels,
                               const std::vector<std::string>& query_ids, const Matrix& db_emb,
                               const Matrix& db_labels, const std::vector<std::string>& db_ids,
                               const TaskSpec& spec) {
    if (db_emb.rows() < 1) throw DataError("empty database");
    if (query_emb.cols() != db_emb.cols())
        throw ShapeError("query and database embeddings differ in dimension");
    if (query_labels.cols() != db_labels.cols())
        throw ShapeError("query and database label concept counts differ");
    if (query_emb.rows() != query_labels.rows() ||
        query_ids.size() != static_cast<std::size_t>(query_emb.rows()))
        throw ShapeError("query embeddings, labels and ids disagree on row count");
    if (db_emb.rows() != db_labels.rows() ||
        db_ids.size() != static_cast<std::size_t>(db_emb.rows()))
        throw ShapeError("database embeddings, labels and ids disagree on row count");

    const Index nq = query_emb.rows();
    const Index nd = db_emb.rows();
    std::vector<QueryOutcome> outcomes(static_cast<std::size_t>(nq));

    parallel_rows(nq, [&](Index lo, Index hi) {
        for (Index qi = lo; qi < hi; ++qi) {
            const Vector scores = score(query_emb.row(qi).transpose(), db_emb);
            std::vector<double> score_vec;
            std::vector<std::string> id_vec;
            std::vector<Index> db_rows;
            score_vec.reserve(static_cast<std::size_t>(nd));
            for (Index di = 0; di < nd; ++di) {
                if (spec.exclude_self && db_ids[static_cast<std::size_t>(di)] ==
                                             query_ids[static_cast<std::size_t>(qi)])
                    continue;
                score_vec.push_back(scores(di));
                id_vec.push_back(db_ids[static_cast<std::size_t>(di)]);
                db_rows.push_back(di);
            }
            if (score_vec.empty()) continue;

            const std::vector<Index> order = rank_permutation(score_vec, id_vec);
            std::vector<int> relevance(order.size());
            Index total_relevant = 0;
            for (std::size_t k = 0; k < order.size(); ++k) {
                const Index di = db_rows[static_cast<std::size_t>(order[k])];
                const bool rel = query_labels.row(qi).dot(db_labels.row(di)) > 0.0;
                relevance[k] = rel ? 1 : 0;
                total_relevant += rel;
            }
            if (total_relevant == 0) continue;  // AP undefined; query skipped

            QueryOutcome& out = outcomes[static_cast<std::size_t>(qi)];
            out.defined = true;
            out.ap = *average_precision(relevance);
            out.interp = interpolate_precision(relevance, total_relevant);
        }
    });

    EvalReport report;
    report.task = spec.task;
    report.num_db = nd;
    double ap_sum = 0.0;
    std::array<double, 11> interp_sum{};
    for (const QueryOutcome& out : outcomes) {  // fixed order: deterministic aggregation
        if (!out.defined) {
            ++report.num_skipped;
            continue;
        }
        ++report.num_queries;
        ap_sum += out.ap;
        for (std::size_t level = 0; level < interp_sum.size(); ++level)
            interp_sum[level] += out.interp[level];
    }
    if (report.num_queries > 0) {
        report.map = ap_sum / static_cast<double>(report.num_queries);
        for (std::size_t level = 0; level < interp_sum.size(); ++level)
            report.precision_at_recall[level] =
                interp_sum[level] / static_cast<double>(report.num_queries);
    }
    return report;
}

EvalReport evaluate(const SdsrlModel& model, const Corpus& database, const Corpus& queries,
                    const TaskSpec& spec) {
    validate_corpus(database);
    validate_corpus(queries);

    const bool query_is_image = spec.task == Task::i2i || spec.task == Task::i2t;
    const bool db_is_image = spec.task == Task::i2i || spec.task == Task::t2i;

    const Matrix& qf = query_is_image ? queries.image_features : queries.text_features;
    const Matrix& ql = query_is_image ? queries.image_labels : queries.text_labels;
    const auto& qi = query_is_image ? queries.image_ids : queries.text_ids;
    const Matrix& df = db_is_image ? database.image_features : database.text_features;
    const Matrix& dl = db_is_image ? database.image_labels : database.text_labels;
    const auto& di = db_is_image ? database.image_ids : database.text_ids;

    const Matrix query_emb =
        embed(model, qf, query_is_image ? Modality::image : Modality::text);
    const Matrix db_emb = embed(model, df, db_is_image ? Modality::image : Modality::text);
    return evaluate_embeddings(query_emb, ql, qi, db_emb, dl, di, spec);
}

void write_report_csv(const std::string& path, std::span<const EvalReport> reports) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << "task,map,num_queries,num_db\n";
    for (const EvalReport& r : reports)
        out << task_name(r.task) << ',' << format_double(r.map) << ',' << r.num_queries << ','
            << r.num_db << '\n';
    if (!out) throw IoError("short write to " + path);
}

void write_pr_csv(const std::string& path, std::span<const EvalReport> reports) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << "task,recall,precision\n";
    for (const EvalReport& r : reports)
        for (std::size_t level = 0; level < kRecallLevels.size(); ++level)
            out << task_name(r.task) << ',' << format_double(kRecallLevels[level]) << ','
                << format_double(r.precision_at_recall[level]) << '\n';
    if (!out) throw IoError("short write to " + path);
}

}  // namespace sdsrl
