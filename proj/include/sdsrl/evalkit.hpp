#pragma once

#include "sdsrl/pipeline.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdsrl {

// Retrieval tasks, query modality -> database modality.
enum class Task { i2i, i2t, t2i, t2t };

std::string task_name(Task t);
Task parse_task(const std::string& name);

// Two documents are relevant when they share at least one labeled concept.
// With one-hot labels this is exactly same-category relevance, so both
// conventional names select the same rule.
enum class RelevanceRule { share_any_concept };
RelevanceRule parse_relevance_rule(const std::string& name);

struct TaskSpec {
    Task task = Task::i2t;
    RelevanceRule rule = RelevanceRule::share_any_concept;
    bool exclude_self = false;  // drop database rows whose id equals the query id
                                // (only relevant when evaluating within one split)
};

inline constexpr std::array<double, 11> kRecallLevels = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                                                         0.6, 0.7, 0.8, 0.9, 1.0};

// Inner product of the query against every database row, in database order.
Vector score(const Vector& query_embedding, const Matrix& db_embeddings);

// Permutation ordering scores descending, ties broken by ascending id.
std::vector<Index> rank_permutation(std::span<const double> scores,
                                    std::span<const std::string> ids);

// The ids in retrieval order.
std::vector<std::string> rank(std::span<const double> scores, std::span<const std::string> ids);

// AP over the full ranking: (1/R) sum_k rel_k * precision@k. Empty when the
// ranking holds no relevant document (the caller skips such queries).
std::optional<double> average_precision(std::span<const int> relevance);

struct EvalReport {
    Task task = Task::i2t;
    double map = 0.0;
    // Interpolated precision averaged over queries at kRecallLevels.
    std::array<double, 11> precision_at_recall{};
    Index num_queries = 0;  // queries contributing to the MAP average
    Index num_skipped = 0;  // queries with no relevant database document
    Index num_db = 0;
};

// Protocol on precomputed shared-space embeddings.
EvalReport evaluate_embeddings(const Matrix& query_emb, const Matrix& query_labels,
                               const std::vector<std::string>& query_ids, const Matrix& db_emb,
                               const Matrix& db_labels, const std::vector<std::string>& db_ids,
                               const TaskSpec& spec);

// Embeds both sides for the task's modalities, then ranks and scores.
EvalReport evaluate(const SdsrlModel& model, const Corpus& database, const Corpus& queries,
                    const TaskSpec& spec);

// Report CSV: header then one `task,map,num_queries,num_db` row per report.
void write_report_csv(const std::string& path, std::span<const EvalReport> reports);

// PR CSV: header then `task,recall,precision` rows at the 11 recall levels.
void write_pr_csv(const std::string& path, std::span<const EvalReport> reports);

}  // namespace sdsrl
