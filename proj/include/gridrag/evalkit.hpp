#pragma once

#include <string>
#include <vector>

#include "gridrag/agent.hpp"
#include "gridrag/index.hpp"

namespace gridrag {

struct LabeledQuery {
    std::string query_id;
    std::string query;
    std::vector<std::string> relevant_chunk_ids;  // non-empty, must resolve in the index
};

std::vector<LabeledQuery> parse_query_set(const std::string& json_text);
std::vector<LabeledQuery> load_query_set(const std::string& path);

// Binary relevance. All throw EmptyRelevantSet when relevant is empty.
double recall_at_k(const std::vector<std::string>& ranking,
                   const std::vector<std::string>& relevant, int k);
// gain 1 at relevant positions, discount 1/log2(pos+1), normalized by ideal DCG
double ndcg_at_k(const std::vector<std::string>& ranking,
                 const std::vector<std::string>& relevant, int k);
// precision at each relevant rank within top-k, normalized by min(|relevant|, k)
double map_at_k(const std::vector<std::string>& ranking,
                const std::vector<std::string>& relevant, int k);

struct EvalRow {
    std::string retriever;  // dense | lexical | hybrid
    std::string metric;     // ndcg | recall | map
    int k = 0;
    double value = 0.0;  // in [0,1], mean over queries
};

constexpr int kEvalFormatVersion = 1;

// Mean metrics per retriever and cutoff. Throws UnresolvedLabel when a label
// references a chunk_id absent from the index.
std::vector<EvalRow> run_retrieval_eval(const Index& index,
                                        const std::vector<LabeledQuery>& queries,
                                        const std::vector<int>& cutoffs = {5, 10});

std::string render_eval_table(const std::vector<EvalRow>& rows);
std::string eval_rows_to_json(const std::vector<EvalRow>& rows);

struct CostReport {
    std::size_t count = 0;
    double mean_tool_calls = 0.0;
    double median_tool_calls = 0.0;
    double mean_tokens = 0.0;
    double median_tokens = 0.0;
    double mean_latency = 0.0;    // timestamp span per trace
    double median_latency = 0.0;

    std::string render() const;
};

CostReport cost_report(const std::vector<std::vector<TraceEntry>>& traces);

}  // namespace gridrag
