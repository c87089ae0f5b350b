#include "gridrag/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "gridrag/errors.hpp"
#include "gridrag/util/strings.hpp"
#include "json.hpp"

namespace gridrag {

using nlohmann::json;

std::vector<LabeledQuery> parse_query_set(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("query set: ") + e.what());
    }
    std::vector<LabeledQuery> out;
    try {
        for (const auto& jq : j.at("queries")) {
            LabeledQuery q;
            q.query_id = jq.at("query_id").get<std::string>();
            q.query = jq.at("query").get<std::string>();
            for (const auto& id : jq.at("relevant_chunk_ids"))
                q.relevant_chunk_ids.push_back(id.get<std::string>());
            if (q.relevant_chunk_ids.empty()) throw EmptyRelevantSet();
            out.push_back(std::move(q));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("query set schema: ") + e.what());
    }
    return out;
}

std::vector<LabeledQuery> load_query_set(const std::string& path) {
    return parse_query_set(util::read_file(path));
}

static std::set<std::string> relevant_set(const std::vector<std::string>& relevant) {
    if (relevant.empty()) throw EmptyRelevantSet();
    return {relevant.begin(), relevant.end()};
}

double recall_at_k(const std::vector<std::string>& ranking,
                   const std::vector<std::string>& relevant, int k) {
    auto rel = relevant_set(relevant);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranking.size() && i < static_cast<std::size_t>(k); ++i)
        if (rel.count(ranking[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(rel.size());
}

double ndcg_at_k(const std::vector<std::string>& ranking,
                 const std::vector<std::string>& relevant, int k) {
    auto rel = relevant_set(relevant);
    double dcg = 0.0;
    for (std::size_t i = 0; i < ranking.size() && i < static_cast<std::size_t>(k); ++i)
        if (rel.count(ranking[i])) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    double idcg = 0.0;
    std::size_t ideal = std::min(rel.size(), static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < ideal; ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return idcg == 0.0 ? 0.0 : dcg / idcg;
}

double map_at_k(const std::vector<std::string>& ranking,
                const std::vector<std::string>& relevant, int k) {
    auto rel = relevant_set(relevant);
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < ranking.size() && i < static_cast<std::size_t>(k); ++i)
        if (rel.count(ranking[i])) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    std::size_t denom = std::min(rel.size(), static_cast<std::size_t>(k));
    return denom == 0 ? 0.0 : sum / static_cast<double>(denom);
}

std::vector<EvalRow> run_retrieval_eval(const Index& index,
                                        const std::vector<LabeledQuery>& queries,
                                        const std::vector<int>& cutoffs) {
    for (const auto& q : queries)
        for (const auto& id : q.relevant_chunk_ids)
            if (!index.find_chunk(id)) throw UnresolvedLabel(q.query_id, id);

    int max_k = *std::max_element(cutoffs.begin(), cutoffs.end());
    const char* retrievers[] = {"dense", "lexical", "hybrid"};
    const char* metrics[] = {"ndcg", "recall", "map"};

    std::vector<EvalRow> rows;
    for (const char* retriever : retrievers) {
        // per-query rankings computed once, truncated per cutoff below
        std::vector<std::vector<std::string>> rankings;
        for (const auto& q : queries) {
            std::vector<std::string> ranking;
            if (std::string(retriever) == "hybrid") {
                FusionConfig cfg;
                cfg.top_k = max_k;
                for (const auto& hit : index.hybrid_search(q.query, std::nullopt, {}, cfg))
                    ranking.push_back(hit.chunk->chunk_id);
            } else {
                RankedList list = std::string(retriever) == "dense"
                                      ? index.dense_search(q.query, std::nullopt, {}, max_k)
                                      : index.lexical_search(q.query, std::nullopt, {}, max_k);
                for (const auto& e : list.entries) ranking.push_back(e.chunk_id);
            }
            rankings.push_back(std::move(ranking));
        }
        for (int k : cutoffs) {
            for (const char* metric : metrics) {
                double total = 0.0;
                for (std::size_t i = 0; i < queries.size(); ++i) {
                    const auto& rel = queries[i].relevant_chunk_ids;
                    if (std::string(metric) == "ndcg")
                        total += ndcg_at_k(rankings[i], rel, k);
                    else if (std::string(metric) == "recall")
                        total += recall_at_k(rankings[i], rel, k);
                    else
                        total += map_at_k(rankings[i], rel, k);
                }
                rows.push_back({retriever, metric,
                                k, queries.empty() ? 0.0 : total / queries.size()});
            }
        }
    }
    return rows;
}

std::string render_eval_table(const std::vector<EvalRow>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(10) << "retriever" << std::setw(8) << "metric" << std::setw(4)
        << "K" << "value\n";
    for (const auto& r : rows) {
        out << std::left << std::setw(10) << r.retriever << std::setw(8) << r.metric
            << std::setw(4) << r.k << std::fixed << std::setprecision(4) << r.value << "\n";
    }
    return out.str();
}

std::string eval_rows_to_json(const std::vector<EvalRow>& rows) {
    json j;
    j["format_version"] = kEvalFormatVersion;
    j["rows"] = json::array();
    for (const auto& r : rows)
        j["rows"].push_back(
            {{"retriever", r.retriever}, {"metric", r.metric}, {"k", r.k}, {"value", r.value}});
    return j.dump(2) + "\n";
}

namespace {

double mean_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t mid = v.size() / 2;
    return v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
}

}  // namespace

CostReport cost_report(const std::vector<std::vector<TraceEntry>>& traces) {
    CostReport r;
    r.count = traces.size();
    std::vector<double> calls, tokens, latency;
    for (const auto& trace : traces) {
        calls.push_back(static_cast<double>(trace.size()));
        double t = 0.0;
        for (const auto& e : trace) t += e.token_estimate;
        tokens.push_back(t);
        latency.push_back(trace.empty() ? 0.0
                                        : static_cast<double>(trace.back().timestamp -
                                                              trace.front().timestamp));
    }
    r.mean_tool_calls = mean_of(calls);
    r.median_tool_calls = median_of(calls);
    r.mean_tokens = mean_of(tokens);
    r.median_tokens = median_of(tokens);
    r.mean_latency = mean_of(latency);
    r.median_latency = median_of(latency);
    return r;
}

std::string CostReport::render() const {
    std::ostringstream out;
    out << "traces: " << count << "\n"
        << std::fixed << std::setprecision(2)
        << "tool calls: mean " << mean_tool_calls << ", median " << median_tool_calls << "\n"
        << "tokens: mean " << mean_tokens << ", median " << median_tokens << "\n"
        << "latency: mean " << mean_latency << ", median " << median_latency << "\n";
    return out.str();
}

}  // namespace gridrag
