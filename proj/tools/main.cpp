#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gridrag/agent.hpp"
#include "gridrag/chunker.hpp"
#include "gridrag/errors.hpp"
#include "gridrag/evalkit.hpp"
#include "gridrag/executors.hpp"
#include "gridrag/index.hpp"
#include "gridrag/planner.hpp"
#include "gridrag/util/strings.hpp"
#include "gridrag/workbook.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gridrag;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUserError = 1;
constexpr int kExitBackendError = 2;

struct Config {
    std::string embedder = "mock";
    std::string backend;  // "scripted:<path>" or a named live provider
    int fusion_k = 60;
    int top_k = 10;
    int budget = 50;
    int concurrency = 4;
    std::string credentials_env = "GRIDRAG_API_KEY";  // name only; value never logged

    void validate() const {
        if (fusion_k < 1 || top_k < 1 || budget < 1 || concurrency < 1)
            throw Error("config: numeric fields must be positive");
    }
};

// precedence: flags > environment > config file > defaults
Config load_config(const std::string& config_path, const std::map<std::string, std::string>& flags) {
    Config cfg;
    if (!config_path.empty()) {
        json j = json::parse(util::read_file(config_path));
        cfg.embedder = j.value("embedder", cfg.embedder);
        cfg.backend = j.value("backend", cfg.backend);
        cfg.fusion_k = j.value("fusion_k", cfg.fusion_k);
        cfg.top_k = j.value("top_k", cfg.top_k);
        cfg.budget = j.value("budget", cfg.budget);
        cfg.concurrency = j.value("concurrency", cfg.concurrency);
        cfg.credentials_env = j.value("credentials_env", cfg.credentials_env);
    }
    auto env = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        return v ? std::optional<std::string>(v) : std::nullopt;
    };
    if (auto v = env("GRIDRAG_EMBEDDER")) cfg.embedder = *v;
    if (auto v = env("GRIDRAG_BACKEND")) cfg.backend = *v;
    if (auto v = env("GRIDRAG_K")) cfg.top_k = std::stoi(*v);
    if (auto v = env("GRIDRAG_BUDGET")) cfg.budget = std::stoi(*v);
    if (auto v = env("GRIDRAG_CONCURRENCY")) cfg.concurrency = std::stoi(*v);

    auto flag = [&](const char* name) -> std::optional<std::string> {
        auto it = flags.find(name);
        return it != flags.end() ? std::optional<std::string>(it->second) : std::nullopt;
    };
    if (auto v = flag("embedder")) cfg.embedder = *v;
    if (auto v = flag("backend")) cfg.backend = *v;
    if (auto v = flag("k")) cfg.top_k = std::stoi(*v);
    if (auto v = flag("budget")) cfg.budget = std::stoi(*v);
    if (auto v = flag("concurrency")) cfg.concurrency = std::stoi(*v);
    cfg.validate();
    return cfg;
}

// phase: "" for plain scripts, or "planner" / "subtask:<id>" / "synthesize"
// to select a section of a sectioned workflow script.
std::unique_ptr<LlmBackend> make_backend(const Config& cfg, const std::string& phase = "") {
    if (cfg.backend.empty()) throw Error("no backend configured (use --backend scripted:<path>)");
    if (util::starts_with(cfg.backend, "scripted:")) {
        std::string path = cfg.backend.substr(9);
        if (!fs::exists(path)) throw FileNotFound(path);
        json j = json::parse(util::read_file(path));
        if (!phase.empty() && !j.contains("steps")) {
            json section;
            if (util::starts_with(phase, "subtask:"))
                section = j.at("subtasks").at(phase.substr(8));
            else
                section = j.at(phase);
            return std::make_unique<ScriptedBackend>(ScriptedBackend::from_json(section));
        }
        return std::make_unique<ScriptedBackend>(ScriptedBackend::from_json(j));
    }
    // live providers would read a key from cfg.credentials_env here
    throw Error("unknown backend provider: " + cfg.backend);
}

Workbook ingest_any(const std::string& path) {
    if (util::ends_with(path, ".xlsx")) return ingest_xlsx(path).workbook;
    return ingest_canonical(path);
}

int cmd_index(const std::vector<std::string>& inputs, const std::string& out_dir,
              const Config& cfg, bool keep_going) {
    if (inputs.empty()) {
        std::cerr << "error: no inputs\n";
        return kExitUserError;
    }
    auto embedder = make_embedder(cfg.embedder);
    std::vector<Chunk> all_chunks;
    int files_ok = 0, sheets = 0;
    std::vector<std::string> failures;
    for (const auto& path : inputs) {
        try {
            Workbook wb = ingest_any(path);
            sheets += static_cast<int>(wb.sheets.size());
            auto chunks = chunk_workbook(wb);
            all_chunks.insert(all_chunks.end(), chunks.begin(), chunks.end());
            ++files_ok;
        } catch (const Error& e) {
            failures.push_back(path + ": " + e.what());
            if (!keep_going) {
                std::cerr << "error: " << failures.back() << "\n";
                return kExitUserError;
            }
        }
    }
    Index index = Index::build(all_chunks, *embedder);
    index.persist(out_dir);

    std::map<std::string, int> by_kind;
    for (const auto& c : all_chunks) ++by_kind[to_string(c.kind)];
    std::cout << "indexed files=" << files_ok << " sheets=" << sheets
              << " chunks=" << all_chunks.size();
    for (const auto& [kind, n] : by_kind) std::cout << " " << kind << "=" << n;
    std::cout << "\nindex written to " << out_dir << "\n";
    for (const auto& f : failures) std::cerr << "skipped " << f << "\n";
    return failures.empty() ? kExitOk : kExitUserError;
}

std::string provenance_of(const std::vector<TraceEntry>& trace) {
    std::vector<std::string> refs;
    for (const auto& e : trace)
        for (const auto& c : e.result.chunks) {
            A1Range span{c.row_span.first, c.col_span.first, c.row_span.second,
                         c.col_span.second};
            std::string ref = c.sheet + "!" + a1_span(span);
            if (std::find(refs.begin(), refs.end(), ref) == refs.end()) refs.push_back(ref);
        }
    std::string out;
    for (const auto& r : refs) out += (out.empty() ? "" : ", ") + r;
    return out;
}

int cmd_query(const std::string& index_dir, const std::string& question, const Config& cfg,
              const std::string& trace_out) {
    auto embedder = make_embedder(cfg.embedder);
    Index index = Index::load(index_dir, *embedder);
    auto backend = make_backend(cfg);

    FusionConfig fusion{cfg.fusion_k, cfg.top_k};
    std::vector<Chunk> bootstrap;
    for (const auto& hit : index.hybrid_search(question, std::nullopt, {}, fusion))
        bootstrap.push_back(*hit.chunk);

    ToolRegistry tools = register_search_tools(index, fusion);
    LoopBudget budget{cfg.budget, cfg.top_k};
    AgentResult result = run_agent(question, bootstrap, tools, *backend, budget);

    util::write_file_atomic(trace_out, trace_to_jsonl(result.trace));
    std::cout << result.answer << "\n";
    std::string prov = provenance_of(result.trace);
    if (!prov.empty()) std::cout << "sources: " << prov << "\n";
    std::cout << "trace: " << trace_out << "\n";
    if (result.budget_exhausted) std::cerr << "warning: tool budget exhausted\n";
    return kExitOk;
}

int cmd_workflow(const std::string& index_dir, const std::string& task, const Config& cfg,
                 const std::string& run_dir, std::string output_path) {
    auto embedder = make_embedder(cfg.embedder);
    Index index = Index::load(index_dir, *embedder);

    fs::create_directories(fs::path(run_dir) / "artifacts");
    if (output_path.empty()) output_path = (fs::path(run_dir) / "artifacts" / "output.wb.json").string();

    const char* asset_env = std::getenv("GRIDRAG_ASSETS");
    std::string asset_dir = asset_env ? asset_env : GRIDRAG_ASSET_DIR;
    std::string template_text = util::read_file(asset_dir + "/planner_prompt.txt");
    ExplorationContext exploration = explore_data(task, index, cfg.top_k);
    util::write_file((fs::path(run_dir) / "exploration.txt").string(), exploration.render());

    auto planner_backend = make_backend(cfg, "planner");
    Plan plan = decompose(task, output_path, exploration, *planner_backend, template_text);

    json jplan;
    jplan["format_version"] = 1;
    jplan["output_type"] = plan.output_type;
    jplan["subtasks"] = json::array();
    for (const auto& st : plan.subtasks) {
        jplan["subtasks"].push_back({{"id", st.id},
                                     {"type", to_string(st.type)},
                                     {"description", st.description},
                                     {"dependencies", st.dependencies}});
    }
    util::write_file((fs::path(run_dir) / "plan.json").string(), jplan.dump(2) + "\n");

    // scripted runs share one script across executors; each subtask gets a fresh backend
    std::map<int, std::unique_ptr<LlmBackend>> backends;
    for (const auto& st : plan.subtasks)
        backends[st.id] = make_backend(cfg, "subtask:" + std::to_string(st.id));

    ExecuteOptions options;
    options.budget = LoopBudget{cfg.budget, cfg.top_k};
    options.concurrency = cfg.concurrency;
    ExecutionOutcome outcome = execute_plan(
        plan, task, [&](ExecutorType type) { return get_tool_set(type, &index); },
        [&](const Subtask& st) -> LlmBackend& { return *backends.at(st.id); }, options);

    std::vector<SubtaskResult> results;
    for (const auto& [id, r] : outcome.results) {
        results.push_back(r);
        util::write_file((fs::path(run_dir) / ("subtask-" + std::to_string(id) + ".trace.jsonl")).string(),
                         trace_to_jsonl(r.trace_slice));
    }
    util::write_file((fs::path(run_dir) / "trace.jsonl").string(),
                     trace_to_jsonl(outcome.merged_trace));

    auto synth_backend = make_backend(cfg, "synthesize");
    SynthesisResult synthesis = synthesize(task, results, plan.output_type, *synth_backend);

    util::write_file((fs::path(run_dir) / "answer.txt").string(), synthesis.answer + "\n");
    json jmanifest;
    jmanifest["format_version"] = 1;
    jmanifest["artifacts"] = synthesis.manifest;
    util::write_file((fs::path(run_dir) / "manifest.json").string(), jmanifest.dump(2) + "\n");

    std::cout << synthesis.answer << "\n";
    std::cout << "run directory: " << run_dir << "\n";
    bool any_failed = false;
    for (const auto& r : results)
        if (!r.ok) any_failed = true;
    return any_failed ? kExitBackendError : kExitOk;
}

int cmd_eval(const std::string& index_dir, const std::string& queryset_path, const Config& cfg,
             const std::string& cutoffs_text, const std::string& out_path) {
    auto embedder = make_embedder(cfg.embedder);
    Index index = Index::load(index_dir, *embedder);
    auto queries = load_query_set(queryset_path);

    std::vector<int> cutoffs;
    std::stringstream ss(cutoffs_text);
    std::string part;
    while (std::getline(ss, part, ',')) cutoffs.push_back(std::stoi(part));
    if (cutoffs.empty()) throw Error("no cutoffs given");

    auto rows = run_retrieval_eval(index, queries, cutoffs);
    std::cout << render_eval_table(rows);
    if (!out_path.empty()) util::write_file_atomic(out_path, eval_rows_to_json(rows));
    return kExitOk;
}

int cmd_trace(const std::string& trace_path, int show, bool stats) {
    auto entries = parse_trace_jsonl(util::read_file(trace_path));
    if (stats || show < 0) {
        std::vector<TraceEntry> trace;
        long long tokens = 0;
        for (const auto& j : entries) tokens += j.value("token_estimate", 0);
        std::cout << "entries: " << entries.size() << "\n";
        std::cout << "tool_calls=" << entries.size() << " tokens=" << tokens << "\n";
        return kExitOk;
    }
    if (show < 1 || static_cast<std::size_t>(show) > entries.size()) {
        std::cerr << "error: --show out of range (1.." << entries.size() << ")\n";
        return kExitUserError;
    }
    std::cout << entries[static_cast<std::size_t>(show - 1)].dump(2) << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gridrag: workbook indexing, hybrid retrieval, agent queries and workflows"};
    app.require_subcommand(1);

    std::string config_path, index_dir, out, backend, embedder, cutoffs = "5,10", output_path;
    std::map<std::string, std::string> flag_overrides;
    int k = -1, budget = -1, concurrency = -1;
    bool keep_going = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (JSON)");
        cmd->add_option("--backend", backend, "scripted:<path> or provider name");
        cmd->add_option("--embedder", embedder, "embedding provider (default mock)");
        cmd->add_option("--k", k, "retrieval top-K");
        cmd->add_option("--budget", budget, "tool-call budget per agent run");
        cmd->add_option("--concurrency", concurrency, "subtask concurrency cap");
    };

    auto* c_index = app.add_subcommand("index", "build an index from workbook files");
    std::vector<std::string> inputs;
    c_index->add_option("inputs", inputs, "workbook paths (.xlsx or canonical .json)");
    c_index->add_option("--out", out, "index output directory")->required();
    c_index->add_flag("--keep-going", keep_going, "skip files that fail to ingest");
    add_common(c_index);

    auto* c_query = app.add_subcommand("query", "answer a question over an index");
    std::string question, trace_out = "trace.jsonl";
    c_query->add_option("question", question, "the question")->required();
    c_query->add_option("--index", index_dir, "index directory")->required();
    c_query->add_option("--out", trace_out, "trace output path");
    add_common(c_query);

    auto* c_workflow = app.add_subcommand("workflow", "run a composite task");
    std::string task, run_dir = "run";
    c_workflow->add_option("task", task, "the task")->required();
    c_workflow->add_option("--index", index_dir, "index directory")->required();
    c_workflow->add_option("--out", run_dir, "run directory");
    c_workflow->add_option("--output-path", output_path, "artifact target path");
    add_common(c_workflow);

    auto* c_eval = app.add_subcommand("eval", "retrieval evaluation over a labeled query set");
    std::string queryset;
    c_eval->add_option("queryset", queryset, "query set JSON")->required();
    c_eval->add_option("--index", index_dir, "index directory")->required();
    c_eval->add_option("--cutoffs", cutoffs, "comma-separated K values (default 5,10)");
    c_eval->add_option("--out", out, "results file (JSON records)");
    add_common(c_eval);

    auto* c_trace = app.add_subcommand("trace", "inspect a trace file");
    std::string trace_path;
    int show = -1;
    bool stats = false;
    c_trace->add_option("path", trace_path, "trace JSONL path")->required();
    c_trace->add_option("--show", show, "print entry n (1-based)");
    c_trace->add_flag("--stats", stats, "print aggregate stats");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!backend.empty()) flag_overrides["backend"] = backend;
        if (!embedder.empty()) flag_overrides["embedder"] = embedder;
        if (k > 0) flag_overrides["k"] = std::to_string(k);
        if (budget > 0) flag_overrides["budget"] = std::to_string(budget);
        if (concurrency > 0) flag_overrides["concurrency"] = std::to_string(concurrency);
        Config cfg = load_config(config_path, flag_overrides);

        if (c_index->parsed()) return cmd_index(inputs, out, cfg, keep_going);
        if (c_query->parsed()) return cmd_query(index_dir, question, cfg, trace_out);
        if (c_workflow->parsed()) return cmd_workflow(index_dir, task, cfg, run_dir, output_path);
        if (c_eval->parsed()) return cmd_eval(index_dir, queryset, cfg, cutoffs, out);
        if (c_trace->parsed()) return cmd_trace(trace_path, show, stats);
    } catch (const PlanInvalid& e) {
        std::cerr << "plan invalid: " << e.what() << "\n";
        return kExitBackendError;
    } catch (const AgentAborted& e) {
        std::cerr << e.what() << "\n";
        return kExitBackendError;
    } catch (const BackendFailure& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return kExitBackendError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUserError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUserError;
    }
    return kExitOk;
}
