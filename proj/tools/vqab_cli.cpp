// Command-line entry point: synth, index, pipeline, serve, train, eval, experiment, gradcheck.
#include <csignal>
#include <fstream>
#include <iostream>
#include <random>

#include "vqab/annotation_service.hpp"
#include "vqab/balancing.hpp"
#include "vqab/checkpoint.hpp"
#include "vqab/errors.hpp"
#include "vqab/evaluator.hpp"
#include "vqab/experiment.hpp"
#include "vqab/grad_check.hpp"
#include "vqab/knn_index.hpp"
#include "vqab/synth_world.hpp"
#include "vqab/trainer.hpp"

#include <CLI11.hpp>
#include <httplib.h>

namespace fs = std::filesystem;
using namespace vqab;

namespace {

json read_json_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read '" + file.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(file.filename().string(), 0, e.what());
    }
}

void write_text(const fs::path& file, const std::string& text) {
    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + file.string() + "'");
    out << text;
}

template <class Fn>
void for_each_jsonl(const fs::path& file, Fn&& fn) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot read '" + file.string() + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            fn(json::parse(line));
        } catch (const json::exception& e) {
            throw ParseError(file.filename().string(), lineno, e.what());
        }
    }
}

DatasetSplit pick_split(const DataStore& store, const std::string& split, bool balanced) {
    const std::optional<Split> s = split == "all" ? std::nullopt : std::optional(split_from_string(split));
    return balanced ? assemble_balanced(store, s) : original_split(store, s);
}

json instance_json(const QAInstance& i) {
    return json{{"instance_id", i.instance_id}, {"question_id", i.question_id}, {"image_id", i.image_id},
                {"tokens", i.tokens},           {"question_type", i.question_type}, {"answers", i.answers},
                {"complement", i.complement}};
}

httplib::Server* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Balanced VQA dataset toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic world");
    std::string synth_config, synth_out;
    synth->add_option("--config", synth_config, "World config JSON (defaults when omitted)");
    synth->add_option("--out", synth_out, "Output store directory")->required();

    // index
    auto* index = app.add_subcommand("index", "Nearest-neighbour index");
    index->require_subcommand(1);
    auto* index_build = index->add_subcommand("build", "Compute same-split k nearest neighbours of every image");
    std::string store_dir, neighbors_file;
    std::size_t k = kDefaultCandidates;
    index_build->add_option("--store", store_dir)->required();
    index_build->add_option("--out", neighbors_file)->required();
    index_build->add_option("--k", k);

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "Complementary-image collection pipeline");
    pipeline->require_subcommand(1);
    auto* p_tasks = pipeline->add_subcommand("tasks", "Create picking tasks from neighbour lists");
    p_tasks->add_option("--store", store_dir)->required();
    p_tasks->add_option("--neighbors", neighbors_file)->required();
    p_tasks->add_option("--k", k);
    auto* p_ingest = pipeline->add_subcommand("ingest", "Ingest annotation results (JSONL)");
    std::string input_file;
    bool simulate = false;
    std::uint64_t sim_seed = 7;
    p_ingest->add_option("--store", store_dir)->required();
    p_ingest->add_option("--results", input_file, "AnnotationResult lines");
    p_ingest->add_flag("--simulate", simulate, "Run simulated annotators from latents.jsonl and world.json");
    p_ingest->add_option("--seed", sim_seed);
    auto* p_aggregate = pipeline->add_subcommand("aggregate", "Aggregate second-round answers (JSONL)");
    p_aggregate->add_option("--store", store_dir)->required();
    p_aggregate->add_option("--answers", input_file, "Lines of {task_id, answers[10]}")->required();
    auto* p_assemble = pipeline->add_subcommand("assemble", "Write the balanced instances of a split");
    std::string split_name = "train", out_file;
    bool allow_pending = false;
    p_assemble->add_option("--store", store_dir)->required();
    p_assemble->add_option("--split", split_name);
    p_assemble->add_option("--out", out_file)->required();
    p_assemble->add_flag("--allow-pending", allow_pending);
    auto* p_report = pipeline->add_subcommand("report", "Answer-balance report");
    std::string format = "json";
    bool unbalanced = false;
    p_report->add_option("--store", store_dir)->required();
    p_report->add_option("--split", split_name);
    p_report->add_option("--format", format)->check(CLI::IsMember({"json", "markdown"}));
    p_report->add_flag("--unbalanced", unbalanced, "Report the original instances only");
    p_report->add_option("--out", out_file);

    // serve
    auto* serve = app.add_subcommand("serve", "Run the annotation service");
    int port = 8080, lease_ttl = 600;
    std::string host = "127.0.0.1", static_dir;
    serve->add_option("--store", store_dir)->required();
    serve->add_option("--port", port);
    serve->add_option("--host", host);
    serve->add_option("--lease-ttl", lease_ttl, "Seconds");
    serve->add_option("--static", static_dir, "Directory served at /");

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a model");
    std::string model_name, config_file, out_dir;
    bool balanced = false;
    train_cmd->add_option("--model", model_name)->required()->check(
        CLI::IsMember({"prior", "lang", "joint", "counterexample"}));
    train_cmd->add_option("--config", config_file);
    train_cmd->add_option("--store", store_dir)->required();
    train_cmd->add_option("--out", out_dir)->required();
    train_cmd->add_flag("--balanced", balanced, "Train on originals plus collected complements");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
    std::string checkpoint_file, mode_name = "consensus", report_file, vqa_checkpoint;
    std::uint64_t explain_seed = 11;
    eval_cmd->add_option("--checkpoint", checkpoint_file)->required();
    eval_cmd->add_option("--store", store_dir)->required();
    eval_cmd->add_option("--split", split_name);
    eval_cmd->add_option("--mode", mode_name)->check(CLI::IsMember({"simple", "consensus"}));
    eval_cmd->add_option("--report", report_file);
    eval_cmd->add_flag("--balanced", balanced);
    eval_cmd->add_option("--vqa-checkpoint", vqa_checkpoint, "Answer model for the vqa_prob ranking");
    eval_cmd->add_option("--explain-seed", explain_seed);

    // experiment
    auto* experiment = app.add_subcommand("experiment", "Run the full synthetic experiment");
    std::string work_dir;
    std::optional<std::uint64_t> seed;
    experiment->add_option("--config", config_file);
    experiment->add_option("--out", out_dir)->required();
    experiment->add_option("--work", work_dir, "Persist store, neighbours and checkpoints here");
    experiment->add_option("--seed", seed, "Override the world seed");

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");
    int trials = 20;
    gradcheck->add_option("--trials", trials);
    gradcheck->add_option("--model", model_name)->check(CLI::IsMember({"lang", "joint", "counterexample"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            const auto cfg = synth_config.empty() ? WorldConfig{} : world_config_from_json(read_json_file(synth_config));
            fs::create_directories(synth_out);
            save_world(generate_world(cfg), synth_out);
        } else if (*index_build) {
            const auto store = load_store(store_dir);
            write_neighbors(neighbors_file, compute_all_neighbors(store, k));
        } else if (*p_tasks) {
            auto store = load_store(store_dir);
            const auto lists = read_neighbors(neighbors_file);
            const auto n = insert_tasks(store, generate_tasks(store, lists, k));
            save_store(store, store_dir, kTasks);
            std::cout << n << " tasks created\n";
        } else if (*p_ingest) {
            auto store = load_store(store_dir);
            if (simulate) {
                const auto world = world_config_from_json(read_json_file(fs::path(store_dir) / "world.json"));
                const auto latents = read_latents(fs::path(store_dir) / "latents.jsonl");
                const auto s = simulate_collection(store, latents, world, sim_seed);
                std::cout << s.picked << " picked, " << s.not_possible << " not possible\n";
            } else {
                if (input_file.empty()) throw ValidationError("--results or --simulate is required");
                for_each_jsonl(input_file, [&](const json& j) { ingest_result(store, j.get<AnnotationResult>()); });
            }
            save_store(store, store_dir, kAnnotationParts);
        } else if (*p_aggregate) {
            auto store = load_store(store_dir);
            for_each_jsonl(input_file, [&](const json& j) {
                aggregate_round(store, j.at("task_id").get<std::string>(),
                                j.at("answers").get<std::vector<std::string>>());
            });
            save_store(store, store_dir, kAnnotationParts);
        } else if (*p_assemble) {
            const auto store = load_store(store_dir);
            const std::optional<Split> s =
                split_name == "all" ? std::nullopt : std::optional(split_from_string(split_name));
            const auto split = assemble_balanced(store, s, allow_pending);
            std::string text;
            for (const auto& inst : split.instances) text += instance_json(inst).dump() + "\n";
            write_text(out_file, text);
        } else if (*p_report) {
            const auto store = load_store(store_dir);
            const auto report = balance_report(pick_split(store, split_name, !unbalanced));
            const auto text = format == "json" ? to_json(report).dump(2) + "\n" : to_markdown(report);
            if (out_file.empty()) {
                std::cout << text;
            } else {
                write_text(out_file, text);
            }
        } else if (*serve) {
            ServiceConfig sc;
            sc.store_dir = store_dir;
            sc.lease_ttl = std::chrono::seconds(lease_ttl);
            if (!static_dir.empty()) sc.static_dir = static_dir;
            AnnotationService service(load_store(store_dir), sc);
            httplib::Server server;
            service.bind(server);
            g_server = &server;
            std::signal(SIGINT, [](int) {
                if (g_server) g_server->stop();
            });
            std::cout << "listening on " << host << ":" << port << std::endl;
            if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
        } else if (*train_cmd) {
            const auto store = load_store(store_dir);
            const auto cfg = config_file.empty() ? TrainConfig{} : train_config_from_json(read_json_file(config_file));
            const auto train_split = pick_split(store, "train", balanced);
            const auto val_split = pick_split(store, "val", balanced);
            const auto result = train(store, train_split, cfg, model_kind_from_string(model_name),
                                      val_split.instances.empty() ? nullptr : &val_split);
            fs::create_directories(out_dir);
            save_checkpoint(result.model, fs::path(out_dir) / "checkpoint.json");
            write_text(fs::path(out_dir) / "manifest.json", to_json(result.manifest).dump(2) + "\n");
        } else if (*eval_cmd) {
            const auto store = load_store(store_dir);
            const auto model = load_checkpoint(checkpoint_file);
            std::optional<Model> vqa;
            if (!vqa_checkpoint.empty()) vqa = load_checkpoint(vqa_checkpoint);
            ExplainOptions opt;
            opt.vqa_model = vqa ? &*vqa : nullptr;
            opt.seed = explain_seed;
            const auto report = evaluate(model, store, pick_split(store, split_name, balanced),
                                         accuracy_mode_from_string(mode_name), opt);
            const auto text = to_json(report).dump(2) + "\n";
            if (report_file.empty()) {
                std::cout << text;
            } else {
                write_text(report_file, text);
            }
        } else if (*experiment) {
            auto cfg = config_file.empty() ? PipelineConfig::defaults()
                                           : pipeline_config_from_json(read_json_file(config_file));
            if (seed) cfg.world.seed = *seed;
            const auto bundle =
                run_experiment(cfg, work_dir.empty() ? std::nullopt : std::optional<fs::path>(work_dir));
            write_bundle(bundle, out_dir);
            std::cout << bundle.markdown;
        } else if (*gradcheck) {
            GradCheckConfig gc;
            if (!model_name.empty()) gc.kind = model_kind_from_string(model_name);
            const auto report = grad_check(gc, trials);
            std::cout << to_json(report).dump(2) << "\n";
            return report.passed ? 0 : 1;
        }
    } catch (const StageError& e) {
        std::cerr << "experiment failed at stage " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
