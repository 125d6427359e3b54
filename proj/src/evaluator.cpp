#include "vqab/evaluator.hpp"

#include <set>

namespace vqab {

std::vector<const AnnotationTask*> picked_tasks(const DataStore& store, const DatasetSplit& split) {
    std::set<std::string> questions;
    for (const auto& inst : split.instances) {
        if (!inst.complement) questions.insert(inst.question_id);
    }
    std::vector<const AnnotationTask*> out;
    for (const auto& [tid, t] : store.tasks) {
        if (t.status == TaskStatus::picked && questions.count(t.question_id)) out.push_back(&t);
    }
    return out;
}

double mean_recall_at_5(ExplainMethod method, const std::vector<const AnnotationTask*>& tasks,
                        const ExplainContext& ctx) {
    if (tasks.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto* t : tasks) {
        const auto ranking = rank_candidates(method, *t, ctx);
        hits += static_cast<std::size_t>(recall_at_5(ranking, ctx.store->results.at(t->task_id).outcome.image_id));
    }
    return static_cast<double>(hits) / static_cast<double>(tasks.size());
}

EvalReport evaluate(const Model& model, const DataStore& store, const DatasetSplit& split, AccuracyMode mode,
                    const ExplainOptions& explain) {
    EvalReport r;
    r.mode = mode;
    r.model_kind = std::string(to_string(model.kind));
    r.instances = split.instances.size();

    std::map<std::string, std::string> predictions;
    std::map<std::string, double> type_sum;
    double total = 0.0;
    for (const auto& inst : split.instances) {
        const auto pred = model.predict(inst.tokens, store.image(inst.image_id).features.values);
        const double acc = vqa_accuracy(pred, inst.answers, mode);
        total += acc;
        const std::string type(to_string(answer_type_of(inst.answers.consensus)));
        type_sum[type] += acc;
        ++r.answer_type_counts[type];
        predictions.emplace(inst.instance_id, pred);
    }
    if (!split.instances.empty()) r.overall = total / static_cast<double>(split.instances.size());
    for (const auto& [type, sum] : type_sum) {
        r.per_answer_type[type] = sum / static_cast<double>(r.answer_type_counts[type]);
    }
    if (!split.eval_pairs.empty()) r.pairs = pair_metrics(predictions, split);

    if (explain.enabled) {
        const auto tasks = picked_tasks(store, split);
        r.explain_tasks = tasks.size();
        if (!tasks.empty()) {
            ExplainContext ctx;
            ctx.store = &store;
            ctx.seed = explain.seed;
            ctx.answer_model = explain.vqa_model ? explain.vqa_model : (model.has_answer_head() ? &model : nullptr);
            ctx.explain_model = model.has_explain_head() ? &model : nullptr;
            r.recall_at_5["random"] = mean_recall_at_5(ExplainMethod::random, tasks, ctx);
            r.recall_at_5["distance"] = mean_recall_at_5(ExplainMethod::distance, tasks, ctx);
            if (ctx.answer_model) r.recall_at_5["vqa_prob"] = mean_recall_at_5(ExplainMethod::vqa_prob, tasks, ctx);
            if (ctx.explain_model) r.recall_at_5["trained"] = mean_recall_at_5(ExplainMethod::trained, tasks, ctx);
        }
    }
    return r;
}

json to_json(const EvalReport& r) {
    json j{{"mode", to_string(r.mode)},
           {"model_kind", r.model_kind},
           {"instances", r.instances},
           {"overall_accuracy", r.overall},
           {"per_answer_type", r.per_answer_type},
           {"answer_type_counts", r.answer_type_counts},
           {"explain_tasks", r.explain_tasks},
           {"recall_at_5", r.recall_at_5}};
    if (r.pairs) {
        j["pair_metrics"] = {{"pairs", r.pairs->pairs},
                             {"both_correct", r.pairs->both_correct},
                             {"identical_preds", r.pairs->identical},
                             {"different_preds", r.pairs->different}};
    } else {
        j["pair_metrics"] = nullptr;
    }
    return j;
}

}  // namespace vqab
