#include "vqab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "vqab/answers.hpp"
#include "vqab/errors.hpp"
#include "vqab/hashing.hpp"

namespace vqab {

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
    if (batch_size <= 0) throw ValidationError("batch_size must be > 0");
    if (epochs < 0) throw ValidationError("epochs must be >= 0");
    if (!(lambda >= 0.0)) throw ValidationError("lambda must be >= 0");
    if (!(margin > 0.0)) throw ValidationError("margin must be > 0");
    if (!(init_scale > 0.0)) throw ValidationError("init_scale must be > 0");
    if (word_dim <= 0 || hidden <= 0 || explain_dim <= 0 || answer_embed_dim <= 0) {
        throw ValidationError("model widths must be > 0");
    }
}

OptimizerConfig TrainConfig::optimizer_config() const {
    return {optimizer, learning_rate, beta1, beta2, adam_epsilon};
}

json to_json(const TrainConfig& c) {
    return json{{"learning_rate", c.learning_rate},
                {"optimizer", to_string(c.optimizer)},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"adam_epsilon", c.adam_epsilon},
                {"batch_size", c.batch_size},
                {"epochs", c.epochs},
                {"seed", c.seed},
                {"lambda", c.lambda},
                {"margin", c.margin},
                {"init_scale", c.init_scale},
                {"word_dim", c.word_dim},
                {"hidden", c.hidden},
                {"explain_dim", c.explain_dim},
                {"answer_embed_dim", c.answer_embed_dim},
                {"mix", to_string(c.mix)},
                {"normalize_image", c.normalize_image}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    static const std::set<std::string> kKeys = {
        "learning_rate", "optimizer", "beta1",  "beta2",       "adam_epsilon", "batch_size",
        "epochs",        "seed",      "lambda", "margin",      "init_scale",   "word_dim",
        "hidden",        "explain_dim", "answer_embed_dim", "mix", "normalize_image"};
    for (const auto& [k, v] : j.items()) {
        if (!kKeys.count(k)) throw ValidationError("unknown train config key '" + k + "'");
    }
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    if (j.contains("optimizer")) c.optimizer = optimizer_kind_from_string(j["optimizer"].get<std::string>());
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.lambda = j.value("lambda", c.lambda);
    c.margin = j.value("margin", c.margin);
    c.init_scale = j.value("init_scale", c.init_scale);
    c.word_dim = j.value("word_dim", c.word_dim);
    c.hidden = j.value("hidden", c.hidden);
    c.explain_dim = j.value("explain_dim", c.explain_dim);
    c.answer_embed_dim = j.value("answer_embed_dim", c.answer_embed_dim);
    if (j.contains("mix")) c.mix = mix_mode_from_string(j["mix"].get<std::string>());
    c.normalize_image = j.value("normalize_image", c.normalize_image);
    c.validate();
    return c;
}

json to_json(const RunManifest& m) {
    json epochs = json::array();
    for (const auto& e : m.epochs) {
        json r{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"train_accuracy", e.train_accuracy}};
        if (e.val_loss) r["val_loss"] = *e.val_loss;
        if (e.val_accuracy) r["val_accuracy"] = *e.val_accuracy;
        epochs.push_back(std::move(r));
    }
    return json{{"config", m.config},
                {"model_kind", m.model_kind},
                {"dataset_fingerprints", m.dataset_fingerprints},
                {"epochs", epochs},
                {"checkpoint_hash", m.checkpoint_hash}};
}

// ---------------------------------------------------------------------------
// Data preparation

std::string predict_prior(const DatasetSplit& split) {
    if (split.instances.empty()) throw ValidationError("prior needs a non-empty training split");
    std::vector<std::string> consensus;
    consensus.reserve(split.instances.size());
    for (const auto& inst : split.instances) consensus.push_back(inst.answers.consensus);
    return mode_answer(consensus);
}

std::string fingerprint(const DataStore& store, const DatasetSplit& split) {
    json arr = json::array();
    for (const auto& inst : split.instances) {
        arr.push_back({inst.instance_id, inst.image_id, inst.tokens, inst.answers.answers, inst.answers.consensus,
                       store.image(inst.image_id).features.values});
    }
    return sha256_hex(arr.dump());
}

Model init_model(ModelKind kind, const DataStore& store, const DatasetSplit& train, const TrainConfig& config,
                 int candidates) {
    config.validate();
    if (train.instances.empty()) throw ValidationError("cannot train on an empty split");
    Model m;
    m.kind = kind;
    if (kind == ModelKind::prior) {
        m.prior_answer = predict_prior(train);
        return m;
    }
    std::vector<std::string> words;
    std::vector<std::string> answers;
    for (const auto& inst : train.instances) {
        words.insert(words.end(), inst.tokens.begin(), inst.tokens.end());
        answers.insert(answers.end(), inst.answers.answers.begin(), inst.answers.answers.end());
        answers.push_back(inst.answers.consensus);
    }
    m.question_vocab = Vocabulary::from_words(words, true);
    m.answer_vocab = Vocabulary::from_words(answers, false);
    m.dims.feature_dim = static_cast<int>(store.feature_dim());
    m.dims.word_dim = config.word_dim;
    m.dims.hidden = config.hidden;
    m.dims.explain_dim = config.explain_dim;
    m.dims.answer_embed_dim = config.answer_embed_dim;
    m.dims.candidates = candidates;
    m.dims.question_vocab = m.question_vocab.size();
    m.dims.answer_vocab = m.answer_vocab.size();
    m.dims.mix = config.mix;
    m.dims.normalize_image = config.normalize_image;
    m.params = ModelParams::uniform(m.dims, config.init_scale, config.seed);
    return m;
}

PreparedSet::PreparedSet(const Model& model, const DataStore& store, const DatasetSplit& split, bool with_explain) {
    const std::size_t n = split.instances.size();
    tokens_.reserve(n);
    std::vector<int> target_of(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& inst = split.instances[i];
        tokens_.push_back(model.token_ids(inst.tokens));
        if (!with_explain || inst.complement) continue;
        const auto tit = store.tasks.find(task_id_for(inst.question_id));
        if (tit == store.tasks.end() || tit->second.status != TaskStatus::picked) continue;
        const auto& task = tit->second;
        const auto answer = model.answer_vocab.find(task.shown_answer);
        if (!answer) continue;
        if (static_cast<int>(task.candidate_image_ids.size()) != model.dims.candidates) {
            throw ValidationError("task '" + task.task_id + "' has " + std::to_string(task.candidate_image_ids.size()) +
                                  " candidates, model expects " + std::to_string(model.dims.candidates));
        }
        const auto& pick = store.results.at(task.task_id).outcome.image_id;
        ExplainTarget t;
        t.answer_id = *answer;
        for (std::size_t c = 0; c < task.candidate_image_ids.size(); ++c) {
            const auto& cid = task.candidate_image_ids[c];
            if (cid == pick) t.pick = static_cast<int>(c);
            t.candidates.push_back(store.image(cid).features.values);
        }
        if (t.pick < 0) throw ValidationError("pick of task '" + task.task_id + "' is not among its candidates");
        target_of[i] = static_cast<int>(targets_.size());
        targets_.push_back(std::move(t));
    }
    examples_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& inst = split.instances[i];
        Example ex;
        ex.token_ids = tokens_[i];
        if (model.kind != ModelKind::language_only) ex.features = store.image(inst.image_id).features.values;
        const auto answer = model.answer_vocab.find(inst.answers.consensus);
        ex.answer_id = answer ? *answer : -1;
        ex.explain = target_of[i] >= 0 ? &targets_[static_cast<std::size_t>(target_of[i])] : nullptr;
        examples_.push_back(ex);
    }
}

LossSummary evaluate_loss(const Model& model, const PreparedSet& set, double lambda, double margin) {
    LossSummary s;
    const auto& ex = set.examples();
    if (ex.empty()) return s;
    std::size_t scored = 0;
    std::size_t correct = 0;
    for (const auto& e : ex) {
        if (e.answer_id < 0) continue;  // answer outside the training vocabulary
        const auto t = loss_and_gradient(model.kind, model.params, model.dims, e, lambda, margin, nullptr);
        s.loss += t.total;
        ++scored;
        if (t.predicted == e.answer_id) ++correct;
    }
    s.loss = scored ? s.loss / static_cast<double>(scored) : 0.0;
    s.accuracy = static_cast<double>(correct) / static_cast<double>(ex.size());
    return s;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

void scale(ModelParams& g, double factor) {
    for (auto& b : g.blocks()) {
        for (double& v : b.values) v *= factor;
    }
}

EpochRecord record_epoch(int epoch, const Model& model, const PreparedSet& train, const PreparedSet* val,
                         const TrainConfig& config) {
    EpochRecord r;
    r.epoch = epoch;
    const auto t = evaluate_loss(model, train, config.lambda, config.margin);
    r.train_loss = t.loss;
    r.train_accuracy = t.accuracy;
    if (val) {
        const auto v = evaluate_loss(model, *val, config.lambda, config.margin);
        r.val_loss = v.loss;
        r.val_accuracy = v.accuracy;
    }
    if (!std::isfinite(r.train_loss)) {
        throw TrainingDivergedError("non-finite training loss after epoch " + std::to_string(epoch));
    }
    return r;
}

}  // namespace

TrainResult train_model(Model model, const DataStore& store, const DatasetSplit& train, const TrainConfig& config,
                        const DatasetSplit* val, const TrainHooks& hooks) {
    config.validate();
    TrainResult out;
    out.manifest.config = to_json(config);
    out.manifest.model_kind = std::string(to_string(model.kind));
    out.manifest.dataset_fingerprints["train"] = fingerprint(store, train);
    if (val) out.manifest.dataset_fingerprints["val"] = fingerprint(store, *val);

    if (model.kind == ModelKind::prior) {
        model.prior_answer = predict_prior(train);
        out.manifest.checkpoint_hash = checkpoint_hash(model);
        out.model = std::move(model);
        return out;
    }

    const bool explain = model.kind == ModelKind::counterexample;
    const PreparedSet train_set(model, store, train, explain);
    if (explain && train_set.explain_targets() == 0) {
        throw ValidationError("counterexample model needs explanation tasks with human picks in the training split");
    }
    std::optional<PreparedSet> val_set;
    if (val) val_set.emplace(model, store, *val, explain);
    const PreparedSet* val_ptr = val_set ? &*val_set : nullptr;

    out.manifest.epochs.push_back(record_epoch(0, model, train_set, val_ptr, config));

    Optimizer opt(config.optimizer_config(), model.kind, model.dims);
    ModelParams grads = ModelParams::zeros(model.dims);
    const auto& examples = train_set.examples();
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto batch = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t end = std::min(order.size(), start + batch);
            grads.set_zero();
            for (std::size_t i = start; i < end; ++i) {
                const auto& ex = examples[order[i]];
                if (ex.answer_id < 0) continue;
                const auto t =
                    loss_and_gradient(model.kind, model.params, model.dims, ex, config.lambda, config.margin, &grads);
                if (!std::isfinite(t.total)) {
                    std::ostringstream os;
                    os << "non-finite loss at epoch " << epoch << ", instance '"
                       << train.instances[order[i]].instance_id << "' (cross-entropy " << t.cross_entropy
                       << ", hinge " << t.hinge << ")";
                    throw TrainingDivergedError(os.str());
                }
            }
            scale(grads, 1.0 / static_cast<double>(end - start));
            opt.step(model.params, grads);
            if (!model.params.all_finite()) {
                throw TrainingDivergedError("non-finite parameters after step " + std::to_string(opt.steps()) +
                                            " (epoch " + std::to_string(epoch) + ")");
            }
            if (hooks.on_step) hooks.on_step(opt.steps(), model.params);
        }
        out.manifest.epochs.push_back(record_epoch(epoch, model, train_set, val_ptr, config));
    }

    out.manifest.checkpoint_hash = checkpoint_hash(model);
    out.model = std::move(model);
    return out;
}

TrainResult train(const DataStore& store, const DatasetSplit& train, const TrainConfig& config, ModelKind kind,
                  const DatasetSplit* val, const TrainHooks& hooks) {
    return train_model(init_model(kind, store, train, config), store, train, config, val, hooks);
}

}  // namespace vqab
