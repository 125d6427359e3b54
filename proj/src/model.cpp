#include "vqab/model.hpp"

#include <cmath>
#include <random>

#include "vqab/errors.hpp"

namespace vqab {

std::string_view to_string(ModelKind k) {
    switch (k) {
        case ModelKind::prior: return "prior";
        case ModelKind::language_only: return "lang";
        case ModelKind::joint: return "joint";
        case ModelKind::counterexample: return "counterexample";
    }
    return "prior";
}

ModelKind model_kind_from_string(std::string_view s) {
    if (s == "prior") return ModelKind::prior;
    if (s == "lang" || s == "language_only") return ModelKind::language_only;
    if (s == "joint") return ModelKind::joint;
    if (s == "counterexample") return ModelKind::counterexample;
    throw ValidationError("unknown model kind '" + std::string(s) + "'");
}

std::string_view to_string(MixMode m) { return m == MixMode::full ? "full" : "shared"; }

MixMode mix_mode_from_string(std::string_view s) {
    if (s == "full") return MixMode::full;
    if (s == "shared") return MixMode::shared;
    throw ValidationError("unknown mix mode '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Parameter container

namespace {

Affine zero_affine(int out, int in) { return {Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)}; }

template <class Block, class Params>
std::vector<Block> collect_blocks(Params& p) {
    std::vector<Block> out;
    auto add_matrix = [&](const char* name, auto& m) {
        out.push_back({name, {m.data(), static_cast<std::size_t>(m.size())}, m.rows(), m.cols()});
    };
    auto add_affine = [&](const std::string& name, auto& a) {
        out.push_back({name + ".weight", {a.weight.data(), static_cast<std::size_t>(a.weight.size())},
                       a.weight.rows(), a.weight.cols()});
        out.push_back({name + ".bias", {a.bias.data(), static_cast<std::size_t>(a.bias.size())}, a.bias.rows(), 1});
    };
    add_matrix("word_embeddings", p.word_embeddings);
    add_affine("question_proj", p.question_proj);
    add_affine("image_proj", p.image_proj);
    add_affine("answer_head", p.answer_head);
    add_matrix("answer_embed_table", p.answer_embed_table);
    add_affine("explain_qi_proj", p.explain_qi_proj);
    add_affine("explain_ans_proj", p.explain_ans_proj);
    add_affine("explain_mix", p.explain_mix);
    return out;
}

}  // namespace

ModelParams ModelParams::zeros(const ModelDims& d) {
    if (d.feature_dim <= 0 || d.word_dim <= 0 || d.hidden <= 0 || d.explain_dim <= 0 || d.answer_embed_dim <= 0 ||
        d.candidates <= 0 || d.question_vocab <= 0 || d.answer_vocab <= 0) {
        throw ValidationError("model dimensions must all be positive");
    }
    const int mix = d.mix == MixMode::full ? d.candidates : 1;
    ModelParams p;
    p.word_embeddings = Eigen::MatrixXd::Zero(d.question_vocab, d.word_dim);
    p.question_proj = zero_affine(d.hidden, d.word_dim);
    p.image_proj = zero_affine(d.hidden, d.feature_dim);
    p.answer_head = zero_affine(d.answer_vocab, d.hidden);
    p.answer_embed_table = Eigen::MatrixXd::Zero(d.answer_vocab, d.answer_embed_dim);
    p.explain_qi_proj = zero_affine(d.explain_dim, d.hidden);
    p.explain_ans_proj = zero_affine(d.explain_dim, d.answer_embed_dim);
    p.explain_mix = zero_affine(mix, mix);
    return p;
}

ModelParams ModelParams::uniform(const ModelDims& dims, double scale, std::uint64_t seed) {
    if (!(scale > 0.0)) throw ValidationError("init_scale must be positive");
    ModelParams p = zeros(dims);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (auto& b : p.blocks()) {
        if (b.name.ends_with(".bias")) continue;
        for (double& v : b.values) v = dist(rng);
    }
    return p;
}

std::vector<ParamBlock> ModelParams::blocks() { return collect_blocks<ParamBlock>(*this); }
std::vector<ConstParamBlock> ModelParams::blocks() const { return collect_blocks<ConstParamBlock>(*this); }

void ModelParams::set_zero() {
    for (auto& b : blocks()) std::fill(b.values.begin(), b.values.end(), 0.0);
}

bool ModelParams::all_finite() const {
    for (const auto& b : blocks()) {
        for (double v : b.values) {
            if (!std::isfinite(v)) return false;
        }
    }
    return true;
}

bool ModelParams::operator==(const ModelParams& o) const {
    return word_embeddings == o.word_embeddings && question_proj == o.question_proj && image_proj == o.image_proj &&
           answer_head == o.answer_head && answer_embed_table == o.answer_embed_table &&
           explain_qi_proj == o.explain_qi_proj && explain_ans_proj == o.explain_ans_proj &&
           explain_mix == o.explain_mix;
}

bool is_explain_block(std::string_view name) {
    return name.starts_with("answer_embed_table") || name.starts_with("explain_");
}

bool block_used_by(ModelKind kind, std::string_view name) {
    switch (kind) {
        case ModelKind::prior: return false;
        case ModelKind::language_only:
            return name.starts_with("word_embeddings") || name.starts_with("question_proj") ||
                   name.starts_with("answer_head");
        case ModelKind::joint: return !is_explain_block(name);
        case ModelKind::counterexample: return true;
    }
    return false;
}

// ---------------------------------------------------------------------------
// Forward passes

namespace {

Eigen::VectorXd image_input(const ModelDims& dims, std::span<const double> features) {
    if (static_cast<int>(features.size()) != dims.feature_dim) {
        throw ValidationError("feature dimension " + std::to_string(features.size()) + " != model dimension " +
                              std::to_string(dims.feature_dim));
    }
    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(features.data(), static_cast<Eigen::Index>(features.size()));
    if (dims.normalize_image) {
        const double n = x.norm();
        if (n > 0.0) x /= n;
    }
    return x;
}

Eigen::VectorXd tanh_of(const Eigen::VectorXd& v) { return v.array().tanh().matrix(); }

Eigen::VectorXd image_branch(const ModelParams& p, const Eigen::VectorXd& x) { return tanh_of(p.image_proj.apply(x)); }

Eigen::VectorXd mix_scores(const ModelParams& p, const ModelDims& dims, const Eigen::VectorXd& inner) {
    if (dims.mix == MixMode::full) return p.explain_mix.apply(inner);
    return (p.explain_mix.weight(0, 0) * inner.array() + p.explain_mix.bias(0)).matrix();
}

}  // namespace

Eigen::VectorXd mean_word_embedding(const ModelParams& p, std::span<const int> token_ids) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(p.word_embeddings.cols());
    if (token_ids.empty()) return m;
    for (int t : token_ids) {
        if (t < 0 || t >= p.word_embeddings.rows()) throw ValidationError("token id out of range");
        m += p.word_embeddings.row(t).transpose();
    }
    return m / static_cast<double>(token_ids.size());
}

Encoding encode(const ModelParams& p, const ModelDims& dims, std::span<const int> token_ids,
                std::span<const double> features) {
    Encoding e;
    e.mean_embedding = mean_word_embedding(p, token_ids);
    e.question = tanh_of(p.question_proj.apply(e.mean_embedding));
    e.image_input = image_input(dims, features);
    e.image = image_branch(p, e.image_input);
    e.joint = e.question.cwiseProduct(e.image);
    return e;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double mx = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - mx).exp().matrix();
    return e / e.sum();
}

AnswerDistribution answer_forward(const ModelParams& p, const Eigen::VectorXd& joint) {
    return {softmax(p.answer_head.apply(joint))};
}

AnswerDistribution language_only_forward(const ModelParams& p, std::span<const int> token_ids) {
    const Eigen::VectorXd q = tanh_of(p.question_proj.apply(mean_word_embedding(p, token_ids)));
    return answer_forward(p, q);
}

AnswerDistribution predict_distribution(ModelKind kind, const ModelParams& p, const ModelDims& dims,
                                        std::span<const int> token_ids, std::span<const double> features) {
    if (kind == ModelKind::prior) throw ValidationError("the prior model has no answer distribution");
    if (kind == ModelKind::language_only) return language_only_forward(p, token_ids);
    return answer_forward(p, encode(p, dims, token_ids, features).joint);
}

ScoreVector explain_forward(const ModelParams& p, const ModelDims& dims, std::span<const int> token_ids,
                            int answer_id, std::span<const std::span<const double>> candidates) {
    if (static_cast<int>(candidates.size()) != dims.candidates) {
        throw ValidationError("explaining head expects " + std::to_string(dims.candidates) + " candidates, got " +
                              std::to_string(candidates.size()));
    }
    if (answer_id < 0 || answer_id >= p.answer_embed_table.rows()) throw ValidationError("answer id out of range");
    const Eigen::VectorXd q = tanh_of(p.question_proj.apply(mean_word_embedding(p, token_ids)));
    const Eigen::VectorXd a = p.explain_ans_proj.apply(p.answer_embed_table.row(answer_id).transpose());
    Eigen::VectorXd inner(dims.candidates);
    for (int i = 0; i < dims.candidates; ++i) {
        const Eigen::VectorXd joint = q.cwiseProduct(image_branch(p, image_input(dims, candidates[i])));
        inner(i) = p.explain_qi_proj.apply(joint).dot(a);
    }
    return {mix_scores(p, dims, inner)};
}

double hinge_sum(const Eigen::VectorXd& scores, int pick, double margin) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        if (i == pick) continue;
        total += std::max(0.0, margin - (scores(pick) - scores(i)));
    }
    return total;
}

// ---------------------------------------------------------------------------
// Loss and backward pass

namespace {

// dL/d(pre-activation) for y = tanh(pre).
Eigen::VectorXd tanh_backward(const Eigen::VectorXd& y, const Eigen::VectorXd& dy) {
    return dy.cwiseProduct((1.0 - y.array().square()).matrix());
}

void image_backward(const Eigen::VectorXd& x, const Eigen::VectorXd& v, const Eigen::VectorXd& dv, ModelParams& g) {
    const Eigen::VectorXd dpre = tanh_backward(v, dv);
    g.image_proj.weight.noalias() += dpre * x.transpose();
    g.image_proj.bias += dpre;
}

struct CandidateState {
    Eigen::VectorXd x, v, joint, u;
};

}  // namespace

LossTerms loss_and_gradient(ModelKind kind, const ModelParams& p, const ModelDims& dims, const Example& ex,
                            double lambda, double margin, ModelParams* grads) {
    if (kind == ModelKind::prior) throw ValidationError("the prior model has no loss");
    if (ex.answer_id < 0 || ex.answer_id >= p.answer_head.weight.rows()) {
        throw ValidationError("answer id out of range");
    }
    LossTerms terms;

    // Shared base on the original (Q, I).
    const Eigen::VectorXd m = mean_word_embedding(p, ex.token_ids);
    const Eigen::VectorXd q = tanh_of(p.question_proj.apply(m));
    const bool uses_image = kind != ModelKind::language_only;
    Eigen::VectorXd x0, v0, joint0;
    if (uses_image) {
        x0 = image_input(dims, ex.features);
        v0 = image_branch(p, x0);
        joint0 = q.cwiseProduct(v0);
    } else {
        joint0 = q;
    }

    // Answering head: natural-log cross-entropy computed through log-sum-exp.
    const Eigen::VectorXd logits = p.answer_head.apply(joint0);
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    terms.cross_entropy = lse - logits(ex.answer_id);
    {
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < logits.size(); ++i) {
            if (logits(i) > logits(best)) best = i;
        }
        terms.predicted = static_cast<int>(best);
    }

    // Explaining head.
    const bool explain = kind == ModelKind::counterexample && ex.explain != nullptr;
    std::vector<CandidateState> cands;
    Eigen::VectorXd a, inner, scores;
    if (explain) {
        const auto& t = *ex.explain;
        const int k = dims.candidates;
        if (static_cast<int>(t.candidates.size()) != k) {
            throw ValidationError("explain target has " + std::to_string(t.candidates.size()) + " candidates, expected " +
                                  std::to_string(k));
        }
        if (t.pick < 0 || t.pick >= k) throw ValidationError("picked image is not among the candidates");
        if (t.answer_id < 0 || t.answer_id >= p.answer_embed_table.rows()) {
            throw ValidationError("explained answer id out of range");
        }
        a = p.explain_ans_proj.apply(p.answer_embed_table.row(t.answer_id).transpose());
        cands.resize(static_cast<std::size_t>(k));
        inner.resize(k);
        for (int i = 0; i < k; ++i) {
            auto& c = cands[static_cast<std::size_t>(i)];
            c.x = image_input(dims, t.candidates[static_cast<std::size_t>(i)]);
            c.v = image_branch(p, c.x);
            c.joint = q.cwiseProduct(c.v);
            c.u = p.explain_qi_proj.apply(c.joint);
            inner(i) = c.u.dot(a);
        }
        scores = mix_scores(p, dims, inner);
        terms.hinge = hinge_sum(scores, t.pick, margin);
    }
    terms.total = terms.cross_entropy + (explain ? lambda * terms.hinge : 0.0);

    if (!grads) return terms;
    ModelParams& g = *grads;
    Eigen::VectorXd dq = Eigen::VectorXd::Zero(q.size());

    // Cross-entropy backward.
    {
        Eigen::VectorXd dlogits = softmax(logits);
        dlogits(ex.answer_id) -= 1.0;
        g.answer_head.weight.noalias() += dlogits * joint0.transpose();
        g.answer_head.bias += dlogits;
        const Eigen::VectorXd djoint = p.answer_head.weight.transpose() * dlogits;
        if (uses_image) {
            dq += djoint.cwiseProduct(v0);
            image_backward(x0, v0, djoint.cwiseProduct(q), g);
        } else {
            dq += djoint;
        }
    }

    // Hinge backward; lambda == 0 contributes nothing, so it is skipped outright.
    if (explain && lambda != 0.0) {
        const auto& t = *ex.explain;
        const int k = dims.candidates;
        Eigen::VectorXd dscores = Eigen::VectorXd::Zero(k);
        for (int i = 0; i < k; ++i) {
            if (i == t.pick) continue;
            if (margin - (scores(t.pick) - scores(i)) > 0.0) {
                dscores(i) += lambda;
                dscores(t.pick) -= lambda;
            }
        }
        Eigen::VectorXd dinner;
        if (dims.mix == MixMode::full) {
            g.explain_mix.weight.noalias() += dscores * inner.transpose();
            g.explain_mix.bias += dscores;
            dinner = p.explain_mix.weight.transpose() * dscores;
        } else {
            g.explain_mix.weight(0, 0) += dscores.dot(inner);
            g.explain_mix.bias(0) += dscores.sum();
            dinner = p.explain_mix.weight(0, 0) * dscores;
        }
        Eigen::VectorXd da = Eigen::VectorXd::Zero(a.size());
        for (int i = 0; i < k; ++i) {
            const auto& c = cands[static_cast<std::size_t>(i)];
            const double ds = dinner(i);
            if (ds == 0.0) continue;
            const Eigen::VectorXd du = ds * a;
            da += ds * c.u;
            g.explain_qi_proj.weight.noalias() += du * c.joint.transpose();
            g.explain_qi_proj.bias += du;
            const Eigen::VectorXd djoint = p.explain_qi_proj.weight.transpose() * du;
            dq += djoint.cwiseProduct(c.v);
            image_backward(c.x, c.v, djoint.cwiseProduct(q), g);
        }
        const Eigen::VectorXd emb = p.answer_embed_table.row(t.answer_id).transpose();
        g.explain_ans_proj.weight.noalias() += da * emb.transpose();
        g.explain_ans_proj.bias += da;
        g.answer_embed_table.row(t.answer_id) += (p.explain_ans_proj.weight.transpose() * da).transpose();
    }

    // Question branch backward.
    const Eigen::VectorXd dqpre = tanh_backward(q, dq);
    g.question_proj.weight.noalias() += dqpre * m.transpose();
    g.question_proj.bias += dqpre;
    if (!ex.token_ids.empty()) {
        const Eigen::VectorXd dm = p.question_proj.weight.transpose() * dqpre / static_cast<double>(ex.token_ids.size());
        for (int tok : ex.token_ids) g.word_embeddings.row(tok) += dm.transpose();
    }
    return terms;
}

CombinedLoss combined_loss(const ModelParams& p, const ModelDims& dims, const Example& ex, double lambda,
                           double margin) {
    if (!ex.explain) throw ValidationError("combined loss needs an explanation target");
    CombinedLoss out{{}, ModelParams::zeros(dims)};
    out.loss = loss_and_gradient(ModelKind::counterexample, p, dims, ex, lambda, margin, &out.gradients);
    return out;
}

}  // namespace vqab
