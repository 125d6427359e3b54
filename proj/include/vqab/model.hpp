#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vqab {

enum class ModelKind { prior, language_only, joint, counterexample };

std::string_view to_string(ModelKind k);
ModelKind model_kind_from_string(std::string_view s);

/// How the K inner products become K scores: a full KxK affine map, or one
/// scalar affine shared by every candidate.
enum class MixMode { full, shared };

std::string_view to_string(MixMode m);
MixMode mix_mode_from_string(std::string_view s);

struct ModelDims {
    int feature_dim = 0;        // d
    int word_dim = 32;          // e
    int hidden = 64;            // h
    int explain_dim = 32;       // c
    int answer_embed_dim = 32;  // e_a
    int candidates = 24;        // K
    int question_vocab = 0;
    int answer_vocab = 0;
    MixMode mix = MixMode::full;
    bool normalize_image = false;

    bool operator==(const ModelDims&) const = default;
};

struct Affine {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;    // out

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return weight * x + bias; }
    bool operator==(const Affine& o) const { return weight == o.weight && bias == o.bias; }
};

/// A named, contiguous view of one trainable tensor.
template <class T>
struct BasicParamBlock {
    std::string name;
    std::span<T> values;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
};
using ParamBlock = BasicParamBlock<double>;
using ConstParamBlock = BasicParamBlock<const double>;

/// Every trainable tensor of the model zoo. Gradients use the same shape.
struct ModelParams {
    Eigen::MatrixXd word_embeddings;     // |vocab_q| x e
    Affine question_proj;                // e -> h
    Affine image_proj;                   // d -> h
    Affine answer_head;                  // h -> |vocab_a|
    Eigen::MatrixXd answer_embed_table;  // |vocab_a| x e_a
    Affine explain_qi_proj;              // h -> c
    Affine explain_ans_proj;             // e_a -> c
    Affine explain_mix;                  // K -> K, or 1 -> 1 when shared

    static ModelParams zeros(const ModelDims& dims);
    /// Weights uniform in [-scale, scale], biases zero; blocks drawn in blocks() order.
    static ModelParams uniform(const ModelDims& dims, double scale, std::uint64_t seed);

    std::vector<ParamBlock> blocks();
    std::vector<ConstParamBlock> blocks() const;

    void set_zero();
    bool all_finite() const;
    bool operator==(const ModelParams& o) const;
};

/// True for blocks that only the explaining head reads.
bool is_explain_block(std::string_view block_name);

/// Whether `kind` reads (and therefore trains) the named block.
bool block_used_by(ModelKind kind, std::string_view block_name);

/// Intermediate values of the shared base for one (question, image).
struct Encoding {
    Eigen::VectorXd mean_embedding;  // e
    Eigen::VectorXd question;        // h, tanh(question_proj(mean_embedding))
    Eigen::VectorXd image_input;     // d, features (l2-normalized if configured)
    Eigen::VectorXd image;           // h, tanh(image_proj(image_input))
    Eigen::VectorXd joint;           // h, question .* image
};

struct AnswerDistribution {
    Eigen::VectorXd probabilities;
};

struct ScoreVector {
    Eigen::VectorXd scores;  // K, aligned with the task's candidate order
};

Eigen::VectorXd mean_word_embedding(const ModelParams& p, std::span<const int> token_ids);

Encoding encode(const ModelParams& p, const ModelDims& dims, std::span<const int> token_ids,
                std::span<const double> features);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

AnswerDistribution answer_forward(const ModelParams& p, const Eigen::VectorXd& joint);

/// Answer distribution with the image branch replaced by the all-ones vector.
AnswerDistribution language_only_forward(const ModelParams& p, std::span<const int> token_ids);

/// Answer distribution of a trainable model kind (language_only ignores `features`).
AnswerDistribution predict_distribution(ModelKind kind, const ModelParams& p, const ModelDims& dims,
                                        std::span<const int> token_ids, std::span<const double> features);

/// Scores of K candidate images as counter-examples for `answer_id`.
/// Throws ValidationError unless exactly dims.candidates candidates are given.
ScoreVector explain_forward(const ModelParams& p, const ModelDims& dims, std::span<const int> token_ids,
                            int answer_id, std::span<const std::span<const double>> candidates);

struct ExplainTarget {
    std::vector<std::span<const double>> candidates;  // K, task order
    int pick = -1;                                    // index of the human-picked I'
    int answer_id = -1;                               // the answer A being explained
};

struct Example {
    std::span<const int> token_ids;
    std::span<const double> features;
    int answer_id = -1;  // ground-truth (consensus) answer
    const ExplainTarget* explain = nullptr;
};

struct LossTerms {
    double total = 0.0;
    double cross_entropy = 0.0;
    double hinge = 0.0;  // unweighted sum of hinge terms
    int predicted = -1;  // arg-max answer id of the answering head
};

/// Sum over non-picked candidates of max(0, margin - (S[pick] - S[i])).
double hinge_sum(const Eigen::VectorXd& scores, int pick, double margin);

/// Loss of one example and, when `grads` is non-null, its exact gradient added into `grads`.
/// The counterexample kind adds lambda * hinge_sum when the example carries an explain target.
LossTerms loss_and_gradient(ModelKind kind, const ModelParams& p, const ModelDims& dims, const Example& ex,
                            double lambda, double margin, ModelParams* grads);

struct CombinedLoss {
    LossTerms loss;
    ModelParams gradients;
};

/// -log P(A|I,Q) + lambda * sum_i max(0, M - (S(I') - S(I_i))) with exact gradients.
CombinedLoss combined_loss(const ModelParams& p, const ModelDims& dims, const Example& ex, double lambda,
                           double margin);

}  // namespace vqab
