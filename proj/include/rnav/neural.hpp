#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "rnav/common.hpp"
#include "rnav/raycast.hpp"
#include "rnav/rmp.hpp"
#include "rnav/rng.hpp"
#include "rnav/world_io.hpp"

namespace rnav {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct NetworkConfig {
    int n_rays = 1024;
    /// Ray encoder widths after the n_rays input.
    std::vector<int> ray_widths{128, 64};
    /// Goal encoder is one block 4 -> goal_width.
    int goal_width = 64;
    int bottleneck_width = 80;
    int bottleneck_layers = 4;
    bool use_lstm = false;
    /// The LSTM output is added to its input, so this equals bottleneck_width.
    int lstm_width = 80;
    int k_top = 50;
    double leaky_slope = 0.01;
    double ln_eps = 1e-5;
    /// Ray truncation length L used by encode().
    double max_range = 5.0;

    void validate() const;

    /// Full-size widths: ray 512/256, goal 64, bottleneck and LSTM 320.
    static NetworkConfig paper(int n_rays = 1024);
    /// paper() with every width >= 128 divided by 4.
    static NetworkConfig desk(int n_rays = 1024);
};

nlohmann::json to_json(const NetworkConfig& c);
NetworkConfig network_config_from_json(const nlohmann::json& j);
bool operator==(const NetworkConfig& a, const NetworkConfig& b);

/// Linear layer followed by layer normalization (scale gamma, offset beta) and a leaky ReLU.
struct DenseBlock {
    MatrixXd W;
    VectorXd b, gamma, beta;
};

/// Gates stacked as [input, forget, cell, output] along the rows.
struct LstmCell {
    MatrixXd Wx, Wh;
    VectorXd b;
};

struct NetworkParams {
    std::vector<DenseBlock> ray, goal, bottleneck;
    bool has_lstm = false;
    LstmCell lstm;
    MatrixXd dec_W;
    VectorXd dec_b;
};

/// Visits every tensor as (name, Eigen object). Names of recurrent tensors start with "lstm.".
template <class P, class F>
void for_each_tensor(P& p, F&& f) {
    auto blocks = [&](auto& v, const std::string& prefix) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::string n = prefix + "." + std::to_string(i) + ".";
            f(n + "W", v[i].W);
            f(n + "b", v[i].b);
            f(n + "gamma", v[i].gamma);
            f(n + "beta", v[i].beta);
        }
    };
    blocks(p.ray, "ray");
    blocks(p.goal, "goal");
    blocks(p.bottleneck, "bottleneck");
    if (p.has_lstm) {
        f(std::string("lstm.Wx"), p.lstm.Wx);
        f(std::string("lstm.Wh"), p.lstm.Wh);
        f(std::string("lstm.b"), p.lstm.b);
    }
    f(std::string("dec.W"), p.dec_W);
    f(std::string("dec.b"), p.dec_b);
}

inline bool is_lstm_tensor(const std::string& name) { return name.rfind("lstm.", 0) == 0; }

/// Random initialization; the LSTM is added only if config.use_lstm.
NetworkParams init_params(const NetworkConfig& config, Rng& rng);
/// Inserts a freshly initialized LSTM whose output starts near zero, leaving other tensors untouched.
void insert_lstm(NetworkParams& params, const NetworkConfig& config, Rng& rng);
NetworkParams zeros_like(const NetworkParams& p);
std::size_t parameter_count(const NetworkParams& p);
/// Throws ShapeError on any tensor that does not match the config, or on non-finite values.
void check_params(const NetworkParams& p, const NetworkConfig& config);
/// Exact equality of every tensor; with skip_lstm the recurrent tensors are ignored.
bool tensors_equal(const NetworkParams& a, const NetworkParams& b, bool skip_lstm = false);

/// Network input for one step.
struct EncodedInput {
    VectorXd rays_rel;
    Vec3 goal_dir = Vec3::Zero();
    double goal_dist_norm = 0.0;

    Eigen::Vector4d goal_features() const {
        return {goal_dir.x(), goal_dir.y(), goal_dir.z(), goal_dist_norm};
    }
};

/// d / (2L) up to L, sigmoid(2 (d - L) / L) beyond; continuous at L.
double normalize_distance(double d, double L);

EncodedInput encode(const RayBundle& bundle, const Vec3& x, const Vec3& goal);

/// Hidden and cell state, one column per sequence.
struct LstmState {
    MatrixXd h, c;
    static LstmState zeros(int width, int batch = 1) {
        return {MatrixXd::Zero(width, batch), MatrixXd::Zero(width, batch)};
    }
};

// ---- layers (batched: one column per sample) ----

struct BlockTape {
    MatrixXd x, xhat, y;
    Eigen::RowVectorXd inv_std;
};

MatrixXd block_forward(const DenseBlock& blk, const MatrixXd& x, double slope, double eps, BlockTape* tape);
/// Accumulates into `grad` and returns the input gradient (empty if not requested).
MatrixXd block_backward(const DenseBlock& blk, const BlockTape& tape, const MatrixXd& dout, double slope,
                        DenseBlock& grad, bool input_grad = true);

struct LstmStepTape {
    MatrixXd x, h_prev, c_prev, i, f, g, o, c, tanh_c;
};

/// Advances `state` by one step and returns the new hidden state.
MatrixXd lstm_step(const LstmCell& cell, const MatrixXd& x, LstmState& state, LstmStepTape* tape);
/// dh: gradient w.r.t. this step's hidden output (including the carry from t+1);
/// dc: carry from t+1 on entry, carry to t-1 on return. Returns dx; dh_prev is written.
MatrixXd lstm_step_backward(const LstmCell& cell, const LstmStepTape& tape, const MatrixXd& dh, MatrixXd& dc,
                            MatrixXd& dh_prev, LstmCell& grad);

// ---- network ----

/// Encoders and bottleneck: the stateless part of the network.
struct TrunkTape {
    std::vector<BlockTape> ray, goal, bottleneck;
};

/// rays: n_rays x B, goal: 4 x B. Returns bottleneck_width x B latents.
MatrixXd trunk_forward(const NetworkParams& p, const NetworkConfig& c, const MatrixXd& rays, const MatrixXd& goal,
                       TrunkTape* tape);
void trunk_backward(const NetworkParams& p, const NetworkConfig& c, const TrunkTape& tape, const MatrixXd& dlatent,
                    NetworkParams& grad);

/// Optional LSTM (post = pre + h) and the linear decoder over a sequence of steps.
struct HeadTape {
    std::vector<LstmStepTape> lstm;
    std::vector<MatrixXd> post;
};

/// latents[t]: width x B. With an LSTM, `state` is required and advanced.
std::vector<MatrixXd> head_forward(const NetworkParams& p, const NetworkConfig& c,
                                   const std::vector<MatrixXd>& latents, LstmState* state, HeadTape* tape,
                                   std::vector<MatrixXd>* post_latents = nullptr);
/// Backpropagation through time over the taped window; returns gradients w.r.t. latents.
/// With decoder_grad false the decoder tensors are skipped (they are frozen in stage two).
std::vector<MatrixXd> head_backward(const NetworkParams& p, const NetworkConfig& c, const HeadTape& tape,
                                    const std::vector<MatrixXd>& dlogits, NetworkParams& grad,
                                    bool decoder_grad = true);

struct ForwardResult {
    VectorXd logits;
    VectorXd pre_latent;
    VectorXd post_latent;
};

/// One step. `state` must be given iff the network has an LSTM.
ForwardResult forward(const NetworkParams& p, const NetworkConfig& c, const EncodedInput& in, LstmState* state);

// ---- loss and decoding ----

/// Sum over outputs of binary cross-entropy between sigmoid(logit) and the one-hot target.
double bce_loss(const VectorXd& logits, int target, VectorXd* grad = nullptr);
/// Sum of bce_loss over columns whose target is >= 0; other columns get a
/// zero gradient. Gradients are scaled by `grad_scale`; `counted` receives the
/// number of supervised columns.
double bce_loss_sum(const MatrixXd& logits, const std::vector<int>& targets, MatrixXd* grad = nullptr,
                    double grad_scale = 1.0, std::size_t* counted = nullptr);
/// Mean over columns of bce_loss; grad (same shape) is scaled by `grad_scale`.
double bce_loss_batch(const MatrixXd& logits, const std::vector<int>& targets, MatrixXd* grad,
                      double grad_scale = 1.0);

/// Index of the direction closest to y (lowest index on ties); nullopt for a zero label.
std::optional<int> label_one_hot(const Vec3& y, const DirectionSet& set);

/// Softmax over all logits, summed over the k largest (lowest index on ties).
Vec3 decode_topk(const VectorXd& logits, const DirectionSet& set, int k);

/// |post - pre| / (|post - pre| + |pre|), in [0, 1]; 0 when both are zero.
double lstm_influence(const VectorXd& pre, const VectorXd& post);

// ---- optimization ----

struct AdamParams {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Returns true for tensors that must not change.
using FreezeMask = std::function<bool(const std::string&)>;

class Adam {
public:
    Adam(const NetworkParams& like, AdamParams hp) : m_(zeros_like(like)), v_(zeros_like(like)), hp_(hp) {}
    void step(NetworkParams& params, const NetworkParams& grad, const FreezeMask& frozen = nullptr);
    long steps() const { return t_; }

private:
    NetworkParams m_, v_;
    AdamParams hp_;
    long t_ = 0;
};

// ---- checkpoints ----

struct Network {
    NetworkConfig config;
    NetworkParams params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Tensor record: u32 name length, name, u32 rank, u64 dims, f64 row-major data.
void write_tensor(ByteWriter& w, const std::string& name, const MatrixXd& m);
void write_tensor(ByteWriter& w, const std::string& name, const VectorXd& v);
struct RawTensor {
    std::string name;
    std::vector<std::uint64_t> dims;
    std::vector<double> data;
};
RawTensor read_tensor(ByteReader& r);

/// "RNCK", u32 version, u64 length + JSON text {"tool", "network", "meta"}, u32 count, tensors.
std::string encode_checkpoint(const Network& net, const nlohmann::json& meta = nlohmann::json::object());
/// Decodes and validates all shapes before returning; `expected` additionally pins n_rays and use_lstm.
Network decode_checkpoint(const std::string& bytes, const NetworkConfig* expected = nullptr,
                          nlohmann::json* meta = nullptr);
void save_checkpoint(const Network& net, const std::filesystem::path& path,
                     const nlohmann::json& meta = nlohmann::json::object());
Network load_checkpoint(const std::filesystem::path& path, const NetworkConfig* expected = nullptr,
                        nlohmann::json* meta = nullptr);

// ---- planner ----

/// Goal policy driven by the network's decoded direction.
class LearnedPlanner final : public Planner {
public:
    LearnedPlanner(std::shared_ptr<const Network> net, GoalParams p = {});
    std::string name() const override { return net_->config.use_lstm ? "rnn" : "ffn"; }
    void reset() override;
    GoalDecision decide(const RobotState& state, const Vec3& goal, const RayBundle& observed) override;

    /// When set, every decide() appends its pre-LSTM latent.
    void set_latent_log(std::vector<VectorXd>* log) { latent_log_ = log; }

private:
    std::shared_ptr<const Network> net_;
    GoalParams params_;
    LstmState state_;
    std::vector<VectorXd>* latent_log_ = nullptr;
};

}  // namespace rnav
