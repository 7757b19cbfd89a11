#include "rnav/neural.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace rnav {

using nlohmann::json;

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

MatrixXd sigmoid(const MatrixXd& z) { return z.unaryExpr([](double v) { return sigmoid(v); }); }

void uniform_fill(MatrixXd& m, double a, Rng& rng) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-a, a);
}

DenseBlock make_block(int in, int out, Rng& rng) {
    DenseBlock b;
    b.W.resize(out, in);
    uniform_fill(b.W, std::sqrt(3.0 / in), rng);
    b.b = VectorXd::Zero(out);
    b.gamma = VectorXd::Ones(out);
    b.beta = VectorXd::Zero(out);
    return b;
}

int trunk_input_width(const NetworkConfig& c) { return c.ray_widths.back() + c.goal_width; }

}  // namespace

void NetworkConfig::validate() const {
    if (n_rays < 1) throw ConfigError("n_rays must be >= 1");
    if (ray_widths.empty()) throw ConfigError("ray encoder needs at least one layer");
    for (int w : ray_widths)
        if (w < 1) throw ConfigError("layer widths must be >= 1");
    if (goal_width < 1 || bottleneck_width < 1 || bottleneck_layers < 1) throw ConfigError("layer widths must be >= 1");
    if (k_top < 1 || k_top > n_rays) throw ConfigError("k_top must be in [1, n_rays]");
    if (use_lstm && lstm_width != bottleneck_width) throw ConfigError("lstm_width must equal bottleneck_width");
    if (!(leaky_slope >= 0.0) || !(ln_eps > 0.0) || !(max_range > 0.0)) throw ConfigError("invalid network scalars");
}

NetworkConfig NetworkConfig::paper(int n_rays) {
    NetworkConfig c;
    c.n_rays = n_rays;
    c.ray_widths = {512, 256};
    c.goal_width = 64;
    c.bottleneck_width = 320;
    c.lstm_width = 320;
    c.k_top = std::min(50, n_rays);
    return c;
}

NetworkConfig NetworkConfig::desk(int n_rays) {
    NetworkConfig c = paper(n_rays);
    auto shrink = [](int w) { return w >= 128 ? w / 4 : w; };
    for (int& w : c.ray_widths) w = shrink(w);
    c.goal_width = shrink(c.goal_width);
    c.bottleneck_width = shrink(c.bottleneck_width);
    c.lstm_width = shrink(c.lstm_width);
    return c;
}

json to_json(const NetworkConfig& c) {
    return {{"n_rays", c.n_rays},
            {"ray_widths", c.ray_widths},
            {"goal_width", c.goal_width},
            {"bottleneck_width", c.bottleneck_width},
            {"bottleneck_layers", c.bottleneck_layers},
            {"use_lstm", c.use_lstm},
            {"lstm_width", c.lstm_width},
            {"k_top", c.k_top},
            {"leaky_slope", c.leaky_slope},
            {"ln_eps", c.ln_eps},
            {"max_range", c.max_range}};
}

NetworkConfig network_config_from_json(const json& j) {
    NetworkConfig c;
    try {
        c.n_rays = j.at("n_rays").get<int>();
        c.ray_widths = j.at("ray_widths").get<std::vector<int>>();
        c.goal_width = j.at("goal_width").get<int>();
        c.bottleneck_width = j.at("bottleneck_width").get<int>();
        c.bottleneck_layers = j.at("bottleneck_layers").get<int>();
        c.use_lstm = j.at("use_lstm").get<bool>();
        c.lstm_width = j.at("lstm_width").get<int>();
        c.k_top = j.at("k_top").get<int>();
        c.leaky_slope = j.at("leaky_slope").get<double>();
        c.ln_eps = j.at("ln_eps").get<double>();
        c.max_range = j.at("max_range").get<double>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("network config: ") + e.what());
    }
    c.validate();
    return c;
}

bool operator==(const NetworkConfig& a, const NetworkConfig& b) { return to_json(a) == to_json(b); }

NetworkParams init_params(const NetworkConfig& c, Rng& rng) {
    c.validate();
    NetworkParams p;
    int in = c.n_rays;
    for (int w : c.ray_widths) {
        p.ray.push_back(make_block(in, w, rng));
        in = w;
    }
    p.goal.push_back(make_block(4, c.goal_width, rng));
    in = trunk_input_width(c);
    for (int i = 0; i < c.bottleneck_layers; ++i) {
        p.bottleneck.push_back(make_block(in, c.bottleneck_width, rng));
        in = c.bottleneck_width;
    }
    p.dec_W.resize(c.n_rays, c.bottleneck_width);
    uniform_fill(p.dec_W, std::sqrt(3.0 / c.bottleneck_width), rng);
    // Start at the best constant prediction for a one-hot target among n_rays outputs.
    p.dec_b = VectorXd::Constant(c.n_rays, c.n_rays > 1 ? -std::log(c.n_rays - 1.0) : 0.0);
    if (c.use_lstm) insert_lstm(p, c, rng);
    return p;
}

void insert_lstm(NetworkParams& p, const NetworkConfig& c, Rng& rng) {
    const int H = c.bottleneck_width;
    const double a = 0.1 / std::sqrt(static_cast<double>(H));
    p.has_lstm = true;
    p.lstm.Wx.resize(4 * H, H);
    p.lstm.Wh.resize(4 * H, H);
    uniform_fill(p.lstm.Wx, a, rng);
    uniform_fill(p.lstm.Wh, a, rng);
    p.lstm.b = VectorXd::Zero(4 * H);
    p.lstm.b.segment(H, H).setOnes();
}

NetworkParams zeros_like(const NetworkParams& p) {
    NetworkParams z = p;
    for_each_tensor(z, [](const std::string&, auto& t) { t.setZero(); });
    return z;
}

std::size_t parameter_count(const NetworkParams& p) {
    std::size_t n = 0;
    for_each_tensor(p, [&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
}

namespace {

/// Expected (rows, cols) of every tensor; cols = 0 marks a vector.
std::vector<std::pair<std::string, std::array<Eigen::Index, 2>>> expected_shapes(const NetworkConfig& c) {
    std::vector<std::pair<std::string, std::array<Eigen::Index, 2>>> out;
    auto block = [&](const std::string& n, int in, int w) {
        out.push_back({n + "W", {w, in}});
        out.push_back({n + "b", {w, 0}});
        out.push_back({n + "gamma", {w, 0}});
        out.push_back({n + "beta", {w, 0}});
    };
    int in = c.n_rays;
    for (std::size_t i = 0; i < c.ray_widths.size(); ++i) {
        block("ray." + std::to_string(i) + ".", in, c.ray_widths[i]);
        in = c.ray_widths[i];
    }
    block("goal.0.", 4, c.goal_width);
    in = trunk_input_width(c);
    for (int i = 0; i < c.bottleneck_layers; ++i) {
        block("bottleneck." + std::to_string(i) + ".", in, c.bottleneck_width);
        in = c.bottleneck_width;
    }
    if (c.use_lstm) {
        const int H = c.bottleneck_width;
        out.push_back({"lstm.Wx", {4 * H, H}});
        out.push_back({"lstm.Wh", {4 * H, H}});
        out.push_back({"lstm.b", {4 * H, 0}});
    }
    out.push_back({"dec.W", {c.n_rays, c.bottleneck_width}});
    out.push_back({"dec.b", {c.n_rays, 0}});
    return out;
}

NetworkParams shape_template(const NetworkConfig& c) {
    NetworkParams p;
    p.ray.resize(c.ray_widths.size());
    p.goal.resize(1);
    p.bottleneck.resize(static_cast<std::size_t>(c.bottleneck_layers));
    p.has_lstm = c.use_lstm;
    return p;
}

}  // namespace

void check_params(const NetworkParams& p, const NetworkConfig& c) {
    c.validate();
    if (p.has_lstm != c.use_lstm) throw ShapeError("LSTM presence does not match the network config");
    const auto shapes = expected_shapes(c);
    std::size_t k = 0;
    bool ok = p.ray.size() == c.ray_widths.size() && p.goal.size() == 1 &&
              p.bottleneck.size() == static_cast<std::size_t>(c.bottleneck_layers);
    if (!ok) throw ShapeError("layer count does not match the network config");
    for_each_tensor(p, [&](const std::string& name, const auto& t) {
        const auto& [ename, dims] = shapes.at(k++);
        const Eigen::Index cols = dims[1] == 0 ? 1 : dims[1];
        if (name != ename || t.rows() != dims[0] || t.cols() != cols) {
            throw ShapeError("tensor " + name + " has shape " + std::to_string(t.rows()) + "x" +
                             std::to_string(t.cols()) + ", expected " + std::to_string(dims[0]) + "x" +
                             std::to_string(cols));
        }
        if (!t.allFinite()) throw ShapeError("tensor " + name + " has non-finite values");
    });
}

bool tensors_equal(const NetworkParams& a, const NetworkParams& b, bool skip_lstm) {
    std::map<std::string, const double*> bd;
    std::map<std::string, Eigen::Index> bs;
    for_each_tensor(b, [&](const std::string& n, const auto& t) {
        bd[n] = t.data();
        bs[n] = t.size();
    });
    bool eq = true;
    std::size_t seen = 0;
    for_each_tensor(a, [&](const std::string& n, const auto& t) {
        if (skip_lstm && is_lstm_tensor(n)) return;
        ++seen;
        auto it = bd.find(n);
        if (it == bd.end() || bs[n] != t.size() ||
            !std::equal(t.data(), t.data() + t.size(), it->second)) {
            eq = false;
        }
    });
    std::size_t b_count = 0;
    for (const auto& [n, _] : bd)
        if (!(skip_lstm && is_lstm_tensor(n))) ++b_count;
    return eq && seen == b_count;
}

double normalize_distance(double d, double L) {
    if (d <= L) return d / (2.0 * L);
    return sigmoid(2.0 * (d - L) / L);
}

EncodedInput encode(const RayBundle& bundle, const Vec3& x, const Vec3& goal) {
    EncodedInput in;
    const auto n = static_cast<Eigen::Index>(bundle.distances.size());
    in.rays_rel.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) in.rays_rel[i] = bundle.distances[static_cast<std::size_t>(i)] / bundle.max_range;
    const Vec3 d = goal - x;
    const double dist = d.norm();
    in.goal_dir = dist > 0.0 ? Vec3(d / dist) : Vec3::Zero();
    in.goal_dist_norm = normalize_distance(dist, bundle.max_range);
    return in;
}

// ---- layers ----

MatrixXd block_forward(const DenseBlock& blk, const MatrixXd& x, double slope, double eps, BlockTape* tape) {
    MatrixXd z = blk.W * x;
    z.colwise() += blk.b;
    const Eigen::RowVectorXd mu = z.colwise().mean();
    z.rowwise() -= mu;
    const Eigen::RowVectorXd var = z.array().square().colwise().mean();
    const Eigen::RowVectorXd inv_std = (var.array() + eps).rsqrt();
    MatrixXd xhat = z.array().rowwise() * inv_std.array();
    MatrixXd y = (xhat.array().colwise() * blk.gamma.array()).colwise() + blk.beta.array();
    MatrixXd a = y.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
    if (tape) {
        tape->x = x;
        tape->xhat = std::move(xhat);
        tape->y = std::move(y);
        tape->inv_std = inv_std;
    }
    return a;
}

MatrixXd block_backward(const DenseBlock& blk, const BlockTape& t, const MatrixXd& dout, double slope,
                        DenseBlock& g, bool input_grad) {
    const MatrixXd dy = dout.array() * t.y.unaryExpr([slope](double v) { return v > 0.0 ? 1.0 : slope; }).array();
    g.gamma += (dy.array() * t.xhat.array()).rowwise().sum().matrix();
    g.beta += dy.rowwise().sum();
    const MatrixXd dxhat = dy.array().colwise() * blk.gamma.array();
    const Eigen::RowVectorXd m1 = dxhat.colwise().mean();
    const Eigen::RowVectorXd m2 = (dxhat.array() * t.xhat.array()).colwise().mean();
    MatrixXd dz = dxhat;
    dz.rowwise() -= m1;
    dz.array() -= t.xhat.array().rowwise() * m2.array();
    dz.array().rowwise() *= t.inv_std.array();
    g.W.noalias() += dz * t.x.transpose();
    g.b += dz.rowwise().sum();
    if (!input_grad) return {};
    return blk.W.transpose() * dz;
}

MatrixXd lstm_step(const LstmCell& cell, const MatrixXd& x, LstmState& s, LstmStepTape* tape) {
    const Eigen::Index H = cell.Wh.cols();
    MatrixXd z = cell.Wx * x;
    z.noalias() += cell.Wh * s.h;
    z.colwise() += cell.b;
    MatrixXd i = sigmoid(z.topRows(H));
    MatrixXd f = sigmoid(z.middleRows(H, H));
    MatrixXd g = z.middleRows(2 * H, H).array().tanh();
    MatrixXd o = sigmoid(z.bottomRows(H));
    MatrixXd c = f.array() * s.c.array() + i.array() * g.array();
    MatrixXd tc = c.array().tanh();
    MatrixXd h = o.array() * tc.array();
    if (tape) {
        tape->x = x;
        tape->h_prev = s.h;
        tape->c_prev = s.c;
        tape->i = std::move(i);
        tape->f = std::move(f);
        tape->g = std::move(g);
        tape->o = std::move(o);
        tape->c = c;
        tape->tanh_c = std::move(tc);
    }
    s.c = std::move(c);
    s.h = h;
    return h;
}

MatrixXd lstm_step_backward(const LstmCell& cell, const LstmStepTape& t, const MatrixXd& dh, MatrixXd& dc,
                            MatrixXd& dh_prev, LstmCell& grad) {
    const Eigen::Index H = cell.Wh.cols();
    const Eigen::Index B = dh.cols();
    const Eigen::ArrayXXd dct =
        dc.array() + dh.array() * t.o.array() * (1.0 - t.tanh_c.array().square());
    MatrixXd dz(4 * H, B);
    dz.topRows(H) = dct * t.g.array() * t.i.array() * (1.0 - t.i.array());
    dz.middleRows(H, H) = dct * t.c_prev.array() * t.f.array() * (1.0 - t.f.array());
    dz.middleRows(2 * H, H) = dct * t.i.array() * (1.0 - t.g.array().square());
    dz.bottomRows(H) = dh.array() * t.tanh_c.array() * t.o.array() * (1.0 - t.o.array());
    dc = dct * t.f.array();
    grad.Wx.noalias() += dz * t.x.transpose();
    grad.Wh.noalias() += dz * t.h_prev.transpose();
    grad.b += dz.rowwise().sum();
    dh_prev = cell.Wh.transpose() * dz;
    return cell.Wx.transpose() * dz;
}

// ---- network ----

MatrixXd trunk_forward(const NetworkParams& p, const NetworkConfig& c, const MatrixXd& rays, const MatrixXd& goal,
                       TrunkTape* tape) {
    if (rays.rows() != c.n_rays || goal.rows() != 4 || rays.cols() != goal.cols()) {
        throw ShapeError("network input has " + std::to_string(rays.rows()) + " rays, expected " +
                         std::to_string(c.n_rays));
    }
    if (tape) {
        tape->ray.resize(p.ray.size());
        tape->goal.resize(p.goal.size());
        tape->bottleneck.resize(p.bottleneck.size());
    }
    MatrixXd r = rays;
    for (std::size_t i = 0; i < p.ray.size(); ++i)
        r = block_forward(p.ray[i], r, c.leaky_slope, c.ln_eps, tape ? &tape->ray[i] : nullptr);
    MatrixXd g = goal;
    for (std::size_t i = 0; i < p.goal.size(); ++i)
        g = block_forward(p.goal[i], g, c.leaky_slope, c.ln_eps, tape ? &tape->goal[i] : nullptr);
    MatrixXd z(r.rows() + g.rows(), r.cols());
    z.topRows(r.rows()) = r;
    z.bottomRows(g.rows()) = g;
    for (std::size_t i = 0; i < p.bottleneck.size(); ++i)
        z = block_forward(p.bottleneck[i], z, c.leaky_slope, c.ln_eps, tape ? &tape->bottleneck[i] : nullptr);
    return z;
}

void trunk_backward(const NetworkParams& p, const NetworkConfig& c, const TrunkTape& t, const MatrixXd& dlatent,
                    NetworkParams& grad) {
    MatrixXd d = dlatent;
    for (std::size_t i = p.bottleneck.size(); i-- > 0;)
        d = block_backward(p.bottleneck[i], t.bottleneck[i], d, c.leaky_slope, grad.bottleneck[i]);
    const Eigen::Index rw = c.ray_widths.back();
    MatrixXd dr = d.topRows(rw);
    MatrixXd dg = d.bottomRows(d.rows() - rw);
    for (std::size_t i = p.ray.size(); i-- > 0;)
        dr = block_backward(p.ray[i], t.ray[i], dr, c.leaky_slope, grad.ray[i], i > 0);
    for (std::size_t i = p.goal.size(); i-- > 0;)
        dg = block_backward(p.goal[i], t.goal[i], dg, c.leaky_slope, grad.goal[i], i > 0);
}

std::vector<MatrixXd> head_forward(const NetworkParams& p, const NetworkConfig& c, const std::vector<MatrixXd>& latents,
                                   LstmState* state, HeadTape* tape, std::vector<MatrixXd>* post_latents) {
    (void)c;
    if (p.has_lstm && !state) throw ShapeError("recurrent network needs a state");
    if (!p.has_lstm && state) throw ShapeError("feed-forward network takes no recurrent state");
    std::vector<MatrixXd> logits;
    logits.reserve(latents.size());
    if (tape) {
        tape->lstm.assign(p.has_lstm ? latents.size() : 0, {});
        tape->post.clear();
    }
    if (post_latents) post_latents->clear();
    for (std::size_t t = 0; t < latents.size(); ++t) {
        MatrixXd post = latents[t];
        if (p.has_lstm) post += lstm_step(p.lstm, latents[t], *state, tape ? &tape->lstm[t] : nullptr);
        MatrixXd l = p.dec_W * post;
        l.colwise() += p.dec_b;
        logits.push_back(std::move(l));
        if (post_latents) post_latents->push_back(post);
        if (tape) tape->post.push_back(std::move(post));
    }
    return logits;
}

std::vector<MatrixXd> head_backward(const NetworkParams& p, const NetworkConfig&, const HeadTape& tape,
                                    const std::vector<MatrixXd>& dlogits, NetworkParams& grad, bool decoder_grad) {
    const std::size_t T = dlogits.size();
    std::vector<MatrixXd> dlat(T);
    for (std::size_t t = 0; t < T; ++t) {
        if (decoder_grad) {
            grad.dec_W.noalias() += dlogits[t] * tape.post[t].transpose();
            grad.dec_b += dlogits[t].rowwise().sum();
        }
        dlat[t] = p.dec_W.transpose() * dlogits[t];
    }
    if (!p.has_lstm || T == 0) return dlat;
    const Eigen::Index H = p.lstm.Wh.cols();
    const Eigen::Index B = dlogits[0].cols();
    MatrixXd dh_carry = MatrixXd::Zero(H, B);
    MatrixXd dc = MatrixXd::Zero(H, B);
    MatrixXd dh_prev;
    for (std::size_t t = T; t-- > 0;) {
        const MatrixXd dh = dlat[t] + dh_carry;
        dlat[t] += lstm_step_backward(p.lstm, tape.lstm[t], dh, dc, dh_prev, grad.lstm);
        dh_carry = dh_prev;
    }
    return dlat;
}

ForwardResult forward(const NetworkParams& p, const NetworkConfig& c, const EncodedInput& in, LstmState* state) {
    if (in.rays_rel.size() != c.n_rays) {
        throw ShapeError("input has " + std::to_string(in.rays_rel.size()) + " rays, network expects " +
                         std::to_string(c.n_rays));
    }
    ForwardResult r;
    const MatrixXd g = in.goal_features();
    const MatrixXd latent = trunk_forward(p, c, in.rays_rel, g, nullptr);
    std::vector<MatrixXd> post;
    const auto logits = head_forward(p, c, {latent}, state, nullptr, &post);
    r.logits = logits[0].col(0);
    r.pre_latent = latent.col(0);
    r.post_latent = post[0].col(0);
    return r;
}

// ---- loss and decoding ----

double bce_loss_sum(const MatrixXd& logits, const std::vector<int>& targets, MatrixXd* grad, double grad_scale,
                    std::size_t* counted) {
    const Eigen::Index N = logits.rows();
    const Eigen::Index B = logits.cols();
    if (static_cast<std::size_t>(B) != targets.size()) throw ShapeError("target count does not match batch");
    if (grad) grad->setZero(N, B);
    double total = 0.0;
    std::size_t n = 0;
    for (Eigen::Index j = 0; j < B; ++j) {
        const int target = targets[static_cast<std::size_t>(j)];
        if (target < 0) continue;
        if (target >= N) throw ShapeError("target index out of range");
        const auto z = logits.col(j).array();
        // softplus(z) - z t with softplus(z) = max(z, 0) + log(1 + exp(-|z|))
        const Eigen::ArrayXd e = (-z.abs()).exp();
        total += (z.max(0.0) + (1.0 + e).log()).sum() - z[target];
        if (grad) {
            auto g = grad->col(j).array();
            g = (z >= 0.0).select(1.0 / (1.0 + e), e / (1.0 + e)) * grad_scale;
            g[target] -= grad_scale;
        }
        ++n;
    }
    if (counted) *counted = n;
    return total;
}

double bce_loss(const VectorXd& z, int target, VectorXd* grad) {
    if (target < 0 || target >= z.size()) throw ShapeError("target index out of range");
    MatrixXd g;
    const double l = bce_loss_sum(z, {target}, grad ? &g : nullptr);
    if (grad) *grad = g.col(0);
    return l;
}

double bce_loss_batch(const MatrixXd& logits, const std::vector<int>& targets, MatrixXd* grad, double grad_scale) {
    for (int t : targets)
        if (t < 0) throw ShapeError("target index out of range");
    if (logits.cols() == 0) return 0.0;
    return bce_loss_sum(logits, targets, grad, grad_scale) / static_cast<double>(logits.cols());
}

std::optional<int> label_one_hot(const Vec3& y, const DirectionSet& set) {
    if (!(y.norm() > 0.0) || set.size() == 0) return std::nullopt;
    int best = 0;
    double best_dot = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < set.size(); ++i) {
        const double d = y.dot(set.directions[i]);
        if (d > best_dot) {
            best_dot = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

Vec3 decode_topk(const VectorXd& logits, const DirectionSet& set, int k) {
    const auto n = logits.size();
    if (static_cast<std::size_t>(n) != set.size()) throw ShapeError("logit count does not match direction set");
    if (k < 1 || k > n) throw ConfigError("k must be in [1, N]");
    const double mx = logits.maxCoeff();
    const VectorXd e = (logits.array() - mx).exp();
    const double z = e.sum();
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
        return logits[a] > logits[b] || (logits[a] == logits[b] && a < b);
    });
    Vec3 y = Vec3::Zero();
    for (int j = 0; j < k; ++j) {
        const int i = idx[static_cast<std::size_t>(j)];
        y += (e[i] / z) * set.directions[static_cast<std::size_t>(i)];
    }
    return y;
}

double lstm_influence(const VectorXd& pre, const VectorXd& post) {
    const double delta = (post - pre).norm();
    const double denom = delta + pre.norm();
    return denom > 0.0 ? delta / denom : 0.0;
}

// ---- optimization ----

void Adam::step(NetworkParams& params, const NetworkParams& grad, const FreezeMask& frozen) {
    ++t_;
    const double bc1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(t_));
    std::map<std::string, std::array<double*, 3>> slots;
    for_each_tensor(m_, [&](const std::string& n, auto& t) { slots[n][0] = t.data(); });
    for_each_tensor(v_, [&](const std::string& n, auto& t) { slots[n][1] = t.data(); });
    std::map<std::string, const double*> gd;
    for_each_tensor(grad, [&](const std::string& n, const auto& t) { gd[n] = t.data(); });
    for_each_tensor(params, [&](const std::string& n, auto& t) {
        if (frozen && frozen(n)) return;
        auto it = slots.find(n);
        auto git = gd.find(n);
        if (it == slots.end() || git == gd.end()) throw ShapeError("optimizer state has no tensor " + n);
        double* m = it->second[0];
        double* v = it->second[1];
        const double* g = git->second;
        double* w = t.data();
        for (Eigen::Index i = 0; i < t.size(); ++i) {
            m[i] = hp_.beta1 * m[i] + (1.0 - hp_.beta1) * g[i];
            v[i] = hp_.beta2 * v[i] + (1.0 - hp_.beta2) * g[i] * g[i];
            w[i] -= hp_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + hp_.eps);
        }
    });
}

// ---- checkpoints ----

namespace {

void write_tensor_raw(ByteWriter& w, const std::string& name, std::vector<std::uint64_t> dims, const MatrixXd& m) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) w.u64(d);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
}

constexpr std::uint64_t kMaxTensorElements = std::uint64_t{1} << 32;

}  // namespace

void write_tensor(ByteWriter& w, const std::string& name, const MatrixXd& m) {
    write_tensor_raw(w, name, {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, m);
}

void write_tensor(ByteWriter& w, const std::string& name, const VectorXd& v) {
    write_tensor_raw(w, name, {static_cast<std::uint64_t>(v.size())}, v);
}

RawTensor read_tensor(ByteReader& r) {
    RawTensor t;
    const std::uint32_t nlen = r.u32();
    if (nlen > 4096) throw ParseError("tensor name too long at offset " + std::to_string(r.offset()));
    t.name = r.bytes(nlen);
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw ParseError("tensor " + t.name + " has implausible rank");
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        t.dims.push_back(r.u64());
        count *= t.dims.back();
        if (count > kMaxTensorElements) throw ParseError("tensor " + t.name + " is implausibly large");
    }
    t.data.resize(count);
    for (auto& v : t.data) v = r.f64();
    return t;
}

std::string encode_checkpoint(const Network& net, const json& meta) {
    check_params(net.params, net.config);
    ByteWriter w;
    w.bytes("RNCK");
    w.u32(kCheckpointVersion);
    const std::string header = json{{"tool", kToolVersion}, {"network", to_json(net.config)}, {"meta", meta}}.dump();
    w.u64(header.size());
    w.bytes(header);
    w.u32(static_cast<std::uint32_t>(expected_shapes(net.config).size()));
    for_each_tensor(net.params, [&](const std::string& n, const auto& t) { write_tensor(w, n, t); });
    return w.str();
}

Network decode_checkpoint(const std::string& bytes, const NetworkConfig* expected, json* meta) {
    ByteReader r(bytes);
    if (bytes.size() < 4 || r.bytes(4) != "RNCK") throw ParseError("not a checkpoint (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw VersionError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                           std::to_string(kCheckpointVersion) + ")");
    }
    const std::uint64_t hlen = r.u64();
    if (hlen > bytes.size()) throw ParseError("checkpoint header length exceeds file size");
    json header;
    try {
        header = json::parse(r.bytes(static_cast<std::size_t>(hlen)));
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint header: ") + e.what());
    }
    if (!header.contains("network")) throw ParseError("checkpoint header has no network config");
    Network net;
    net.config = network_config_from_json(header["network"]);
    if (expected) {
        if (expected->n_rays != net.config.n_rays) {
            throw ShapeError("checkpoint has n_rays " + std::to_string(net.config.n_rays) + ", expected " +
                             std::to_string(expected->n_rays));
        }
    }
    const std::uint32_t count = r.u32();
    std::map<std::string, RawTensor> tensors;
    for (std::uint32_t i = 0; i < count; ++i) {
        RawTensor t = read_tensor(r);
        std::string name = t.name;
        if (!tensors.emplace(name, std::move(t)).second) throw ParseError("duplicate tensor " + name);
    }
    if (!r.done()) throw ParseError("trailing bytes after checkpoint tensors");
    const auto shapes = expected_shapes(net.config);
    if (tensors.size() != shapes.size()) {
        throw ShapeError("checkpoint has " + std::to_string(tensors.size()) + " tensors, config implies " +
                         std::to_string(shapes.size()));
    }
    NetworkParams p = shape_template(net.config);
    std::size_t k = 0;
    for_each_tensor(p, [&](const std::string& n, auto& t) {
        const auto& [ename, dims] = shapes.at(k++);
        auto it = tensors.find(n);
        if (it == tensors.end()) throw ShapeError("checkpoint is missing tensor " + n);
        const RawTensor& raw = it->second;
        const bool vec = dims[1] == 0;
        const bool ok = vec ? (raw.dims.size() == 1 && raw.dims[0] == static_cast<std::uint64_t>(dims[0]))
                            : (raw.dims.size() == 2 && raw.dims[0] == static_cast<std::uint64_t>(dims[0]) &&
                               raw.dims[1] == static_cast<std::uint64_t>(dims[1]));
        if (!ok) throw ShapeError("tensor " + n + " has the wrong shape for the network config");
        const Eigen::Index rows = dims[0];
        const Eigen::Index cols = vec ? 1 : dims[1];
        t.resize(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) t(i, j) = raw.data[static_cast<std::size_t>(i * cols + j)];
    });
    check_params(p, net.config);
    net.params = std::move(p);
    if (meta) *meta = header.value("meta", json::object());
    return net;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path, const json& meta) {
    write_file(path, encode_checkpoint(net, meta));
}

Network load_checkpoint(const std::filesystem::path& path, const NetworkConfig* expected, json* meta) {
    return decode_checkpoint(read_file(path), expected, meta);
}

// ---- planner ----

LearnedPlanner::LearnedPlanner(std::shared_ptr<const Network> net, GoalParams p) : net_(std::move(net)), params_(p) {
    check_params(net_->params, net_->config);
    reset();
}

void LearnedPlanner::reset() {
    if (net_->params.has_lstm) state_ = LstmState::zeros(net_->config.bottleneck_width);
}

GoalDecision LearnedPlanner::decide(const RobotState& state, const Vec3& goal, const RayBundle& observed) {
    const auto& c = net_->config;
    if (observed.set->size() != static_cast<std::size_t>(c.n_rays)) {
        throw ShapeError("planner network expects " + std::to_string(c.n_rays) + " rays, got " +
                         std::to_string(observed.set->size()));
    }
    const EncodedInput in = encode(observed, state.x, goal);
    const ForwardResult fr = forward(net_->params, c, in, net_->params.has_lstm ? &state_ : nullptr);
    if (latent_log_) latent_log_->push_back(fr.pre_latent);
    GoalDecision d;
    d.direction = decode_topk(fr.logits, *observed.set, c.k_top);
    d.policy = learned_goal_policy(state, goal, d.direction, params_);
    if (net_->params.has_lstm) d.lstm_influence = lstm_influence(fr.pre_latent, fr.post_latent);
    return d;
}

}  // namespace rnav
