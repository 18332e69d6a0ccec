// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "mtlvqe/core/rng.hpp"
#include "mtlvqe/core/tensor.hpp"
#include "mtlvqe/net/config.hpp"
#include "mtlvqe/net/conv.hpp"

namespace mtlvqe {

enum class ParamGroup { Trunk, HeadSR, HeadQE };

inline const char* param_group_name(ParamGroup g) {
    switch (g) {
        case ParamGroup::Trunk: return "trunk";
        case ParamGroup::HeadSR: return "head_sr";
        case ParamGroup::HeadQE: return "head_qe";
    }
    return "?";
}

template <typename Scalar>
struct ParamRef {
    std::string name;
    ParamGroup group;
    RowMat<Scalar>* tensor;
};

/// Per-parameter gradient buffers, aligned with Model::params() order.
template <typename Scalar>
struct GradStore {
    std::vector<RowMat<Scalar>> g;

    void set_zero() {
        for (auto& m : g) m.setZero();
    }
};

/// Records intermediate activations requested by name during a forward pass.
/// Convolution outputs are also published as conv_<i> in forward order
/// (trunk, then SR head, then QE head).
template <typename Scalar>
struct TapRecorder {
    std::set<std::string> wanted;
    std::map<std::string, Tensor3<Scalar>> taps;
    int conv_idx = 0;

    void note(const std::string& name, const Tensor3<Scalar>& t) {
        if (wanted.count(name)) taps[name] = t;
    }
    void conv(const std::string& sym, const Tensor3<Scalar>& t) {
        ++conv_idx;
        note("conv_" + std::to_string(conv_idx), t);
        note(sym, t);
    }
};

template <typename Scalar>
struct ResBlock {
    Conv2d<Scalar> conv1, conv2;
};

template <typename Scalar>
struct BlockCache {
    Tensor3<Scalar> in;  // block input (= conv1 input)
    Tensor3<Scalar> h1;  // relu(conv1(in)) (= conv2 input, relu mask)
};

template <typename Scalar>
struct TrunkCache {
    Tensor3<Scalar> x;   // network input
    Tensor3<Scalar> x0;  // conv_in output (long-skip source)
    std::vector<BlockCache<Scalar>> blocks;
    Tensor3<Scalar> body_out;  // conv_post input
};

template <typename Scalar>
struct SrCache {
    Tensor3<Scalar> y;                        // trunk features
    std::vector<Tensor3<Scalar>> stage_in;    // input of each expansion conv
    Tensor3<Scalar> shuffled;                 // input of the final conv
};

template <typename Scalar>
struct QeCache {
    Tensor3<Scalar> y;  // hidden conv input
    Tensor3<Scalar> h;  // relu(hidden(y)) (= out conv input, relu mask)
};

/// Shared-trunk network with task-specific SR and QE heads.
///
/// Trunk: conv_in, B residual blocks (conv-ReLU-conv + shortcut), conv_post,
/// and a long skip adding the conv_in output to the conv_post output.
/// SR head: per upscale stage a width -> width*s^2 expansion conv followed by
/// pixel shuffle, then a final conv to out_channels. QE head: the same shape
/// without upscaling: one width -> width conv, ReLU, final conv.
///
/// Forward passes are const and reentrant; activation caches live with the
/// caller.
template <typename Scalar>
class Model {
public:
    explicit Model(NetworkConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        const int w = cfg_.trunk_width;
        const int k = cfg_.kernel_size;
        conv_in_ = Conv2d<Scalar>(cfg_.in_channels, w, k);
        blocks_.resize(cfg_.num_blocks);
        for (auto& b : blocks_) {
            b.conv1 = Conv2d<Scalar>(w, w, k);
            b.conv2 = Conv2d<Scalar>(w, w, k);
        }
        conv_post_ = Conv2d<Scalar>(w, w, k);
        if (cfg_.head_sr) {
            for (int s : cfg_.sr_stages()) sr_expand_.emplace_back(w, w * s * s, k);
            sr_out_ = Conv2d<Scalar>(w, cfg_.out_channels, k);
        }
        if (cfg_.head_qe) {
            qe_hidden_ = Conv2d<Scalar>(w, w, k);
            qe_out_ = Conv2d<Scalar>(w, cfg_.out_channels, k);
        }
        build_param_table();
    }

    // Parameter entries point into this object's own layers, so copies and
    // moves rebuild the table instead of inheriting the source's pointers.
    Model(const Model& other)
        : cfg_(other.cfg_),
          conv_in_(other.conv_in_),
          conv_post_(other.conv_post_),
          blocks_(other.blocks_),
          sr_expand_(other.sr_expand_),
          sr_out_(other.sr_out_),
          qe_hidden_(other.qe_hidden_),
          qe_out_(other.qe_out_) {
        build_param_table();
    }

    Model(Model&& other) noexcept
        : cfg_(std::move(other.cfg_)),
          conv_in_(std::move(other.conv_in_)),
          conv_post_(std::move(other.conv_post_)),
          blocks_(std::move(other.blocks_)),
          sr_expand_(std::move(other.sr_expand_)),
          sr_out_(std::move(other.sr_out_)),
          qe_hidden_(std::move(other.qe_hidden_)),
          qe_out_(std::move(other.qe_out_)) {
        build_param_table();
        other.params_.clear();
    }

    Model& operator=(const Model& other) {
        if (this != &other) {
            cfg_ = other.cfg_;
            conv_in_ = other.conv_in_;
            conv_post_ = other.conv_post_;
            blocks_ = other.blocks_;
            sr_expand_ = other.sr_expand_;
            sr_out_ = other.sr_out_;
            qe_hidden_ = other.qe_hidden_;
            qe_out_ = other.qe_out_;
            build_param_table();
        }
        return *this;
    }

    Model& operator=(Model&& other) noexcept {
        if (this != &other) {
            cfg_ = std::move(other.cfg_);
            conv_in_ = std::move(other.conv_in_);
            conv_post_ = std::move(other.conv_post_);
            blocks_ = std::move(other.blocks_);
            sr_expand_ = std::move(other.sr_expand_);
            sr_out_ = std::move(other.sr_out_);
            qe_hidden_ = std::move(other.qe_hidden_);
            qe_out_ = std::move(other.qe_out_);
            build_param_table();
            other.params_.clear();
        }
        return *this;
    }

    const NetworkConfig& config() const { return cfg_; }

    /// Fan-in scaled uniform init, deterministic under `seed`.
    void init_weights(std::uint64_t seed) {
        std::mt19937_64 rng(derive_seed(seed, "init"));
        for (auto& p : params_) fill_uniform(rng, *p.tensor, p.name);
    }

    const std::vector<ParamRef<Scalar>>& params() const { return params_; }

    RowMat<Scalar>& param(const std::string& name) {
        for (auto& p : params_)
            if (p.name == name) return *p.tensor;
        throw ConfigError("unknown parameter name: " + name);
    }

    GradStore<Scalar> make_grad_store() const {
        GradStore<Scalar> gs;
        gs.g.reserve(params_.size());
        for (const auto& p : params_) gs.g.push_back(RowMat<Scalar>::Zero(p.tensor->rows(), p.tensor->cols()));
        return gs;
    }

    Eigen::Index count_parameters(ParamGroup group) const {
        Eigen::Index n = 0;
        for (const auto& p : params_)
            if (p.group == group) n += p.tensor->size();
        return n;
    }

    Eigen::Index count_parameters_all() const {
        Eigen::Index n = 0;
        for (const auto& p : params_) n += p.tensor->size();
        return n;
    }

    // ---- forward ----

    Tensor3<Scalar> forward_shared(const Tensor3<Scalar>& x, TrunkCache<Scalar>* cache = nullptr,
                                   TapRecorder<Scalar>* rec = nullptr) const {
        if (x.c != cfg_.in_channels)
            throw ShapeError("forward_shared: expected " + std::to_string(cfg_.in_channels) +
                             " input channels, got " + std::to_string(x.c));
        if (cache) {
            cache->x = x;
            cache->blocks.clear();
            cache->blocks.reserve(blocks_.size());
        }
        Tensor3<Scalar> x0 = conv2d_forward(conv_in_, x);
        if (rec) rec->conv("conv_in", x0);
        if (cache) cache->x0 = x0;
        Tensor3<Scalar> cur = x0;
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const auto& b = blocks_[i];
            Tensor3<Scalar> z1 = conv2d_forward(b.conv1, cur);
            if (rec) rec->conv("rb_" + std::to_string(i + 1) + "_conv1", z1);
            Tensor3<Scalar> h1 = relu(z1);
            Tensor3<Scalar> z2 = conv2d_forward(b.conv2, h1);
            if (rec) rec->conv("rb_" + std::to_string(i + 1) + "_conv2", z2);
            if (cache) cache->blocks.push_back({cur, h1});
            z2.data += cur.data;  // short skip
            cur = std::move(z2);
            if (rec) rec->note("rb_" + std::to_string(i + 1), cur);
        }
        if (cache) cache->body_out = cur;
        Tensor3<Scalar> post = conv2d_forward(conv_post_, cur);
        if (rec) rec->conv("conv_post", post);
        post.data += x0.data;  // long skip
        if (rec) rec->note("trunk_out", post);
        return post;
    }

    Tensor3<Scalar> forward_sr(const Tensor3<Scalar>& y, SrCache<Scalar>* cache = nullptr,
                               TapRecorder<Scalar>* rec = nullptr) const {
        require_sr();
        check_trunk_features("forward_sr", y);
        if (cache) {
            cache->y = y;
            cache->stage_in.clear();
        }
        Tensor3<Scalar> cur = y;
        const auto stages = cfg_.sr_stages();
        for (std::size_t i = 0; i < sr_expand_.size(); ++i) {
            if (cache) cache->stage_in.push_back(cur);
            Tensor3<Scalar> e = conv2d_forward(sr_expand_[i], cur);
            if (rec) rec->conv("sr_expand_" + std::to_string(i + 1), e);
            cur = pixel_shuffle(e, stages[i]);
            if (rec) rec->note("sr_shuffle_" + std::to_string(i + 1), cur);
        }
        if (cache) cache->shuffled = cur;
        Tensor3<Scalar> out = conv2d_forward(sr_out_, cur);
        if (rec) rec->conv("sr_out", out);
        return out;
    }

    Tensor3<Scalar> forward_qe(const Tensor3<Scalar>& y, QeCache<Scalar>* cache = nullptr,
                               TapRecorder<Scalar>* rec = nullptr) const {
        require_qe();
        check_trunk_features("forward_qe", y);
        Tensor3<Scalar> z = conv2d_forward(qe_hidden_, y);
        if (rec) rec->conv("qe_hidden", z);
        Tensor3<Scalar> h = relu(z);
        if (cache) {
            cache->y = y;
            cache->h = h;
        }
        Tensor3<Scalar> out = conv2d_forward(qe_out_, h);
        if (rec) rec->conv("qe_out", out);
        return out;
    }

    // ---- backward (accumulate into GradStore, params() order) ----

    /// dL/dy given dL/d(sr output).
    Tensor3<Scalar> backward_sr(const SrCache<Scalar>& cache, const Tensor3<Scalar>& grad_out,
                                GradStore<Scalar>& gs) const {
        require_sr();
        Tensor3<Scalar> g = conv2d_backward(sr_out_, cache.shuffled, grad_out, grad_w(gs, "head_sr.out.weight"),
                                            grad_w(gs, "head_sr.out.bias"));
        const auto stages = cfg_.sr_stages();
        for (int i = static_cast<int>(sr_expand_.size()) - 1; i >= 0; --i) {
            Tensor3<Scalar> ge = pixel_unshuffle(g, stages[i]);
            const std::string base = "head_sr.expand" + std::to_string(i + 1);
            g = conv2d_backward(sr_expand_[i], cache.stage_in[i], ge, grad_w(gs, base + ".weight"),
                                grad_w(gs, base + ".bias"));
        }
        return g;
    }

    /// dL/dy given dL/d(qe output).
    Tensor3<Scalar> backward_qe(const QeCache<Scalar>& cache, const Tensor3<Scalar>& grad_out,
                                GradStore<Scalar>& gs) const {
        require_qe();
        Tensor3<Scalar> gh = conv2d_backward(qe_out_, cache.h, grad_out, grad_w(gs, "head_qe.out.weight"),
                                             grad_w(gs, "head_qe.out.bias"));
        Tensor3<Scalar> gz = relu_backward(cache.h, gh);
        return conv2d_backward(qe_hidden_, cache.y, gz, grad_w(gs, "head_qe.hidden.weight"),
                               grad_w(gs, "head_qe.hidden.bias"));
    }

    /// Propagates dL/d(trunk output) through the trunk. The gradient with
    /// respect to the network input is not computed.
    void backward_shared(const TrunkCache<Scalar>& cache, const Tensor3<Scalar>& grad_y,
                         GradStore<Scalar>& gs) const {
        // trunk_out = x0 + conv_post(body_out)
        Tensor3<Scalar> g_x0 = grad_y;
        Tensor3<Scalar> g = conv2d_backward(conv_post_, cache.body_out, grad_y, grad_w(gs, "trunk.conv_post.weight"),
                                            grad_w(gs, "trunk.conv_post.bias"));
        for (int i = static_cast<int>(blocks_.size()) - 1; i >= 0; --i) {
            const auto& b = blocks_[i];
            const auto& bc = cache.blocks[static_cast<std::size_t>(i)];
            const std::string base = "trunk.rb" + std::to_string(i + 1);
            Tensor3<Scalar> gh1 = conv2d_backward(b.conv2, bc.h1, g, grad_w(gs, base + ".conv2.weight"),
                                                  grad_w(gs, base + ".conv2.bias"));
            Tensor3<Scalar> gz1 = relu_backward(bc.h1, gh1);
            Tensor3<Scalar> gin = conv2d_backward(b.conv1, bc.in, gz1, grad_w(gs, base + ".conv1.weight"),
                                                  grad_w(gs, base + ".conv1.bias"));
            g.data += gin.data;  // short skip
        }
        g_x0.data += g.data;  // long skip joins the body path at x0
        conv2d_backward(conv_in_, cache.x, g_x0, grad_w(gs, "trunk.conv_in.weight"), grad_w(gs, "trunk.conv_in.bias"),
                        /*skip_input_grad=*/true);
    }

    /// Valid tap names for forward recording (symbolic plus conv_<i>).
    std::vector<std::string> tap_names() const {
        std::vector<std::string> names = {"conv_in"};
        for (std::size_t i = 1; i <= blocks_.size(); ++i) {
            names.push_back("rb_" + std::to_string(i) + "_conv1");
            names.push_back("rb_" + std::to_string(i) + "_conv2");
            names.push_back("rb_" + std::to_string(i));
        }
        names.push_back("conv_post");
        names.push_back("trunk_out");
        int nconv = 2 * static_cast<int>(blocks_.size()) + 2;
        if (cfg_.head_sr) {
            for (std::size_t i = 1; i <= sr_expand_.size(); ++i) {
                names.push_back("sr_expand_" + std::to_string(i));
                names.push_back("sr_shuffle_" + std::to_string(i));
            }
            names.push_back("sr_out");
            nconv += static_cast<int>(sr_expand_.size()) + 1;
        }
        if (cfg_.head_qe) {
            names.push_back("qe_hidden");
            names.push_back("qe_out");
            nconv += 2;
        }
        for (int i = 1; i <= nconv; ++i) names.push_back("conv_" + std::to_string(i));
        return names;
    }

private:
    void require_sr() const {
        if (!cfg_.head_sr) throw ConfigError("model was built without an SR head");
    }
    void require_qe() const {
        if (!cfg_.head_qe) throw ConfigError("model was built without a QE head");
    }
    void check_trunk_features(const char* op, const Tensor3<Scalar>& y) const {
        if (y.c != cfg_.trunk_width)
            throw ShapeError(std::string(op) + ": expected " + std::to_string(cfg_.trunk_width) +
                             " feature channels, got " + std::to_string(y.c));
    }

    void add_param(const std::string& name, ParamGroup group, RowMat<Scalar>& t) {
        params_.push_back({name, group, &t});
    }

    void build_param_table() {
        params_.clear();
        add_param("trunk.conv_in.weight", ParamGroup::Trunk, conv_in_.weight);
        add_param("trunk.conv_in.bias", ParamGroup::Trunk, conv_in_.bias);
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const std::string base = "trunk.rb" + std::to_string(i + 1);
            add_param(base + ".conv1.weight", ParamGroup::Trunk, blocks_[i].conv1.weight);
            add_param(base + ".conv1.bias", ParamGroup::Trunk, blocks_[i].conv1.bias);
            add_param(base + ".conv2.weight", ParamGroup::Trunk, blocks_[i].conv2.weight);
            add_param(base + ".conv2.bias", ParamGroup::Trunk, blocks_[i].conv2.bias);
        }
        add_param("trunk.conv_post.weight", ParamGroup::Trunk, conv_post_.weight);
        add_param("trunk.conv_post.bias", ParamGroup::Trunk, conv_post_.bias);
        if (cfg_.head_sr) {
            for (std::size_t i = 0; i < sr_expand_.size(); ++i) {
                const std::string base = "head_sr.expand" + std::to_string(i + 1);
                add_param(base + ".weight", ParamGroup::HeadSR, sr_expand_[i].weight);
                add_param(base + ".bias", ParamGroup::HeadSR, sr_expand_[i].bias);
            }
            add_param("head_sr.out.weight", ParamGroup::HeadSR, sr_out_.weight);
            add_param("head_sr.out.bias", ParamGroup::HeadSR, sr_out_.bias);
        }
        if (cfg_.head_qe) {
            add_param("head_qe.hidden.weight", ParamGroup::HeadQE, qe_hidden_.weight);
            add_param("head_qe.hidden.bias", ParamGroup::HeadQE, qe_hidden_.bias);
            add_param("head_qe.out.weight", ParamGroup::HeadQE, qe_out_.weight);
            add_param("head_qe.out.bias", ParamGroup::HeadQE, qe_out_.bias);
        }
    }

    RowMat<Scalar>& grad_w(GradStore<Scalar>& gs, const std::string& name) const {
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (params_[i].name == name) return gs.g[i];
        throw ConfigError("grad store has no entry for " + name);
    }

    void fill_uniform(std::mt19937_64& rng, RowMat<Scalar>& t, const std::string& name) {
        // Weight (out, in*k*k): fan-in is the column count. A bias row
        // (1, out) inherits the fan-in of its sibling weight.
        double fan_in;
        if (t.rows() == 1) {
            const std::string wname = name.substr(0, name.rfind('.')) + ".weight";
            fan_in = static_cast<double>(param_const(wname).cols());
        } else {
            fan_in = static_cast<double>(t.cols());
        }
        const double bound = 1.0 / std::sqrt(fan_in);
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (Eigen::Index i = 0; i < t.rows(); ++i)
            for (Eigen::Index j = 0; j < t.cols(); ++j) t(i, j) = static_cast<Scalar>(dist(rng));
    }

    const RowMat<Scalar>& param_const(const std::string& name) const {
        for (const auto& p : params_)
            if (p.name == name) return *p.tensor;
        throw ConfigError("unknown parameter name: " + name);
    }

    NetworkConfig cfg_;
    Conv2d<Scalar> conv_in_, conv_post_;
    std::vector<ResBlock<Scalar>> blocks_;
    std::vector<Conv2d<Scalar>> sr_expand_;
    Conv2d<Scalar> sr_out_;
    Conv2d<Scalar> qe_hidden_, qe_out_;
    std::vector<ParamRef<Scalar>> params_;
};

enum class CountGroup { All, Trunk, HeadSR, HeadQE };

inline CountGroup parse_count_group(const std::string& s) {
    if (s == "all") return CountGroup::All;
    if (s == "trunk") return CountGroup::Trunk;
    if (s == "head_sr") return CountGroup::HeadSR;
    if (s == "head_qe") return CountGroup::HeadQE;
    throw ConfigError("unknown parameter group '" + s + "' (expected all, trunk, head_sr, head_qe)");
}

template <typename Scalar>
Eigen::Index count_parameters(const Model<Scalar>& m, CountGroup group) {
    switch (group) {
        case CountGroup::All: return m.count_parameters_all();
        case CountGroup::Trunk: return m.count_parameters(ParamGroup::Trunk);
        case CountGroup::HeadSR: return m.count_parameters(ParamGroup::HeadSR);
        case CountGroup::HeadQE: return m.count_parameters(ParamGroup::HeadQE);
    }
    throw ConfigError("unknown parameter group");
}

template <typename Scalar>
Eigen::Index count_parameters(const Model<Scalar>& m, const std::string& group) {
    return count_parameters(m, parse_count_group(group));
}

}  // namespace mtlvqe
