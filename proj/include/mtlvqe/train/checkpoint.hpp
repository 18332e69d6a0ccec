// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstring>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "mtlvqe/config_json.hpp"
#include "mtlvqe/core/error.hpp"
#include "mtlvqe/net/model.hpp"
#include "mtlvqe/train/adam.hpp"

namespace mtlvqe {

// Container layout: 14-byte magic, u64 little-endian header length, compact
// JSON header (object keys sorted by the serializer), then the raw tensor
// blobs back to back. Tensor offsets are relative to the blob section.
inline constexpr char kCkptMagic[] = "MTLVQE-CKPT-1\n";
inline constexpr std::size_t kCkptMagicLen = 14;

struct CkptTensor {
    std::string name;
    std::string dtype;  // "f32" or "f64"
    long long rows = 0;
    long long cols = 0;
    std::string bytes;  // raw native little-endian scalars, row-major
};

struct CheckpointFile {
    nlohmann::json meta = nlohmann::json::object();
    std::vector<CkptTensor> tensors;
};

void write_checkpoint_file(const std::string& path, const CheckpointFile& file);
CheckpointFile read_checkpoint_file(const std::string& path);

template <typename Scalar>
constexpr const char* ckpt_dtype();
template <>
constexpr const char* ckpt_dtype<float>() {
    return "f32";
}
template <>
constexpr const char* ckpt_dtype<double>() {
    return "f64";
}

template <typename Scalar>
CkptTensor to_ckpt_tensor(const std::string& name, const RowMat<Scalar>& mat) {
    CkptTensor t;
    t.name = name;
    t.dtype = ckpt_dtype<Scalar>();
    t.rows = mat.rows();
    t.cols = mat.cols();
    t.bytes.resize(static_cast<std::size_t>(mat.size()) * sizeof(Scalar));
    if (mat.size() > 0) std::memcpy(t.bytes.data(), mat.data(), t.bytes.size());
    return t;
}

template <typename Scalar>
RowMat<Scalar> from_ckpt_tensor(const CkptTensor& t) {
    if (t.dtype != ckpt_dtype<Scalar>())
        throw CheckpointError("tensor '" + t.name + "' has dtype " + t.dtype + ", expected " +
                              ckpt_dtype<Scalar>());
    const std::size_t want = static_cast<std::size_t>(t.rows) * static_cast<std::size_t>(t.cols) * sizeof(Scalar);
    if (t.bytes.size() != want)
        throw CheckpointError("tensor '" + t.name + "' blob is " + std::to_string(t.bytes.size()) +
                              " bytes, expected " + std::to_string(want));
    RowMat<Scalar> mat(t.rows, t.cols);
    if (mat.size() > 0) std::memcpy(mat.data(), t.bytes.data(), want);
    return mat;
}

/// Full snapshot: every model parameter, plus the optimizer moments as
/// tensors "adam.m.<param>" / "adam.v.<param>" when `opt` is given. The
/// caller's meta is extended with "format", "net" and "adam".
template <typename Scalar>
void save_model_checkpoint(const std::string& path, const Model<Scalar>& model,
                           nlohmann::json meta = nlohmann::json::object(),
                           const Adam<Scalar>* opt = nullptr) {
    CheckpointFile f;
    meta["format"] = 1;
    meta["net"] = model.config();
    if (opt) {
        if (!opt->attached_to(model)) throw ConfigError("save checkpoint: optimizer not attached to this model");
        meta["adam"] = nlohmann::json{{"t", opt->t}};
    }
    f.meta = std::move(meta);
    const auto& params = model.params();
    for (const auto& p : params) f.tensors.push_back(to_ckpt_tensor(p.name, *p.tensor));
    if (opt) {
        for (std::size_t i = 0; i < params.size(); ++i)
            f.tensors.push_back(to_ckpt_tensor("adam.m." + params[i].name, opt->m[i]));
        for (std::size_t i = 0; i < params.size(); ++i)
            f.tensors.push_back(to_ckpt_tensor("adam.v." + params[i].name, opt->v[i]));
    }
    write_checkpoint_file(path, f);
}

namespace detail {
inline std::unordered_map<std::string, const CkptTensor*> index_tensors(const CheckpointFile& f) {
    std::unordered_map<std::string, const CkptTensor*> by_name;
    for (const auto& t : f.tensors) {
        if (!by_name.emplace(t.name, &t).second)
            throw CheckpointError("duplicate tensor name '" + t.name + "'");
    }
    return by_name;
}

template <typename Scalar>
void copy_into(RowMat<Scalar>& dst, const CkptTensor& t) {
    RowMat<Scalar> src = from_ckpt_tensor<Scalar>(t);
    if (src.rows() != dst.rows() || src.cols() != dst.cols())
        throw CheckpointError("tensor '" + t.name + "' is " + std::to_string(src.rows()) + "x" +
                              std::to_string(src.cols()) + ", expected " + std::to_string(dst.rows()) +
                              "x" + std::to_string(dst.cols()));
    dst = std::move(src);
}
}  // namespace detail

/// Rebuild the model stored at `path`. Every parameter must be present.
/// With `opt`, the ADAM moments and step count are restored as well.
template <typename Scalar>
Model<Scalar> load_model_checkpoint(const std::string& path, Adam<Scalar>* opt = nullptr,
                                    nlohmann::json* meta_out = nullptr) {
    CheckpointFile f = read_checkpoint_file(path);
    if (!f.meta.contains("net")) throw CheckpointError("checkpoint header has no 'net' config: " + path);
    Model<Scalar> model(f.meta.at("net").template get<NetworkConfig>());
    auto by_name = detail::index_tensors(f);
    for (const auto& p : model.params()) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) throw CheckpointError("checkpoint is missing parameter '" + p.name + "'");
        detail::copy_into(*p.tensor, *it->second);
    }
    if (opt) {
        opt->attach(model);
        if (!f.meta.contains("adam"))
            throw CheckpointError("checkpoint has no optimizer state: " + path);
        opt->t = f.meta.at("adam").at("t").template get<long long>();
        const auto& params = model.params();
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto im = by_name.find("adam.m." + params[i].name);
            auto iv = by_name.find("adam.v." + params[i].name);
            if (im == by_name.end() || iv == by_name.end())
                throw CheckpointError("checkpoint is missing optimizer moments for '" + params[i].name + "'");
            detail::copy_into(opt->m[i], *im->second);
            detail::copy_into(opt->v[i], *iv->second);
        }
    }
    if (meta_out) *meta_out = std::move(f.meta);
    return model;
}

/// Partial load for warm starts: copy every stored tensor whose name matches
/// a parameter of `model` (shape-checked), leave the rest at their current
/// values. Returns the names of model parameters the checkpoint did not
/// provide.
template <typename Scalar>
std::vector<std::string> load_params_from_checkpoint(Model<Scalar>& model, const std::string& path) {
    CheckpointFile f = read_checkpoint_file(path);
    auto by_name = detail::index_tensors(f);
    std::vector<std::string> missing;
    for (const auto& p : model.params()) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) {
            missing.push_back(p.name);
            continue;
        }
        detail::copy_into(*p.tensor, *it->second);
    }
    return missing;
}

}  // namespace mtlvqe
