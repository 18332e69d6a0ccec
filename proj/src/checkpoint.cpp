// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include "mtlvqe/train/checkpoint.hpp"

#include <cstdint>
#include <fstream>

namespace mtlvqe {

namespace {

std::size_t dtype_size(const std::string& dtype, const std::string& name) {
    if (dtype == "f32") return 4;
    if (dtype == "f64") return 8;
    throw CheckpointError("tensor '" + name + "' has unknown dtype '" + dtype + "'");
}

void append_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64_le(const std::string& buf, std::size_t pos) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    return v;
}

}  // namespace

void write_checkpoint_file(const std::string& path, const CheckpointFile& file) {
    if (!file.meta.is_object()) throw CheckpointError("checkpoint meta must be a JSON object");
    nlohmann::json header;
    header["meta"] = file.meta;
    header["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& t : file.tensors) {
        const std::size_t want =
            static_cast<std::size_t>(t.rows) * static_cast<std::size_t>(t.cols) * dtype_size(t.dtype, t.name);
        if (t.rows < 0 || t.cols < 0 || t.bytes.size() != want)
            throw CheckpointError("tensor '" + t.name + "' blob is " + std::to_string(t.bytes.size()) +
                                  " bytes, expected " + std::to_string(want));
        header["tensors"].push_back({{"name", t.name},
                                     {"dtype", t.dtype},
                                     {"rows", t.rows},
                                     {"cols", t.cols},
                                     {"offset", offset},
                                     {"nbytes", static_cast<std::uint64_t>(t.bytes.size())}});
        offset += t.bytes.size();
    }
    const std::string header_bytes = header.dump();

    std::string out;
    out.reserve(kCkptMagicLen + 8 + header_bytes.size() + offset);
    out.append(kCkptMagic, kCkptMagicLen);
    append_u64_le(out, header_bytes.size());
    out += header_bytes;
    for (const auto& t : file.tensors) out += t.bytes;

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open checkpoint for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("short write on checkpoint: " + path);
}

CheckpointFile read_checkpoint_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < kCkptMagicLen + 8 || buf.compare(0, kCkptMagicLen, kCkptMagic, kCkptMagicLen) != 0)
        throw CheckpointError("not a checkpoint (bad magic): " + path);
    const std::uint64_t header_len = read_u64_le(buf, kCkptMagicLen);
    const std::size_t header_start = kCkptMagicLen + 8;
    if (header_len > buf.size() - header_start)
        throw CheckpointError("checkpoint header extends past end of file: " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(buf.substr(header_start, header_len));
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("checkpoint header is not valid JSON: " + path + " (" + e.what() + ")");
    }
    if (!header.is_object() || !header.contains("meta") || !header.contains("tensors") ||
        !header.at("tensors").is_array())
        throw CheckpointError("checkpoint header missing meta/tensors: " + path);

    const std::size_t blob_start = header_start + header_len;
    const std::size_t blob_size = buf.size() - blob_start;

    CheckpointFile file;
    file.meta = header.at("meta");
    try {
        for (const auto& jt : header.at("tensors")) {
            CkptTensor t;
            t.name = jt.at("name").get<std::string>();
            t.dtype = jt.at("dtype").get<std::string>();
            t.rows = jt.at("rows").get<long long>();
            t.cols = jt.at("cols").get<long long>();
            const std::uint64_t off = jt.at("offset").get<std::uint64_t>();
            const std::uint64_t nbytes = jt.at("nbytes").get<std::uint64_t>();
            const std::size_t want =
                static_cast<std::size_t>(t.rows) * static_cast<std::size_t>(t.cols) * dtype_size(t.dtype, t.name);
            if (t.rows < 0 || t.cols < 0 || nbytes != want)
                throw CheckpointError("tensor '" + t.name + "' declares " + std::to_string(nbytes) +
                                      " bytes, expected " + std::to_string(want));
            if (off > blob_size || nbytes > blob_size - off)
                throw CheckpointError("tensor '" + t.name + "' extends past end of file: " + path);
            t.bytes = buf.substr(blob_start + off, nbytes);
            file.tensors.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError("checkpoint tensor table is malformed: " + path + " (" + e.what() + ")");
    }
    return file;
}

}  // namespace mtlvqe
