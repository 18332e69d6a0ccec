// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "mtlvqe/img/image.hpp"

namespace mtlvqe {

enum class DegraderKind { external_codec, synthetic, null_degrader };

DegraderKind parse_degrader_kind(const std::string& name);
std::string degrader_kind_name(DegraderKind kind);

/// How a clean YUV frame turns into a decoded one. `null` is the identity,
/// `synthetic` quantizes 8x8 DCT blocks with a step that doubles every six
/// qp (codec-like severity without a codec), `external_codec` runs a user
/// command built from `command_template`.
struct DegraderSpec {
    DegraderKind kind = DegraderKind::null_degrader;
    std::string command_template;  // external only; needs all five placeholders
    int qp = 32;

    void validate() const;
};

/// Manifest provenance tag for the spec's kind.
std::string degrader_id(const DegraderSpec& spec);

/// Splits the template on whitespace and substitutes {input}, {output},
/// {qp}, {width}, {height} in each token. Pure; no quoting rules, a token
/// is an argv element.
std::vector<std::string> substitute_template(const std::string& command_template, const std::string& input,
                                             const std::string& output, int qp, int width, int height);

/// Environment variable that, when set, replaces argv[0] of the external
/// codec command.
inline constexpr const char* kCodecBinEnv = "MTLVQE_CODEC_BIN";

ImageYuv420 degrade(const ImageYuv420& img, const DegraderSpec& spec);

}  // namespace mtlvqe
