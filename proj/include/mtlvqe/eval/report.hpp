// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace mtlvqe {

struct EvalRow {
    std::string image_id;
    std::string sequence;
    std::string dataset;
    int qp = 0;
    std::string task;  // "sr" | "qe"
    double psnr = 0.0;
    double d_psnr = 0.0;
    double ssim = 0.0;
    double d_ssim = 0.0;
    std::string anchor;  // empty = no anchor, rendered "|"
};

enum class ReportFormat { table_text, csv };

/// Mean rows: per (dataset, task, qp) over images, then per (dataset, task)
/// over QPs. Returned in deterministic order.
std::vector<EvalRow> aggregate_rows(const std::vector<EvalRow>& rows);

/// Renders rows (sorted by dataset, sequence, qp, task, image) followed by
/// their aggregates. Same rows, same bytes.
std::string emit_report(const std::vector<EvalRow>& rows, ReportFormat format);

/// Parses a document produced by emit_report(csv).
std::vector<EvalRow> parse_report_csv(const std::string& text);

}  // namespace mtlvqe
