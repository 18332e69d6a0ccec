// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include "mtlvqe/eval/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <tuple>

#include "mtlvqe/core/error.hpp"

namespace mtlvqe {

namespace {

constexpr int kQpAll = -1;  // aggregate over the whole qp set

std::vector<EvalRow> sorted(std::vector<EvalRow> rows) {
    std::stable_sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
        return std::tie(a.dataset, a.sequence, a.qp, a.task, a.image_id) <
               std::tie(b.dataset, b.sequence, b.qp, b.task, b.image_id);
    });
    return rows;
}

std::string num17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fixed(double v, int digits) {
    if (std::isinf(v)) return v > 0 ? "exact" : "-exact";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// The paper's "x (+y)" cell convention.
std::string value_with_delta(double v, double d, int digits, bool with_delta) {
    std::string s = fixed(v, digits);
    if (!with_delta) return s;
    const std::string sign = (!std::isinf(d) && d >= 0.0) ? "+" : "";
    return s + " (" + sign + fixed(d, digits) + ")";
}

std::string csv_line(const EvalRow& r) {
    std::ostringstream ss;
    ss << r.image_id << ',' << r.sequence << ',' << r.dataset << ','
       << (r.qp == kQpAll ? std::string("all") : std::to_string(r.qp)) << ',' << r.task << ','
       << num17(r.psnr) << ',' << num17(r.d_psnr) << ',' << num17(r.ssim) << ',' << num17(r.d_ssim) << ','
       << r.anchor << '\n';
    return ss.str();
}

}  // namespace

std::vector<EvalRow> aggregate_rows(const std::vector<EvalRow>& rows) {
    std::map<std::tuple<std::string, std::string, int>, std::vector<const EvalRow*>> per_qp;
    for (const auto& r : rows) per_qp[{r.dataset, r.task, r.qp}].push_back(&r);

    auto mean_of = [](const std::vector<const EvalRow*>& group, const std::string& id, int qp) {
        EvalRow m;
        m.image_id = id;
        m.sequence = "-";
        m.dataset = group.front()->dataset;
        m.qp = qp;
        m.task = group.front()->task;
        m.anchor = group.front()->anchor;
        for (const EvalRow* r : group) {
            m.psnr += r->psnr;
            m.d_psnr += r->d_psnr;
            m.ssim += r->ssim;
            m.d_ssim += r->d_ssim;
        }
        const double n = static_cast<double>(group.size());
        m.psnr /= n;
        m.d_psnr /= n;
        m.ssim /= n;
        m.d_ssim /= n;
        return m;
    };

    std::vector<EvalRow> out;
    std::map<std::pair<std::string, std::string>, std::vector<EvalRow>> per_task;
    for (const auto& [key, group] : per_qp) {
        EvalRow m = mean_of(group, "average", std::get<2>(key));
        per_task[{std::get<0>(key), std::get<1>(key)}].push_back(m);
        out.push_back(std::move(m));
    }
    for (const auto& [key, qp_means] : per_task) {
        std::vector<const EvalRow*> ptrs;
        for (const auto& r : qp_means) ptrs.push_back(&r);
        out.push_back(mean_of(ptrs, "average", kQpAll));
    }
    return out;
}

std::string emit_report(const std::vector<EvalRow>& rows, ReportFormat format) {
    const std::vector<EvalRow> body = sorted(rows);
    const std::vector<EvalRow> aggs = aggregate_rows(body);

    if (format == ReportFormat::csv) {
        std::ostringstream ss;
        ss << "image_id,sequence,dataset,qp,task,psnr,d_psnr,ssim,d_ssim,anchor\n";
        for (const auto& r : body) ss << csv_line(r);
        for (const auto& r : aggs) ss << csv_line(r);
        return ss.str();
    }

    std::vector<std::array<std::string, 6>> cells;
    cells.push_back({"image", "dataset", "qp", "task", "psnr (d)", "ssim (d)"});
    auto render = [&](const EvalRow& r) {
        const bool with_delta = !r.anchor.empty();
        cells.push_back({r.image_id, r.dataset, r.qp == kQpAll ? "all" : std::to_string(r.qp), r.task,
                         with_delta ? value_with_delta(r.psnr, r.d_psnr, 2, true) : fixed(r.psnr, 2) + " |",
                         with_delta ? value_with_delta(r.ssim, r.d_ssim, 4, true)
                                    : fixed(r.ssim, 4) + " |"});
    };
    for (const auto& r : body) render(r);
    cells.push_back({"-", "-", "-", "-", "-", "-"});
    for (const auto& r : aggs) render(r);

    std::array<std::size_t, 6> widths{};
    for (const auto& row : cells)
        for (int i = 0; i < 6; ++i) widths[i] = std::max(widths[i], row[i].size());
    std::ostringstream ss;
    for (const auto& row : cells) {
        for (int i = 0; i < 6; ++i) {
            ss << row[i];
            if (i + 1 < 6) ss << std::string(widths[i] - row[i].size() + 2, ' ');
        }
        ss << '\n';
    }
    return ss.str();
}

std::vector<EvalRow> parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "image_id,sequence,dataset,qp,task,psnr,d_psnr,ssim,d_ssim,anchor")
        throw DataError("parse_report_csv: missing or unexpected header");
    std::vector<EvalRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cur;
        std::istringstream ls(line);
        while (std::getline(ls, cur, ',')) f.push_back(cur);
        if (f.size() == 9) f.push_back("");  // empty trailing anchor
        if (f.size() != 10) throw DataError("parse_report_csv: malformed line '" + line + "'");
        EvalRow r;
        r.image_id = f[0];
        r.sequence = f[1];
        r.dataset = f[2];
        r.qp = (f[3] == "all") ? kQpAll : std::stoi(f[3]);
        r.task = f[4];
        r.psnr = std::stod(f[5]);
        r.d_psnr = std::stod(f[6]);
        r.ssim = std::stod(f[7]);
        r.d_ssim = std::stod(f[8]);
        r.anchor = f[9];
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace mtlvqe
