// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#include "mtlvqe/data/manifest.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mtlvqe/core/error.hpp"
#include "mtlvqe/img/color.hpp"
#include "mtlvqe/img/ppm.hpp"
#include "mtlvqe/img/resize.hpp"

namespace fs = std::filesystem;

namespace mtlvqe {

namespace {

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string config_hash(const std::vector<int>& qps, const DegraderSpec& spec, int r,
                        const SplitRule& split) {
    std::ostringstream ss;
    ss << "r=" << r << ";kind=" << degrader_kind_name(spec.kind) << ";tmpl=" << spec.command_template
       << ";qps=";
    for (int q : qps) ss << q << ",";
    ss << ";val=" << split.val_count << ";test=" << split.test_count;
    return fnv1a_hex(ss.str());
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
    return out;
}

ImageRgb8 center_crop_multiple(const ImageRgb8& img, int m) {
    const int h = img.h / m * m;
    const int w = img.w / m * m;
    if (h < m || w < m)
        throw DataError("image " + std::to_string(img.h) + "x" + std::to_string(img.w) +
                        " too small for multiple of " + std::to_string(m));
    if (h == img.h && w == img.w) return img;
    return crop(img, (img.h - h) / 2, (img.w - w) / 2, h, w);
}

}  // namespace

std::vector<const ManifestEntry*> Manifest::select(const std::string& split) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
        if (e.split == split) out.push_back(&e);
    return out;
}

std::vector<const ManifestEntry*> Manifest::select(const std::string& split, int qp) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
        if (e.split == split && e.qp == qp) out.push_back(&e);
    return out;
}

void save_manifest(const Manifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << "# mtlvqe-manifest v1\n";
    out << "# r=" << m.r << "\n";
    out << "# qps=";
    for (std::size_t i = 0; i < m.qps.size(); ++i) out << (i ? "," : "") << m.qps[i];
    out << "\n";
    out << "# created_with=" << m.created_with << "\n";
    out << "# id, split, qp, degrader_id, hr_path, lr_path, lr_decoded_path\n";
    for (const auto& e : m.entries)
        out << e.id << ", " << e.split << ", " << e.qp << ", " << e.degrader_id << ", " << e.hr_path << ", "
            << e.lr_path << ", " << e.lr_decoded_path << "\n";
    if (!out) throw DataError("short write to " + path);
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open manifest " + path);
    Manifest m;
    m.dir = fs::path(path).parent_path().string();
    std::string line;
    bool have_magic = false;
    std::set<std::string> ids;
    std::set<int> declared;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string body = trim(line.substr(1));
            if (body == "mtlvqe-manifest v1") have_magic = true;
            else if (body.rfind("r=", 0) == 0) m.r = std::stoi(body.substr(2));
            else if (body.rfind("qps=", 0) == 0) {
                std::istringstream ss(body.substr(4));
                std::string tok;
                while (std::getline(ss, tok, ',')) m.qps.push_back(std::stoi(tok));
                declared.insert(m.qps.begin(), m.qps.end());
            } else if (body.rfind("created_with=", 0) == 0)
                m.created_with = body.substr(13);
            continue;
        }
        const auto f = split_fields(line);
        if (f.size() != 7) throw DataError("manifest " + path + ": malformed record '" + line + "'");
        ManifestEntry e{f[0], f[1], std::stoi(f[2]), f[3], f[4], f[5], f[6]};
        if (e.split != "train" && e.split != "val" && e.split != "test")
            throw DataError("manifest " + path + ": bad split '" + e.split + "' in " + e.id);
        if (!ids.insert(e.id).second) throw DataError("manifest " + path + ": duplicate id " + e.id);
        if (!declared.empty() && declared.count(e.qp) == 0)
            throw DataError("manifest " + path + ": entry " + e.id + " uses undeclared qp " +
                            std::to_string(e.qp));
        m.entries.push_back(std::move(e));
    }
    if (!have_magic) throw DataError(path + " is not a mtlvqe manifest");
    std::vector<std::string> missing;
    for (const auto& e : m.entries)
        for (const std::string& p : {e.hr_path, e.lr_path, e.lr_decoded_path})
            if (!fs::exists(fs::path(m.dir) / p)) missing.push_back(p);
    if (!missing.empty()) {
        std::string msg = "manifest " + path + ": " + std::to_string(missing.size()) + " missing file(s):";
        for (std::size_t i = 0; i < missing.size() && i < 5; ++i) msg += " " + missing[i];
        throw DataError(msg);
    }
    return m;
}

SampleImages load_sample(const Manifest& m, const ManifestEntry& e) {
    SampleImages s;
    s.hr = read_ppm((fs::path(m.dir) / e.hr_path).string());
    s.lr = read_ppm((fs::path(m.dir) / e.lr_path).string());
    s.lr_decoded = read_ppm((fs::path(m.dir) / e.lr_decoded_path).string());
    return s;
}

BuildManifestResult build_manifest(const std::string& hr_dir, const std::vector<int>& qps,
                                   const DegraderSpec& spec, int r, const SplitRule& split,
                                   const std::string& out_dir) {
    if (qps.empty()) throw ConfigError("build_manifest: qp list is empty");
    if (r < 1 || r > 4) throw ConfigError("build_manifest: r must be in [1, 4]");
    DegraderSpec probe = spec;
    for (int q : qps) {
        probe.qp = q;
        probe.validate();
    }
    if (!fs::is_directory(hr_dir)) throw DataError("build_manifest: " + hr_dir + " is not a directory");

    std::vector<fs::path> sources;
    for (const auto& de : fs::directory_iterator(hr_dir))
        if (de.is_regular_file() && de.path().extension() == ".ppm") sources.push_back(de.path());
    std::sort(sources.begin(), sources.end());
    if (sources.empty()) throw DataError("build_manifest: no .ppm sources in " + hr_dir);

    fs::create_directories(fs::path(out_dir) / "images");
    const std::string manifest_path = (fs::path(out_dir) / "manifest.txt").string();
    const std::string hash = config_hash(qps, spec, r, split);

    BuildManifestResult res;
    // Unchanged configuration with all files still present: nothing to do.
    if (fs::exists(manifest_path)) {
        try {
            Manifest prev = load_manifest(manifest_path);
            if (prev.created_with == hash &&
                prev.entries.size() == sources.size() * qps.size()) {
                res.manifest = std::move(prev);
                res.reused_entries = static_cast<int>(res.manifest.entries.size());
                return res;
            }
        } catch (const DataError&) {
            // Stale or broken; rebuild below.
        }
    }

    Manifest m;
    m.r = r;
    m.qps = qps;
    m.created_with = hash;
    m.dir = out_dir;

    const int n = static_cast<int>(sources.size());
    if (split.val_count < 0 || split.test_count < 0 || split.val_count + split.test_count >= n)
        throw ConfigError("build_manifest: split " + std::to_string(split.val_count) + "+" +
                          std::to_string(split.test_count) + " leaves no training images out of " +
                          std::to_string(n));

    for (int i = 0; i < n; ++i) {
        const std::string stem = sources[i].stem().string();
        ImageRgb8 hr;
        try {
            hr = center_crop_multiple(read_ppm(sources[i].string()), 2 * r);
        } catch (const DataError& e) {
            std::fprintf(stderr, "warning: skipping %s: %s\n", sources[i].string().c_str(), e.what());
            ++res.skipped_sources;
            continue;
        }
        const std::string split_name =
            (i >= n - split.test_count) ? "test" : (i >= n - split.test_count - split.val_count ? "val" : "train");
        const ImageRgb8 lr = bicubic_downscale(hr, r);
        // The null degrader bypasses the codec leg entirely, including the
        // lossy color round trip: its purpose is uncompressed pairs.
        const bool through_codec = spec.kind != DegraderKind::null_degrader;
        ImageYuv420 lr_yuv;
        if (through_codec) lr_yuv = rgb_to_yuv420(lr);
        const std::string hr_rel = "images/" + stem + "_hr.ppm";
        write_ppm((fs::path(out_dir) / hr_rel).string(), hr);
        for (int qp : qps) {
            DegraderSpec dspec = spec;
            dspec.qp = qp;
            const ImageRgb8 lr_decoded = through_codec ? yuv420_to_rgb(degrade(lr_yuv, dspec)) : lr;
            ManifestEntry e;
            e.id = stem + "_q" + std::to_string(qp);
            e.split = split_name;
            e.qp = qp;
            e.degrader_id = degrader_id(dspec);
            e.hr_path = hr_rel;
            e.lr_path = "images/" + stem + "_lr.ppm";
            e.lr_decoded_path = "images/" + e.id + "_dec.ppm";
            write_ppm((fs::path(out_dir) / e.lr_path).string(), lr);
            write_ppm((fs::path(out_dir) / e.lr_decoded_path).string(), lr_decoded);
            m.entries.push_back(std::move(e));
            ++res.new_entries;
        }
    }
    if (m.entries.empty()) throw DataError("build_manifest: no usable sources in " + hr_dir);
    save_manifest(m, manifest_path);
    res.manifest = std::move(m);
    return res;
}

}  // namespace mtlvqe
