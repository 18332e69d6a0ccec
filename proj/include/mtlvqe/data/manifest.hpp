// Copyright (c) 2026 the mtlvqe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "mtlvqe/data/degrader.hpp"
#include "mtlvqe/data/patches.hpp"

namespace mtlvqe {

struct ManifestEntry {
    std::string id;
    std::string split;  // train | val | test
    int qp = 0;
    std::string degrader_id;
    std::string hr_path;  // relative to the manifest file
    std::string lr_path;
    std::string lr_decoded_path;
};

struct Manifest {
    int r = 2;
    std::vector<int> qps;
    std::string created_with;  // config hash
    std::vector<ManifestEntry> entries;
    std::string dir;  // directory of the manifest file once loaded/saved

    std::vector<const ManifestEntry*> select(const std::string& split) const;
    std::vector<const ManifestEntry*> select(const std::string& split, int qp) const;
};

/// Last `val_count` then `test_count` source images (in sorted filename
/// order) become val and test; the rest train.
struct SplitRule {
    int val_count = 0;
    int test_count = 0;
};

struct BuildManifestResult {
    Manifest manifest;
    int new_entries = 0;
    int reused_entries = 0;
    int skipped_sources = 0;
};

/// Renders every (source image, qp) pair through downscale -> yuv420 ->
/// degrade -> rgb and records the triple. Sources are the .ppm files in
/// hr_dir, sorted by filename. Images whose dimensions are not multiples of
/// 2r are center-cropped to the largest such multiple. A rerun with an
/// unchanged configuration reuses existing outputs and reports 0 new
/// entries.
BuildManifestResult build_manifest(const std::string& hr_dir, const std::vector<int>& qps,
                                   const DegraderSpec& spec, int r, const SplitRule& split,
                                   const std::string& out_dir);

void save_manifest(const Manifest& m, const std::string& path);
Manifest load_manifest(const std::string& path);

/// Reads the three images of an entry, resolving paths against m.dir.
SampleImages load_sample(const Manifest& m, const ManifestEntry& e);

}  // namespace mtlvqe
