#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "semihmer/common.hpp"
#include "semihmer/png_io.hpp"
#include "semihmer/tensor.hpp"
#include "semihmer/vocab.hpp"

namespace semihmer {

enum class Source { labeled, unlabeled };

// One training example. Labels exclude sos, end with eos; unlabeled samples
// carry an empty label. Image values lie in [0,1] with background 0.
struct Sample {
    Tensor image;            // (H, W)
    std::vector<int> label;  // token ids, eos-terminated; empty when unlabeled
    Source source = Source::labeled;
};

inline void validate_sample(const Sample& s, const Vocabulary& v) {
    if (s.image.ndim() != 2) fail("sample image must be rank 2");
    if (s.image.dim(0) < 8 || s.image.dim(1) < 8) fail("sample image must be at least 8x8");
    if (s.image.min() < 0.0 || s.image.max() > 1.0) fail("sample image values must lie in [0,1]");
    if (s.source == Source::unlabeled) {
        if (!s.label.empty()) fail("unlabeled sample must carry an empty label");
        return;
    }
    if (s.label.empty()) fail("labeled sample must carry a label");
    for (size_t i = 0; i < s.label.size(); ++i) {
        int id = s.label[i];
        if (id < 0 || id >= v.size()) fail(strfmt("label id %d out of range", id));
        if (id == v.sos_id() || id == v.pad_id()) fail("label must not contain sos or pad");
        if (id == v.eos_id() && i + 1 != s.label.size()) fail("eos must terminate the label");
    }
    if (s.label.back() != v.eos_id()) fail("label must end with eos");
}

// Per-class symbol counts; sos/eos/pad contribute nothing.
inline Tensor counting_ground_truth(const std::vector<int>& label, const Vocabulary& v) {
    Tensor counts = Tensor::zeros({v.size()});
    for (int id : label) {
        if (id < 0 || id >= v.size()) fail(strfmt("label id %d out of range [0, %d)", id, v.size()));
        if (v.is_special(id)) continue;
        counts.at(id) += 1.0;
    }
    return counts;
}

// Samples padded to common extents. Masks are 1 exactly on original extents;
// padded image regions are 0 and padded label slots hold pad_id.
struct Batch {
    Tensor images;                        // (B, Hmax, Wmax)
    Tensor image_mask;                    // (B, Hmax, Wmax)
    std::vector<std::vector<int>> labels; // B rows of length Lmax
    std::vector<std::vector<char>> label_mask;
    std::vector<Source> sources;
    std::vector<int> heights, widths, label_lengths;

    int size() const { return static_cast<int>(sources.size()); }
};

inline Batch collate(const std::vector<Sample>& samples, const Vocabulary& v) {
    if (samples.empty()) fail("cannot collate an empty sample list");
    int hmax = 0, wmax = 0;
    size_t lmax = 0;
    for (const Sample& s : samples) {
        hmax = std::max(hmax, s.image.dim(0));
        wmax = std::max(wmax, s.image.dim(1));
        lmax = std::max(lmax, s.label.size());
    }
    lmax = std::max<size_t>(lmax, 1);

    const int b = static_cast<int>(samples.size());
    Batch out;
    out.images = Tensor::zeros({b, hmax, wmax});
    out.image_mask = Tensor::zeros({b, hmax, wmax});
    for (int i = 0; i < b; ++i) {
        const Sample& s = samples[static_cast<size_t>(i)];
        const int h = s.image.dim(0), w = s.image.dim(1);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                out.images.at(i, y, x) = s.image.at(y, x);
                out.image_mask.at(i, y, x) = 1.0;
            }
        out.labels.emplace_back(lmax, v.pad_id());
        out.label_mask.emplace_back(lmax, 0);
        for (size_t j = 0; j < s.label.size(); ++j) {
            out.labels.back()[j] = s.label[j];
            out.label_mask.back()[j] = 1;
        }
        out.sources.push_back(s.source);
        out.heights.push_back(h);
        out.widths.push_back(w);
        out.label_lengths.push_back(static_cast<int>(s.label.size()));
    }
    return out;
}

// Widens the blank canvas (zero ink) on the bottom/right so very small
// crops still satisfy a model's minimum input size. Identity when already
// large enough.
inline Tensor pad_canvas(const Tensor& img, int min_h, int min_w) {
    if (img.ndim() != 2) fail("pad_canvas expects a rank-2 image");
    const int h = img.dim(0), w = img.dim(1);
    if (h >= min_h && w >= min_w) return img;
    Tensor out({std::max(h, min_h), std::max(w, min_w)});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(y, x) = img.at(y, x);
    return out;
}

// Recovers sample i of a batch from the padded arrays and masks.
inline Sample uncollate(const Batch& batch, int i) {
    if (i < 0 || i >= batch.size()) fail("batch index out of range");
    Sample s;
    const int h = batch.heights[static_cast<size_t>(i)], w = batch.widths[static_cast<size_t>(i)];
    s.image = Tensor({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) s.image.at(y, x) = batch.images.at(i, y, x);
    const int len = batch.label_lengths[static_cast<size_t>(i)];
    s.label.assign(batch.labels[static_cast<size_t>(i)].begin(),
                   batch.labels[static_cast<size_t>(i)].begin() + len);
    s.source = batch.sources[static_cast<size_t>(i)];
    return s;
}

// Newline-delimited corpus manifest. Each record is either
//   relative/image/path<TAB>space-separated token string   (labeled)
//   relative/image/path                                    (unlabeled)
// Paths are resolved against the manifest's directory.
struct ManifestEntry {
    std::string path;  // relative image path
    std::vector<std::string> tokens;
    bool labeled = false;
};

inline std::string dirname_of(const std::string& path) {
    size_t slash = path.find_last_of('/');
    return slash == std::string::npos ? std::string(".") : path.substr(0, slash);
}

inline std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open manifest '" + path + "'");
    std::vector<ManifestEntry> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ManifestEntry e;
        size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            e.path = line;
            e.labeled = false;
        } else {
            e.path = line.substr(0, tab);
            e.labeled = true;
            std::istringstream toks(line.substr(tab + 1));
            std::string tok;
            while (toks >> tok) e.tokens.push_back(tok);
            if (e.tokens.empty())
                fail(strfmt("manifest '%s' line %d: labeled entry has no tokens", path.c_str(), lineno));
        }
        if (e.path.empty()) fail(strfmt("manifest '%s' line %d: empty path", path.c_str(), lineno));
        out.push_back(std::move(e));
    }
    return out;
}

inline void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot open '" + path + "' for writing");
    for (const ManifestEntry& e : entries) {
        out << e.path;
        if (e.labeled) {
            out << '\t';
            for (size_t i = 0; i < e.tokens.size(); ++i) {
                if (i) out << ' ';
                out << e.tokens[i];
            }
        }
        out << '\n';
    }
    if (!out) fail("write failed for '" + path + "'");
}

// Loads every manifest entry: reads PNGs and maps token strings to ids.
inline std::vector<Sample> load_corpus(const std::string& manifest_path, const Vocabulary& v) {
    const std::string root = dirname_of(manifest_path);
    std::vector<Sample> out;
    for (const ManifestEntry& e : read_manifest(manifest_path)) {
        Sample s;
        s.image = read_png_gray(root + "/" + e.path);
        if (e.labeled) {
            s.source = Source::labeled;
            for (const std::string& tok : e.tokens) s.label.push_back(v.id_of(tok));
            if (s.label.empty() || s.label.back() != v.eos_id()) s.label.push_back(v.eos_id());
        } else {
            s.source = Source::unlabeled;
        }
        validate_sample(s, v);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace semihmer
