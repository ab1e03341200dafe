#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lldiff/degrade.hpp"
#include "lldiff/image.hpp"
#include "lldiff/rng.hpp"

namespace lldiff {

// low/ and high/ PNG pairs matched by filename, lexicographic order,
// center-cropped to 256x256, kept in srgb (linearize explicitly downstream)
struct PairedDataset {
    std::vector<std::string> names;
    std::vector<Image> low, high;
    size_t size() const { return names.size(); }
};

PairedDataset load_paired_dataset(const std::string& root);

// n distinct indices without replacement (deterministic partial shuffle);
// if the dataset is smaller than n, returns everything with a stderr warning
std::vector<size_t> sample_stats_subset(size_t dataset_size, size_t n, Pcg32& rng);

// Synthetic desk-scale pair in linear domain: smooth 2-term sinusoid
// background, 3-8 high-contrast strokes (rectangle outlines, bars, ring
// segments, 1-4 px), mild low-amplitude texture; low = dim + sensor noise.
std::pair<Image, Image> generate_glyph_pair(Pcg32& rng, int size, const DegradeParams& params);

struct GlyphDatasetParams {
    int count = 0;
    int size = 256;
    uint64_t seed = 0;
    DegradeParams degrade;
};

// writes low/NNNN.png (8-bit), high/NNNN.png (16-bit), manifest.json
void write_glyph_dataset(const std::string& out_dir, const GlyphDatasetParams& p);

}  // namespace lldiff
