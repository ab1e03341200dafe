#include "lldiff/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace lldiff {

NormStats fit_stats(const std::vector<Image>& sample, const std::string& domain_label) {
    if (sample.empty()) throw FitError("fit_stats: empty sample");
    // pooled mean/population-variance of x^(1/4) over all pixels and channels
    double sum = 0.0, sum_sq = 0.0;
    size_t n = 0;
    for (const Image& img : sample) {
        if (img.domain != Domain::linear)
            throw DomainError("fit_stats: images must be linear");
        for (float v : img.data) {
            double r = std::sqrt(std::sqrt((double)v));
            sum += r;
            sum_sq += r * r;
            ++n;
        }
    }
    double mu = sum / n;
    double var = sum_sq / n - mu * mu;
    if (var <= 1e-12) throw FitError("fit_stats: degenerate (zero-variance) sample");
    NormStats s;
    s.mu = mu;
    s.sigma = std::sqrt(var);
    s.domain_label = domain_label;
    s.sample_count = (long)sample.size();
    return s;
}

Image tail_normalize(const Image& img, const NormStats& stats, double* clamp_fraction) {
    if (img.domain != Domain::linear)
        throw DomainError("tail_normalize: expected linear image");
    std::vector<float> px(img.data.size());
    size_t clamped = 0;
    for (size_t i = 0; i < px.size(); ++i) {
        float v = tail_normalize_scalar(img.data[i], stats);
        if (v < -1.f || v > 1.f) ++clamped;
        px[i] = std::clamp(v, -1.f, 1.f);
    }
    if (clamp_fraction) *clamp_fraction = (double)clamped / px.size();
    return Image(img.height, img.width, Domain::normalized, std::move(px));
}

Image tail_denormalize(const Image& img, const NormStats& stats) {
    if (img.domain != Domain::normalized)
        throw DomainError("tail_denormalize: expected normalized image");
    std::vector<float> px(img.data.size());
    for (size_t i = 0; i < px.size(); ++i)
        px[i] = std::min(1.f, tail_denormalize_scalar(img.data[i], stats));
    return Image(img.height, img.width, Domain::linear, std::move(px));
}

// --- stats file: flat key=value text, one prefix per domain ------------------

static void write_one(std::ostream& os, const NormStats& s) {
    os << s.domain_label << ".mu=" << std::hexfloat << s.mu << "\n";
    os << s.domain_label << ".sigma=" << std::hexfloat << s.sigma << "\n";
    os << s.domain_label << ".sample_count=" << std::dec << s.sample_count << "\n";
}

void save_stats(const NormStatsPair& stats, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    write_one(f, stats.lowlight);
    write_one(f, stats.welllit);
    if (!f) throw IoError("write failed: " + path);
}

NormStatsPair load_stats(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw IoError("stats file: malformed line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto get = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw IoError("stats file: missing key " + key);
        return it->second;
    };
    auto parse_one = [&](const std::string& label) {
        NormStats s;
        s.domain_label = label;
        s.mu = std::strtod(get(label + ".mu").c_str(), nullptr);
        s.sigma = std::strtod(get(label + ".sigma").c_str(), nullptr);
        s.sample_count = std::strtol(get(label + ".sample_count").c_str(), nullptr, 10);
        if (!(s.sigma > 0)) throw IoError("stats file: sigma must be positive for " + label);
        return s;
    };
    NormStatsPair p;
    p.lowlight = parse_one("lowlight");
    p.welllit = parse_one("welllit");
    return p;
}

}  // namespace lldiff
