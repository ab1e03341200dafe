#include "lldiff/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>

namespace lldiff {

static void check_same_srgb(const Image& a, const Image& b, const char* who) {
    if (a.height != b.height || a.width != b.width)
        throw ArgError(std::string(who) + ": image shapes differ");
    if (a.domain != Domain::srgb || b.domain != Domain::srgb)
        throw DomainError(std::string(who) + ": expected srgb images");
}

double psnr(const Image& a, const Image& b) {
    check_same_srgb(a, b, "psnr");
    double se = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        double d = (double)a.data[i] - b.data[i];
        se += d * d;
    }
    double mse = se / (double)a.data.size();
    if (mse < 1e-10) return 100.0;
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
    check_same_srgb(a, b, "ssim");
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2, L = 1
    constexpr double kC2 = 0.03 * 0.03;
    if (a.height < kWin || a.width < kWin) throw ArgError("ssim: image smaller than window");

    double k[kWin];
    double mass = 0.0;
    for (int i = 0; i < kWin; ++i) {
        double d = i - (kWin - 1) / 2.0;
        k[i] = std::exp(-0.5 * d * d / (kSigma * kSigma));
        mass += k[i];
    }
    for (double& v : k) v /= mass;

    int h = a.height, w = a.width;
    int oh = h - kWin + 1, ow = w - kWin + 1;
    // separable weighted moments: horizontal pass into rows, vertical into windows
    size_t row_n = (size_t)h * ow;
    std::vector<double> ma(row_n), mb(row_n), maa(row_n), mbb(row_n), mab(row_n);
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < ow; ++x) {
                double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                for (int t = 0; t < kWin; ++t) {
                    double va = a.at(y, x + t, c), vb = b.at(y, x + t, c);
                    sa += k[t] * va;
                    sb += k[t] * vb;
                    saa += k[t] * va * va;
                    sbb += k[t] * vb * vb;
                    sab += k[t] * va * vb;
                }
                size_t idx = (size_t)y * ow + x;
                ma[idx] = sa; mb[idx] = sb; maa[idx] = saa; mbb[idx] = sbb; mab[idx] = sab;
            }
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                for (int t = 0; t < kWin; ++t) {
                    size_t idx = (size_t)(y + t) * ow + x;
                    sa += k[t] * ma[idx];
                    sb += k[t] * mb[idx];
                    saa += k[t] * maa[idx];
                    sbb += k[t] * mbb[idx];
                    sab += k[t] * mab[idx];
                }
                double va = saa - sa * sa, vb = sbb - sb * sb, cov = sab - sa * sb;
                double num = (2.0 * sa * sb + kC1) * (2.0 * cov + kC2);
                double den = (sa * sa + sb * sb + kC1) * (va + vb + kC2);
                total += num / den;
            }
    }
    return total / (3.0 * oh * ow);
}

// --- text metrics -----------------------------------------------------------------

static std::vector<uint32_t> utf8_codepoints(const std::string& s) {
    std::vector<uint32_t> cps;
    size_t i = 0;
    while (i < s.size()) {
        unsigned char c = (unsigned char)s[i];
        uint32_t cp = c;
        int extra = 0;
        if (c >= 0xF0) { cp = c & 0x07u; extra = 3; }
        else if (c >= 0xE0) { cp = c & 0x0Fu; extra = 2; }
        else if (c >= 0xC0) { cp = c & 0x1Fu; extra = 1; }
        ++i;
        for (int t = 0; t < extra && i < s.size(); ++t) {
            unsigned char cc = (unsigned char)s[i];
            if ((cc & 0xC0u) != 0x80u) break;  // malformed: treat lead byte alone
            cp = (cp << 6) | (cc & 0x3Fu);
            ++i;
        }
        cps.push_back(cp);
    }
    return cps;
}

int levenshtein(const std::string& a, const std::string& b) {
    std::vector<uint32_t> s1 = utf8_codepoints(a), s2 = utf8_codepoints(b);
    size_t n = s1.size(), m = s2.size();
    std::vector<int> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = (int)j;
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = (int)i;
        for (size_t j = 1; j <= m; ++j) {
            int sub = prev[j - 1] + (s1[i - 1] == s2[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double ned(const std::string& a, const std::string& b) {
    size_t la = utf8_codepoints(a).size(), lb = utf8_codepoints(b).size();
    size_t denom = std::max({la, lb, (size_t)1});
    return (double)levenshtein(a, b) / (double)denom;
}

static std::string canonical_word(const std::string& s) {
    std::string out;
    for (unsigned char c : s)
        if (std::isalnum(c)) out.push_back((char)std::tolower(c));
    return out;
}

double word_accuracy(const std::vector<std::string>& preds,
                     const std::vector<std::string>& gts) {
    if (preds.size() != gts.size()) throw ArgError("word accuracy: list lengths differ");
    if (preds.empty()) return 0.0;
    size_t hits = 0;
    for (size_t i = 0; i < preds.size(); ++i)
        if (canonical_word(preds[i]) == canonical_word(gts[i])) ++hits;
    return 100.0 * (double)hits / (double)preds.size();
}

double mean_one_minus_ned(const std::vector<std::string>& preds,
                          const std::vector<std::string>& gts) {
    if (preds.size() != gts.size()) throw ArgError("mean 1-NED: list lengths differ");
    if (preds.empty()) return 0.0;
    double acc = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) acc += 1.0 - ned(preds[i], gts[i]);
    return acc / (double)preds.size();
}

double exposure_consistency(const Image& img, int patch) {
    if (patch < 1) throw ArgError("exposure consistency: patch must be positive");
    if (img.height % patch != 0 || img.width % patch != 0)
        throw ArgError("exposure consistency: image sides must be divisible by patch size");
    int rows = img.height / patch, cols = img.width / patch;
    std::vector<double> means((size_t)rows * cols, 0.0);
    for (int py = 0; py < rows; ++py)
        for (int px = 0; px < cols; ++px) {
            double acc = 0.0;
            for (int y = 0; y < patch; ++y)
                for (int x = 0; x < patch; ++x)
                    acc += luma709(img.at(py * patch + y, px * patch + x, 0),
                                   img.at(py * patch + y, px * patch + x, 1),
                                   img.at(py * patch + y, px * patch + x, 2));
            means[(size_t)py * cols + px] = acc / ((double)patch * patch);
        }
    double mean = 0.0;
    for (double m : means) mean += m;
    mean /= (double)means.size();
    double var = 0.0;
    for (double m : means) var += (m - mean) * (m - mean);
    var /= (double)means.size();
    return std::sqrt(var);
}

}  // namespace lldiff
