#pragma once

#include <string>
#include <vector>

#include "lldiff/image.hpp"

namespace lldiff {

// 10*log10(1/MSE) on srgb images; capped at 100 dB for MSE < 1e-10
double psnr(const Image& a, const Image& b);

// mean local SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1, valid-region convolution, averaged over channels
double ssim(const Image& a, const Image& b);

// unit-cost edit distance over UTF-8 code points
int levenshtein(const std::string& a, const std::string& b);

// levenshtein / max(|a|, |b|, 1), lengths in code points
double ned(const std::string& a, const std::string& b);

// percent of exact matches after lowercasing and stripping non-alphanumerics
double word_accuracy(const std::vector<std::string>& preds,
                     const std::vector<std::string>& gts);

double mean_one_minus_ned(const std::vector<std::string>& preds,
                          const std::vector<std::string>& gts);

// standard deviation of per-patch mean Rec.709 luma (patch-to-patch exposure
// drift; lower is more consistent)
double exposure_consistency(const Image& img, int patch = 32);

}  // namespace lldiff
