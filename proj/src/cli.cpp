#include "lldiff/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lldiff/datagen.hpp"
#include "lldiff/degrade.hpp"
#include "lldiff/metrics.hpp"
#include "lldiff/pipeline.hpp"
#include "lldiff/png_io.hpp"
#include "lldiff/train.hpp"

namespace fs = std::filesystem;

namespace lldiff {

namespace {

std::vector<std::string> list_pngs(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string n = e.path().filename().string();
        if (n.size() > 4 && n.substr(n.size() - 4) == ".png") names.push_back(n);
    }
    std::sort(names.begin(), names.end());
    return names;
}

// flat key=value config mirroring the three config structs; unknown keys are
// hard usage errors so hyperparameter drift cannot pass silently
void apply_config_file(const std::string& path, DenoiserConfig& dn, DiffusionConfig& df,
                       TrainConfig& tr) {
    std::ifstream f(path);
    if (!f) throw IoError("config: cannot open '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ArgError("config: line " + std::to_string(lineno) + " is not key=value");
        std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        auto as_f = [&]() {
            char* end = nullptr;
            double d = std::strtod(val.c_str(), &end);
            if (!end || *end) throw ArgError("config: bad number for '" + key + "'");
            return d;
        };
        auto as_i = [&]() {
            char* end = nullptr;
            long long d = std::strtoll(val.c_str(), &end, 10);
            if (!end || *end) throw ArgError("config: bad integer for '" + key + "'");
            return d;
        };
        if (key == "denoiser.base_channels") dn.base_channels = (int)as_i();
        else if (key == "denoiser.res_blocks") dn.res_blocks_per_resolution = (int)as_i();
        else if (key == "denoiser.mult0") dn.channel_multipliers[0] = (int)as_i();
        else if (key == "denoiser.mult1") dn.channel_multipliers[1] = (int)as_i();
        else if (key == "denoiser.mult2") dn.channel_multipliers[2] = (int)as_i();
        else if (key == "denoiser.dropout") dn.dropout = as_f();
        else if (key == "denoiser.sigma_embedding_dim") dn.sigma_embedding_dim = (int)as_i();
        else if (key == "diffusion.sigma_min") df.sigma_min = as_f();
        else if (key == "diffusion.sigma_max") df.sigma_max = as_f();
        else if (key == "diffusion.rho") df.rho = as_f();
        else if (key == "diffusion.sigma_data") df.sigma_data = as_f();
        else if (key == "diffusion.num_steps") df.num_steps = (int)as_i();
        else if (key == "diffusion.p_mean") df.p_mean = as_f();
        else if (key == "diffusion.p_std") df.p_std = as_f();
        else if (key == "diffusion.ilvr_steps") df.ilvr_steps = (int)as_i();
        else if (key == "train.learning_rate") tr.learning_rate = as_f();
        else if (key == "train.beta1") tr.adam_beta1 = as_f();
        else if (key == "train.beta2") tr.adam_beta2 = as_f();
        else if (key == "train.batch_size") tr.batch_size = (int)as_i();
        else if (key == "train.iterations") tr.iterations = as_i();
        else if (key == "train.lambda_perceptual") tr.lambda_perceptual = as_f();
        else if (key == "train.eta_sigma_max") tr.eta_sigma_max = as_f();
        else if (key == "train.seed") tr.seed = (uint64_t)as_i();
        else if (key == "train.checkpoint_interval") tr.checkpoint_interval = as_i();
        else throw ArgError("config: unknown key '" + key + "'");
    }
}

std::vector<double> parse_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        char* end = nullptr;
        double d = std::strtod(item.c_str(), &end);
        if (!end || *end) throw ArgError("bad numeric list entry '" + item + "'");
        out.push_back(d);
    }
    if (out.empty()) throw ArgError("empty numeric list");
    return out;
}

// --- subcommand bodies -------------------------------------------------------------

int cmd_stats(const std::string& data, const std::string& out, int n, uint64_t seed) {
    PairedDataset ds = load_paired_dataset(data);
    if (ds.size() == 0) throw IoError("stats: no usable pairs in '" + data + "'");
    Pcg32 rng = derive_stream(seed, 0x57);
    std::vector<size_t> pick = sample_stats_subset(ds.size(), (size_t)n, rng);
    std::vector<Image> lows, highs;
    for (size_t i : pick) {
        lows.push_back(srgb_to_linear(ds.low[i]));
        highs.push_back(srgb_to_linear(ds.high[i]));
    }
    NormStatsPair stats;
    stats.lowlight = fit_stats(lows, "lowlight");
    stats.welllit = fit_stats(highs, "welllit");
    save_stats(stats, out);
    std::cerr << "fitted stats on " << pick.size() << " pairs\n";
    return 0;
}

int cmd_simulate(const std::string& in_dir, const std::string& out_dir, double brightness,
                 double noise, uint64_t seed, const std::string& blist,
                 const std::string& nlist) {
    std::vector<double> bs = blist.empty() ? std::vector<double>{brightness} : parse_list(blist);
    std::vector<double> ns = nlist.empty() ? std::vector<double>{noise} : parse_list(nlist);
    bool grid = bs.size() > 1 || ns.size() > 1;
    std::vector<std::string> names = list_pngs(in_dir);
    if (names.empty()) throw IoError("simulate: no PNGs in '" + in_dir + "'");
    fs::create_directories(out_dir);

    nlohmann::json combos = nlohmann::json::array();
    for (double b : bs)
        for (double l : ns) {
            fs::path dst(out_dir);
            if (grid) {
                char sub[64];
                std::snprintf(sub, sizeof sub, "b%.3f_n%.3f", b, l);
                dst /= sub;
                fs::create_directories(dst);
            }
            DegradeParams params;
            params.brightness = b;
            params.noise_level = l;
            params.seed = seed;
            for (size_t i = 0; i < names.size(); ++i) {
                Image img = load_png((fs::path(in_dir) / names[i]).string());
                Pcg32 rng = derive_stream(seed, 0x51, (uint64_t)i,
                                          splitmix64((uint64_t)(b * 1e6) ^ (uint64_t)(l * 1e6)));
                save_png(degrade(img, params, rng), (dst / names[i]).string(), 8);
            }
            combos.push_back({{"brightness", b},
                              {"noise_level", l},
                              {"dir", grid ? dst.filename().string() : std::string(".")}});
        }
    nlohmann::json manifest = {{"seed", seed}, {"count", names.size()}, {"settings", combos}};
    std::ofstream mf(fs::path(out_dir) / "manifest.json");
    if (!mf) throw IoError("simulate: cannot write manifest.json");
    mf << manifest.dump(2) << "\n";
    return 0;
}

int cmd_glyphs(const std::string& out, int count, uint64_t seed, double brightness,
               double noise) {
    GlyphDatasetParams p;
    p.count = count;
    p.seed = seed;
    p.degrade.brightness = brightness;
    p.degrade.noise_level = noise;
    p.degrade.seed = seed;
    write_glyph_dataset(out, p);
    std::cerr << "wrote " << count << " glyph pairs to " << out << "\n";
    return 0;
}

int cmd_train(const std::string& data, const std::string& stats_path, const std::string& out,
              const std::string& config_path, const std::string& loss_log) {
    DenoiserConfig dn;
    DiffusionConfig df;
    TrainConfig tr;
    if (!config_path.empty()) apply_config_file(config_path, dn, df, tr);

    PairedDataset ds = load_paired_dataset(data);
    if (ds.size() == 0) throw IoError("train: no usable pairs in '" + data + "'");
    NormStatsPair stats = load_stats(stats_path);
    TrainDataset td;
    td.stats = stats;
    for (size_t i = 0; i < ds.size(); ++i) {
        td.x.push_back(tail_normalize(srgb_to_linear(ds.low[i]), stats.lowlight));
        td.y.push_back(tail_normalize(srgb_to_linear(ds.high[i]), stats.welllit));
    }

    std::string log_path = loss_log.empty() ? out + ".loss.csv" : loss_log;
    std::ofstream log(log_path);
    if (!log) throw IoError("train: cannot open loss log '" + log_path + "'");
    TrainCallbacks cb;
    cb.on_loss = [&log](int64_t iter, const LossParts& p) {
        char line[160];
        std::snprintf(line, sizeof line, "%lld,%.9g,%.9g,%.9g,%.9g\n", (long long)iter, p.total,
                      p.edm, p.mse, p.perceptual);
        log << line;
    };
    cb.on_checkpoint = [&out](const Checkpoint& c, int64_t iter) {
        save_checkpoint(c, out + ".iter" + std::to_string(iter));
    };

    Checkpoint ckpt = train_loop(td, dn, df, tr, &cb);
    save_checkpoint(ckpt, out);
    std::cerr << "trained " << tr.iterations << " iterations on " << ds.size() << " pairs\n";
    return 0;
}

int cmd_infer(const std::string& ckpt_path, const std::string& in_path,
              const std::string& out_path, uint64_t seed, bool no_ilvr, int samples,
              int scale_output) {
    if (samples < 1) throw ArgError("infer: --samples must be >= 1");
    if (scale_output < 1) throw ArgError("infer: --scale-output must be >= 1");
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    UNet<float> net = build_net(ckpt, 32);
    InferOptions opts;
    opts.ilvr = !no_ilvr;
    opts.samples = samples;

    auto emit = [&](const Image& img, const fs::path& dst) {
        Image out = img;
        if (scale_output > 1) out = resample(out, out.height * scale_output);
        save_png(out, dst.string(), 8);
    };
    auto sample_name = [&](const fs::path& base, int k) {
        if (samples == 1) return base;
        fs::path stem = base.stem();
        return base.parent_path() / (stem.string() + "_s" + std::to_string(k) +
                                     base.extension().string());
    };

    if (fs::is_directory(in_path)) {
        std::vector<std::string> names = list_pngs(in_path);
        if (names.empty()) throw IoError("infer: no PNGs in '" + in_path + "'");
        fs::create_directories(out_path);
        for (const std::string& n : names) {
            Image img = load_png((fs::path(in_path) / n).string());
            std::vector<Image> rec = cascade_infer(img, net, ckpt.diffusion, ckpt.stats, seed, opts);
            for (int k = 0; k < samples; ++k)
                emit(rec[(size_t)k], sample_name(fs::path(out_path) / n, k));
        }
    } else {
        Image img = load_png(in_path);
        std::vector<Image> rec = cascade_infer(img, net, ckpt.diffusion, ckpt.stats, seed, opts);
        for (int k = 0; k < samples; ++k) emit(rec[(size_t)k], sample_name(out_path, k));
    }
    return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& report) {
    std::vector<std::string> preds = list_pngs(pred_dir), gts = list_pngs(gt_dir);
    std::vector<std::string> common;
    std::set_intersection(preds.begin(), preds.end(), gts.begin(), gts.end(),
                          std::back_inserter(common));
    if (common.empty()) throw IoError("eval: no filenames shared between pred and gt");
    std::ofstream rep(report);
    if (!rep) throw IoError("eval: cannot open report '" + report + "'");
    rep << "name,psnr,ssim,exposure_consistency\n";
    double s_psnr = 0, s_ssim = 0, s_exp = 0;
    for (const std::string& n : common) {
        Image p = load_png((fs::path(pred_dir) / n).string());
        Image g = load_png((fs::path(gt_dir) / n).string());
        double ps = psnr(p, g), ss = ssim(p, g), ex = exposure_consistency(p);
        s_psnr += ps;
        s_ssim += ss;
        s_exp += ex;
        char line[256];
        std::snprintf(line, sizeof line, "%s,%.6f,%.6f,%.6f\n", n.c_str(), ps, ss, ex);
        rep << line;
    }
    double m = (double)common.size();
    char line[256];
    std::snprintf(line, sizeof line, "mean,%.6f,%.6f,%.6f\n", s_psnr / m, s_ssim / m, s_exp / m);
    rep << line;
    return 0;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

int cmd_eval_text(const std::string& pred, const std::string& gt, const std::string& report) {
    std::vector<std::string> ps = read_lines(pred), gs = read_lines(gt);
    double wa = word_accuracy(ps, gs);
    double on = mean_one_minus_ned(ps, gs);
    std::ofstream rep(report);
    if (!rep) throw IoError("eval-text: cannot open report '" + report + "'");
    char line[128];
    std::snprintf(line, sizeof line, "word_accuracy,mean_one_minus_ned\n%.6f,%.6f\n", wa, on);
    rep << line;
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"low-light reconstruction via conditional patch diffusion"};
    app.require_subcommand(1);

    std::string data, out, in, stats_file, config_file, ckpt, pred, gt, report, loss_log;
    std::string blist, nlist;
    uint64_t seed = 0;
    int n = 30, count = 200, samples = 1, scale_output = 1;
    double brightness = 0.4, noise = 0.25;
    bool no_ilvr = false;

    auto* c_stats = app.add_subcommand("stats", "fit normalization stats from a paired dataset");
    c_stats->add_option("--data", data, "dataset root with low/ and high/")->required();
    c_stats->add_option("--out", out, "output stats file")->required();
    c_stats->add_option("--n", n, "sample size (default 30)");
    c_stats->add_option("--seed", seed, "sampling seed");

    auto* c_sim = app.add_subcommand("simulate", "write degraded copies of a directory of PNGs");
    c_sim->add_option("--in", in, "input directory")->required();
    c_sim->add_option("--out", out, "output directory")->required();
    c_sim->add_option("--brightness", brightness, "dimming factor (default 0.4)");
    c_sim->add_option("--noise", noise, "noise level (default 0.25)");
    c_sim->add_option("--brightness-list", blist, "comma-separated sweep values");
    c_sim->add_option("--noise-list", nlist, "comma-separated sweep values");
    c_sim->add_option("--seed", seed, "noise seed");

    auto* c_glyphs = app.add_subcommand("glyphs", "generate a synthetic glyph-pair dataset");
    c_glyphs->add_option("--out", out, "output dataset root")->required();
    c_glyphs->add_option("--count", count, "number of pairs")->required();
    c_glyphs->add_option("--seed", seed, "generator seed");
    c_glyphs->add_option("--brightness", brightness, "low-light dimming (default 0.4)");
    c_glyphs->add_option("--noise", noise, "low-light noise level (default 0.25)");

    auto* c_train = app.add_subcommand("train", "train the denoiser on a paired dataset");
    c_train->add_option("--data", data, "dataset root")->required();
    c_train->add_option("--stats", stats_file, "normalization stats file")->required();
    c_train->add_option("--out", ckpt, "output checkpoint path")->required();
    c_train->add_option("--config", config_file, "key=value config overrides");
    c_train->add_option("--loss-log", loss_log, "loss CSV path (default <ckpt>.loss.csv)");

    auto* c_infer = app.add_subcommand("infer", "reconstruct low-light images");
    c_infer->add_option("--ckpt", ckpt, "checkpoint path")->required();
    c_infer->add_option("--in", in, "input PNG or directory")->required();
    c_infer->add_option("--out", out, "output PNG or directory")->required();
    c_infer->add_option("--seed", seed, "sampling seed");
    c_infer->add_flag("--no-ilvr", no_ilvr, "disable low-frequency guidance");
    c_infer->add_option("--samples", samples, "reconstructions per input (default 1)");
    c_infer->add_option("--scale-output", scale_output, "integer upscale of outputs");

    auto* c_eval = app.add_subcommand("eval", "image metrics over matching filenames");
    c_eval->add_option("--pred", pred, "prediction directory")->required();
    c_eval->add_option("--gt", gt, "ground-truth directory")->required();
    c_eval->add_option("--report", report, "output CSV")->required();

    auto* c_eval_text = app.add_subcommand("eval-text", "text metrics over aligned line files");
    c_eval_text->add_option("--pred", pred, "predictions, one per line")->required();
    c_eval_text->add_option("--gt", gt, "ground truth, one per line")->required();
    c_eval_text->add_option("--report", report, "output CSV")->required();

    try {
        app.parse(argc, argv);
        if (c_stats->parsed()) return cmd_stats(data, out, n, seed);
        if (c_sim->parsed()) return cmd_simulate(in, out, brightness, noise, seed, blist, nlist);
        if (c_glyphs->parsed()) return cmd_glyphs(out, count, seed, brightness, noise);
        if (c_train->parsed()) return cmd_train(data, stats_file, ckpt, config_file, loss_log);
        if (c_infer->parsed())
            return cmd_infer(ckpt, in, out, seed, no_ilvr, samples, scale_output);
        if (c_eval->parsed()) return cmd_eval(pred, gt, report);
        if (c_eval_text->parsed()) return cmd_eval_text(pred, gt, report);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const ArgError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace lldiff
