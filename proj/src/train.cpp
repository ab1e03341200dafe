#include "lldiff/train.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "lldiff/degrade.hpp"
#include "lldiff/pipeline.hpp"

namespace lldiff {

LossParts total_loss(const float* pred, const float* target, int h, int w, double sigma,
                     double sigma_data, double lambda_perc, const PerceptualMetric* perc,
                     float* d_pred, float weight) {
    if (h < 1 || w < 1) throw ArgError("loss: empty patch");
    size_t n = (size_t)h * w * 3;
    double lam = loss_weight(sigma, sigma_data);
    double se = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double d = (double)pred[i] - target[i];
        se += d * d;
    }
    double mse = se / (double)n;
    LossParts parts;
    parts.edm = lam * mse;
    parts.mse = mse;
    if (perc && lambda_perc > 0)
        parts.perceptual =
            lambda_perc * perc->eval(pred, target, h, w, d_pred, (float)(lambda_perc * weight));
    parts.total = parts.edm + parts.mse + parts.perceptual;
    if (d_pred) {
        double scale = weight * (lam + 1.0) * 2.0 / (double)n;
        for (size_t i = 0; i < n; ++i) d_pred[i] += (float)(scale * ((double)pred[i] - target[i]));
    }
    return parts;
}

void adam_step(std::vector<float>& w, const std::vector<float>& g, AdamState& st, double lr,
               double beta1, double beta2) {
    constexpr double kEps = 1e-8;
    if (g.size() != w.size()) throw ArgError("adam: weight/gradient size mismatch");
    if (st.m.size() != w.size()) {
        st.m.assign(w.size(), 0.f);
        st.v.assign(w.size(), 0.f);
        st.t = 0;
    }
    st.t += 1;
    double bc1 = 1.0 - std::pow(beta1, (double)st.t);
    double bc2 = 1.0 - std::pow(beta2, (double)st.t);
    for (size_t i = 0; i < w.size(); ++i) {
        double gi = g[i];
        double m = beta1 * st.m[i] + (1.0 - beta1) * gi;
        double v = beta2 * st.v[i] + (1.0 - beta2) * gi * gi;
        st.m[i] = (float)m;
        st.v[i] = (float)v;
        w[i] -= (float)(lr * (m / bc1) / (std::sqrt(v / bc2) + kEps));
    }
}

uint64_t manifest_digest(const ParamStore<float>& ps) {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const char* s, size_t len) {
        for (size_t i = 0; i < len; ++i) {
            h ^= (unsigned char)s[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& e : ps.manifest) {
        mix(e.name.data(), e.name.size());
        mix(":", 1);
        for (int d : e.shape) {
            char buf[16];
            int n = std::snprintf(buf, sizeof buf, "%dx", d);
            mix(buf, (size_t)n);
        }
        mix(";", 1);
    }
    return h;
}

// --- checkpoint serialization ---------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'I', 'D', 'C'};

std::string encode_text(const Checkpoint& c) {
    std::ostringstream o;
    o << std::hexfloat;
    auto put_stats = [&o](const char* pfx, const NormStats& s) {
        o << pfx << ".mu=" << s.mu << "\n"
          << pfx << ".sigma=" << s.sigma << "\n"
          << pfx << ".samples=" << std::dec << s.sample_count << "\n"
          << std::hexfloat;
    };
    o << "denoiser.base_channels=" << std::dec << c.denoiser.base_channels << "\n";
    o << "denoiser.res_blocks=" << c.denoiser.res_blocks_per_resolution << "\n";
    o << "denoiser.mult0=" << c.denoiser.channel_multipliers[0] << "\n";
    o << "denoiser.mult1=" << c.denoiser.channel_multipliers[1] << "\n";
    o << "denoiser.mult2=" << c.denoiser.channel_multipliers[2] << "\n";
    o << std::hexfloat << "denoiser.dropout=" << c.denoiser.dropout << "\n";
    o << "denoiser.in_channels=" << std::dec << c.denoiser.in_channels << "\n";
    o << "denoiser.out_channels=" << c.denoiser.out_channels << "\n";
    o << "denoiser.sigma_embedding_dim=" << c.denoiser.sigma_embedding_dim << "\n";
    o << std::hexfloat;
    o << "diffusion.sigma_min=" << c.diffusion.sigma_min << "\n";
    o << "diffusion.sigma_max=" << c.diffusion.sigma_max << "\n";
    o << "diffusion.rho=" << c.diffusion.rho << "\n";
    o << "diffusion.sigma_data=" << c.diffusion.sigma_data << "\n";
    o << "diffusion.num_steps=" << std::dec << c.diffusion.num_steps << "\n";
    o << std::hexfloat;
    o << "diffusion.p_mean=" << c.diffusion.p_mean << "\n";
    o << "diffusion.p_std=" << c.diffusion.p_std << "\n";
    o << "diffusion.ilvr_steps=" << std::dec << c.diffusion.ilvr_steps << "\n";
    o << std::hexfloat;
    o << "train.learning_rate=" << c.train.learning_rate << "\n";
    o << "train.beta1=" << c.train.adam_beta1 << "\n";
    o << "train.beta2=" << c.train.adam_beta2 << "\n";
    o << "train.batch_size=" << std::dec << c.train.batch_size << "\n";
    o << "train.iterations=" << c.train.iterations << "\n";
    o << std::hexfloat;
    o << "train.lambda_perceptual=" << c.train.lambda_perceptual << "\n";
    o << "train.eta_sigma_max=" << c.train.eta_sigma_max << "\n";
    o << "train.seed=" << std::dec << c.train.seed << "\n";
    o << "train.checkpoint_interval=" << c.train.checkpoint_interval << "\n";
    put_stats("stats.lowlight", c.stats.lowlight);
    put_stats("stats.welllit", c.stats.welllit);
    o << std::dec;
    o << "iteration=" << c.iteration << "\n";
    char hexbuf[32];
    std::snprintf(hexbuf, sizeof hexbuf, "%016llx", (unsigned long long)c.rng_digest);
    o << "rng_digest=" << hexbuf << "\n";
    std::snprintf(hexbuf, sizeof hexbuf, "%016llx", (unsigned long long)c.manifest_hash);
    o << "manifest_hash=" << hexbuf << "\n";
    o << "param_count=" << c.params.size() << "\n";
    return o.str();
}

struct TextReader {
    std::map<std::string, std::string> kv;
    explicit TextReader(const std::string& text) {
        size_t pos = 0;
        while (pos < text.size()) {
            size_t nl = text.find('\n', pos);
            if (nl == std::string::npos) nl = text.size();
            std::string line = text.substr(pos, nl - pos);
            pos = nl + 1;
            if (line.empty()) continue;
            size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw IoError("checkpoint: malformed header line '" + line + "'");
            kv[line.substr(0, eq)] = line.substr(eq + 1);
        }
    }
    std::string take(const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw IoError("checkpoint: missing header key '" + key + "'");
        std::string v = it->second;
        kv.erase(it);
        return v;
    }
    double take_f(const std::string& key) {
        std::string v = take(key);
        char* end = nullptr;
        double d = std::strtod(v.c_str(), &end);
        if (!end || *end) throw IoError("checkpoint: bad numeric value for '" + key + "'");
        return d;
    }
    long long take_i(const std::string& key) {
        std::string v = take(key);
        char* end = nullptr;
        long long d = std::strtoll(v.c_str(), &end, 10);
        if (!end || *end) throw IoError("checkpoint: bad integer value for '" + key + "'");
        return d;
    }
    uint64_t take_hex(const std::string& key) {
        std::string v = take(key);
        char* end = nullptr;
        unsigned long long d = std::strtoull(v.c_str(), &end, 16);
        if (!end || *end) throw IoError("checkpoint: bad hex value for '" + key + "'");
        return (uint64_t)d;
    }
    void expect_empty() const {
        if (!kv.empty())
            throw IoError("checkpoint: unknown header key '" + kv.begin()->first + "'");
    }
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("checkpoint: cannot open '" + path + "' for writing");
    std::string text = encode_text(ckpt);
    uint32_t version = ckpt.version;
    uint32_t len = (uint32_t)text.size();
    f.write(kMagic, 4);
    f.write(reinterpret_cast<const char*>(&version), 4);
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(text.data(), (std::streamsize)text.size());
    f.write(reinterpret_cast<const char*>(ckpt.params.data()),
            (std::streamsize)(ckpt.params.size() * sizeof(float)));
    if (!f) throw IoError("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open '" + path + "'");
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0) throw IoError("checkpoint: bad magic");
    uint32_t version = 0, len = 0;
    f.read(reinterpret_cast<char*>(&version), 4);
    f.read(reinterpret_cast<char*>(&len), 4);
    if (!f) throw IoError("checkpoint: truncated header");
    if (version != 1) throw IoError("checkpoint: unsupported version " + std::to_string(version));
    if (len == 0 || len > (1u << 20)) throw IoError("checkpoint: implausible header length");
    std::string text((size_t)len, '\0');
    f.read(text.data(), (std::streamsize)len);
    if (!f) throw IoError("checkpoint: truncated header block");

    TextReader r(text);
    Checkpoint c;
    c.version = version;
    c.denoiser.base_channels = (int)r.take_i("denoiser.base_channels");
    c.denoiser.res_blocks_per_resolution = (int)r.take_i("denoiser.res_blocks");
    c.denoiser.channel_multipliers = {(int)r.take_i("denoiser.mult0"),
                                      (int)r.take_i("denoiser.mult1"),
                                      (int)r.take_i("denoiser.mult2")};
    c.denoiser.dropout = r.take_f("denoiser.dropout");
    c.denoiser.in_channels = (int)r.take_i("denoiser.in_channels");
    c.denoiser.out_channels = (int)r.take_i("denoiser.out_channels");
    c.denoiser.sigma_embedding_dim = (int)r.take_i("denoiser.sigma_embedding_dim");
    c.diffusion.sigma_min = r.take_f("diffusion.sigma_min");
    c.diffusion.sigma_max = r.take_f("diffusion.sigma_max");
    c.diffusion.rho = r.take_f("diffusion.rho");
    c.diffusion.sigma_data = r.take_f("diffusion.sigma_data");
    c.diffusion.num_steps = (int)r.take_i("diffusion.num_steps");
    c.diffusion.p_mean = r.take_f("diffusion.p_mean");
    c.diffusion.p_std = r.take_f("diffusion.p_std");
    c.diffusion.ilvr_steps = (int)r.take_i("diffusion.ilvr_steps");
    c.train.learning_rate = r.take_f("train.learning_rate");
    c.train.adam_beta1 = r.take_f("train.beta1");
    c.train.adam_beta2 = r.take_f("train.beta2");
    c.train.batch_size = (int)r.take_i("train.batch_size");
    c.train.iterations = r.take_i("train.iterations");
    c.train.lambda_perceptual = r.take_f("train.lambda_perceptual");
    c.train.eta_sigma_max = r.take_f("train.eta_sigma_max");
    c.train.seed = (uint64_t)r.take_i("train.seed");
    c.train.checkpoint_interval = r.take_i("train.checkpoint_interval");
    c.stats.lowlight.mu = r.take_f("stats.lowlight.mu");
    c.stats.lowlight.sigma = r.take_f("stats.lowlight.sigma");
    c.stats.lowlight.sample_count = (long)r.take_i("stats.lowlight.samples");
    c.stats.lowlight.domain_label = "lowlight";
    c.stats.welllit.mu = r.take_f("stats.welllit.mu");
    c.stats.welllit.sigma = r.take_f("stats.welllit.sigma");
    c.stats.welllit.sample_count = (long)r.take_i("stats.welllit.samples");
    c.stats.welllit.domain_label = "welllit";
    c.iteration = r.take_i("iteration");
    c.rng_digest = r.take_hex("rng_digest");
    c.manifest_hash = r.take_hex("manifest_hash");
    long long count = r.take_i("param_count");
    r.expect_empty();
    if (count < 0 || count > (1ll << 31)) throw IoError("checkpoint: implausible param count");

    c.params.resize((size_t)count);
    f.read(reinterpret_cast<char*>(c.params.data()),
           (std::streamsize)(c.params.size() * sizeof(float)));
    if (!f) throw IoError("checkpoint: truncated parameter block");
    char extra;
    if (f.read(&extra, 1)) throw IoError("checkpoint: trailing bytes after parameter block");
    return c;
}

UNet<float> build_net(const Checkpoint& ckpt, int max_batch) {
    UNet<float> net(ckpt.denoiser, kPatch, max_batch);
    if (net.params().total != ckpt.params.size())
        throw IoError("checkpoint: parameter count mismatch with config");
    if (manifest_digest(net.params()) != ckpt.manifest_hash)
        throw IoError("checkpoint: shape manifest mismatch");
    std::copy(ckpt.params.begin(), ckpt.params.end(), net.params().w.begin());
    return net;
}

// --- the optimization loop -------------------------------------------------------

Checkpoint train_loop(const TrainDataset& dataset, const DenoiserConfig& dcfg,
                      const DiffusionConfig& diffcfg, const TrainConfig& tcfg,
                      const TrainCallbacks* cb) {
    dcfg.validate();
    diffcfg.validate();
    tcfg.validate();
    size_t n = dataset.x.size();
    if (n == 0 || dataset.y.size() != n)
        throw ArgError("training: dataset is empty or pair lists differ in length");
    for (size_t i = 0; i < n; ++i) {
        if (dataset.x[i].domain != Domain::normalized || dataset.y[i].domain != Domain::normalized)
            throw ArgError("training: dataset pairs must be normalized");
        if (dataset.x[i].height != 256 || dataset.x[i].width != 256 ||
            dataset.y[i].height != 256 || dataset.y[i].width != 256)
            throw ArgError("training: dataset pairs must be 256x256");
    }

    int B = tcfg.batch_size;
    UNet<float> net(dcfg, kPatch, B);
    net.init_params(tcfg.seed);
    AdamState adam;
    Pcg32 dropout_rng = derive_stream(tcfg.seed, 0xD0);
    auto perc = make_default_perceptual();
    CondNoiseConfig cn{tcfg.eta_sigma_max};

    size_t per = (size_t)kPatch * kPatch;
    std::vector<float> noisy(B * per * 3), cond(B * per * 9), target(B * per * 3),
        pred(B * per * 3), dpred(B * per * 3);
    std::vector<double> sigmas((size_t)B);

    auto make_ckpt = [&](int64_t iter) {
        Checkpoint c;
        c.denoiser = dcfg;
        c.diffusion = diffcfg;
        c.train = tcfg;
        c.stats = dataset.stats;
        c.params = net.params().w;
        c.iteration = iter;
        c.rng_digest = splitmix64(dropout_rng.state ^ (uint64_t)iter);
        c.manifest_hash = manifest_digest(net.params());
        return c;
    };

    for (int64_t iter = 0; iter < tcfg.iterations; ++iter) {
        for (int b = 0; b < B; ++b) {
            uint64_t e = (uint64_t)iter * (uint64_t)B + (uint64_t)b;
            Pcg32 es = derive_stream(tcfg.seed, 1, e);
            size_t idx = es.next_below((uint32_t)n);
            Image xl = tail_denormalize(dataset.x[idx], dataset.stats.lowlight);
            Image yl = tail_denormalize(dataset.y[idx], dataset.stats.welllit);
            augment(xl, yl, es);
            Image xn = tail_normalize(xl, dataset.stats.lowlight);
            Image yn = tail_normalize(yl, dataset.stats.welllit);
            int s = draw_scale(es);
            TrainingExample ex = build_training_example(xn, yn, s, cn, es);
            double sg = sample_training_sigma(diffcfg, es);
            sigmas[(size_t)b] = sg;
            float* nb = noisy.data() + (size_t)b * per * 3;
            for (size_t i = 0; i < per * 3; ++i)
                nb[i] = (float)(ex.target[i] + sg * es.normal());
            std::copy(ex.cond.begin(), ex.cond.end(), cond.begin() + (size_t)b * per * 9);
            std::copy(ex.target.begin(), ex.target.end(), target.begin() + (size_t)b * per * 3);
        }

        net.denoise(noisy.data(), cond.data(), sigmas.data(), B, diffcfg.sigma_data, true,
                    &dropout_rng, pred.data());

        std::fill(dpred.begin(), dpred.end(), 0.f);
        LossParts batch;
        for (int b = 0; b < B; ++b) {
            LossParts p = total_loss(pred.data() + (size_t)b * per * 3,
                                     target.data() + (size_t)b * per * 3, kPatch, kPatch,
                                     sigmas[(size_t)b], diffcfg.sigma_data,
                                     tcfg.lambda_perceptual, perc.get(),
                                     dpred.data() + (size_t)b * per * 3, 1.0f / (float)B);
            batch.total += p.total / B;
            batch.edm += p.edm / B;
            batch.mse += p.mse / B;
            batch.perceptual += p.perceptual / B;
        }
        if (!std::isfinite(batch.total))
            throw NumericError("training: non-finite loss at iteration " + std::to_string(iter));

        net.params().zero_grads();
        net.backward(dpred.data(), true);
        adam_step(net.params().w, net.params().g, adam, tcfg.learning_rate, tcfg.adam_beta1,
                  tcfg.adam_beta2);

        if (cb && cb->on_loss) cb->on_loss(iter, batch);
        if (tcfg.checkpoint_interval > 0 && (iter + 1) % tcfg.checkpoint_interval == 0 &&
            iter + 1 < tcfg.iterations && cb && cb->on_checkpoint)
            cb->on_checkpoint(make_ckpt(iter + 1), iter + 1);
    }
    return make_ckpt(tcfg.iterations);
}

}  // namespace lldiff
