#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>

#include "adae/common.hpp"
#include "adae/degrade.hpp"
#include "adae/easf.hpp"
#include "adae/evio.hpp"
#include "adae/imagery.hpp"
#include "adae/mgtc.hpp"
#include "adae/nn.hpp"

#include "json.hpp"

namespace adae::fuse {

struct LossWeights {
    double lambda1 = 1.0;  // scale-invariant depth loss
    double lambda2 = 0.2;  // spatial feature-selection loss
    double lambda3 = 0.1;  // temporal contrastive loss
};

struct Arch {
    int frame_channels = 1;
    int voxel_bins = 5;
    int c1 = 8, c2 = 16, c3 = 32;  // encoder widths; c3 is also the adapter dim
    int d1 = 32, d2 = 16;  // decoder widths; wider than the encoder so depth
                           // correction from events does not crowd out the
                           // frame path's normal-region fit
};

// ------------------------------------------------------------------------
// Losses
// ------------------------------------------------------------------------

template <typename T>
struct ScalarGrad {
    double loss = 0;
    Plane<T> grad;
};

/// Scale-invariant log-depth loss over the jointly valid mask.
template <typename T>
ScalarGrad<T> scale_invariant_loss(const Plane<T>& pred, const img::DepthMap& gt) {
    if (pred.h != gt.h() || pred.w != gt.w())
        throw ShapeMismatch("scale_invariant_loss: shape mismatch");
    std::vector<double> d(pred.size(), 0.0);
    std::vector<uint8_t> use(pred.size(), 0);
    size_t n = 0;
    double sum = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (!gt.valid.v[i]) continue;
        if (!(pred.v[i] > 0)) throw NonPositiveDepth("prediction <= 0 on valid pixel");
        d[i] = std::log(static_cast<double>(pred.v[i])) - std::log(gt.data.v[i]);
        use[i] = 1;
        sum += d[i];
        ++n;
    }
    if (n < 2) throw EmptyMask("scale_invariant_loss: need >= 2 valid pixels");
    double sq = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        if (use[i]) sq += d[i] * d[i];
    const double N = static_cast<double>(n);
    ScalarGrad<T> out;
    out.loss = sq / N - (sum / N) * (sum / N);
    out.grad = Plane<T>(pred.h, pred.w);
    for (size_t i = 0; i < pred.size(); ++i)
        if (use[i])
            out.grad.v[i] =
                static_cast<T>((2.0 * d[i] / N - 2.0 * sum / (N * N)) / pred.v[i]);
    return out;
}

template <typename T>
struct TensorGrad {
    double loss = 0;
    Tensor3<T> grad;
};

/// Mean elementwise L1 between the frame and event features; gradient
/// w.r.t. the event features, subgradient 0 at ties.
template <typename T>
TensorGrad<T> pretrain_loss(const Tensor3<T>& f_frame, const Tensor3<T>& f_event) {
    if (!f_frame.same_shape(f_event)) throw ShapeMismatch("pretrain_loss: shape mismatch");
    TensorGrad<T> out;
    out.grad = Tensor3<T>(f_event.c, f_event.h, f_event.w);
    const double inv_n = 1.0 / static_cast<double>(f_frame.size());
    double acc = 0;
    for (size_t i = 0; i < f_frame.v.size(); ++i) {
        const double diff = static_cast<double>(f_frame.v[i]) - f_event.v[i];
        acc += std::abs(diff);
        out.grad.v[i] = static_cast<T>(diff > 0 ? -inv_n : (diff < 0 ? inv_n : 0.0));
    }
    out.loss = acc * inv_n;
    return out;
}

inline double total_loss(double l_gt, double l_s, double l_t, const LossWeights& lw) {
    const double l = lw.lambda1 * l_gt + lw.lambda2 * l_s + lw.lambda3 * l_t;
    if (!std::isfinite(l)) throw NonFinite("total loss is not finite");
    return l;
}

// ------------------------------------------------------------------------
// Toy fusion network: frozen frame encoder, trainable event encoder,
// single-head cross-attention adapter (frame queries, event keys/values)
// with residual add, and an upsampling decoder with a softplus depth head.
// ------------------------------------------------------------------------

template <typename T>
class FuseNet {
  public:
    explicit FuseNet(const Arch& arch = {})
        : arch_(arch),
          f1_(arch.frame_channels, arch.c1, 2),
          f2_(arch.c1, arch.c2, 2),
          f3_(arch.c2, arch.c3, 2),
          e1_(arch.voxel_bins, arch.c1, 2),
          e2_(arch.c1, arch.c2, 2),
          e3_(arch.c2, arch.c3, 2),
          ln_f_(arch.c3),
          ln_e_(arch.c3),
          wq_(arch.c3, arch.c3),
          wk_(arch.c3, arch.c3),
          wv_(arch.c3, arch.c3),
          wo_(arch.c3, arch.c3),
          attn_(arch.c3),
          d1_(arch.c3, arch.d1, 1),
          d2_(arch.d1, arch.d2, 1),
          d3_(arch.d2, 1, 1) {}

    /// Seeded initialization. The adapter value projection starts at zero so
    /// the fused path initially reproduces the frozen frame-only prediction.
    void init(uint64_t seed) {
        std::mt19937_64 rng(seed);
        f1_.init(rng);
        f2_.init(rng);
        f3_.init(rng);
        e1_.init(rng);
        e2_.init(rng);
        e3_.init(rng);
        // near-diagonal start: with the positional code on both paths this
        // makes attention approximately local at init, which the value
        // projection can exploit immediately
        wq_.init_identity(rng);
        wk_.init_identity(rng);
        wv_.init_zero();
        wo_.init(rng);
        d1_.init(rng);
        d2_.init(rng);
        d3_.init(rng);
    }

    void freeze_frame_encoder() {
        for (auto* p : {&f1_.weight, &f1_.bias, &f2_.weight, &f2_.bias, &f3_.weight, &f3_.bias})
            p->frozen = true;
    }

    struct ForwardResult {
        Tensor3<T> f_frame;
        Tensor3<T> f_event;
        Tensor3<T> f_fused;
        Tensor3<T> penult;  // decoder feature map the temporal loss samples
        Plane<T> depth;
    };

    ForwardResult forward(const Tensor3<T>& frame, const Tensor3<T>& vox) {
        if (frame.h != vox.h || frame.w != vox.w)
            throw ShapeMismatch("forward: frame and voxel resolution differ");
        ForwardResult r;
        r.f_frame = rf3_.forward(f3_.forward(rf2_.forward(f2_.forward(rf1_.forward(f1_.forward(frame))))));
        r.f_event = re3_.forward(e3_.forward(re2_.forward(e2_.forward(re1_.forward(e1_.forward(vox))))));

        const auto tf = nn::to_tokens(r.f_frame);
        const auto te = nn::to_tokens(r.f_event);
        const auto qin = ln_f_.forward(tf);
        const auto kin = ln_e_.forward(te);
        // fixed positional code on the query/key paths so attention can
        // address tokens by location even where content is uniform (e.g.
        // saturated regions); the value path stays position-free
        const auto pe = pos_code(r.f_frame.h, r.f_frame.w, arch_.c3);
        auto qpe = qin;
        auto kpe = kin;
        for (size_t i = 0; i < pe.size(); ++i)
            for (int c = 0; c < arch_.c3; ++c) {
                qpe[i][c] += pe[i][c];
                kpe[i][c] += pe[i][c];
            }
        const auto q = wq_.forward(qpe);
        auto k = wk_.forward(kpe);
        auto v = wv_.forward(kin);
        // sink token (zero key and value): a query matching no event token
        // can attend here and receive no injection at all
        k.push_back(std::vector<T>(arch_.c3, T{}));
        v.push_back(std::vector<T>(arch_.c3, T{}));
        const auto att = attn_.forward(q, k, v);
        const auto proj = wo_.forward(att);
        // entropy gate on the injection: per-token event-vs-frame weight,
        // zero where the frame alone is informative and events are silent,
        // so the event path cannot disturb well-exposed regions
        gate_ = entropy_gate(frame, vox, r.f_frame.h, r.f_frame.w);
        auto fused = r.f_frame;
        for (size_t i = 0; i < proj.size(); ++i)
            for (int c = 0; c < arch_.c3; ++c)
                fused.v[static_cast<size_t>(c) * proj.size() + i] +=
                    static_cast<T>(gate_.v[i]) * proj[i][c];
        r.f_fused = fused;

        auto x = rd1_.forward(d1_.forward(u1_.forward(fused)));
        r.penult = rd2_.forward(d2_.forward(u2_.forward(x)));
        auto logits = d3_.forward(u3_.forward(r.penult));
        auto depth3 = sp_.forward(logits);
        r.depth = Plane<T>(depth3.h, depth3.w);
        r.depth.v = depth3.v;
        return r;
    }

    /// Backward with gradients injected at the depth output, the fused
    /// features, the decoder penultimate features and the event features.
    /// Empty tensors mean zero. Parameter gradients accumulate into the
    /// layers' Param buffers.
    void backward(const Plane<T>& g_depth, const Tensor3<T>& g_fused_in,
                  const Tensor3<T>& g_penult_in, const Tensor3<T>& g_event_in) {
        Tensor3<T> g(1, g_depth.h, g_depth.w);
        g.v = g_depth.v;
        g = sp_.backward(g);
        g = u3_.backward(d3_.backward(g));
        if (g_penult_in.size()) add(g, g_penult_in);
        g = u2_.backward(d2_.backward(rd2_.backward(g)));
        g = u1_.backward(d1_.backward(rd1_.backward(g)));
        if (g_fused_in.size()) add(g, g_fused_in);

        // adapter: fused = f_frame + Wo(attn(Wq ln(f_frame), Wk ln(f_event), Wv ln(f_event)))
        const size_t ntok = static_cast<size_t>(g.h) * g.w;
        nn::Mat<T> g_proj(ntok, std::vector<T>(arch_.c3));
        for (size_t i = 0; i < ntok; ++i)
            for (int c = 0; c < arch_.c3; ++c)
                g_proj[i][c] = static_cast<T>(gate_.v[i]) *
                               g.v[static_cast<size_t>(c) * ntok + i];
        auto g_att = wo_.backward(g_proj);
        nn::Mat<T> gq, gk, gv;
        attn_.backward(g_att, gq, gk, gv);
        gk.pop_back();  // sink rows are constants
        gv.pop_back();
        auto g_kin = wk_.backward(gk);
        const auto g_vin = wv_.backward(gv);
        for (size_t i = 0; i < g_kin.size(); ++i)
            for (int c = 0; c < arch_.c3; ++c) g_kin[i][c] += g_vin[i][c];
        auto g_te = ln_e_.backward(g_kin);
        // query path plus the residual reach the frame encoder; propagation
        // stops there once it is frozen, but the LN always collects gradient
        auto g_tf = ln_f_.backward(wq_.backward(gq));
        if (!f1_.weight.frozen) {
            Tensor3<T> g_frame = nn::from_tokens(g_tf, arch_.c3, g.h, g.w);
            for (size_t i = 0; i < g_frame.v.size(); ++i) g_frame.v[i] += g.v[i];
            f1_.backward(rf1_.backward(
                f2_.backward(rf2_.backward(f3_.backward(rf3_.backward(g_frame))))));
        }

        Tensor3<T> g_event = nn::from_tokens(g_te, arch_.c3, g.h, g.w);
        if (g_event_in.size()) add(g_event, g_event_in);
        auto ge = e1_.backward(re1_.backward(
            e2_.backward(re2_.backward(e3_.backward(re3_.backward(g_event))))));
        (void)ge;
    }

    std::vector<std::pair<std::string, nn::Param<T>*>> named_params() {
        return {
            {"frame_enc1_w", &f1_.weight}, {"frame_enc1_b", &f1_.bias},
            {"frame_enc2_w", &f2_.weight}, {"frame_enc2_b", &f2_.bias},
            {"frame_enc3_w", &f3_.weight}, {"frame_enc3_b", &f3_.bias},
            {"event_enc1_w", &e1_.weight}, {"event_enc1_b", &e1_.bias},
            {"event_enc2_w", &e2_.weight}, {"event_enc2_b", &e2_.bias},
            {"event_enc3_w", &e3_.weight}, {"event_enc3_b", &e3_.bias},
            {"ln_frame_g", &ln_f_.gamma},  {"ln_frame_b", &ln_f_.beta},
            {"ln_event_g", &ln_e_.gamma},  {"ln_event_b", &ln_e_.beta},
            {"adapter_q_w", &wq_.weight},  {"adapter_q_b", &wq_.bias},
            {"adapter_k_w", &wk_.weight},  {"adapter_k_b", &wk_.bias},
            {"adapter_v_w", &wv_.weight},  {"adapter_v_b", &wv_.bias},
            {"adapter_o_w", &wo_.weight},  {"adapter_o_b", &wo_.bias},
            {"dec1_w", &d1_.weight},       {"dec1_b", &d1_.bias},
            {"dec2_w", &d2_.weight},       {"dec2_b", &d2_.bias},
            {"dec3_w", &d3_.weight},       {"dec3_b", &d3_.bias},
        };
    }

    bool is_event_encoder(const std::string& name) const {
        return name.rfind("event_enc", 0) == 0;
    }

    void zero_grad() {
        for (auto& [name, p] : named_params()) p->zero_grad();
    }

    const Arch& arch() const { return arch_; }

  private:
    // per-token fusion weight from patch entropies at the token stride; not
    // differentiated (it is a function of the inputs only)
    static Plane<float> entropy_gate(const Tensor3<T>& frame, const Tensor3<T>& vox,
                                     int th, int tw) {
        img::Image im;
        im.data = Plane<float>(frame.h, frame.w);
        for (size_t i = 0; i < im.data.size(); ++i)
            im.data.v[i] = static_cast<float>(frame.v[i]);
        evio::VoxelGrid gr;
        gr.bins = vox.c;
        gr.h = vox.h;
        gr.w = vox.w;
        gr.data.assign(vox.v.begin(), vox.v.end());
        const auto ef = easf::patch_entropy_frame(im, 8, 32);
        const auto ee = easf::patch_entropy_event(gr, 8, 32);
        const auto wm = easf::weight_map(ee, ef, 0.3f);
        return easf::resample_nearest(wm.data, th, tw);
    }

    // sinusoidal code over the token grid, x in the first half of the
    // channels, y in the second; additive constant, so backward is untouched
    static nn::Mat<T> pos_code(int th, int tw, int dim) {
        nn::Mat<T> pe(static_cast<size_t>(th) * tw, std::vector<T>(dim, T{}));
        const int half = dim / 2;
        auto fill = [&](std::vector<T>& row, int off, double p) {
            for (int i = 0; 2 * i + 1 < half; ++i) {
                const double f = std::pow(100.0, -2.0 * i / half);
                row[off + 2 * i] = static_cast<T>(std::sin(p * f));
                row[off + 2 * i + 1] = static_cast<T>(std::cos(p * f));
            }
        };
        for (int y = 0; y < th; ++y)
            for (int x = 0; x < tw; ++x) {
                auto& row = pe[static_cast<size_t>(y) * tw + x];
                fill(row, 0, x);
                fill(row, half, y);
            }
        return pe;
    }

    static void add(Tensor3<T>& a, const Tensor3<T>& b) {
        if (!a.same_shape(b)) throw ShapeMismatch("gradient injection shape mismatch");
        for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
    }

    Arch arch_;
    nn::Conv2d<T> f1_, f2_, f3_;
    nn::Relu<T> rf1_, rf2_, rf3_;
    nn::Conv2d<T> e1_, e2_, e3_;
    nn::Relu<T> re1_, re2_, re3_;
    nn::LayerNorm<T> ln_f_, ln_e_;
    nn::Linear<T> wq_, wk_, wv_, wo_;
    nn::Attention<T> attn_;
    nn::Upsample2x<T> u1_, u2_, u3_;
    nn::Conv2d<T> d1_, d2_, d3_;
    nn::Relu<T> rd1_, rd2_;
    nn::Softplus<T> sp_;
    Plane<float> gate_;  // cached injection gate from the last forward
};

// Conversions into the network's input tensors.
template <typename T>
Tensor3<T> frame_tensor(const img::Image& im) {
    Tensor3<T> t(1, im.h(), im.w());
    for (size_t i = 0; i < im.data.size(); ++i) t.v[i] = static_cast<T>(im.data.v[i]);
    return t;
}

template <typename T>
Tensor3<T> voxel_tensor(const evio::VoxelGrid& g) {
    Tensor3<T> t(g.bins, g.h, g.w);
    for (size_t i = 0; i < g.data.size(); ++i) t.v[i] = static_cast<T>(g.data[i]);
    return t;
}

// ------------------------------------------------------------------------
// SGD with momentum; never touches frozen parameters.
// ------------------------------------------------------------------------
template <typename T>
class SgdMomentum {
  public:
    SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

    void set_lr(double lr) { lr_ = lr; }

    void step(std::vector<std::pair<std::string, nn::Param<T>*>> params,
              const std::function<bool(const std::string&)>& trainable) {
        for (auto& [name, p] : params) {
            if (p->frozen || !trainable(name)) continue;
            auto& vel = velocity_[name];
            if (vel.size() != p->w.size()) vel.assign(p->w.size(), 0.0);
            for (size_t i = 0; i < p->w.size(); ++i) {
                vel[i] = momentum_ * vel[i] - lr_ * static_cast<double>(p->g[i]);
                p->w[i] += static_cast<T>(vel[i]);
            }
        }
    }

  private:
    double lr_, momentum_;
    std::map<std::string, std::vector<double>> velocity_;
};

// ------------------------------------------------------------------------
// Checkpoints: one TNS1 tensor per parameter plus a JSON descriptor.
// ------------------------------------------------------------------------
template <typename T>
void save_checkpoint(FuseNet<T>& net, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json desc;
    desc["frame_channels"] = net.arch().frame_channels;
    desc["voxel_bins"] = net.arch().voxel_bins;
    desc["widths"] = {net.arch().c1, net.arch().c2, net.arch().c3};
    desc["dec_widths"] = {net.arch().d1, net.arch().d2};
    nlohmann::json plist = nlohmann::json::array();
    for (auto& [name, p] : net.named_params()) {
        img::TensorFile t;
        t.dims = {1, static_cast<uint32_t>(p->w.size())};
        t.data.assign(p->w.begin(), p->w.end());
        img::save_tensor(dir + "/" + name + ".tns", t);
        plist.push_back({{"name", name}, {"frozen", p->frozen}, {"size", p->w.size()}});
    }
    desc["params"] = plist;
    std::ofstream f(dir + "/arch.json");
    f << desc.dump(2) << "\n";
}

template <typename T>
void load_checkpoint(FuseNet<T>& net, const std::string& dir) {
    std::ifstream f(dir + "/arch.json");
    if (!f) throw IoError("checkpoint descriptor missing: " + dir + "/arch.json");
    nlohmann::json desc = nlohmann::json::parse(f);
    for (auto& [name, p] : net.named_params()) {
        const img::TensorFile t = img::load_tensor(dir + "/" + name + ".tns");
        if (t.data.size() != p->w.size())
            throw ShapeMismatch("checkpoint tensor size mismatch: " + name);
        for (size_t i = 0; i < t.data.size(); ++i) p->w[i] = static_cast<T>(t.data[i]);
    }
    for (const auto& rec : desc["params"])
        if (rec["frozen"].get<bool>())
            for (auto& [name, p] : net.named_params())
                if (name == rec["name"].get<std::string>()) p->frozen = true;
}

// ------------------------------------------------------------------------
// Training
// ------------------------------------------------------------------------

struct Sample {
    img::Image frame;         // possibly degraded input frame
    evio::VoxelGrid vox;      // aligned event voxel grid
    img::FlowField flow;      // external flow input
    img::DepthMap gt;         // ground-truth depth
    degrade::RegionPartition partition;  // illumination regions (evaluation)
};

struct TrainConfig {
    double lr = 1e-4;
    double lr_decay = 1.0;  // multiplicative per-epoch decay in step 2
    double momentum = 0.9;
    int pretrain_epochs = 10;
    int epochs = 50;
    LossWeights weights;
    uint64_t seed = 7;
    int patch_size = 16;
    int entropy_bins = 32;
    double entropy_threshold = 0.3;
    double tau = 0.07;
    std::vector<double> timestamps = {-1.0, -0.5, 0.0, 0.5, 1.0};
    double edge_thresh_frac = 0.05;  // of the valid-depth range
    int max_per_class = 256;
    bool use_events = true;  // false: zero voxels, frame-only baseline
};

struct EpochRecord {
    int epoch = 0;
    std::string phase;  // "pretrain" or "train"
    double loss = 0;
    double l_gt = 0, l_s = 0, l_t = 0;
    size_t skipped_temporal = 0;  // samples where the contrastive loss had no batch
};

inline double depth_range_thresh(const img::DepthMap& d, double frac) {
    float mn = std::numeric_limits<float>::max(), mx = std::numeric_limits<float>::lowest();
    for (size_t i = 0; i < d.data.size(); ++i)
        if (d.valid.v[i]) {
            mn = std::min(mn, d.data.v[i]);
            mx = std::max(mx, d.data.v[i]);
        }
    const double r = (mx > mn) ? (mx - mn) : 1.0;
    return frac * r;
}

/// Two-step training. Step 1 pre-trains the event encoder alone on the L1
/// feature-matching loss; step 2 trains event encoder + adapter + decoder on
/// the full weighted objective with the frame encoder frozen.
template <typename T>
std::vector<EpochRecord> train(FuseNet<T>& net, const std::vector<Sample>& samples,
                               const TrainConfig& cfg) {
    if (samples.empty()) throw ManifestInvalid("train: empty sample list");
    net.freeze_frame_encoder();
    std::vector<EpochRecord> log;

    // Per-sample fusion weight maps are fixed by the inputs; compute once.
    std::vector<Plane<float>> wmaps;
    wmaps.reserve(samples.size());
    for (const auto& s : samples) {
        const auto ef = easf::patch_entropy_frame(s.frame, cfg.patch_size, cfg.entropy_bins);
        const auto ee = easf::patch_entropy_event(s.vox, cfg.patch_size, cfg.entropy_bins);
        wmaps.push_back(
            easf::weight_map(ee, ef, static_cast<float>(cfg.entropy_threshold)).data);
    }
    std::vector<mgtc::RegionLabels> regions;
    regions.reserve(samples.size());
    for (const auto& s : samples) {
        const double thr = depth_range_thresh(s.gt, cfg.edge_thresh_frac);
        regions.push_back(mgtc::localize_regions(s.gt, s.flow, cfg.timestamps,
                                                 static_cast<float>(thr)));
    }

    auto vox_input = [&](const Sample& s) {
        Tensor3<T> v = voxel_tensor<T>(s.vox);
        if (!cfg.use_events) std::fill(v.v.begin(), v.v.end(), T{});
        return v;
    };

    // Step 1: event-encoder pre-training.
    {
        SgdMomentum<T> opt(cfg.lr, cfg.momentum);
        for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
            EpochRecord rec;
            rec.epoch = epoch;
            rec.phase = "pretrain";
            for (const auto& s : samples) {
                net.zero_grad();
                auto fwd = net.forward(frame_tensor<T>(s.frame), vox_input(s));
                auto pl = pretrain_loss(fwd.f_frame, fwd.f_event);
                rec.loss += pl.loss;
                if (!std::isfinite(pl.loss)) throw DivergedLoss("pretrain loss is not finite");
                net.backward(Plane<T>(fwd.depth.h, fwd.depth.w), {}, {}, pl.grad);
                opt.step(net.named_params(),
                         [&](const std::string& n) { return net.is_event_encoder(n); });
            }
            rec.loss /= static_cast<double>(samples.size());
            log.push_back(rec);
        }
    }

    // Step 2: full objective.
    {
        SgdMomentum<T> opt(cfg.lr, cfg.momentum);
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            opt.set_lr(cfg.lr * std::pow(cfg.lr_decay, epoch));
            EpochRecord rec;
            rec.epoch = epoch;
            rec.phase = "train";
            for (size_t si = 0; si < samples.size(); ++si) {
                const auto& s = samples[si];
                net.zero_grad();
                auto fwd = net.forward(frame_tensor<T>(s.frame), vox_input(s));

                auto gl = scale_invariant_loss(fwd.depth, s.gt);

                double l_s = 0;
                Tensor3<T> g_fused;
                if (cfg.weights.lambda2 > 0) {
                    try {
                        auto sl = easf::spatial_loss(fwd.f_fused, fwd.f_event, fwd.f_frame,
                                                     wmaps[si]);
                        l_s = sl.loss;
                        g_fused = std::move(sl.grad_fused);
                        for (auto& v : g_fused.v)
                            v = static_cast<T>(v * cfg.weights.lambda2);
                    } catch (const ZeroNorm&) {
                        // degenerate feature column this step; drop the term
                        g_fused = Tensor3<T>();
                    }
                }

                double l_t = 0;
                Tensor3<T> g_penult;
                if (cfg.weights.lambda3 > 0 && !regions[si].empty_edges) {
                    try {
                        auto batch = mgtc::sample_batch(fwd.penult, regions[si],
                                                        cfg.max_per_class,
                                                        split_seed(cfg.seed, "mgtc-sample") ^
                                                            (epoch * 1315423911ull + si),
                                                        static_cast<T>(cfg.tau));
                        auto cl = mgtc::contrastive_loss(batch);
                        l_t = cl.loss;
                        g_penult = Tensor3<T>(fwd.penult.c, fwd.penult.h, fwd.penult.w);
                        mgtc::scatter_batch_grad(batch, cl.grad, g_penult,
                                                 cfg.weights.lambda3);
                    } catch (const ClassUnderflow&) {
                        ++rec.skipped_temporal;
                    }
                } else if (cfg.weights.lambda3 > 0) {
                    ++rec.skipped_temporal;
                }

                const double l = total_loss(gl.loss, l_s, l_t, cfg.weights);
                if (!std::isfinite(l)) throw DivergedLoss("training loss is not finite");
                rec.loss += l;
                rec.l_gt += gl.loss;
                rec.l_s += l_s;
                rec.l_t += l_t;

                Plane<T> g_depth = gl.grad;
                for (auto& v : g_depth.v) v = static_cast<T>(v * cfg.weights.lambda1);
                net.backward(g_depth, g_fused, g_penult, {});
                opt.step(net.named_params(), [](const std::string&) { return true; });
            }
            const double inv = 1.0 / static_cast<double>(samples.size());
            rec.loss *= inv;
            rec.l_gt *= inv;
            rec.l_s *= inv;
            rec.l_t *= inv;
            log.push_back(rec);
        }
    }
    return log;
}

/// Foundation stand-in: train the frame path alone on clean samples, then
/// freeze the frame encoder. The decoder stays trainable afterwards.
template <typename T>
void pretrain_foundation(FuseNet<T>& net, const std::vector<Sample>& clean_samples,
                         double lr, int epochs) {
    SgdMomentum<T> opt(lr, 0.9);
    auto frame_path = [&](const std::string& n) {
        return n.rfind("frame_enc", 0) == 0 || n.rfind("dec", 0) == 0;
    };
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (const auto& s : clean_samples) {
            net.zero_grad();
            Tensor3<T> zero_vox(net.arch().voxel_bins, s.frame.h(), s.frame.w());
            auto fwd = net.forward(frame_tensor<T>(s.frame), zero_vox);
            auto gl = scale_invariant_loss(fwd.depth, s.gt);
            if (!std::isfinite(gl.loss)) throw DivergedLoss("foundation pretrain diverged");
            net.backward(gl.grad, {}, {}, {});
            opt.step(net.named_params(), frame_path);
        }
    }
    net.freeze_frame_encoder();
}

}  // namespace adae::fuse
