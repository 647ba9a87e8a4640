// adae: event-guided depth fusion pipeline driver.
//
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "adae/degrade.hpp"
#include "adae/easf.hpp"
#include "adae/evio.hpp"
#include "adae/fusenet.hpp"
#include "adae/gradcheck.hpp"
#include "adae/imagery.hpp"
#include "adae/metrics.hpp"
#include "adae/mgtc.hpp"
#include "adae/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace adae;

static const char* kVersion = "0.1.0";

// ---------------------------------------------------------------- helpers --

static std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

static uint64_t fnv1a(const std::string& s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

static std::string hex64(uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Reproducibility header every artifact-producing run writes out.
static json run_header(const std::string& command, uint64_t seed, const json& config) {
    json h;
    h["version"] = kVersion;
    h["command"] = command;
    h["seed"] = seed;
    h["config"] = config;
    h["config_hash"] = hex64(fnv1a(config.dump()));
    return h;
}

static void write_json(const std::string& path, const json& j) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << j.dump(2) << "\n";
}

// defaults < config file < flags: config values only fill options the user
// did not pass on the command line.
static void apply_config(CLI::App* cmd, const std::string& config_path) {
    if (config_path.empty()) return;
    const json cfg = json::parse(read_file(config_path));
    for (auto& [key, val] : cfg.items()) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (!opt || opt->count() > 0) continue;
        std::vector<std::string> args;
        if (val.is_array())
            for (const auto& v : val) args.push_back(v.dump());
        else if (val.is_string())
            args.push_back(val.get<std::string>());
        else
            args.push_back(val.dump());
        opt->add_result(args.empty() ? "" : args[0]);
        for (size_t i = 1; i < args.size(); ++i) opt->add_result(args[i]);
        opt->run_callback();
    }
}

static evio::EventStream load_events(const std::string& path,
                                     bool zero_as_negative = false) {
    evio::ParseOptions opt;
    opt.zero_as_negative = zero_as_negative;
    const std::string body = read_file(path);
    const auto fmt = path.size() > 4 && path.substr(path.size() - 4) == ".csv"
                         ? evio::Format::csv
                         : evio::Format::packed_binary;
    return evio::parse_events(body, fmt, opt);
}

static void save_heatmap_pgm(const std::string& path, const Plane<float>& m) {
    float mx = 0;
    for (float v : m.v) mx = std::max(mx, v);
    Plane<float> scaled = m;
    if (mx > 0)
        for (auto& v : scaled.v) v /= mx;
    img::save_pgm(path, scaled);
}

// --------------------------------------------------------------- voxelize --

static int cmd_voxelize(const std::string& in, int bins, bool zero_neg,
                        const std::string& out, const json& config) {
    const auto stream = load_events(in, zero_neg);
    const auto grid = evio::voxelize(stream, bins);
    img::TensorFile t;
    t.dims = {static_cast<uint32_t>(grid.bins), static_cast<uint32_t>(grid.h),
              static_cast<uint32_t>(grid.w)};
    t.data.assign(grid.data.begin(), grid.data.end());
    img::save_tensor(out, t);

    json m = run_header("voxelize", 0, config);
    m["input"] = in;
    m["output"] = out;
    m["events"] = stream.count();
    m["signed_mass"] = evio::signed_mass(grid);
    write_json(out + ".json", m);
    return 0;
}

// ---------------------------------------------------------------- degrade --

static int cmd_degrade(const std::vector<std::string>& in, double alpha, double offset,
                       uint64_t seed, const std::string& prefix, const json& config) {
    std::vector<img::Image> frames;
    for (const auto& p : in) {
        img::Image im;
        im.data = img::load_pgm(p);
        frames.push_back(std::move(im));
    }
    degrade::DegradeRecipe recipe;
    recipe.alpha = alpha;
    recipe.offset = offset;
    recipe.blur_frames = static_cast<int>(frames.size());
    recipe.seed = seed;
    const auto pair = degrade::make_degraded_pair(frames, recipe);

    img::save_pgm(prefix + "_degraded.pgm", pair.degraded.data);
    img::save_pgm(prefix + "_clean.pgm", pair.clean.data);
    img::save_pgm_raw(prefix + "_extreme.pgm", pair.partition.extreme_mask);
    img::save_pgm_raw(prefix + "_normal.pgm", pair.partition.normal_mask);

    json m = run_header("degrade", seed, config);
    m["inputs"] = in;
    m["alpha"] = alpha;
    m["offset"] = offset;
    m["K"] = frames.size();
    m["clipped_fraction"] = pair.clipped_fraction;
    m["paths"] = {{"degraded", prefix + "_degraded.pgm"},
                  {"clean", prefix + "_clean.pgm"},
                  {"extreme_mask", prefix + "_extreme.pgm"},
                  {"normal_mask", prefix + "_normal.pgm"}};
    write_json(prefix + "_manifest.json", m);
    return 0;
}

// ---------------------------------------------------------------- entropy --

static int cmd_entropy(const std::string& frame_path, const std::string& events_path,
                       int voxel_bins, int patch, int bins, double thresh,
                       const std::string& prefix, const json& config) {
    img::Image frame;
    frame.data = img::load_pgm(frame_path);
    const auto stream = load_events(events_path);
    const auto grid = evio::voxelize(stream, voxel_bins);
    if (grid.h != frame.h() || grid.w != frame.w())
        throw ShapeMismatch("frame and event resolutions differ");

    const auto ef = easf::patch_entropy_frame(frame, patch, bins);
    const auto ee = easf::patch_entropy_event(grid, patch, bins);
    const auto w = easf::weight_map(ee, ef, static_cast<float>(thresh));

    img::save_tensor(prefix + "_frame_entropy.tns", img::to_tensor(ef.data));
    img::save_tensor(prefix + "_event_entropy.tns", img::to_tensor(ee.data));
    img::save_tensor(prefix + "_weight.tns", img::to_tensor(w.data));
    save_heatmap_pgm(prefix + "_weight.pgm", w.data);

    json m = run_header("entropy", 0, config);
    m["frame"] = frame_path;
    m["events"] = events_path;
    m["patch_grid"] = {w.data.h, w.data.w};
    m["paths"] = {{"frame_entropy", prefix + "_frame_entropy.tns"},
                  {"event_entropy", prefix + "_event_entropy.tns"},
                  {"weight", prefix + "_weight.tns"},
                  {"weight_heatmap", prefix + "_weight.pgm"}};
    write_json(prefix + "_manifest.json", m);
    return 0;
}

// --------------------------------------------------------------- localize --

static int cmd_localize(const std::string& depth_path, const std::string& u_path,
                        const std::string& v_path, std::vector<double> timestamps,
                        double edge_frac, const std::string& prefix, const json& config) {
    const auto depth = img::make_depth(img::load_pfm(depth_path));
    img::FlowField flow{img::load_pfm(u_path), img::load_pfm(v_path)};
    const double thr = fuse::depth_range_thresh(depth, edge_frac);
    const auto r = mgtc::localize_regions(depth, flow, timestamps, static_cast<float>(thr));

    img::save_pgm_raw(prefix + "_labels.pgm", mgtc::labels_to_pgm(r));
    img::save_pgm_raw(prefix + "_band.pgm", r.blur_band);

    json m = run_header("localize", 0, config);
    m["depth"] = depth_path;
    m["edge_threshold"] = thr;
    m["empty_edges"] = r.empty_edges;
    size_t fg = 0, bg = 0;
    for (uint8_t l : r.labels.v) {
        fg += l == static_cast<uint8_t>(mgtc::Label::foreground);
        bg += l == static_cast<uint8_t>(mgtc::Label::background);
    }
    m["foreground_pixels"] = fg;
    m["background_pixels"] = bg;
    m["paths"] = {{"labels", prefix + "_labels.pgm"}, {"band", prefix + "_band.pgm"}};
    write_json(prefix + "_manifest.json", m);
    return 0;
}

// ---------------------------------------------------- pretrain / train ----

struct TrainFlags {
    uint64_t seed = 7;
    int samples = 8;
    int size = 64;
    double lr = 1e-4;
    int pretrain_epochs = 10;
    int epochs = 50;
    double lambda1 = 1.0, lambda2 = 0.2, lambda3 = 0.1;
    double tau = 0.07;
    int max_per_class = 64;
    bool no_events = false;
    std::string foundation;  // checkpoint dir; empty = train stand-in in place
    std::string out = "run";
};

static fuse::TrainConfig to_train_config(const TrainFlags& f) {
    fuse::TrainConfig cfg;
    cfg.lr = f.lr;
    cfg.pretrain_epochs = f.pretrain_epochs;
    cfg.epochs = f.epochs;
    cfg.weights = {f.lambda1, f.lambda2, f.lambda3};
    cfg.seed = f.seed;
    cfg.tau = f.tau;
    cfg.max_per_class = f.max_per_class;
    cfg.use_events = !f.no_events;
    return cfg;
}

static std::vector<synth::Scene> make_scenes(uint64_t seed, int n, int size) {
    synth::SceneConfig sc;
    sc.h = sc.w = size;
    return synth::make_dataset(seed, n, sc);
}

static int cmd_pretrain(const TrainFlags& f, const json& config) {
    const auto scenes = make_scenes(split_seed(f.seed, "pretrain-data"), f.samples, f.size);
    const auto clean = synth::clean_samples(scenes);
    fuse::FuseNet<float> net;
    net.init(split_seed(f.seed, "net-init"));
    fuse::pretrain_foundation(net, clean, f.lr, f.pretrain_epochs);
    fs::create_directories(f.out);
    fuse::save_checkpoint(net, f.out + "/checkpoint");

    json m = run_header("pretrain", f.seed, config);
    m["samples"] = f.samples;
    m["checkpoint"] = f.out + "/checkpoint";
    write_json(f.out + "/manifest.json", m);
    return 0;
}

static int cmd_train(const TrainFlags& f, const json& config) {
    const auto scenes = make_scenes(split_seed(f.seed, "train-data"), f.samples, f.size);
    const auto samples = synth::training_samples(scenes);

    fuse::FuseNet<float> net;
    net.init(split_seed(f.seed, "net-init"));
    if (!f.foundation.empty()) {
        fuse::load_checkpoint(net, f.foundation);
        net.freeze_frame_encoder();
    } else {
        fuse::pretrain_foundation(net, synth::clean_samples(scenes), 1e-3,
                                  std::max(1, f.pretrain_epochs));
    }

    const auto log = fuse::train(net, samples, to_train_config(f));

    fs::create_directories(f.out);
    std::ofstream lf(f.out + "/log.jsonl", std::ios::binary);
    for (const auto& rec : log) {
        json r = {{"epoch", rec.epoch},   {"phase", rec.phase},
                  {"loss", rec.loss},     {"l_gt", rec.l_gt},
                  {"l_s", rec.l_s},       {"l_t", rec.l_t},
                  {"skipped_temporal", rec.skipped_temporal}};
        lf << r.dump() << "\n";
    }
    lf.close();
    fuse::save_checkpoint(net, f.out + "/checkpoint");

    json m = run_header("train", f.seed, config);
    m["samples"] = f.samples;
    m["log"] = f.out + "/log.jsonl";
    m["checkpoint"] = f.out + "/checkpoint";
    m["final_loss"] = log.empty() ? 0.0 : log.back().loss;
    write_json(f.out + "/manifest.json", m);
    return 0;
}

// ------------------------------------------------------------------- eval --

static int cmd_eval(const std::string& checkpoint, uint64_t seed, int samples, int size,
                    bool no_events, const std::string& out, const json& config) {
    const auto scenes = make_scenes(split_seed(seed, "eval-data"), samples, size);
    fuse::FuseNet<float> net;
    net.init(0);
    fuse::load_checkpoint(net, checkpoint);

    fs::create_directories(out);
    std::ofstream csv(out + "/report.csv", std::ios::binary);
    csv << "sample,region,absrel,delta1,delta2,delta3,pixels,ege\n";
    double sum_n = 0, sum_x = 0, sum_e = 0;
    size_t n_n = 0, n_x = 0, n_e = 0;
    for (size_t i = 0; i < scenes.size(); ++i) {
        const auto& s = scenes[i].sample;
        Tensor3<float> vox = fuse::voxel_tensor<float>(s.vox);
        if (no_events) std::fill(vox.v.begin(), vox.v.end(), 0.0f);
        const auto fwd = net.forward(fuse::frame_tensor<float>(s.frame), vox);
        img::DepthMap pred = img::make_depth(fwd.depth);
        const double G = fuse::depth_range_thresh(s.gt, 0.05);
        const auto rep = metrics::evaluate(pred, s.gt, s.partition, G);
        auto row = [&](const char* region, const std::optional<metrics::RegionMetrics>& m) {
            if (!m) return;
            csv << i << "," << region << "," << m->absrel << "," << m->delta1 << ","
                << m->delta2 << "," << m->delta3 << "," << m->pixels << ",";
            if (rep.ege)
                csv << *rep.ege;
            csv << "\n";
        };
        row("normal", rep.normal);
        row("extreme", rep.extreme);
        if (rep.normal) {
            sum_n += rep.normal->absrel;
            ++n_n;
        }
        if (rep.extreme) {
            sum_x += rep.extreme->absrel;
            ++n_x;
        }
        if (rep.ege) {
            sum_e += *rep.ege;
            ++n_e;
        }
    }
    csv.close();

    json m = run_header("eval", seed, config);
    m["checkpoint"] = checkpoint;
    m["samples"] = samples;
    if (n_n) m["mean_absrel_normal"] = sum_n / n_n;
    if (n_x) m["mean_absrel_extreme"] = sum_x / n_x;
    if (n_e) m["mean_ege"] = sum_e / n_e;
    write_json(out + "/manifest.json", m);

    std::cout << "region    absrel\n";
    if (n_n) std::cout << "normal    " << sum_n / n_n << "\n";
    if (n_x) std::cout << "extreme   " << sum_x / n_x << "\n";
    if (n_e) std::cout << "ege       " << sum_e / n_e << "\n";
    return 0;
}

// -------------------------------------------------------------- gradcheck --

static int cmd_gradcheck(uint64_t seed, int trials) {
    bool all = true;
    for (const auto& s : gradcheck::run_all(seed, trials)) {
        std::cout << (s.pass ? "PASS" : "FAIL") << "  " << s.name << "  checks=" << s.checks
                  << "  worst_rel_err=" << s.worst << "\n";
        all &= s.pass;
    }
    return all ? 0 : 1;
}

// ------------------------------------------------------------------- plot --

static int cmd_plot(const std::string& log_path, const std::string& field,
                    const std::string& out) {
    std::ifstream f(log_path);
    if (!f) throw IoError("cannot open " + log_path);
    std::vector<double> ys;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const json r = json::parse(line);
        if (r.contains(field)) ys.push_back(r[field].get<double>());
    }
    if (ys.empty()) throw ManifestInvalid("no '" + field + "' values in " + log_path);

    const int W = 640, H = 400, pad = 40;
    double lo = ys[0], hi = ys[0];
    for (double y : ys) {
        lo = std::min(lo, y);
        hi = std::max(hi, y);
    }
    if (hi == lo) hi = lo + 1.0;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
        << H << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << pad << "\" y=\"20\" font-size=\"14\">" << field << " ("
        << log_path << ")</text>\n";
    svg << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < ys.size(); ++i) {
        const double x = pad + (W - 2.0 * pad) * (ys.size() == 1 ? 0.5 : i / (ys.size() - 1.0));
        const double y = H - pad - (H - 2.0 * pad) * (ys[i] - lo) / (hi - lo);
        svg << x << "," << y << " ";
    }
    svg << "\"/>\n";
    svg << "<text x=\"" << pad << "\" y=\"" << H - 10 << "\" font-size=\"12\">min=" << lo
        << " max=" << hi << " n=" << ys.size() << "</text>\n";
    svg << "</svg>\n";
    std::ofstream o(out, std::ios::binary);
    if (!o) throw IoError("cannot write " + out);
    o << svg.str();
    return 0;
}

// ------------------------------------------------------------------- main --

int main(int argc, char** argv) {
    CLI::App app{"Event-guided depth fusion pipeline"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();

    // voxelize
    std::string vx_in, vx_out = "voxels.tns", vx_config;
    int vx_bins = 5;
    bool vx_zero_neg = false;
    auto* vx = app.add_subcommand("voxelize", "Build a temporal voxel grid from events");
    vx->add_option("--in", vx_in, "event file (.csv or packed binary)")->required();
    vx->add_option("--bins", vx_bins, "temporal bins");
    vx->add_flag("--zero-as-negative", vx_zero_neg, "treat polarity 0 as -1");
    vx->add_option("--out", vx_out, "output tensor path");
    vx->add_option("--config", vx_config, "JSON config file");

    // degrade
    std::vector<std::string> dg_in;
    std::string dg_prefix = "degraded", dg_config;
    double dg_alpha = 2.0, dg_offset = 0.0;
    uint64_t dg_seed = 7;
    auto* dg = app.add_subcommand("degrade", "Synthesize blur + illumination stretch");
    dg->add_option("--in", dg_in, "sharp sub-frames (PGM), exposure order")->required();
    dg->add_option("--alpha", dg_alpha, "contrast stretch factor");
    dg->add_option("--offset", dg_offset, "brightness offset");
    dg->add_option("--seed", dg_seed, "recipe seed");
    dg->add_option("--out-prefix", dg_prefix, "output path prefix");
    dg->add_option("--config", dg_config, "JSON config file");

    // entropy
    std::string en_frame, en_events, en_prefix = "entropy", en_config;
    int en_voxel_bins = 5, en_patch = 16, en_bins = 32;
    double en_thresh = 0.3;
    auto* en = app.add_subcommand("entropy", "Patch entropy and fusion weight maps");
    en->add_option("--frame", en_frame, "frame image (PGM)")->required();
    en->add_option("--events", en_events, "event file")->required();
    en->add_option("--voxel-bins", en_voxel_bins, "temporal bins for the grid");
    en->add_option("--patch", en_patch, "patch size");
    en->add_option("--bins", en_bins, "histogram bins");
    en->add_option("--thresh", en_thresh, "entropy-sum threshold");
    en->add_option("--out-prefix", en_prefix, "output path prefix");
    en->add_option("--config", en_config, "JSON config file");

    // localize
    std::string lc_depth, lc_u, lc_v, lc_prefix = "regions", lc_config;
    std::vector<double> lc_ts = {-1.0, -0.5, 0.0, 0.5, 1.0};
    double lc_edge_frac = 0.05;
    auto* lc = app.add_subcommand("localize", "Motion-swept blur band and fg/bg labels");
    lc->add_option("--depth", lc_depth, "depth map (PFM)")->required();
    lc->add_option("--flow-u", lc_u, "flow u component (PFM)")->required();
    lc->add_option("--flow-v", lc_v, "flow v component (PFM)")->required();
    lc->add_option("--timestamps", lc_ts, "normalized warp timestamps");
    lc->add_option("--edge-frac", lc_edge_frac, "edge threshold as depth-range fraction");
    lc->add_option("--out-prefix", lc_prefix, "output path prefix");
    lc->add_option("--config", lc_config, "JSON config file");

    // pretrain / train
    TrainFlags pt, tr;
    std::string pt_config, tr_config;
    auto add_train_flags = [](CLI::App* c, TrainFlags& f) {
        c->add_option("--seed", f.seed, "master seed");
        c->add_option("--samples", f.samples, "synthetic scene count");
        c->add_option("--size", f.size, "scene resolution");
        c->add_option("--lr", f.lr, "learning rate");
        c->add_option("--pretrain-epochs", f.pretrain_epochs, "step-1 epochs");
        c->add_option("--epochs", f.epochs, "step-2 epochs");
        c->add_option("--lambda1", f.lambda1, "depth loss weight");
        c->add_option("--lambda2", f.lambda2, "spatial loss weight");
        c->add_option("--lambda3", f.lambda3, "temporal loss weight");
        c->add_option("--tau", f.tau, "contrastive temperature");
        c->add_option("--max-per-class", f.max_per_class, "contrastive batch cap");
        c->add_flag("--no-events", f.no_events, "zero the voxel input (frame-only)");
        c->add_option("--foundation", f.foundation, "frozen-encoder checkpoint dir");
        c->add_option("--out", f.out, "output directory");
    };
    auto* ptc = app.add_subcommand("pretrain", "Train the clean-frame foundation stand-in");
    add_train_flags(ptc, pt);
    ptc->add_option("--config", pt_config, "JSON config file");
    auto* trc = app.add_subcommand("train", "Two-step training on synthetic scenes");
    add_train_flags(trc, tr);
    trc->add_option("--config", tr_config, "JSON config file");

    // eval
    std::string ev_ckpt, ev_out = "eval", ev_config;
    uint64_t ev_seed = 7;
    int ev_samples = 8, ev_size = 64;
    bool ev_no_events = false;
    auto* ev = app.add_subcommand("eval", "Region-partitioned depth metrics");
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint directory")->required();
    ev->add_option("--seed", ev_seed, "evaluation scene seed");
    ev->add_option("--samples", ev_samples, "evaluation scene count");
    ev->add_option("--size", ev_size, "scene resolution");
    ev->add_flag("--no-events", ev_no_events, "zero the voxel input");
    ev->add_option("--out", ev_out, "output directory");
    ev->add_option("--config", ev_config, "JSON config file");

    // gradcheck
    uint64_t gc_seed = 7;
    int gc_trials = 20;
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
    gc->add_option("--seed", gc_seed, "RNG seed");
    gc->add_option("--trials", gc_trials, "random trials per suite");

    // plot
    std::string pl_log, pl_field = "loss", pl_out = "curve.svg";
    auto* pl = app.add_subcommand("plot", "Render a loss curve SVG from a JSONL log");
    pl->add_option("--log", pl_log, "training log (JSONL)")->required();
    pl->add_option("--field", pl_field, "record field to plot");
    pl->add_option("--out", pl_out, "output SVG path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        auto effective = [&](CLI::App* cmd, const std::string& config_path) {
            apply_config(cmd, config_path);
            json cfg;
            for (const auto* opt : cmd->get_options()) {
                if (opt->get_name().size() < 3) continue;
                cfg[opt->get_name().substr(2)] =
                    opt->count() ? opt->results().back() : opt->get_default_str();
            }
            std::cout << "config " << cfg.dump() << "\n";
            return cfg;
        };
        if (vx->parsed())
            return cmd_voxelize(vx_in, vx_bins, vx_zero_neg, vx_out,
                                effective(vx, vx_config));
        if (dg->parsed())
            return cmd_degrade(dg_in, dg_alpha, dg_offset, dg_seed, dg_prefix,
                               effective(dg, dg_config));
        if (en->parsed())
            return cmd_entropy(en_frame, en_events, en_voxel_bins, en_patch, en_bins,
                               en_thresh, en_prefix, effective(en, en_config));
        if (lc->parsed())
            return cmd_localize(lc_depth, lc_u, lc_v, lc_ts, lc_edge_frac, lc_prefix,
                                effective(lc, lc_config));
        if (ptc->parsed()) return cmd_pretrain(pt, effective(ptc, pt_config));
        if (trc->parsed()) return cmd_train(tr, effective(trc, tr_config));
        if (ev->parsed())
            return cmd_eval(ev_ckpt, ev_seed, ev_samples, ev_size, ev_no_events, ev_out,
                            effective(ev, ev_config));
        if (gc->parsed()) return cmd_gradcheck(gc_seed, gc_trials);
        if (pl->parsed()) return cmd_plot(pl_log, pl_field, pl_out);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
