#include "tiltforge/cli.hpp"

#include <omp.h>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tiltforge/core.hpp"
#include "tiltforge/fbp.hpp"
#include "tiltforge/featnet.hpp"
#include "tiltforge/mrcio.hpp"
#include "tiltforge/noise.hpp"
#include "tiltforge/nst.hpp"
#include "tiltforge/png_io.hpp"
#include "tiltforge/radon.hpp"

namespace tiltforge::cli {

namespace {

using json = nlohmann::ordered_json;

std::uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io(Errc::io_error, "cannot hash file: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in) {
        in.read(buf, sizeof(buf));
        const std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Written next to every output so a run is reproducible from its parameters.
void write_manifest(const std::string& out_path, const std::string& subcommand,
                    const json& params, const std::vector<std::string>& inputs) {
    json m;
    m["tool"] = "tiltforge";
    m["subcommand"] = subcommand;
    m["parameters"] = params;
    json in = json::object();
    for (const auto& p : inputs) in[p] = hex64(fnv1a_file(p));
    m["inputs"] = in;
    m["output"] = json{{out_path, hex64(fnv1a_file(out_path))}};
    std::ofstream f(out_path + ".manifest.json");
    if (!f) throw_io(Errc::io_error, "cannot write manifest for " + out_path);
    f << m.dump(2) << "\n";
}

void check_no_collision(const std::string& out, const std::vector<std::string>& inputs) {
    for (const auto& in : inputs)
        if (in == out)
            throw_validation(Errc::invalid_argument,
                             "output path collides with input path: " + out);
}

TiltGeometry load_angles_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_io(Errc::io_error, "cannot open angles file: " + path);
    std::vector<double> angles;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        angles.push_back(std::stod(line));
    }
    return TiltGeometry(std::move(angles));
}

struct GeometryFlags {
    double min_deg = -60.0;
    double max_deg = 60.0;
    std::string angles_file;

    TiltGeometry resolve(std::size_t tilt_count) const {
        if (!angles_file.empty()) {
            TiltGeometry g = load_angles_file(angles_file);
            if (g.tilt_count() != tilt_count)
                throw_validation(Errc::geometry_mismatch,
                                 "angles file tilt count differs from stack");
            return g;
        }
        return evenly_spaced_geometry(min_deg, max_deg, static_cast<int>(tilt_count));
    }
};

void add_geometry_flags(CLI::App* cmd, GeometryFlags& g) {
    cmd->add_option("--min", g.min_deg, "Minimum tilt angle in degrees")->capture_default_str();
    cmd->add_option("--max", g.max_deg, "Maximum tilt angle in degrees")->capture_default_str();
    cmd->add_option("--angles-file", g.angles_file,
                    "Text file with one tilt angle per line (overrides --min/--max)");
}

struct FilterFlags {
    fbp::FilterSpec spec; // parameters at the 512-grid reference
    bool no_gaussian = false, no_ramp = false, no_circle = false;

    fbp::FilterSpec resolve(std::size_t h, std::size_t w) const {
        fbp::FilterSpec s = fbp::scale_spec_to_grid(spec, h, w);
        s.enable_gaussian = !no_gaussian;
        s.enable_ramp = !no_ramp;
        s.enable_circle = !no_circle;
        return s;
    }

    json to_json() const {
        return json{{"sigma_x", spec.gaussian_sigma_x},
                    {"sigma_y", spec.gaussian_sigma_y},
                    {"crowther", spec.crowther_fraction},
                    {"radius", spec.radius_cutoff},
                    {"gaussian", !no_gaussian},
                    {"ramp", !no_ramp},
                    {"circle", !no_circle},
                    {"crowther_zero", spec.ramp_zero_above_crowther}};
    }
};

void add_filter_flags(CLI::App* cmd, FilterFlags& f) {
    cmd->add_option("--sigma-x", f.spec.gaussian_sigma_x,
                    "Gaussian sigma along the x frequency axis (512-grid pixels)")
        ->capture_default_str();
    cmd->add_option("--sigma-y", f.spec.gaussian_sigma_y,
                    "Gaussian sigma along the y frequency axis (512-grid pixels)")
        ->capture_default_str();
    cmd->add_option("--crowther", f.spec.crowther_fraction,
                    "Crowther frequency as a fraction of Nyquist")
        ->capture_default_str();
    cmd->add_option("--radius", f.spec.radius_cutoff, "Circular cutoff radius (512-grid pixels)")
        ->capture_default_str();
    cmd->add_flag("--no-gaussian", f.no_gaussian, "Disable the Gaussian factor");
    cmd->add_flag("--no-ramp", f.no_ramp, "Disable the ramp factor");
    cmd->add_flag("--no-circle", f.no_circle, "Disable the circular cutoff");
    cmd->add_flag("--crowther-zero", f.spec.ramp_zero_above_crowther,
                  "Zero the ramp above the Crowther frequency instead of holding it constant");
}

ProjectionStack read_stack(const std::string& path, const TiltGeometry& geometry) {
    mrcio::MrcData mrc = mrcio::read_mrc(path);
    if (mrc.data.d0 != geometry.tilt_count())
        throw_validation(Errc::geometry_mismatch,
                         "stack " + path + " tilt count differs from geometry");
    ProjectionStack stack(std::move(mrc.data), geometry);
    validate_stack(stack);
    return stack;
}

void print_stats(const ProjectionStack& stack) {
    const PerTiltStats stats = noise::per_tilt_moments(stack);
    std::printf("%6s %10s %14s %14s\n", "tilt", "angle", "mean", "std");
    for (std::size_t i = 0; i < stats.size(); ++i)
        std::printf("%6zu %10.3f %14.6g %14.6g\n", i, stack.geometry.angle(i), stats.mean[i],
                    stats.stdev[i]);
}

void write_telemetry(const std::string& path, const std::vector<nst::LossRecord>& records) {
    std::ofstream out(path);
    if (!out) throw_io(Errc::io_error, "cannot write telemetry file: " + path);
    out << "tilt iteration content_loss style_loss total\n";
    for (const auto& r : records)
        out << r.tilt << " " << r.iteration << " " << r.content_loss << " " << r.style_loss
            << " " << r.total << "\n";
}

struct ParseOutcome {
    int exit_code = 0;
    bool done = false; // help printed or parse failed; do not run anything
};

ParseOutcome dispatch(CLI::App& app, int argc, const char* const* argv) {
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return {rc == 0 ? 0 : 3, true};
    }
    return {0, false};
}

} // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"tiltforge: simulate cryo-ET tilt-series and reconstruct tomograms"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Run-config file (TOML); explicit flags take precedence");

    int threads = 0;
    app.add_option("--threads", threads, "Worker thread count (0 = OpenMP default)")
        ->envname("TILTFORGE_THREADS")
        ->capture_default_str();

    // project
    auto* project = app.add_subcommand("project", "Forward-project a volume into a tilt-series");
    struct {
        std::string in, out;
        double min_deg = -60.0, max_deg = 60.0;
        int tilt_count = 61;
        bool no_negate = false;
        double pad = 0.0;
        bool quiet = false;
    } prj;
    project->add_option("--in", prj.in, "Input volume (MRC)")->required();
    project->add_option("--out", prj.out, "Output projections (MRC)")->required();
    project->add_option("--min", prj.min_deg, "Minimum tilt angle")->capture_default_str();
    project->add_option("--max", prj.max_deg, "Maximum tilt angle")->capture_default_str();
    project->add_option("--tilts", prj.tilt_count, "Number of tilts")->capture_default_str();
    project->add_flag("--no-negate", prj.no_negate, "Keep line integrals unnegated");
    project->add_option("--pad", prj.pad, "Sample value outside the volume")
        ->capture_default_str();
    project->add_flag("--quiet", prj.quiet, "Skip the per-tilt stats summary");

    // fit-noise
    auto* fit = app.add_subcommand(
        "fit-noise", "Fit per-tilt moment targets and the sigma(angle) law from stack pairs");
    struct {
        std::vector<std::string> targets, noiseless;
        std::string out;
        GeometryFlags geom;
    } fn;
    fit->add_option("--target", fn.targets, "Target (reference) projection stacks")->required();
    fit->add_option("--noiseless", fn.noiseless, "Matching noiseless projection stacks")
        ->required();
    fit->add_option("--out", fn.out, "Output noise model (JSON)")->required();
    add_geometry_flags(fit, fn.geom);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate projections from a noiseless stack");
    struct {
        std::string mode, in, model, style, net, out, telemetry;
        std::uint64_t seed = 0;
        std::int64_t random_net = -1;
        double fraction = 1.0;
        nst::NstConfig nst;
    } sm;
    sim->add_option("--mode", sm.mode, "baseline | noisy | faket")
        ->required()
        ->check(CLI::IsMember({"baseline", "noisy", "faket"}));
    sim->add_option("--in", sm.in, "Noiseless projections (MRC)")->required();
    sim->add_option("--model", sm.model, "Noise model file (JSON)")->required();
    sim->add_option("--out", sm.out, "Output projections (MRC)")->required();
    sim->add_option("--seed", sm.seed, "RNG seed")->required();
    sim->add_option("--fraction", sm.fraction, "Noise fraction for noisy mode")
        ->capture_default_str();
    sim->add_option("--style", sm.style, "Style projections (MRC, faket mode)");
    sim->add_option("--net", sm.net, "Feature net weights (FNW1, faket mode)");
    sim->add_option("--random-net", sm.random_net,
                    "Use a randomly initialized feature net with this seed (faket mode)");
    sim->add_option("--alpha", sm.nst.alpha, "Content weight")->capture_default_str();
    sim->add_option("--beta", sm.nst.beta, "Style weight")->capture_default_str();
    sim->add_option("--learning-rate", sm.nst.learning_rate, "Pixel optimizer step size")
        ->capture_default_str();
    sim->add_option("--iterations", sm.nst.iterations, "Style transfer iterations")
        ->capture_default_str();
    sim->add_option("--content-noise", sm.nst.content_noise_fraction,
                    "Noise fraction of the content stack")
        ->capture_default_str();
    sim->add_option("--telemetry", sm.telemetry, "Write per-tilt loss telemetry to this file");

    // reconstruct
    auto* rec = app.add_subcommand("reconstruct",
                                   "Weighted filtered back-projection of a tilt-series");
    struct {
        std::string in, out;
        bool bin = false;
        int depth = 0;
        GeometryFlags geom;
        FilterFlags filter;
    } rc;
    rec->add_option("--in", rc.in, "Input projections (MRC)")->required();
    rec->add_option("--out", rc.out, "Output volume (MRC)")->required();
    rec->add_flag("--bin2x", rc.bin, "2x-bin the projections before reconstruction");
    rec->add_option("--depth", rc.depth, "Reconstruction depth (0 = output width)")
        ->capture_default_str();
    add_geometry_flags(rec, rc.geom);
    add_filter_flags(rec, rc.filter);

    // export-png
    auto* exp = app.add_subcommand("export-png", "Export a slice of an MRC file as 8-bit PNG");
    struct {
        std::string in, out;
        int index = 0;
    } ex;
    exp->add_option("--in", ex.in, "Input MRC (stack or volume)")->required();
    exp->add_option("--out", ex.out, "Output PNG")->required();
    exp->add_option("--index", ex.index, "Slice index along the first axis")
        ->capture_default_str();

    // dump-filter
    auto* dump = app.add_subcommand("dump-filter",
                                    "Render the composite reconstruction filter for inspection");
    struct {
        std::string out, mrc;
        int height = 512, width = 512;
        FilterFlags filter;
    } df;
    dump->add_option("--out", df.out, "Output PNG")->required();
    dump->add_option("--mrc", df.mrc, "Also dump the filter as a 1xHxW MRC volume");
    dump->add_option("--height", df.height, "Filter grid height")->capture_default_str();
    dump->add_option("--width", df.width, "Filter grid width")->capture_default_str();
    add_filter_flags(dump, df.filter);

    const ParseOutcome parsed = dispatch(app, argc, argv);
    if (parsed.done || app.get_subcommands().empty()) return parsed.exit_code;

    try {
        if (threads > 0) omp_set_num_threads(threads);

        if (project->parsed()) {
            check_no_collision(prj.out, {prj.in});
            mrcio::MrcData mrc = mrcio::read_mrc(prj.in);
            DensityVolume volume(std::move(mrc.data), mrc.header.voxel_size_nm);
            const TiltGeometry geometry =
                evenly_spaced_geometry(prj.min_deg, prj.max_deg, prj.tilt_count);
            radon::ProjectionConfig config;
            config.negate = !prj.no_negate;
            config.pad_value = static_cast<float>(prj.pad);
            const ProjectionStack stack = radon::forward_project(volume, geometry, config);
            mrcio::write_mrc(prj.out, stack.data, volume.voxel_size_nm);
            if (!prj.quiet) print_stats(stack);
            write_manifest(prj.out, "project",
                           json{{"in", prj.in},
                                {"out", prj.out},
                                {"min", prj.min_deg},
                                {"max", prj.max_deg},
                                {"tilts", prj.tilt_count},
                                {"negate", !prj.no_negate},
                                {"pad", prj.pad}},
                           {prj.in});
        } else if (fit->parsed()) {
            if (fn.targets.size() != fn.noiseless.size() || fn.targets.empty())
                throw_validation(Errc::pairing_mismatch,
                                 "need equally many --target and --noiseless stacks");
            check_no_collision(fn.out, fn.targets);
            check_no_collision(fn.out, fn.noiseless);

            std::vector<PerTiltStats> target_stats;
            std::vector<std::vector<double>> sigmas;
            TiltGeometry geometry;
            for (std::size_t i = 0; i < fn.targets.size(); ++i) {
                mrcio::MrcData target_mrc = mrcio::read_mrc(fn.targets[i]);
                mrcio::MrcData clean_mrc = mrcio::read_mrc(fn.noiseless[i]);
                if (!target_mrc.data.same_shape(clean_mrc.data))
                    throw_validation(Errc::pairing_mismatch,
                                     "paired stacks differ in shape: " + fn.targets[i] + " vs " +
                                         fn.noiseless[i]);
                if (i == 0) geometry = fn.geom.resolve(target_mrc.data.d0);
                ProjectionStack target(std::move(target_mrc.data), geometry);
                ProjectionStack clean(std::move(clean_mrc.data), geometry);
                validate_stack(target);
                validate_stack(clean);
                target_stats.push_back(noise::per_tilt_moments(target));
                sigmas.push_back(noise::extract_noise_sigma(target, clean));
            }
            const PerTiltStats avg = noise::average_training_stats(target_stats);
            const std::array<double, 3> poly =
                noise::fit_sigma_poly(geometry.angles_deg(), sigmas);
            double global = 0.0;
            std::size_t count = 0;
            for (const auto& s : sigmas)
                for (double v : s) {
                    global += v;
                    ++count;
                }
            global /= static_cast<double>(count);
            const noise::NoiseModel model(geometry, avg, poly, global);
            model.save(fn.out);
            json params{{"targets", fn.targets},
                        {"noiseless", fn.noiseless},
                        {"out", fn.out},
                        {"poly", {poly[0], poly[1], poly[2]}},
                        {"global_sigma", global}};
            std::vector<std::string> inputs = fn.targets;
            inputs.insert(inputs.end(), fn.noiseless.begin(), fn.noiseless.end());
            write_manifest(fn.out, "fit-noise", params, inputs);
        } else if (sim->parsed()) {
            std::vector<std::string> inputs = {sm.in, sm.model};
            const noise::NoiseModel model = noise::NoiseModel::load(sm.model);
            const ProjectionStack noiseless = read_stack(sm.in, model.geometry());

            ProjectionStack out;
            std::vector<nst::LossRecord> telemetry;
            if (sm.mode == "baseline") {
                out = noise::simulate_baseline(noiseless, model, sm.seed);
            } else if (sm.mode == "noisy") {
                out = noise::simulate_noisy(noiseless, model, sm.fraction, sm.seed);
            } else {
                if (sm.style.empty())
                    throw_validation(Errc::missing_style,
                                     "faket mode needs --style projections");
                if (sm.net.empty() && sm.random_net < 0)
                    throw_validation(Errc::invalid_argument,
                                     "faket mode needs --net or --random-net");
                inputs.push_back(sm.style);
                const ProjectionStack style = read_stack(sm.style, model.geometry());
                featnet::FeatureNet net;
                if (!sm.net.empty()) {
                    net = featnet::load_weights(sm.net);
                    inputs.push_back(sm.net);
                } else {
                    net = featnet::init_random<float>(featnet::default_layer_spec(),
                                                      static_cast<std::uint64_t>(sm.random_net));
                }
                out = nst::build_faket(noiseless, style, model, net, sm.nst, sm.seed,
                                       sm.telemetry.empty() ? nullptr : &telemetry);
            }
            check_no_collision(sm.out, inputs);
            mrcio::write_mrc(sm.out, out.data, 1.0);
            if (!sm.telemetry.empty()) write_telemetry(sm.telemetry, telemetry);
            write_manifest(sm.out, "simulate",
                           json{{"mode", sm.mode},
                                {"in", sm.in},
                                {"model", sm.model},
                                {"style", sm.style},
                                {"net", sm.net},
                                {"random_net", sm.random_net},
                                {"seed", sm.seed},
                                {"fraction", sm.fraction},
                                {"alpha", sm.nst.alpha},
                                {"beta", sm.nst.beta},
                                {"learning_rate", sm.nst.learning_rate},
                                {"iterations", sm.nst.iterations},
                                {"content_noise", sm.nst.content_noise_fraction},
                                {"out", sm.out}},
                           inputs);
        } else if (rec->parsed()) {
            check_no_collision(rc.out, {rc.in});
            mrcio::MrcData mrc = mrcio::read_mrc(rc.in);
            const TiltGeometry geometry = rc.geom.resolve(mrc.data.d0);
            ProjectionStack stack(std::move(mrc.data), geometry);
            validate_stack(stack);
            if (rc.bin) stack = radon::bin2x(stack);
            const fbp::FilterSpec spec = rc.filter.resolve(stack.height(), stack.width());
            const fbp::FrequencyFilter filter =
                fbp::build_filter(stack.height(), stack.width(), spec);
            const ProjectionStack filtered = fbp::filter_projections(stack, filter);
            const std::size_t depth =
                rc.depth > 0 ? static_cast<std::size_t>(rc.depth) : stack.width();
            const DensityVolume volume = fbp::backproject(filtered, depth);
            mrcio::write_mrc(rc.out, volume.data, 1.0);
            json params{{"in", rc.in},         {"out", rc.out},
                        {"bin2x", rc.bin},     {"depth", depth},
                        {"min", rc.geom.min_deg}, {"max", rc.geom.max_deg},
                        {"angles_file", rc.geom.angles_file}, {"filter", rc.filter.to_json()}};
            write_manifest(rc.out, "reconstruct", params, {rc.in});
        } else if (exp->parsed()) {
            check_no_collision(ex.out, {ex.in});
            const mrcio::MrcData mrc = mrcio::read_mrc(ex.in);
            if (ex.index < 0 || static_cast<std::size_t>(ex.index) >= mrc.data.d0)
                throw_validation(Errc::index_out_of_range,
                                 "slice index " + std::to_string(ex.index) + " out of range [0, " +
                                     std::to_string(mrc.data.d0) + ")");
            const png_io::GrayImage img = png_io::normalize_slice(
                mrc.data.slice(static_cast<std::size_t>(ex.index)), mrc.data.d1, mrc.data.d2);
            png_io::write_png_gray(ex.out, img);
            std::printf("normalization: lo=%g hi=%g\n", static_cast<double>(img.lo),
                        static_cast<double>(img.hi));
            write_manifest(ex.out, "export-png",
                           json{{"in", ex.in}, {"out", ex.out}, {"index", ex.index}}, {ex.in});
        } else if (dump->parsed()) {
            if (df.height < 2 || df.width < 2)
                throw_validation(Errc::invalid_spec, "filter grid must be at least 2x2");
            const auto h = static_cast<std::size_t>(df.height);
            const auto w = static_cast<std::size_t>(df.width);
            const fbp::FrequencyFilter filter = fbp::build_filter(h, w, df.filter.resolve(h, w));
            std::vector<float> as_float(filter.v.begin(), filter.v.end());
            const png_io::GrayImage img = png_io::normalize_slice(as_float.data(), h, w);
            png_io::write_png_gray(df.out, img);
            std::printf("normalization: lo=%g hi=%g\n", static_cast<double>(img.lo),
                        static_cast<double>(img.hi));
            if (!df.mrc.empty()) {
                Array3f vol(1, h, w);
                vol.v = as_float;
                mrcio::write_mrc(df.mrc, vol, 1.0);
            }
            write_manifest(df.out, "dump-filter",
                           json{{"out", df.out},
                                {"height", df.height},
                                {"width", df.width},
                                {"filter", df.filter.to_json()}},
                           {});
        }
    } catch (const IoError& e) {
        std::cerr << "tiltforge: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "tiltforge: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "tiltforge: internal error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}

} // namespace tiltforge::cli
