#include "tractoform/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include "tractoform/attention.hpp"
#include "tractoform/bundle_io.hpp"
#include "tractoform/error.hpp"
#include "tractoform/fiber_metrics.hpp"
#include "tractoform/image_io.hpp"
#include "tractoform/parallel.hpp"
#include "tractoform/random.hpp"
#include "tractoform/spectral_embedding.hpp"
#include "tractoform/synth.hpp"
#include "tractoform/tracto_image.hpp"

namespace tractoform::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Input problem detected before any computation; maps to exit code 2.
class UsageError : public Error {
public:
    using Error::Error;
};

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read input '" + path + "'");
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest, &len);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return hex.str();
}

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path)) throw UsageError("input file '" + path + "' does not exist");
}

std::string numbered(const std::string& prefix, std::size_t i, std::size_t total, const std::string& ext) {
    const auto width = std::max<std::size_t>(3, std::to_string(total > 0 ? total - 1 : 0).size());
    std::ostringstream name;
    name << prefix << std::setw(static_cast<int>(width)) << std::setfill('0') << i << ext;
    return name.str();
}

/// Collects what a run read and wrote, then writes run.json and config.ini.
class RunRecord {
public:
    RunRecord(std::string command, std::string out_dir) : command_(std::move(command)), out_dir_(std::move(out_dir)) {
        fs::create_directories(out_dir_);
    }

    std::string path(const std::string& name) const { return (fs::path(out_dir_) / name).string(); }
    void input(const std::string& p) { inputs_[p] = sha256_file(p); }
    void output(const std::string& name) { outputs_.push_back(name); }
    json& params() { return params_; }
    json& seeds() { return seeds_; }

    void finish(const CLI::App& app) {
        {
            std::ofstream cfg(path("config.ini"));
            // section per subcommand so `--config config.ini <command>` replays the run
            cfg << '[' << app.get_name() << "]\n" << app.config_to_str(true, false);
            if (!cfg) throw Error("cannot write config.ini");
        }
        json doc;
        doc["command"] = command_;
        doc["parameters"] = params_;
        doc["seeds"] = seeds_;
        doc["inputs"] = inputs_;
        std::sort(outputs_.begin(), outputs_.end());
        doc["outputs"] = outputs_;
        std::ofstream out(path("run.json"));
        out << doc.dump(2) << '\n';
        if (!out) throw Error("cannot write run.json");
    }

private:
    std::string command_;
    std::string out_dir_;
    json params_ = json::object();
    json seeds_ = json::object();
    std::map<std::string, std::string> inputs_;
    std::vector<std::string> outputs_;
};

void write_image_files(RunRecord& run, const std::string& stem, const TractoImage& image, bool pgm) {
    write_tfim(run.path(stem + ".tfim"), image);
    run.output(stem + ".tfim");
    if (image.fiber_pixel_map.channels()) {
        write_tfpm(run.path(stem + ".tfpm"), image.fiber_pixel_map);
        run.output(stem + ".tfpm");
    }
    if (pgm)
        for (std::size_t c = 0; c < image.channels.size(); ++c) {
            const auto name = image.channels.size() == kChannelCount
                                  ? stem + "_" + std::string(to_string(static_cast<Hemisphere>(c))) + ".pgm"
                                  : stem + (image.channels.size() > 1 ? "_" + std::to_string(c) : "") + ".pgm";
            write_pgm(run.path(name), image.channels[c]);
            run.output(name);
        }
}

Hemisphere parse_channel(const std::string& name) {
    if (name == "left") return Hemisphere::Left;
    if (name == "right") return Hemisphere::Right;
    if (name == "commissural") return Hemisphere::Commissural;
    throw UsageError("unknown channel '" + name + "' (expected left, right or commissural)");
}

// ---------------------------------------------------------------- space

struct SpaceArgs {
    std::vector<std::string> inputs;
    std::size_t landmarks = kDefaultLandmarkCount;
    double sigma = kDefaultSigma;
    std::size_t k = kDefaultEigenpairs;
    std::size_t points = kDefaultPointCount;
    std::uint64_t seed = 0;
    std::string out_dir;
    bool export_affinity = false;
};

void cmd_space(const SpaceArgs& a, const CLI::App& app) {
    for (const auto& p : a.inputs) require_file(p);
    RunRecord run("space", a.out_dir);

    std::vector<Streamline> pool;
    for (const auto& p : a.inputs) {
        run.input(p);
        const auto bundle = read_bundle(p).resampled(a.points);
        for (const auto& s : bundle.streamlines()) pool.push_back(s.with_id(static_cast<FiberId>(pool.size())));
    }
    const FiberBundle all(std::move(pool));

    const auto landmark_seed = derive_seed(a.seed, "landmarks");
    Rng rng(landmark_seed);
    const auto rows = sample_without_replacement(all.size(), std::min(a.landmarks, all.size()), rng);
    const auto space = build_space(all.subset(rows), a.sigma, a.k);

    save_space(run.path("space.tfes"), space);
    run.output("space.tfes");
    if (a.export_affinity) {
        write_matrix(run.path("affinity.f64"), pairwise(space.landmarks, a.sigma).values, a.sigma);
        run.output("affinity.f64");
        run.output("affinity.f64.json");
    }

    run.params() = {{"inputs", a.inputs},  {"landmarks", rows.size()}, {"sigma", a.sigma},
                    {"k", a.k},            {"points", a.points},       {"out_dir", a.out_dir},
                    {"export_affinity", a.export_affinity}};
    run.seeds() = {{"master", a.seed}, {"landmarks", landmark_seed}};
    run.finish(app);
    std::cout << "space: " << space.landmark_count() << " landmarks, eigenvalues";
    for (Eigen::Index j = 0; j < space.eigenvalues.size(); ++j) std::cout << ' ' << space.eigenvalues[j];
    std::cout << '\n';
}

// ---------------------------------------------------------------- image / augment

struct ImageArgs {
    std::string bundle;
    std::string space;
    std::size_t resolution = kDefaultResolution;
    std::string feature = std::string(FiberFeatures::kMeanFa);
    std::string stat = "mean";
    double tau = kDefaultHemisphereTolerance;
    std::string scaling = "rw";
    std::string out_dir;
    bool pgm = false;
    bool mpfd = false;
    // augment only
    double fraction = kDefaultAugmentFraction;
    std::size_t count = kDefaultAugmentCount;
    std::uint64_t seed = 0;
};

ImageOptions image_options(const ImageArgs& a) {
    ImageOptions o;
    o.resolution = a.resolution;
    o.feature = a.feature;
    o.stat = parse_stat(a.stat);
    o.hemisphere_tolerance = a.tau;
    o.scaling = parse_coord_scaling(a.scaling);
    return o;
}

json image_params(const ImageArgs& a) {
    return {{"bundle", a.bundle}, {"space", a.space}, {"resolution", a.resolution}, {"feature", a.feature},
            {"stat", a.stat},     {"tau", a.tau},     {"coord_scaling", a.scaling}, {"out_dir", a.out_dir},
            {"pgm", a.pgm}};
}

void cmd_image(const ImageArgs& a, const CLI::App& app) {
    require_file(a.bundle);
    require_file(a.space);
    const auto options = image_options(a);
    RunRecord run("image", a.out_dir);
    run.input(a.bundle);
    run.input(a.space);

    const auto space = load_space(a.space);
    const auto bundle = read_bundle(a.bundle).resampled(space.point_count());
    const auto image = make_image(bundle, space, options);
    write_image_files(run, "image", image, a.pgm);

    if (a.mpfd) {
        const auto report = voxel_mpfd_report(image, bundle);
        json pixels = json::array();
        for (const auto& p : report.pixels)
            pixels.push_back({{"channel", to_string(static_cast<Hemisphere>(p.channel))},
                              {"row", p.pixel.row},
                              {"col", p.pixel.col},
                              {"fibers", p.fiber_count},
                              {"mpfd_mm", p.mpfd}});
        json doc{{"pixels", pixels}, {"global_mean_mm", report.global_mean ? json(*report.global_mean) : json(nullptr)}};
        std::ofstream(run.path("mpfd.json")) << doc.dump(2) << '\n';
        run.output("mpfd.json");
    }

    run.params() = image_params(a);
    run.params()["mpfd"] = a.mpfd;
    run.finish(app);
    std::cout << "image: " << bundle.size() << " fibers -> " << a.resolution << "x" << a.resolution << " x3\n";
}

void cmd_augment(const ImageArgs& a, const CLI::App& app) {
    require_file(a.bundle);
    require_file(a.space);
    const auto options = image_options(a);
    if (!(a.fraction > 0.0 && a.fraction <= 1.0)) throw UsageError("--fraction must be in (0, 1]");
    if (a.count < 1) throw UsageError("--count must be >= 1");
    RunRecord run("augment", a.out_dir);
    run.input(a.bundle);
    run.input(a.space);

    const auto space = load_space(a.space);
    const auto bundle = read_bundle(a.bundle).resampled(space.point_count());
    const auto images = augment(bundle, space, options, {a.fraction, a.count, a.seed});
    for (std::size_t i = 0; i < images.size(); ++i) write_image_files(run, numbered("aug_", i, images.size(), ""), images[i], a.pgm);

    run.params() = image_params(a);
    run.params()["fraction"] = a.fraction;
    run.params()["count"] = a.count;
    run.seeds() = {{"master", a.seed}, {"stream", "augment/<image index>"}};
    run.finish(app);
    std::cout << "augment: wrote " << images.size() << " images\n";
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::string geometry;
    std::size_t fibers_per_bundle = kDefaultFibersPerBundle;
    double jitter = kDefaultJitter;
    std::size_t subjects_per_group = kDefaultSubjectsPerGroup;
    double snr = kDefaultSnr;
    double decrease = kDefaultDecreaseFraction;
    std::string tract = "0";
    std::uint64_t seed = 0;
    std::string out_dir;
};

void cmd_synth(const SynthArgs& a, const CLI::App& app) {
    if (!a.geometry.empty()) require_file(a.geometry);
    const auto geometry = a.geometry.empty() ? default_geometry() : read_geometry_json(a.geometry);

    std::size_t tract = geometry.size();
    for (std::size_t b = 0; b < geometry.size(); ++b)
        if (geometry[b].name == a.tract) tract = b;
    if (tract == geometry.size()) {
        try {
            tract = std::stoul(a.tract);
        } catch (const std::exception&) {
            throw UsageError("--tract '" + a.tract + "' is neither a bundle name nor an index");
        }
        if (tract >= geometry.size()) throw UsageError("--tract index out of range");
    }

    RunRecord run("synth", a.out_dir);
    if (!a.geometry.empty()) run.input(a.geometry);
    const auto geometry_seed = derive_seed(a.seed, "geometry");
    const auto cohort_seed = derive_seed(a.seed, "cohort");
    const auto base = make_bundles(geometry, a.fibers_per_bundle, a.jitter, geometry_seed);
    const auto cohort = make_groups(base.bundle, base.members[tract], {a.snr, a.decrease, a.subjects_per_group, cohort_seed});
    const auto manifest = write_cohort(a.out_dir, base, cohort, geometry, geometry_seed, a.jitter);

    run.output("cohort.json");
    run.output(manifest.base_file);
    for (const auto& f : manifest.g1_files) run.output(f);
    for (const auto& f : manifest.g2_files) run.output(f);
    run.params() = {{"geometry", a.geometry.empty() ? json("default") : json(a.geometry)},
                    {"fibers_per_bundle", a.fibers_per_bundle},
                    {"jitter_mm", a.jitter},
                    {"subjects_per_group", a.subjects_per_group},
                    {"snr", std::isinf(a.snr) ? json("inf") : json(a.snr)},
                    {"decrease_fraction", a.decrease},
                    {"tract", geometry[tract].name},
                    {"out_dir", a.out_dir}};
    run.seeds() = {{"master", a.seed}, {"geometry", geometry_seed}, {"cohort", cohort_seed}};
    run.finish(app);
    std::cout << "synth: " << cohort.subjects.size() << " subjects, tract '" << geometry[tract].name << "' ("
              << cohort.ground_truth.size() << " fibers)\n";
}

// ---------------------------------------------------------------- interpret

struct InterpretArgs {
    std::vector<std::string> attention;
    std::string image;
    std::string bundle;
    std::string channel = "left";
    std::string order = "first-to-last";
    std::string out_dir;
    bool pgm = false;
};

void cmd_interpret(const InterpretArgs& a, const CLI::App& app) {
    for (const auto& p : a.attention) require_file(p);
    require_file(a.image);
    require_file(companion_map_path(a.image));
    require_file(a.bundle);
    const auto channel = static_cast<std::size_t>(parse_channel(a.channel));
    RolloutOrder order;
    if (a.order == "first-to-last")
        order = RolloutOrder::FirstToLast;
    else if (a.order == "last-to-first")
        order = RolloutOrder::LastToFirst;
    else
        throw UsageError("--order must be first-to-last or last-to-first");

    // every input is parsed and validated before anything is written
    std::vector<AttentionMap> maps;
    const auto image = read_image_with_map(a.image);
    for (const auto& p : a.attention) {
        const auto stack = read_tfat(p);
        if (stack.resolution() != image.resolution)
            throw UsageError("attention '" + p + "' is for resolution " + std::to_string(stack.resolution()) +
                             ", image is " + std::to_string(image.resolution));
        maps.push_back(upsample(rollout(stack, order), image.resolution));
    }
    const auto bundle = read_bundle(a.bundle);

    RunRecord run("interpret", a.out_dir);
    for (const auto& p : a.attention) run.input(p);
    run.input(a.image);
    run.input(companion_map_path(a.image));
    run.input(a.bundle);

    const auto map = groupwise_map(maps);
    const auto selection = threshold(map);
    const auto result = backproject(selection, image.fiber_pixel_map, channel, bundle);

    TractoImage out_map;
    out_map.resolution = image.resolution;
    out_map.feature = "attention";
    out_map.channels = {map};
    write_image_files(run, "attention_map", out_map, a.pgm);

    json pixels = json::array();
    for (const auto& p : result.pixels) pixels.push_back({p.row, p.col});
    json doc{{"channel", a.channel}, {"threshold", result.threshold}, {"pixels", pixels}, {"fiber_ids", result.fiber_ids}};
    std::ofstream(run.path("discriminative.json")) << doc.dump(2) << '\n';
    run.output("discriminative.json");
    {
        std::ofstream ids(run.path("fibers.txt"));
        for (auto id : result.fiber_ids) ids << id << '\n';
    }
    run.output("fibers.txt");

    run.params() = {{"attention", a.attention}, {"image", a.image},   {"bundle", a.bundle},
                    {"channel", a.channel},     {"order", a.order},   {"out_dir", a.out_dir}};
    run.finish(app);
    std::cout << "interpret: threshold " << result.threshold << ", " << result.pixels.size() << " pixels, "
              << result.fiber_ids.size() << " discriminative fibers\n";
}

// ---------------------------------------------------------------- diffmap

struct DiffmapArgs {
    std::vector<std::string> g1;
    std::vector<std::string> g2;
    std::string out_dir;
    bool pgm = false;
};

void cmd_diffmap(const DiffmapArgs& a, const CLI::App& app) {
    for (const auto& p : a.g1) require_file(p);
    for (const auto& p : a.g2) require_file(p);
    const auto load = [](const std::vector<std::string>& paths) {
        std::vector<TractoImage> images;
        for (const auto& p : paths)
            images.push_back(fs::is_regular_file(companion_map_path(p)) ? read_image_with_map(p) : read_tfim(p));
        return images;
    };
    const auto g1 = load(a.g1);
    const auto g2 = load(a.g2);
    const auto tmap = group_difference_map(g1, g2);

    RunRecord run("diffmap", a.out_dir);
    for (const auto& p : a.g1) run.input(p);
    for (const auto& p : a.g2) run.input(p);
    write_image_files(run, "tmap", tmap, a.pgm);
    run.params() = {{"g1", a.g1}, {"g2", a.g2}, {"out_dir", a.out_dir}, {"pgm", a.pgm}};
    run.finish(app);
    std::cout << "diffmap: " << g1.size() << " vs " << g2.size() << " images\n";
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Fiber-level tractography embedding images and attention back-projection", "tractoform"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read parameters from an INI/TOML config file");

    std::size_t threads = 0;
    app.add_option("--threads", threads, "Worker threads (default: TRACTOFORM_THREADS or all cores)")
        ->check(CLI::PositiveNumber);

    SpaceArgs space_args;
    auto* space = app.add_subcommand("space", "Build the groupwise embedding space from landmark fibers");
    space->add_option("-i,--input", space_args.inputs, "Bundle files (TFBD or JSON) to sample landmarks from")->required();
    space->add_option("--landmarks", space_args.landmarks, "Number of landmark fibers")->capture_default_str()
        ->check(CLI::PositiveNumber);
    space->add_option("--sigma", space_args.sigma, "Affinity kernel width (mm)")->capture_default_str()->check(CLI::PositiveNumber);
    space->add_option("-k,--eigenpairs", space_args.k, "Retained eigenpairs including the trivial one")->capture_default_str()
        ->check(CLI::Range(3, 1000));
    space->add_option("--points", space_args.points, "Points per resampled fiber")->capture_default_str()->check(CLI::Range(2, 10000));
    space->add_option("--seed", space_args.seed, "Master seed")->capture_default_str();
    space->add_option("-o,--out-dir", space_args.out_dir, "Output directory")->required();
    space->add_flag("--export-affinity", space_args.export_affinity, "Also write the landmark affinity matrix");

    ImageArgs image_args;
    auto add_image_options = [](CLI::App* sub, ImageArgs& a) {
        sub->add_option("-b,--bundle", a.bundle, "Subject bundle (TFBD or JSON)")->required();
        sub->add_option("-s,--space", a.space, "Embedding space (TFES)")->required();
        sub->add_option("-r,--resolution", a.resolution, "Image side length")->capture_default_str()->check(CLI::Range(2, 32768));
        sub->add_option("--feature", a.feature, "Per-fiber feature (mean_fa, mean_md)")->capture_default_str();
        sub->add_option("--stat", a.stat, "Aggregation: mean, max, min, count")->capture_default_str();
        sub->add_option("--tau", a.tau, "Hemisphere tolerance (mm)")->capture_default_str()->check(CLI::NonNegativeNumber);
        sub->add_option("--coord-scaling", a.scaling, "rw or lambda-rw")->capture_default_str();
        sub->add_option("-o,--out-dir", a.out_dir, "Output directory")->required();
        sub->add_flag("--pgm", a.pgm, "Also write 8-bit PGM previews");
    };
    auto* image = app.add_subcommand("image", "Make a 3-channel embedding image of one bundle");
    add_image_options(image, image_args);
    image->add_flag("--mpfd", image_args.mpfd, "Write the per-pixel mean pairwise fiber distance report");

    ImageArgs augment_args;
    auto* aug = app.add_subcommand("augment", "Make images from random fiber subsets");
    add_image_options(aug, augment_args);
    aug->add_option("--fraction", augment_args.fraction, "Fraction of fibers per sample")->capture_default_str();
    aug->add_option("--count", augment_args.count, "Number of images")->capture_default_str();
    aug->add_option("--seed", augment_args.seed, "Master seed")->capture_default_str();

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic two-group cohort");
    synth->add_option("--geometry", synth_args.geometry, "Bundle geometry JSON (default: built-in 5 bundles)");
    synth->add_option("--fibers-per-bundle", synth_args.fibers_per_bundle)->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--jitter", synth_args.jitter, "Fiber jitter (mm)")->capture_default_str()->check(CLI::NonNegativeNumber);
    synth->add_option("--subjects-per-group", synth_args.subjects_per_group)->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--snr", synth_args.snr, "Mean FA over noise std")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--decrease", synth_args.decrease, "Relative FA decrease of the tract in G2")->capture_default_str()
        ->check(CLI::Range(0.0, 0.999999));
    synth->add_option("--tract", synth_args.tract, "Modified bundle (name or index)")->capture_default_str();
    synth->add_option("--seed", synth_args.seed, "Master seed")->capture_default_str();
    synth->add_option("-o,--out-dir", synth_args.out_dir, "Output directory")->required();

    InterpretArgs interpret_args;
    auto* interpret = app.add_subcommand("interpret", "Attention rollout and discriminative fiber back-projection");
    interpret->add_option("-a,--attention", interpret_args.attention, "TFAT file(s); several are averaged group-wise")->required();
    interpret->add_option("-i,--image", interpret_args.image, "TFIM image (companion TFPM next to it)")->required();
    interpret->add_option("-b,--bundle", interpret_args.bundle, "Bundle the image was made from")->required();
    interpret->add_option("--channel", interpret_args.channel, "left, right or commissural")->capture_default_str();
    interpret->add_option("--order", interpret_args.order, "first-to-last or last-to-first")->capture_default_str();
    interpret->add_option("-o,--out-dir", interpret_args.out_dir, "Output directory")->required();
    interpret->add_flag("--pgm", interpret_args.pgm, "Also write a PGM of the attention map");

    DiffmapArgs diff_args;
    auto* diffmap = app.add_subcommand("diffmap", "Per-pixel Welch t map between two image groups");
    diffmap->add_option("--g1", diff_args.g1, "TFIM images of group 1")->required();
    diffmap->add_option("--g2", diff_args.g2, "TFIM images of group 2")->required();
    diffmap->add_option("-o,--out-dir", diff_args.out_dir, "Output directory")->required();
    diffmap->add_flag("--pgm", diff_args.pgm, "Also write PGM previews");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (threads > 0) set_thread_count(threads);
        if (space->parsed()) cmd_space(space_args, *space);
        if (image->parsed()) cmd_image(image_args, *image);
        if (aug->parsed()) cmd_augment(augment_args, *aug);
        if (synth->parsed()) cmd_synth(synth_args, *synth);
        if (interpret->parsed()) cmd_interpret(interpret_args, *interpret);
        if (diffmap->parsed()) cmd_diffmap(diff_args, *diffmap);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitOk;
}

}  // namespace tractoform::cli
