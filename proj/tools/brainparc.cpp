#include "brainparc/data_model.hpp"
#include "brainparc/error.hpp"
#include "brainparc/group.hpp"
#include "brainparc/metrics.hpp"
#include "brainparc/pipeline.hpp"
#include "brainparc/profiles.hpp"
#include "brainparc/rng.hpp"
#include "brainparc/spatial_graph.hpp"
#include "brainparc/synth.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace brainparc;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

// Prefixes errors raised while reading `path` with the path itself.
template <class F>
auto with_path(const fs::path& path, F&& read) {
    try {
        return read();
    } catch (const InputError& e) {
        const std::string what = e.what();
        if (what.find(path.string()) != std::string::npos) throw;
        throw InputError(path.string() + ": " + what);
    }
}

BrainMask load_mask(const fs::path& p) {
    return with_path(p, [&] { return read_mask(p); });
}
SparseConnectivity load_conn(const fs::path& p, const BrainMask& mask) {
    return with_path(p, [&] { return read_connectivity(p, mask); });
}
Parcellation load_parc(const fs::path& p) {
    return with_path(p, [&] { return read_parcellation(p); });
}
Parcellation load_parc(const fs::path& p, const BrainMask& mask) {
    return with_path(p, [&] { return read_parcellation(p, mask); });
}
Connectome load_connectome(const fs::path& p) {
    return with_path(p, [&] { return read_connectome(p); });
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw InputError("cannot write " + p.string());
    return out;
}

// Writes to `path`, or to standard output when it is empty.
void emit(const std::string& path, const std::function<void(std::ostream&)>& write) {
    if (path.empty()) {
        write(std::cout);
        return;
    }
    auto out = open_out(path);
    write(out);
}

Dims parse_dims(const std::string& s) {
    Dims d{0, 0, 0};
    char x1 = 0, x2 = 0;
    std::istringstream in(s);
    if (!(in >> d[0] >> x1 >> d[1] >> x2 >> d[2]) || x1 != 'x' || x2 != 'x' || !in.eof()) {
        throw InputError("dims must look like NXxNYxNZ, got '" + s + "'");
    }
    return d;
}

SimilarityMeasure parse_measure(const std::string& s) {
    if (s == "correlation") return SimilarityMeasure::correlation;
    if (s == "cosine") return SimilarityMeasure::cosine;
    throw InputError("unknown measure '" + s + "'");
}

Metric parse_metric(const std::string& s) {
    if (s == "nmi") return Metric::nmi;
    if (s == "dice") return Metric::dice;
    throw InputError("unknown metric '" + s + "'");
}

int parse_int(const std::string& s, const std::string& what) {
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw InputError(what + " must be an integer, got '" + s + "'");
    return v;
}

Segmentation make_init(const std::string& mode, const BrainMask& mask, const PipelineParams& params) {
    const auto colon = mode.find(':');
    const std::string kind = mode.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : mode.substr(colon + 1);
    if (kind == "file" && !arg.empty()) return load_parc(arg, mask);
    if (kind == "random" && !arg.empty()) {
        return random_spatial_segmentation(mask, parse_int(arg, "random init region count"),
                                           derive_seed(params.seed, 0x1a17));
    }
    if (kind == "grid" && !arg.empty()) return grid_segmentation(mask, parse_int(arg, "grid cube size"));
    if (kind == "synthetic" && arg.empty()) return synthetic_segmentation(mask, params.k, params);
    throw InputError("init must be file:<path>, random:<m>, grid:<cube> or synthetic; got '" + mode + "'");
}

struct PipelineFlags {
    int k = 40;
    int radius = 2;
    std::string measure = "correlation";
    int restarts = 10;
    double threshold = 0.95;
    int max_iter = 10;
    double eig_tol = 1e-8;

    void add(CLI::App* app) {
        app->add_option("--k", k, "Number of parcels")->capture_default_str();
        app->add_option("--radius", radius, "Spatial neighborhood radius")->capture_default_str();
        app->add_option("--measure", measure, "correlation | cosine")->capture_default_str();
        app->add_option("--restarts", restarts, "k-means restarts")->capture_default_str();
        app->add_option("--threshold", threshold, "Stop when consecutive NMI reaches this")->capture_default_str();
        app->add_option("--max-iter", max_iter, "Iteration cap")->capture_default_str();
        app->add_option("--eig-tol", eig_tol, "Eigensolver residual tolerance")->capture_default_str();
    }

    PipelineParams params(std::uint64_t seed) const {
        PipelineParams p;
        p.k = k;
        p.radius = radius;
        p.measure = parse_measure(measure);
        p.restarts = restarts;
        p.stop_threshold = threshold;
        p.max_iterations = max_iter;
        p.seed = seed;
        p.eigen.tol = eig_tol;
        p.validate();
        return p;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Connectivity-based brain parcellation and group analysis"};
    app.require_subcommand(1);
    app.fallthrough();
    int threads = 0;
    std::uint64_t seed = 0;
    app.add_option("--threads", threads, "Worker threads (0: runtime default)")->check(CLI::NonNegativeNumber);
    app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();

    std::function<void()> run;

    // parcellate
    auto* parcellate = app.add_subcommand("parcellate", "Iterative parcellation of one subject");
    std::string p_mask, p_conn, p_init = "grid:5", p_out = ".";
    PipelineFlags p_flags;
    parcellate->add_option("--mask", p_mask, "Mask file")->required();
    parcellate->add_option("--conn", p_conn, "Connectivity file")->required();
    parcellate->add_option("--init", p_init, "file:<path> | random:<m> | grid:<cube> | synthetic")
        ->capture_default_str();
    parcellate->add_option("--out", p_out, "Output directory")->capture_default_str();
    p_flags.add(parcellate);
    parcellate->callback([&] {
        run = [&] {
            const auto params = p_flags.params(seed);
            const auto mask = load_mask(p_mask);
            const auto conn = load_conn(p_conn, mask);
            const auto init = make_init(p_init, mask, params);
            const auto result = iterate_parcellation(conn, mask, init, params);
            fs::create_directories(p_out);
            write_parcellation(result.parcellation, fs::path(p_out) / "parcellation.parc");
            auto trace = open_out(fs::path(p_out) / "trace.tsv");
            write_trace(result.trace, trace);
            std::cerr << "iterations=" << result.trace.iterations.size()
                      << " converged=" << (result.trace.converged ? 1 : 0)
                      << " degenerate=" << (result.trace.degenerate ? 1 : 0) << '\n';
        };
    });

    // compare
    auto* compare = app.add_subcommand("compare", "NMI and Dice between two parcellations");
    std::string c_a, c_b;
    compare->add_option("a", c_a, "First parcellation")->required();
    compare->add_option("b", c_b, "Second parcellation")->required();
    compare->callback([&] {
        run = [&] {
            const auto a = load_parc(c_a);
            const auto b = load_parc(c_b);
            std::cout << "nmi=" << format_double(nmi(a, b)) << " dice=" << format_double(dice(a, b)) << '\n';
        };
    });

    // atlas
    auto* atlas = app.add_subcommand("atlas", "Majority-vote atlas and confidence map");
    std::vector<std::string> a_parcs;
    int a_reference = 0;
    std::string a_out = ".";
    atlas->add_option("parcellations", a_parcs, "Parcellation files")->required();
    atlas->add_option("--reference", a_reference, "1-based index of the reference (default: drawn from --seed)");
    atlas->add_option("--out", a_out, "Output directory")->capture_default_str();
    atlas->callback([&] {
        run = [&] {
            std::vector<Parcellation> parcs;
            for (const auto& p : a_parcs) parcs.push_back(load_parc(p));
            std::size_t ref = 0;
            if (a_reference != 0) {
                if (a_reference < 1 || static_cast<std::size_t>(a_reference) > parcs.size()) {
                    throw InputError("reference index must be in [1, " + std::to_string(parcs.size()) + "]");
                }
                ref = static_cast<std::size_t>(a_reference - 1);
            } else {
                std::mt19937_64 rng(derive_seed(seed, 0xa71a5));
                ref = std::uniform_int_distribution<std::size_t>(0, parcs.size() - 1)(rng);
            }
            std::vector<Parcellation> relabeled;
            std::size_t non_bijective = 0;
            for (const auto& p : parcs) {
                auto r = relabel_to_reference(p, parcs[ref]);
                non_bijective += r.degenerate ? 1 : 0;
                relabeled.push_back(std::move(r.parcellation));
            }
            const auto result = majority_atlas(relabeled);
            fs::create_directories(a_out);
            write_parcellation(result.labels, fs::path(a_out) / "atlas.parc");
            auto conf = open_out(fs::path(a_out) / "confidence.txt");
            write_confidence(result, conf);
            std::cerr << "reference=" << ref + 1 << " non_bijective=" << non_bijective << '\n';
        };
    });

    // connectome
    auto* connectome = app.add_subcommand("connectome", "Region-level connectome of one subject");
    std::string k_mask, k_conn, k_parc, k_out;
    connectome->add_option("--mask", k_mask, "Mask file")->required();
    connectome->add_option("--conn", k_conn, "Connectivity file")->required();
    connectome->add_option("--parc", k_parc, "Parcellation file")->required();
    connectome->add_option("--out", k_out, "Output file (default: standard output)");
    connectome->callback([&] {
        run = [&] {
            const auto mask = load_mask(k_mask);
            const auto conn = load_conn(k_conn, mask);
            const auto parc = load_parc(k_parc, mask);
            const auto c = build_connectome(conn, parc);
            emit(k_out, [&](std::ostream& out) { write_connectome(c, out); });
        };
    });

    // ttest
    auto* ttest = app.add_subcommand("ttest", "Similarity-based group comparison of parcellations");
    std::vector<std::string> t_a, t_b;
    std::string t_metric = "nmi";
    bool t_welch = false;
    ttest->add_option("--groupA", t_a, "Parcellations of group A")->required();
    ttest->add_option("--groupB", t_b, "Parcellations of group B")->required();
    ttest->add_option("--metric", t_metric, "nmi | dice")->capture_default_str();
    ttest->add_flag("--welch", t_welch, "Unequal-variance t-test");
    ttest->callback([&] {
        run = [&] {
            const auto metric = parse_metric(t_metric);
            std::vector<Parcellation> a, b;
            for (const auto& p : t_a) a.push_back(load_parc(p));
            for (const auto& p : t_b) b.push_back(load_parc(p));
            const auto r = similarity_group_test(a, b, metric, t_welch ? TTestKind::welch : TTestKind::pooled);
            write_group_test(r, std::cout);
        };
    });

    // edgetest
    auto* edgetest = app.add_subcommand("edgetest", "Edge-wise t-tests between connectome groups");
    std::vector<std::string> e_a, e_b;
    std::vector<double> e_thresholds{0.05, 0.00005};
    bool e_welch = false;
    std::string e_out;
    edgetest->add_option("--groupA", e_a, "Connectomes of group A")->required();
    edgetest->add_option("--groupB", e_b, "Connectomes of group B")->required();
    edgetest->add_option("--thresholds", e_thresholds, "Significance thresholds")->delimiter(',');
    edgetest->add_flag("--welch", e_welch, "Unequal-variance t-test");
    edgetest->add_option("--out", e_out, "Report file (default: standard output)");
    edgetest->callback([&] {
        run = [&] {
            std::vector<Connectome> a, b;
            for (const auto& p : e_a) a.push_back(load_connectome(p));
            for (const auto& p : e_b) b.push_back(load_connectome(p));
            const auto r = edgewise_ttests(a, b, e_thresholds, e_welch ? TTestKind::welch : TTestKind::pooled);
            emit(e_out, [&](std::ostream& out) { write_edgewise_report(r, out); });
        };
    });

    // classify
    auto* classify = app.add_subcommand("classify", "Cross-validated linear classifier on top connectome edges");
    std::vector<std::string> l_a, l_b;
    std::size_t l_edges = 3;
    int l_folds = 10;
    ClassifierParams l_params;
    classify->add_option("--groupA", l_a, "Connectomes of group A (label +1)")->required();
    classify->add_option("--groupB", l_b, "Connectomes of group B (label -1)")->required();
    classify->add_option("--edges", l_edges, "Number of most discriminative edges")->capture_default_str();
    classify->add_option("--folds", l_folds, "Cross-validation folds")->capture_default_str();
    classify->add_option("--c", l_params.c, "Hinge-loss weight")->capture_default_str();
    classify->add_option("--epochs", l_params.epochs, "Training epochs")->capture_default_str();
    classify->callback([&] {
        run = [&] {
            std::vector<Connectome> a, b;
            for (const auto& p : l_a) a.push_back(load_connectome(p));
            for (const auto& p : l_b) b.push_back(load_connectome(p));
            const auto tests = edgewise_ttests(a, b);
            const auto edges = select_top_edges(tests.p, l_edges);
            std::vector<Connectome> all = a;
            all.insert(all.end(), b.begin(), b.end());
            std::vector<int> labels(a.size(), 1);
            labels.insert(labels.end(), b.size(), -1);
            const auto features = edge_features(all, edges);
            const double acc = cross_validate(features, labels, l_folds, seed, l_params);
            std::cout << "edges=";
            for (std::size_t e = 0; e < edges.size(); ++e) {
                std::cout << (e ? "," : "") << edges[e].first + 1 << '-' << edges[e].second + 1;
            }
            std::cout << " accuracy=" << format_double(acc) << '\n';
        };
    });

    // synth
    auto* synth = app.add_subcommand("synth", "Synthetic subject with a planted parcellation");
    std::string s_dims = "20x20x10", s_out = ".";
    SynthSpec s_spec;
    bool s_binary = false;
    double s_flip = 0.0;
    synth->add_option("--dims", s_dims, "Grid size NXxNYxNZ")->capture_default_str();
    synth->add_option("--k", s_spec.k_true, "Planted region count")->capture_default_str();
    synth->add_option("--mu-in", s_spec.mu_in, "Strength between matching signatures")->capture_default_str();
    synth->add_option("--mu-out", s_spec.mu_out, "Strength otherwise")->capture_default_str();
    synth->add_option("--sigma", s_spec.sigma, "Noise standard deviation")->capture_default_str();
    synth->add_option("--density", s_spec.density, "Probability that a pair is connected")->capture_default_str();
    synth->add_option("--perturb", s_flip, "Also write truth with this fraction of labels flipped")
        ->capture_default_str();
    synth->add_flag("--binary", s_binary, "Write connectivity in the binary format");
    synth->add_option("--out", s_out, "Output directory")->capture_default_str();
    synth->callback([&] {
        run = [&] {
            s_spec.dims = parse_dims(s_dims);
            s_spec.seed = seed;
            s_spec.validate();
            const auto inst = generate(s_spec);
            const fs::path dir(s_out);
            fs::create_directories(dir);
            write_mask(inst.mask, dir / "mask.txt");
            if (s_binary) {
                write_connectivity_binary(inst.conn, dir / "conn.bin");
            } else {
                write_connectivity(inst.conn, dir / "conn.txt");
            }
            write_parcellation(inst.truth, dir / "truth.parc");
            if (s_flip > 0.0) {
                write_parcellation(perturb_parcellation(inst.truth, s_flip, derive_seed(seed, 0xf11b)),
                                   dir / "perturbed.parc");
            }
            std::cerr << "voxels=" << inst.mask.size() << " entries=" << inst.conn.nnz() << '\n';
        };
    });

    // graph-dump
    auto* dump = app.add_subcommand("graph-dump", "Weighted spatial similarity graph for a segmentation");
    std::string g_mask, g_conn, g_seg, g_out, g_measure = "correlation";
    int g_radius = 2;
    dump->add_option("--mask", g_mask, "Mask file")->required();
    dump->add_option("--conn", g_conn, "Connectivity file (omit for unit weights)");
    dump->add_option("--seg", g_seg, "Segmentation defining the profiles");
    dump->add_option("--radius", g_radius, "Spatial neighborhood radius")->capture_default_str();
    dump->add_option("--measure", g_measure, "correlation | cosine")->capture_default_str();
    dump->add_option("--out", g_out, "Output file (default: standard output)");
    dump->callback([&] {
        run = [&] {
            const auto measure = parse_measure(g_measure);
            if (g_conn.empty() != g_seg.empty()) throw InputError("--conn and --seg must be given together");
            const auto mask = load_mask(g_mask);
            const auto edges = build_spatial_edges(mask, g_radius);
            SimilarityGraph graph;
            if (g_conn.empty()) {
                graph = unit_weights(edges);
            } else {
                const auto conn = load_conn(g_conn, mask);
                const auto seg = load_parc(g_seg, mask);
                graph = weight_edges(edges, aggregate_profiles(conn, seg), measure);
            }
            emit(g_out, [&](std::ostream& out) { write_similarity_graph(graph, out); });
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (threads > 0) omp_set_num_threads(threads);
    try {
        run();
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
