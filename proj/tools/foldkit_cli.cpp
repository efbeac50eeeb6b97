// foldkit command-line tool.
//
//   foldkit compress --input manifest.json --out DIR --ratio 0.5 --method fold
//   foldkit sweep    --input manifest.json --out DIR [--exact]
//   foldkit verify   --input manifest.json [--exact]
//   foldkit demo     [--dims 16,32,16,8] [--k 8]
//
// Exit codes: 0 success, 1 a verified property failed, 2 usage or input error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <foldkit/foldkit.hpp>

namespace {

using namespace foldkit;

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailed = 1;
constexpr int kExitUsage = 2;

struct RunConfig {
    std::string input;
    std::string out;
    double ratio = 0.5;
    std::string method = "fold";
    std::string criterion = "l2";
    std::uint64_t seed = 0;
    bool exact = false;
    std::size_t restarts = 1;
    std::size_t max_sweeps = kDefaultMaxSweeps;
    std::string rank_mode = "matched";
    // verify
    double tolerance = kChainRelTol;
    // demo
    std::string dims = "16,32,16,8";
    std::size_t k = 0;
    std::string net;
    std::size_t lipschitz_trials = 10000;
};

void validate(const RunConfig& cfg) {
    if (!(cfg.ratio > 0.0 && cfg.ratio <= 1.0)) {
        throw Error(ErrorKind::invalid_config, "--ratio must lie in (0, 1]");
    }
    if (cfg.restarts < 1) throw Error(ErrorKind::invalid_config, "--restarts must be >= 1");
    if (cfg.max_sweeps < 1) throw Error(ErrorKind::invalid_config, "--max-sweeps must be >= 1");
    parse_method(cfg.method);
    parse_criterion(cfg.criterion);
    parse_rank_mode(cfg.rank_mode);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string safe_file_stem(const std::string& name) {
    std::string out;
    for (char c : name) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        out += ok ? c : '_';
    }
    return out;
}

int cmd_compress(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    CompressionConfig cc;
    cc.ratio = cfg.ratio;
    cc.method = parse_method(cfg.method);
    cc.criterion = parse_criterion(cfg.criterion);
    cc.seed = cfg.seed;
    cc.exact = cfg.exact;
    cc.restarts = cfg.restarts;
    cc.max_sweeps = cfg.max_sweeps;
    cc.rank_mode = parse_rank_mode(cfg.rank_mode);

    const Checkpoint ckpt = load_checkpoint(cfg.input);
    const CompressionResult result = compress_checkpoint(ckpt, cc);
    const auto manifest_path = save_checkpoint(result.checkpoint, cfg.out);
    atomic_write_file(fs::path(cfg.out) / "metadata.json", metadata_json(result, cc));

    std::printf("%-24s %8s %8s %24s %24s\n", "layer", "m", "k", "error_sq", "rel_error_sq");
    for (const auto& r : result.per_layer) {
        const auto idx = *ckpt.manifest.index_of(r.name);
        const double norm_sq = frobenius_sq(ckpt.weights[idx]);
        std::printf("%-24s %8zu %8zu %24.17g %24.17g\n", r.name.c_str(), r.m, r.k, r.error_sq,
                    norm_sq > 0.0 ? r.error_sq / norm_sq : 0.0);
    }
    std::printf("wrote %s (%s, ratio %.6g, %s) in %.3fs\n", manifest_path.string().c_str(),
                to_string(cc.method), cc.ratio, to_string(cc.rank_mode), seconds_since(t0));
    return kExitOk;
}

int cmd_sweep(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto crit = parse_criterion(cfg.criterion);
    const FoldOptions fold{cfg.seed, cfg.exact, cfg.max_sweeps, cfg.restarts};
    const Checkpoint ckpt = load_checkpoint(cfg.input);
    if (cfg.exact) {
        for (const auto& w : ckpt.weights) {
            if (w.rows() > kExactMaxRows) {
                throw Error(ErrorKind::instance_too_large,
                            "--exact needs every layer to have m <= " + std::to_string(kExactMaxRows));
            }
        }
    }
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) throw Error(ErrorKind::write_failure, "cannot create " + cfg.out);

    bool all_ok = true;
    for (std::size_t i = 0; i < ckpt.weights.size(); ++i) {
        const auto& name = ckpt.manifest.layers[i].name;
        const auto report = sweep_report(ckpt.weights[i], crit, fold, name);
        const fs::path path = fs::path(cfg.out) / (safe_file_stem(name) + ".sweep.csv");
        atomic_write_file(path, to_csv(report));
        std::size_t failed = 0;
        for (const auto& row : report.rows) failed += row.chain_ok ? 0 : 1;
        all_ok = all_ok && failed == 0;
        std::printf("%-24s m=%-6zu ranks=%-6zu chain_failures=%zu -> %s\n", name.c_str(),
                    ckpt.weights[i].rows(), report.rows.size(), failed, path.string().c_str());
    }
    std::printf("sweep finished in %.3fs\n", seconds_since(t0));
    return all_ok ? kExitOk : kExitPropertyFailed;
}

int cmd_verify(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto crit = parse_criterion(cfg.criterion);
    const Checkpoint ckpt = load_checkpoint(cfg.input);
    VerifyOptions opt;
    opt.exact = cfg.exact;
    opt.seed = cfg.seed;
    opt.max_sweeps = cfg.max_sweeps;
    opt.rel_tol = cfg.tolerance;
    if (cfg.exact) {
        for (std::size_t i = 0; i < ckpt.weights.size(); ++i) {
            if (ckpt.weights[i].rows() > kExactMaxRows) {
                throw Error(ErrorKind::instance_too_large,
                            "layer '" + ckpt.manifest.layers[i].name + "' has m=" +
                                std::to_string(ckpt.weights[i].rows()) + " > " +
                                std::to_string(kExactMaxRows) + " rows; drop --exact");
            }
        }
    }

    std::size_t checked = 0;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < ckpt.weights.size(); ++i) {
        const auto& name = ckpt.manifest.layers[i].name;
        const auto verdicts = verify_theorems(ckpt.weights[i], crit, opt);
        std::size_t layer_failed = 0;
        for (const auto& v : verdicts) {
            ++checked;
            if (!v.ok()) {
                ++layer_failed;
                std::printf("%s\n", describe_violation(name, v).c_str());
            }
        }
        failed += layer_failed;
        std::printf("%-24s m=%-6zu ranks=%-6zu %s\n", name.c_str(), ckpt.weights[i].rows(),
                    verdicts.size(), layer_failed == 0 ? "ok" : "FAILED");
    }
    std::printf("%zu/%zu verdicts passed (%s, %s) in %.3fs\n", checked - failed, checked,
                cfg.exact ? "exact k-means" : "Hartigan warm start", to_string(crit),
                seconds_since(t0));
    return failed == 0 ? kExitOk : kExitPropertyFailed;
}

std::vector<std::size_t> parse_dims(const std::string& text) {
    std::vector<std::size_t> dims;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos) {
            throw Error(ErrorKind::invalid_config, "bad --dims entry '" + item + "'");
        }
        const auto d = std::stoull(item);
        if (d == 0 || d > 4096) throw Error(ErrorKind::invalid_config, "--dims entries must be in [1, 4096]");
        dims.push_back(d);
    }
    if (dims.size() < 3) {
        throw Error(ErrorKind::invalid_config, "--dims needs at least input,hidden,output");
    }
    return dims;
}

int cmd_demo(RunConfig cfg) {
    std::vector<std::size_t> dims;
    if (!cfg.net.empty()) {
        try {
            const auto doc = nlohmann::json::parse(read_file(cfg.net));
            std::string joined;
            for (const auto& d : doc.at("dims")) {
                joined += (joined.empty() ? "" : ",") + std::to_string(d.get<long long>());
            }
            cfg.dims = joined;
            if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::format, std::string("net spec: ") + e.what());
        }
    }
    dims = parse_dims(cfg.dims);
    const std::size_t hidden = dims[1];
    const std::size_t k = cfg.k == 0 ? std::max<std::size_t>(1, hidden / 2) : cfg.k;
    if (k > hidden) {
        throw Error(ErrorKind::invalid_config, "--k must be <= first hidden width " + std::to_string(hidden));
    }

    const ToyMLP net = random_mlp(dims, cfg.seed);
    Rng rng(cfg.seed ^ 0xD1B54A32D192ED03ull);
    constexpr std::size_t kBatch = 100;
    EvalBatch batch{random_uniform(kBatch, dims.front(), rng),
                    random_uniform(kBatch, dims.back(), rng)};

    const FoldOptions fold{cfg.seed, false, cfg.max_sweeps, cfg.restarts};
    const auto& w = net.layers[0];
    const auto assignment = optimal_fold_result(w, k, fold).assignment;
    const auto selection = magnitude_select(w, k, parse_criterion(cfg.criterion));
    const double fold_dev = fold_equivalence_check(net, 0, assignment, batch.inputs);
    const double prune_dev = prune_equivalence_check(net, 0, selection, batch.inputs);

    std::printf("toy net dims=%s seed=%llu, compressing layer 0 (%zu -> %zu units)\n",
                cfg.dims.c_str(), static_cast<unsigned long long>(cfg.seed), hidden, k);
    std::printf("fold merge equivalence:  max |dy| = %.3e\n", fold_dev);
    std::printf("prune drop equivalence:  max |dy| = %.3e\n", prune_dev);

    struct Entry {
        const char* label;
        CompressionSpec spec;
        std::size_t budget;
    };
    const auto crit = parse_criterion(cfg.criterion);
    const Entry entries[] = {
        {"mag1", {CompressionMethod::mag1, crit, fold}, k},
        {"mag2", {CompressionMethod::mag2, crit, fold}, k},
        {"singleton-fold", {CompressionMethod::singleton_fold, crit, fold}, k - 1},
        {"fold", {CompressionMethod::fold, crit, fold}, k},
    };
    std::printf("%-16s %14s %14s %14s\n", "method", "||dW||_F", "|dL|", "|dL|/||dW||");
    double fold_dist = 0.0;
    for (const auto& e : entries) {
        const auto lp = loss_perturbation(net, 0, e.spec, e.budget, batch);
        if (e.spec.method == CompressionMethod::fold) fold_dist = lp.param_dist;
        std::printf("%-16s %14.6e %14.6e %14.6e\n", e.label, lp.param_dist, lp.loss_delta,
                    lp.param_dist > 0.0 ? lp.loss_delta / lp.param_dist : 0.0);
    }
    const double kappa = estimate_local_lipschitz(net, 0, batch, fold_dist, cfg.lipschitz_trials,
                                                  cfg.seed + 1);
    std::printf("local Lipschitz estimate at radius %.4g over %zu directions: %.6e\n", fold_dist,
                cfg.lipschitz_trials, kappa);

    const bool ok = fold_dev <= 1e-9 && prune_dev <= 1e-9;
    std::printf("%s\n", ok ? "equivalence holds" : "EQUIVALENCE BREACH");
    return ok ? kExitOk : kExitPropertyFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"foldkit: calibration-free structured pruning and model folding"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", cfg.seed, "Random seed");
        sub->add_option("--max-sweeps", cfg.max_sweeps, "Hartigan sweep cap");
        sub->add_option("--restarts", cfg.restarts, "Seeded k-means restarts (best wcss wins)");
        sub->add_option("--criterion", cfg.criterion, "Magnitude criterion {l1,l2}");
    };

    auto* compress = app.add_subcommand("compress", "Compress every layer that feeds a successor");
    compress->add_option("--input", cfg.input, "Input manifest")->required();
    compress->add_option("--out", cfg.out, "Output directory")->required();
    compress->add_option("--ratio", cfg.ratio, "Fraction of rows kept per layer, in (0, 1]");
    compress->add_option("--method", cfg.method, "{mag1,mag2,fold,singleton-fold}");
    compress->add_flag("--exact", cfg.exact, "Exact k-means (m <= 12)");
    compress->add_option("--rank-mode", cfg.rank_mode, "{matched,theorem-slack}");
    add_common(compress);

    auto* sweep = app.add_subcommand("sweep", "Per-rank error report, one CSV per layer");
    sweep->add_option("--input", cfg.input, "Input manifest")->required();
    sweep->add_option("--out", cfg.out, "Output directory")->required();
    sweep->add_flag("--exact", cfg.exact, "Exact k-means (m <= 12)");
    add_common(sweep);

    auto* verify = app.add_subcommand("verify", "Check prune >= singleton fold >= k-means fold");
    verify->add_option("--input", cfg.input, "Input manifest")->required();
    verify->add_flag("--exact", cfg.exact, "Exact k-means (m <= 12)");
    verify->add_option("--tolerance", cfg.tolerance,
                       "Relative slack per link; negative values demand a strict margin");
    add_common(verify);

    auto* demo = app.add_subcommand("demo", "Toy network equivalence and loss-perturbation demo");
    demo->add_option("--dims", cfg.dims, "Comma-separated widths: input,hidden,...,output");
    demo->add_option("--k", cfg.k, "Units kept in the first hidden layer (default: half)");
    demo->add_option("--net", cfg.net, "JSON net spec {\"dims\":[...],\"seed\":int}");
    demo->add_option("--lipschitz-trials", cfg.lipschitz_trials, "Random directions for the estimate");
    add_common(demo);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        validate(cfg);
        if (*compress) return cmd_compress(cfg);
        if (*sweep) return cmd_sweep(cfg);
        if (*verify) return cmd_verify(cfg);
        if (*demo) return cmd_demo(cfg);
    } catch (const Error& e) {
        std::cerr << "foldkit: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "foldkit: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
